"""Sum-of-squares tightenings of the time-dependent barrier program.

Two builders lower the barrier conditions

    v(0, x) >= 1 on X0,   v(T, x) <= 0 on X1,   Lie v >= 0 on [0, T] x X x U

to block SDPs through truncated quadratic modules.  ``build_disconnect_full``
keeps the control variables; ``build_disconnect_box`` (box control only)
replaces the Lie condition by ``dv/dt - sum_i (zeta+_i + zeta-_i)`` with
nonnegative multipliers satisfying ``zeta+_i - zeta-_i = dv/dx_i``, so every
Gram matrix lives over ``(t, x)`` only.

A margin ``lam`` in ``[0, 1]`` is subtracted from every target and maximised.

Relaxation order ``k`` means ``v`` has degree ``2k``.  Multiplier degrees follow
one of two rules:

``balanced`` (default)
    sigma_0 has basis degree k, sigma_i basis degree ``k - ceil(deg g_i / 2)``,
    equality multipliers degree ``2k - deg h_j``; a constraint whose degree
    exceeds ``2k`` gets no multiplier.  Every term stays within degree 2k, which
    makes the moment relaxation of the same order the exact conic dual.
``uniform``
    every Gram has basis degree k and equality multipliers degree 2k, with
    coefficient matching up to ``2k + max deg``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .certificate import BarrierCertificate, ConstraintCertificate, GramTerm
from .poly import (
    Exps,
    MonomialBasis,
    Polynomial,
    add_exps,
    monomial_exponents,
    tx_space,
    txu_space,
    x_space,
)
from .sdp import SdpBuilder, SdpProblem, SdpSolution, Status, VarKey, psd_project
from .semialg import BasicSet, Control, ProblemInstance

CONST = None
MARGIN_THRESHOLD = 1e-6
RULES = ("balanced", "uniform")


class LinPoly:
    """Polynomial whose coefficients are affine in SDP variables.

    ``terms[exps][key]`` is the coefficient of variable ``key`` (``None`` for the
    constant part) in the coefficient of monomial ``exps``.
    """

    __slots__ = ("space", "terms")

    def __init__(self, space: Sequence[str], terms: dict | None = None):
        self.space = tuple(space)
        self.terms: dict[Exps, dict] = terms or {}

    @classmethod
    def unknown(cls, builder: SdpBuilder, space: Sequence[str], degree: int, label: str
                ) -> tuple["LinPoly", dict[Exps, VarKey]]:
        space = tuple(space)
        keys = {}
        for e in monomial_exponents(len(space), degree):
            keys[e] = builder.add_free(f"{label}[{','.join(map(str, e))}]")
        return cls(space, {e: {k: 1.0} for e, k in keys.items()}), keys

    @classmethod
    def from_poly(cls, p: Polynomial) -> "LinPoly":
        return cls(p.space, {e: {CONST: c} for e, c in p.terms.items()})

    @classmethod
    def variable(cls, space: Sequence[str], key: VarKey, coef: float = 1.0) -> "LinPoly":
        space = tuple(space)
        return cls(space, {(0,) * len(space): {key: coef}})

    def copy(self) -> "LinPoly":
        return LinPoly(self.space, {e: dict(c) for e, c in self.terms.items()})

    def degree(self) -> int:
        live = [sum(e) for e, c in self.terms.items() if any(v != 0.0 for v in c.values())]
        return max(live, default=0)

    def __add__(self, other: "LinPoly") -> "LinPoly":
        if other.space != self.space:
            raise ValueError(f"space mismatch {self.space} vs {other.space}")
        out = self.copy()
        for e, c in other.terms.items():
            tgt = out.terms.setdefault(e, {})
            for k, v in c.items():
                tgt[k] = tgt.get(k, 0.0) + v
        return out

    def scale(self, s: float) -> "LinPoly":
        return LinPoly(self.space, {e: {k: v * s for k, v in c.items()} for e, c in self.terms.items()})

    def __neg__(self) -> "LinPoly":
        return self.scale(-1.0)

    def __sub__(self, other: "LinPoly") -> "LinPoly":
        return self + (-other)

    def differentiate(self, var: str) -> "LinPoly":
        k = self.space.index(var)
        out: dict[Exps, dict] = {}
        for e, c in self.terms.items():
            if e[k]:
                ne = e[:k] + (e[k] - 1,) + e[k + 1:]
                out[ne] = {key: v * e[k] for key, v in c.items()}
        return LinPoly(self.space, out)

    def substitute(self, var: str, value: float) -> "LinPoly":
        k = self.space.index(var)
        space = self.space[:k] + self.space[k + 1:]
        out: dict[Exps, dict] = {}
        for e, c in self.terms.items():
            f = float(value) ** e[k]
            if f == 0.0:
                continue
            tgt = out.setdefault(e[:k] + e[k + 1:], {})
            for key, v in c.items():
                tgt[key] = tgt.get(key, 0.0) + v * f
        return LinPoly(space, out)

    def embed(self, space: Sequence[str]) -> "LinPoly":
        space = tuple(space)
        idx = [space.index(s) for s in self.space]
        out = {}
        for e, c in self.terms.items():
            ne = [0] * len(space)
            for k, p in zip(idx, e):
                ne[k] = p
            out[tuple(ne)] = dict(c)
        return LinPoly(space, out)

    def mul_poly(self, p: Polynomial) -> "LinPoly":
        if p.space != self.space:
            raise ValueError("space mismatch")
        out: dict[Exps, dict] = {}
        for e1, c in self.terms.items():
            for e2, a in p.terms.items():
                tgt = out.setdefault(add_exps(e1, e2), {})
                for key, v in c.items():
                    tgt[key] = tgt.get(key, 0.0) + v * a
        return LinPoly(self.space, out)


@dataclass
class ConstraintSet:
    """A basic semialgebraic set over an explicit space (time and controls included)."""

    space: tuple[str, ...]
    ineqs: tuple[Polynomial, ...]
    eqs: tuple[Polynomial, ...] = ()
    label: str = ""

    def __post_init__(self):
        for p in self.ineqs + self.eqs:
            if p.space != self.space:
                raise ValueError(f"constraint over {p.space} in set over {self.space}")


def basic_set_constraints(s: BasicSet, space: Sequence[str]) -> tuple[list[Polynomial], list[Polynomial]]:
    """Inequalities (declared + box) and equalities of ``s`` embedded into ``space``."""
    ineqs = [g.embed(space) for g in s.ineqs]
    pinned = s.pinned_point() is not None
    if not pinned:
        ineqs += [b.embed(space) for b in s.box_constraints()]
    eqs = [h.embed(space) for h in s.eqs]
    if pinned and not s.eqs:
        xs = x_space(s.n)
        eqs = [(Polynomial.variable(f"x{i + 1}", xs) - lo).embed(space) for i, (lo, _) in enumerate(s.box)]
    return ineqs, eqs


def time_constraint(space: Sequence[str], T: float) -> Polynomial:
    t = Polynomial.variable("t", space)
    return t * (T - t)


def control_constraints(control: Control, n: int, space: Sequence[str]) -> list[Polynomial]:
    us = [Polynomial.variable(f"u{i + 1}", space) for i in range(n)]
    box = [1.0 - u * u for u in us]
    if control == Control.BOX:
        return box
    ball = Polynomial.constant(space, 1.0)
    for u in us:
        ball = ball - u * u
    return [ball] + box


@dataclass
class WsosConstraint:
    label: str
    space: tuple[str, ...]
    target: LinPoly
    order: int
    grams: list[tuple[int, tuple[Exps, ...], Polynomial]] = field(default_factory=list)
    eq_mults: list[tuple[dict[Exps, VarKey], Polynomial]] = field(default_factory=list)
    n_rows: int = 0
    skipped: list[Polynomial] = field(default_factory=list)
    kind: str = ""
    component: int = 0
    channel: int | None = None
    sign: str | None = None


def _ceil_half(k: int) -> int:
    return (k + 1) // 2


def wsos(builder: SdpBuilder, target: LinPoly, cset: ConstraintSet, k: int,
         rule: str = "balanced", label: str = "") -> WsosConstraint:
    """Register ``target ∈ Σ_{2k}[cset]`` in ``builder``; returns the bookkeeping record."""
    if rule not in RULES:
        raise ValueError(f"unknown multiplier rule {rule!r}")
    if target.space != cset.space:
        raise ValueError(f"target over {target.space}, set over {cset.space}")
    if k < 0:
        raise ValueError("order must be nonnegative")
    if target.degree() > 2 * k:
        raise ValueError(f"order {k} too small for target of degree {target.degree()}")
    space = cset.space
    nv = len(space)
    rec = WsosConstraint(label, space, target, k)

    plan: list[tuple[Polynomial, int]] = [(Polynomial.constant(space, 1.0), k)]
    for g in cset.ineqs:
        dg = g.degree()
        kg = k - _ceil_half(dg) if rule == "balanced" else k
        if kg < 0:
            rec.skipped.append(g)
            continue
        plan.append((g, kg))
    eq_plan: list[tuple[Polynomial, int]] = []
    for h in cset.eqs:
        dh = h.degree()
        kh = 2 * k - dh if rule == "balanced" else 2 * k
        if kh < 0:
            rec.skipped.append(h)
            continue
        eq_plan.append((h, kh))

    # accumulate matching rows: target - sum(contributions) = 0
    rows: dict[Exps, dict] = {}
    for e, c in target.terms.items():
        rows[e] = dict(c)

    for idx, (g, kg) in enumerate(plan):
        mons = monomial_exponents(nv, kg)
        blk = builder.add_block(f"{label}/sigma{idx}", len(mons))
        rec.grams.append((blk, mons, g))
        gterms = list(g.terms.items())
        m = len(mons)
        for a in range(m):
            ea = mons[a]
            for b in range(a, m):
                base = add_exps(ea, mons[b])
                key = (blk, a, b)
                mult = 1.0 if a == b else 2.0
                for eg, cg in gterms:
                    e = add_exps(base, eg)
                    row = rows.setdefault(e, {})
                    row[key] = row.get(key, 0.0) - mult * cg
    for idx, (h, kh) in enumerate(eq_plan):
        keys = {}
        for em in monomial_exponents(nv, kh):
            keys[em] = builder.add_free(f"{label}/mu{idx}[{','.join(map(str, em))}]")
        rec.eq_mults.append((keys, h))
        hterms = list(h.terms.items())
        for em, key in keys.items():
            for eh, ch in hterms:
                e = add_exps(em, eh)
                row = rows.setdefault(e, {})
                row[key] = row.get(key, 0.0) - ch

    for e in sorted(rows):
        row = rows[e]
        const = row.pop(CONST, 0.0)
        builder.add_equality(row, -const)
    rec.n_rows = len(rows)
    return rec


@dataclass
class Decoder:
    """Maps SDP variables of a barrier program back to polynomials."""

    problem: ProblemInstance
    order: int
    builder: str
    rule: str
    v_keys: dict[Exps, VarKey]
    lam_key: VarKey | None
    constraints: list[WsosConstraint]
    zeta_keys: dict[tuple[int, int, str], dict[Exps, VarKey]] = field(default_factory=dict)

    def max_gram_side(self, sdp: SdpProblem) -> int:
        return max((n for _, n in sdp.blocks), default=0)


def _margin(builder: SdpBuilder, margin: bool) -> VarKey | None:
    if not margin:
        return None
    lam = builder.add_block("lambda", 1)
    slack = builder.add_block("lambda_slack", 1)
    builder.add_equality({(lam, 0, 0): 1.0, (slack, 0, 0): 1.0}, 1.0)
    builder.objective[(lam, 0, 0)] = 1.0
    return (lam, 0, 0)


def _minus_margin(p: LinPoly, lam: VarKey | None) -> LinPoly:
    if lam is None:
        return p
    return p - LinPoly.variable(p.space, lam)


def _endpoint_constraints(builder, problem, v, lam, k, rule) -> list[WsosConstraint]:
    xs = x_space(problem.n)
    out = []
    one = LinPoly.from_poly(Polynomial.constant(xs, 1.0))
    init = _minus_margin(v.substitute("t", 0.0) - one, lam)
    for j, comp in enumerate(problem.X0.components):
        ineqs, eqs = basic_set_constraints(comp, xs)
        rec = wsos(builder, init, ConstraintSet(xs, tuple(ineqs), tuple(eqs)), k, rule, f"init{j}")
        rec.kind, rec.component = "init", j
        out.append(rec)
    term = _minus_margin(-v.substitute("t", problem.T), lam)
    for j, comp in enumerate(problem.X1.components):
        ineqs, eqs = basic_set_constraints(comp, xs)
        rec = wsos(builder, term, ConstraintSet(xs, tuple(ineqs), tuple(eqs)), k, rule, f"term{j}")
        rec.kind, rec.component = "term", j
        out.append(rec)
    return out


def _check_order(d: int) -> None:
    if d < 1:
        raise ValueError("relaxation order must be at least 1")


def build_disconnect_full(problem: ProblemInstance, d: int, margin: bool = True,
                          rule: str = "balanced") -> tuple[SdpProblem, Decoder]:
    """Barrier program with the control variables kept (Gram matrices over (t, x, u))."""
    _check_order(d)
    n = problem.n
    tx, txu = tx_space(n), txu_space(n)
    b = SdpBuilder()
    v, v_keys = LinPoly.unknown(b, tx, 2 * d, "v")
    lam = _margin(b, margin)
    cons = _endpoint_constraints(b, problem, v, lam, d, rule)

    lie = v.differentiate("t").embed(txu)
    for i in range(n):
        u = Polynomial.variable(f"u{i + 1}", txu)
        lie = lie + v.differentiate(f"x{i + 1}").embed(txu).mul_poly(u)
    lie = _minus_margin(lie, lam)
    uc = control_constraints(problem.control, n, txu)
    for j, comp in enumerate(problem.X.components):
        ineqs, eqs = basic_set_constraints(comp, txu)
        cset = ConstraintSet(txu, tuple([time_constraint(txu, problem.T)] + ineqs + uc), tuple(eqs))
        rec = wsos(b, lie, cset, d, rule, f"lie{j}")
        rec.kind, rec.component = "lie", j
        cons.append(rec)
    return b.build(), Decoder(problem, d, "full", rule, v_keys, lam, cons)


def build_disconnect_box(problem: ProblemInstance, d: int, margin: bool = True,
                         rule: str = "balanced") -> tuple[SdpProblem, Decoder]:
    """Control-eliminated barrier program for box control (Gram matrices over (t, x))."""
    _check_order(d)
    if problem.control != Control.BOX:
        raise ValueError("box elimination needs box control; use build_disconnect_full for ball control")
    n = problem.n
    tx = tx_space(n)
    b = SdpBuilder()
    v, v_keys = LinPoly.unknown(b, tx, 2 * d, "v")
    lam = _margin(b, margin)
    cons = _endpoint_constraints(b, problem, v, lam, d, rule)
    zeta_keys = {}
    dt = v.differentiate("t")
    for j, comp in enumerate(problem.X.components):
        ineqs, eqs = basic_set_constraints(comp, tx)
        cset = ConstraintSet(tx, tuple([time_constraint(tx, problem.T)] + ineqs), tuple(eqs))
        lie = dt
        for i in range(n):
            zp, kp = LinPoly.unknown(b, tx, 2 * d, f"zeta+{j},{i}")
            zm, km = LinPoly.unknown(b, tx, 2 * d, f"zeta-{j},{i}")
            zeta_keys[(j, i, "+")] = kp
            zeta_keys[(j, i, "-")] = km
            ident = zp - zm - v.differentiate(f"x{i + 1}")
            for e in sorted(ident.terms):
                row = dict(ident.terms[e])
                const = row.pop(CONST, 0.0)
                b.add_equality(row, -const)
            for sign, z in (("+", zp), ("-", zm)):
                rec = wsos(b, z, cset, d, rule, f"zeta{sign}{j},{i}")
                rec.kind, rec.component, rec.channel, rec.sign = "zeta", j, i, sign
                cons.append(rec)
            lie = lie - zp - zm
        rec = wsos(b, _minus_margin(lie, lam), cset, d, rule, f"liebox{j}")
        rec.kind, rec.component = "lie_box", j
        cons.append(rec)
    return b.build(), Decoder(problem, d, "box", rule, v_keys, lam, cons, zeta_keys)


def max_gram_side(n: int, d: int, builder: str) -> int:
    """Side of the largest Gram block (the Lie constraint's sigma_0) without assembling anything."""
    from .poly import gram_size

    nvars = 2 * n + 1 if builder == "full" else n + 1
    return gram_size(nvars, d)


def build_disconnect(problem: ProblemInstance, d: int, builder: str | None = None, **kw):
    """Pick the box builder for box control unless ``builder='full'``."""
    if builder is None:
        builder = "box" if problem.control == Control.BOX else "full"
    if builder == "box":
        return build_disconnect_box(problem, d, **kw)
    if builder == "full":
        return build_disconnect_full(problem, d, **kw)
    raise ValueError(f"unknown builder {builder!r}")


def _poly_from_keys(sol: SdpSolution, space, keys: dict[Exps, VarKey]) -> Polynomial:
    return Polynomial(space, {e: sol.value(k) for e, k in keys.items()})


class ExtractionError(ValueError):
    pass


def extract_certificate(sol: SdpSolution, decoder: Decoder) -> BarrierCertificate:
    """Read ``v``, ``zeta`` and PSD-projected multipliers out of a feasible solution."""
    from .verify import algebraic_residual

    if sol.status != Status.FEASIBLE:
        raise ExtractionError(f"cannot extract a certificate from a {sol.status.value} solution")
    prob = decoder.problem
    n = prob.n
    tx = tx_space(n)
    v = _poly_from_keys(sol, tx, decoder.v_keys)
    lam = sol.value(decoder.lam_key) if decoder.lam_key is not None else 0.0
    zetas = {}
    for j in range(len(prob.X.components)):
        for i in range(n):
            if (j, i, "+") in decoder.zeta_keys:
                zetas[(j, i)] = (_poly_from_keys(sol, tx, decoder.zeta_keys[(j, i, "+")]),
                                 _poly_from_keys(sol, tx, decoder.zeta_keys[(j, i, "-")]))
    cons = []
    for rec in decoder.constraints:
        grams = []
        min_eig = math.inf
        for blk, mons, g in rec.grams:
            Q, w = psd_project(sol.block_values[blk])
            min_eig = min(min_eig, w)
            grams.append(GramTerm(tuple(mons), g, Q))
        eqm = [(_poly_from_keys(sol, rec.space, keys), h) for keys, h in rec.eq_mults]
        cons.append(ConstraintCertificate(rec.kind, rec.component, rec.space, grams, eqm,
                                          rec.channel, rec.sign, None, min_eig))
    cert = BarrierCertificate(
        v=v, n=n, T=prob.T, control=prob.control.value, builder=decoder.builder, order=decoder.order,
        margin=lam, fingerprint=prob.fingerprint(), problem_name=prob.name, zetas=zetas, constraints=cons,
        meta={"rule": decoder.rule, "solver": sol.meta, "sdp_residual": sol.residual, "sdp_min_eig": sol.min_eig},
    )
    for c in cert.constraints:
        c.residual = algebraic_residual(cert, c)
    return cert


@dataclass
class DisconnectResult:
    status: Status
    order: int
    margin: float | None
    certificate: BarrierCertificate | None
    solution: SdpSolution
    sdp: SdpProblem
    decoder: Decoder

    @property
    def certified(self) -> bool:
        return self.status == Status.FEASIBLE and self.margin is not None and self.margin >= MARGIN_THRESHOLD


def solve_disconnect(problem: ProblemInstance, d: int, builder: str | None = None, cfg=None,
                     backend=None, rule: str = "balanced") -> DisconnectResult:
    from .sdp import solve

    sdp, dec = build_disconnect(problem, d, builder, rule=rule)
    sol = solve(sdp, cfg, backend)
    cert = None
    lam = None
    if sol.status == Status.FEASIBLE:
        lam = sol.value(dec.lam_key) if dec.lam_key is not None else 0.0
        cert = extract_certificate(sol, dec)
    return DisconnectResult(sol.status, d, lam, cert, sol, sdp, dec)
