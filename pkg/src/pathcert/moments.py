"""Truncated moment relaxations of the connectedness measure programs.

A relaxation of order ``d`` carries, for every measure, the moments of degree
at most ``2d`` as free SDP variables.  They are tied to a PSD moment matrix
``M_d`` and to one localizing matrix ``M_{d - ceil(deg g / 2)}(g y)`` per
support inequality; support equalities become ``L(h x^a) = 0`` rows for
``|a| <= 2d - deg h``.  Liouville rows use every test monomial ``t^a x^b`` with
``a + |b| <= 2d`` and the initial masses sum to one.

Two variants are built:

full
    ``mu0^j`` on each X0 component, ``muT^j`` on each X1 component and an
    occupation measure ``mu^j`` on ``[0, T] x X^j x U`` over ``(t, x, u)``.
box split (box control only)
    ``mu^j`` lives on ``[0, T] x X^j`` over ``(t, x)`` and carries the control
    through measures ``sig+_i``, ``sig-_i`` and a slack ``sighat_i`` with
    ``mu = sig+_i + sig-_i + sighat_i`` moment by moment.  The transport term
    of coordinate ``i`` is ``L_{sig+_i - sig-_i}(d w / d x_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from .poly import Exps, Polynomial, add_exps, monomial_exponents, tx_space, txu_space, x_space
from .sdp import SdpBuilder, SdpProblem, SdpSolution, Status, VarKey
from .semialg import Control, ProblemInstance
from .sos import basic_set_constraints, control_constraints, time_constraint

MeasureId = tuple


def _ceil_half(k: int) -> int:
    return (k + 1) // 2


# numeric matrices


def moment_matrix(y: Mapping[Exps, float], d: int, nvars: int | None = None) -> np.ndarray:
    """``M[a, b] = y[a + b]`` over the graded-lex basis of degree ``d``."""
    if nvars is None:
        nvars = len(next(iter(y)))
    mons = monomial_exponents(nvars, d)
    m = len(mons)
    M = np.empty((m, m))
    for a in range(m):
        for b in range(a, m):
            e = add_exps(mons[a], mons[b])
            if e not in y:
                raise KeyError(f"moment {e} missing")
            M[a, b] = M[b, a] = y[e]
    return M


def localizing_matrix(y: Mapping[Exps, float], g: Polynomial, d: int) -> np.ndarray:
    """``M[a, b] = sum_c g_c y[a + b + c]``."""
    mons = monomial_exponents(g.nvars, d)
    m = len(mons)
    M = np.zeros((m, m))
    for a in range(m):
        for b in range(a, m):
            base = add_exps(mons[a], mons[b])
            s = 0.0
            for c, gc in g.terms.items():
                e = add_exps(base, c)
                if e not in y:
                    raise KeyError(f"moment {e} missing")
                s += gc * y[e]
            M[a, b] = M[b, a] = s
    return M


# measures inside an SDP


@dataclass
class Measure:
    ident: MeasureId
    space: tuple[str, ...]
    degree: int
    keys: dict[Exps, VarKey]
    blocks: list[tuple[int, Polynomial]] = field(default_factory=list)

    @property
    def label(self) -> str:
        return ":".join(str(p) for p in self.ident)


def _add_measure(b: SdpBuilder, ident: MeasureId, space: Sequence[str], ineqs: Sequence[Polynomial],
                 eqs: Sequence[Polynomial], d: int) -> Measure:
    space = tuple(space)
    nv = len(space)
    label = ":".join(str(p) for p in ident)
    keys = {e: b.add_free(f"{label}/y[{','.join(map(str, e))}]") for e in monomial_exponents(nv, 2 * d)}
    meas = Measure(ident, space, 2 * d, keys)
    one = Polynomial.constant(space, 1.0)
    for g in [one] + list(ineqs):
        kg = d - _ceil_half(g.degree())
        if kg < 0:
            continue
        mons = monomial_exponents(nv, kg)
        blk = b.add_block(f"{label}/loc{len(meas.blocks)}", len(mons))
        meas.blocks.append((blk, g))
        for i in range(len(mons)):
            for j in range(i, len(mons)):
                base = add_exps(mons[i], mons[j])
                row: dict[VarKey, float] = {(blk, i, j): 1.0}
                for c, gc in g.terms.items():
                    k = keys[add_exps(base, c)]
                    row[k] = row.get(k, 0.0) - gc
                b.add_equality(row, 0.0)
    for h in eqs:
        dh = h.degree()
        if dh > 2 * d:
            continue
        for a in monomial_exponents(nv, 2 * d - dh):
            row = {}
            for c, hc in h.terms.items():
                k = keys[add_exps(a, c)]
                row[k] = row.get(k, 0.0) + hc
            b.add_equality(row, 0.0)
    return meas


def pair(poly: Polynomial, ident: MeasureId) -> dict[tuple[MeasureId, Exps], float]:
    """The linear functional ``L_ident(poly)`` as symbolic moment coefficients."""
    return {(ident, e): c for e, c in poly.terms.items()}


def _acc(row: dict, items: Mapping, s: float = 1.0) -> None:
    for k, c in items.items():
        row[k] = row.get(k, 0.0) + s * c


def liouville_rows(problem: ProblemInstance, degree: int, box_split: bool = False
                   ) -> list[tuple[Exps, dict[tuple[MeasureId, Exps], float]]]:
    """One symbolic row per test monomial ``w = t^a x^b`` with ``a + |b| <= degree``.

    Each row reads ``sum_j L_muT^j(w(T, .)) - sum_j L_mu0^j(w(0, .)) - sum_j L_mu^j(Lie w) = 0``
    with the box-split transport term when ``box_split`` is set.  Measure ids are
    ``("mu0", j)``, ``("muT", j)``, ``("mu", j)``, ``("sig+", j, i)``, ``("sig-", j, i)``.
    """
    n = problem.n
    tx, txu = tx_space(n), txu_space(n)
    rows = []
    for w_e in monomial_exponents(n + 1, degree):
        w = Polynomial(tx, {w_e: 1.0})
        row: dict = {}
        wT = w.substitute("t", problem.T)
        w0 = w.substitute("t", 0.0)
        for j in range(len(problem.X1.components)):
            _acc(row, pair(wT, ("muT", j)))
        for j in range(len(problem.X0.components)):
            _acc(row, pair(w0, ("mu0", j)), -1.0)
        dt = w.differentiate("t")
        grads = [w.differentiate(f"x{i + 1}") for i in range(n)]
        for j in range(len(problem.X.components)):
            if box_split:
                _acc(row, pair(dt, ("mu", j)), -1.0)
                for i, gi in enumerate(grads):
                    _acc(row, pair(gi, ("sig+", j, i)), -1.0)
                    _acc(row, pair(gi, ("sig-", j, i)), 1.0)
            else:
                lie = dt.embed(txu)
                for i, gi in enumerate(grads):
                    lie = lie + gi.embed(txu) * Polynomial.variable(f"u{i + 1}", txu)
                _acc(row, pair(lie, ("mu", j)), -1.0)
        rows.append((w_e, {k: c for k, c in row.items() if c != 0.0}))
    return rows


def evaluate_row(row: Mapping[tuple[MeasureId, Exps], float],
                 moments: Mapping[MeasureId, Mapping[Exps, float]]) -> float:
    """Value of a symbolic row at given moment sequences (missing measures count as zero)."""
    s = 0.0
    for (ident, e), c in row.items():
        if ident in moments:
            s += c * moments[ident].get(e, 0.0)
    return s


@dataclass
class MomentDecoder:
    problem: ProblemInstance
    order: int
    variant: str
    measures: dict[MeasureId, Measure]

    def moments(self, sol: SdpSolution, ident: MeasureId) -> dict[Exps, float]:
        return {e: sol.value(k) for e, k in self.measures[ident].keys.items()}


def _check_order(d: int) -> None:
    if d < 1:
        raise ValueError("relaxation order must be at least 1")


def _endpoint_measures(b: SdpBuilder, problem: ProblemInstance, d: int) -> dict[MeasureId, Measure]:
    xs = x_space(problem.n)
    out = {}
    for j, comp in enumerate(problem.X0.components):
        ineqs, eqs = basic_set_constraints(comp, xs)
        out[("mu0", j)] = _add_measure(b, ("mu0", j), xs, ineqs, eqs, d)
    for j, comp in enumerate(problem.X1.components):
        ineqs, eqs = basic_set_constraints(comp, xs)
        out[("muT", j)] = _add_measure(b, ("muT", j), xs, ineqs, eqs, d)
    zero = (0,) * problem.n
    b.add_equality({out[("mu0", j)].keys[zero]: 1.0 for j in range(len(problem.X0.components))}, 1.0)
    return out


def _emit_liouville(b: SdpBuilder, problem: ProblemInstance, d: int, box_split: bool,
                    measures: Mapping[MeasureId, Measure]) -> None:
    for _, row in liouville_rows(problem, 2 * d, box_split):
        coefs: dict[VarKey, float] = {}
        for (ident, e), c in row.items():
            k = measures[ident].keys[e]
            coefs[k] = coefs.get(k, 0.0) + c
        b.add_equality(coefs, 0.0)


def build_connect_full(problem: ProblemInstance, d: int) -> tuple[SdpProblem, MomentDecoder]:
    """Order-``d`` moment relaxation with occupation measures over ``(t, x, u)``."""
    _check_order(d)
    n = problem.n
    txu = txu_space(n)
    b = SdpBuilder()
    measures = _endpoint_measures(b, problem, d)
    uc = control_constraints(problem.control, n, txu)
    for j, comp in enumerate(problem.X.components):
        ineqs, eqs = basic_set_constraints(comp, txu)
        measures[("mu", j)] = _add_measure(b, ("mu", j), txu, [time_constraint(txu, problem.T)] + ineqs + uc,
                                           eqs, d)
    _emit_liouville(b, problem, d, False, measures)
    return b.build(), MomentDecoder(problem, d, "full", measures)


def build_connect_box(problem: ProblemInstance, d: int) -> tuple[SdpProblem, MomentDecoder]:
    """Order-``d`` box-split relaxation; every occupation-type measure lives on ``(t, x)``."""
    _check_order(d)
    if problem.control != Control.BOX:
        raise ValueError("the box-split relaxation needs box control; use build_connect_full")
    n = problem.n
    tx = tx_space(n)
    b = SdpBuilder()
    measures = _endpoint_measures(b, problem, d)
    for j, comp in enumerate(problem.X.components):
        ineqs, eqs = basic_set_constraints(comp, tx)
        sup = [time_constraint(tx, problem.T)] + ineqs
        mu = measures[("mu", j)] = _add_measure(b, ("mu", j), tx, sup, eqs, d)
        for i in range(n):
            parts = [_add_measure(b, (tag, j, i), tx, sup, eqs, d) for tag in ("sig+", "sig-", "sighat")]
            for p in parts:
                measures[p.ident] = p
            for e, k in mu.keys.items():
                row = {k: 1.0}
                for p in parts:
                    row[p.keys[e]] = -1.0
                b.add_equality(row, 0.0)
    _emit_liouville(b, problem, d, True, measures)
    return b.build(), MomentDecoder(problem, d, "box", measures)


def build_connect(problem: ProblemInstance, d: int, variant: str | None = None):
    if variant is None:
        variant = "box" if problem.control == Control.BOX else "full"
    if variant == "box":
        return build_connect_box(problem, d)
    if variant == "full":
        return build_connect_full(problem, d)
    raise ValueError(f"unknown relaxation {variant!r}")


def moment_report(sol: SdpSolution, dec: MomentDecoder) -> dict:
    """Per-measure mass, first moments and moment-matrix minimum eigenvalue."""
    out = {"status": sol.status.value, "order": dec.order, "variant": dec.variant, "measures": []}
    if sol.status != Status.FEASIBLE:
        return out
    for ident, meas in dec.measures.items():
        y = dec.moments(sol, ident)
        nv = len(meas.space)
        zero = (0,) * nv
        first = {}
        for i, name in enumerate(meas.space):
            e = tuple(1 if k == i else 0 for k in range(nv))
            first[name] = y[e]
        M = moment_matrix(y, dec.order, nv)
        out["measures"].append({
            "measure": meas.label,
            "space": list(meas.space),
            "mass": y[zero],
            "first_moments": first,
            "min_eig": float(np.linalg.eigvalsh(M).min()),
        })
    return out


def masses(sol: SdpSolution, dec: MomentDecoder) -> dict[str, float]:
    """Total masses of the initial, terminal and occupation measures."""
    tot = {"mu0": 0.0, "muT": 0.0, "mu": 0.0}
    for ident, meas in dec.measures.items():
        if ident[0] in tot:
            tot[ident[0]] += sol.value(meas.keys[(0,) * len(meas.space)])
    return tot


@dataclass
class ConnectResult:
    status: Status
    order: int
    solution: SdpSolution
    sdp: SdpProblem
    decoder: MomentDecoder

    @property
    def feasible(self) -> bool:
        return self.status == Status.FEASIBLE


def solve_connect(problem: ProblemInstance, d: int, variant: str | None = None, cfg=None,
                  backend=None) -> ConnectResult:
    from .sdp import solve

    sdp, dec = build_connect(problem, d, variant)
    sol = solve(sdp, cfg, backend)
    return ConnectResult(sol.status, d, sol, sdp, dec)
