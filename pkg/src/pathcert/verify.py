"""Independent checks of barrier certificates and a grid connectivity oracle."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .certificate import BarrierCertificate, ConstraintCertificate
from .poly import Polynomial, tx_space, txu_space, x_space
from .semialg import BasicSet, Control, ProblemInstance, sample_set
from .sos import basic_set_constraints, time_constraint

TAU_MARGIN = 1e-6
TAU_RES = 1e-6
N_SAMPLES = 10_000
ZETA_TOL = 1e-7


class Verdict(str, Enum):
    VERIFIED = "Verified"
    MARGIN_VIOLATION = "MarginViolation"
    RESIDUAL_VIOLATION = "ResidualViolation"


class Connectivity(str, Enum):
    CONNECTED = "Connected"
    DISCONNECTED = "Disconnected"


class FingerprintError(ValueError):
    pass


@dataclass
class SampleCheck:
    label: str
    min_margin: float
    count: int
    worst_point: list[float] | None


@dataclass
class AlgebraicCheck:
    label: str
    residual: float
    min_eig: float


@dataclass
class VerificationReport:
    verdict: Verdict
    samples: list[SampleCheck] = field(default_factory=list)
    algebraic: list[AlgebraicCheck] = field(default_factory=list)
    zeta_residual: float | None = None

    @property
    def ok(self) -> bool:
        return self.verdict == Verdict.VERIFIED

    def min_margin(self) -> float:
        return min((s.min_margin for s in self.samples), default=math.inf)

    def max_residual(self) -> float:
        vals = [a.residual for a in self.algebraic]
        if self.zeta_residual is not None:
            vals.append(self.zeta_residual)
        return max(vals, default=0.0)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "samples": [vars(s) for s in self.samples],
            "algebraic": [vars(a) for a in self.algebraic],
            "zeta_residual": self.zeta_residual,
        }

    def merge(self, other: "VerificationReport") -> "VerificationReport":
        order = [Verdict.VERIFIED, Verdict.MARGIN_VIOLATION, Verdict.RESIDUAL_VIOLATION]
        worst = max(self.verdict, other.verdict, key=order.index)
        zr = [z for z in (self.zeta_residual, other.zeta_residual) if z is not None]
        return VerificationReport(worst, self.samples + other.samples, self.algebraic + other.algebraic,
                                  max(zr) if zr else None)


# sampled checks


def _worst(values: np.ndarray, pts: np.ndarray, label: str) -> SampleCheck:
    if len(values) == 0:
        return SampleCheck(label, math.inf, 0, None)
    k = int(np.argmin(values))
    return SampleCheck(label, float(values[k]), int(len(values)), [float(a) for a in pts[k]])


def _control_samples(control: Control, n: int, rng: np.random.Generator, count: int) -> np.ndarray:
    if control == Control.BOX:
        return np.array(list(itertools.product([-1.0, 1.0], repeat=n)))
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([np.zeros((1, n)), g])


def _lie_min(v: Polynomial, control: Control, tx_pts: np.ndarray, rng, n_dirs: int = 16) -> np.ndarray:
    """Minimum over U of dv/dt + u . grad v at each (t, x) sample."""
    n = v.nvars - 1
    dt = v.differentiate("t").evaluate_many(tx_pts)
    grads = np.column_stack([v.differentiate(f"x{i + 1}").evaluate_many(tx_pts) for i in range(n)])
    if control == Control.BOX:
        return dt - np.abs(grads).sum(axis=1)
    us = _control_samples(control, n, rng, n_dirs)
    vals = dt[:, None] + grads @ us.T
    # the exact minimiser over the ball is u = -grad / |grad|
    exact = dt - np.linalg.norm(grads, axis=1)
    return np.minimum(vals.min(axis=1), exact)


def _zeta_form(cert: BarrierCertificate, j: int, tx_pts: np.ndarray) -> np.ndarray:
    out = cert.v.differentiate("t").evaluate_many(tx_pts)
    for i in range(cert.n):
        zp, zm = cert.zetas[(j, i)]
        out = out - zp.evaluate_many(tx_pts) - zm.evaluate_many(tx_pts)
    return out


def check_samples(cert: BarrierCertificate, problem: ProblemInstance, n_samples: int = N_SAMPLES,
                  seed: int = 0, tau: float = TAU_MARGIN) -> VerificationReport:
    """Evaluate the three barrier inequalities on sampled points of X0, X1 and [0, T] x X x U."""
    if cert.fingerprint != problem.fingerprint():
        raise FingerprintError("certificate was produced for a different problem")
    rng = np.random.default_rng(seed)
    v = cert.v
    checks = []
    p0 = sample_set(problem.X0, n_samples, seed)
    init = v.substitute("t", 0.0)
    checks.append(_worst(init.evaluate_many(p0) - 1.0, p0, "init"))
    p1 = sample_set(problem.X1, n_samples, seed + 1)
    term = -v.substitute("t", problem.T)
    checks.append(_worst(term.evaluate_many(p1), p1, "term"))
    ctrl = problem.control
    for j, comp in enumerate(problem.X.components):
        xs = sample_set(comp, n_samples, seed + 2 + j)
        ts = rng.uniform(0.0, problem.T, size=len(xs))
        ts[: min(2, len(ts))] = [0.0, problem.T][: min(2, len(ts))]
        pts = np.column_stack([ts, xs])
        checks.append(_worst(_lie_min(v, ctrl, pts, rng), pts, f"lie{j}"))
        if cert.zetas:
            checks.append(_worst(_zeta_form(cert, j, pts), pts, f"lie_box{j}"))
            for i in range(cert.n):
                for s, z in zip("+-", cert.zetas[(j, i)]):
                    checks.append(_worst(z.evaluate_many(pts), pts, f"zeta{s}{j},{i}"))
    bad = any(c.min_margin < -tau for c in checks)
    return VerificationReport(Verdict.MARGIN_VIOLATION if bad else Verdict.VERIFIED, checks)


# algebraic checks


def constraint_target(cert: BarrierCertificate, c: ConstraintCertificate) -> Polynomial:
    """Rebuild the polynomial that the multipliers of ``c`` must reproduce."""
    n, v, lam = cert.n, cert.v, cert.margin
    if c.kind == "init":
        return v.substitute("t", 0.0) - 1.0 - lam
    if c.kind == "term":
        return -v.substitute("t", cert.T) - lam
    if c.kind == "lie":
        txu = txu_space(n)
        out = v.differentiate("t").embed(txu)
        for i in range(n):
            out = out + v.differentiate(f"x{i + 1}").embed(txu) * Polynomial.variable(f"u{i + 1}", txu)
        return out - lam
    if c.kind == "lie_box":
        out = v.differentiate("t")
        for i in range(n):
            zp, zm = cert.zetas[(c.component, i)]
            out = out - zp - zm
        return out - lam
    if c.kind == "zeta":
        zp, zm = cert.zetas[(c.component, c.channel)]
        return zp if c.sign == "+" else zm
    raise ValueError(f"unknown constraint kind {c.kind!r}")


def algebraic_residual(cert: BarrierCertificate, c: ConstraintCertificate) -> float:
    diff = constraint_target(cert, c) - c.representation()
    return diff.max_abs_coef()


def zeta_identity_residual(cert: BarrierCertificate) -> float:
    worst = 0.0
    for (j, i), (zp, zm) in cert.zetas.items():
        worst = max(worst, (zp - zm - cert.v.differentiate(f"x{i + 1}")).max_abs_coef())
    return worst


def check_algebraic(cert: BarrierCertificate, tau: float = TAU_RES,
                    eig_tol: float | None = None) -> VerificationReport:
    """Recompute every Putinar representation from the stored Gram matrices.

    Each Gram is PSD-projected before use; the pre-projection eigenvalue is
    reported and, when it is below ``-eig_tol`` (default ``tau``), counted as a
    violation.
    """
    from .sdp import psd_project

    if not cert.constraints:
        raise ValueError("certificate carries no multipliers")
    eig_tol = tau if eig_tol is None else eig_tol
    checks = []
    bad = False
    for c in cert.constraints:
        if not c.grams:
            raise ValueError(f"constraint {c.kind}{c.component} has no Gram blocks")
        min_eig = math.inf
        projected = []
        for g in c.grams:
            Q, w = psd_project(g.matrix)
            min_eig = min(min_eig, w)
            projected.append(type(g)(g.basis, g.weight, Q))
        cc = ConstraintCertificate(c.kind, c.component, c.space, projected, c.eq_multipliers, c.channel, c.sign)
        res = algebraic_residual(cert, cc)
        label = f"{c.kind}{c.component}" + (f",{c.channel}{c.sign}" if c.channel is not None else "")
        checks.append(AlgebraicCheck(label, res, min_eig))
        bad |= res > tau or min_eig < -eig_tol
    zr = None
    if cert.zetas:
        zr = zeta_identity_residual(cert)
        bad |= zr > max(tau, ZETA_TOL)
    return VerificationReport(Verdict.RESIDUAL_VIOLATION if bad else Verdict.VERIFIED, algebraic=checks,
                              zeta_residual=zr)


def verify(cert: BarrierCertificate, problem: ProblemInstance, n_samples: int = N_SAMPLES, seed: int = 0,
           tau_margin: float = TAU_MARGIN, tau_res: float = TAU_RES) -> VerificationReport:
    rep = check_algebraic(cert, tau_res) if cert.constraints else VerificationReport(Verdict.VERIFIED)
    return rep.merge(check_samples(cert, problem, n_samples, seed, tau_margin))


def strict_shift(v: Polynomial, eps: float, T: float) -> Polynomial:
    """``v - eps * (1 - t / (2T))``: lowers v(0, .) by eps, v(T, .) by eps/2, raises dv/dt by eps/(2T)."""
    if not eps > 0 or not T > 0:
        raise ValueError("eps and T must be positive")
    t = Polynomial.variable("t", v.space)
    return v - (1.0 - t / (2.0 * T)) * eps


# brute-force oracle


def grid_connectivity_oracle(problem: ProblemInstance, resolution: int = 256, tol: float = 1e-9) -> Connectivity:
    """Flood-fill X on a regular grid and ask whether an X0 cell reaches an X1 cell.

    Grid nodes are 2n-connected.  X0 and X1 points are snapped to their nearest
    node; a snapped node outside X counts as connected only to itself.
    """
    from scipy import ndimage

    n = problem.n
    if n > 3:
        raise ValueError("grid oracle supports n <= 3")
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    box = problem.X.bounding_box()
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    inside = problem.X.member_mask(pts, tol).reshape((resolution,) * n)
    labels, _ = ndimage.label(inside, structure=ndimage.generate_binary_structure(n, 1))

    def snapped(s) -> set[int]:
        out = set()
        for c in s.components:
            pp = c.pinned_point()
            cand = [pp] if pp is not None else list(sample_set(c, 64, 0))
            for p in cand:
                idx = tuple(int(np.argmin(np.abs(ax - x))) for ax, x in zip(axes, p))
                lab = int(labels[idx])
                if lab:
                    out.add(lab)
        return out

    return Connectivity.CONNECTED if snapped(problem.X0) & snapped(problem.X1) else Connectivity.DISCONNECTED
