"""Solver-agnostic semidefinite feasibility problems.

Problems are in the "block variable" form

    find  X_1 ⪰ 0, ..., X_m ⪰ 0, z free
    s.t.  sum_b <coefs, X_b> + sum_k c_k z_k = rhs   (one per row)

optionally maximising a linear objective (the certificate margin).  A row
coefficient attached to the scalar ``X_b[i, j]`` with ``i < j`` multiplies that
single upper-triangle entry, i.e. it equals ``2 * A[i, j]`` for the symmetric
data matrix ``A`` of the usual trace form.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Protocol, Sequence

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

# (-1, k, 0) is free variable k; (b, i, j) with i <= j is X_b[i, j]
VarKey = tuple[int, int, int]
BACKEND_ENV = "DISCONNECT_SDP_BACKEND"


class SdpError(ValueError):
    """Malformed SDP (bad indices, non-finite data)."""


class Status(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNKNOWN = "Unknown"


def free_key(k: int) -> VarKey:
    return (-1, k, 0)


@dataclass(frozen=True)
class SdpProblem:
    blocks: tuple[tuple[str, int], ...]
    free_vars: tuple[str, ...]
    rows: tuple[tuple[tuple[VarKey, float], ...], ...]
    rhs: tuple[float, ...]
    objective: tuple[tuple[VarKey, float], ...] = ()

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def validate(self) -> None:
        sizes = [s for _, s in self.blocks]
        if any(s < 1 for s in sizes):
            raise SdpError("block sizes must be positive")
        if len(self.rows) != len(self.rhs):
            raise SdpError("rows and rhs differ in length")
        for row in self.rows + (self.objective,):
            for (b, i, j), c in row:
                if not math.isfinite(c):
                    raise SdpError("non-finite coefficient")
                if b == -1:
                    if not (0 <= i < len(self.free_vars)) or j != 0:
                        raise SdpError(f"free variable index {i} out of range")
                else:
                    if not (0 <= b < len(sizes)):
                        raise SdpError(f"block index {b} out of range")
                    if not (0 <= i <= j < sizes[b]):
                        raise SdpError(f"entry ({i}, {j}) invalid for block {b} of size {sizes[b]}")
        if not all(math.isfinite(r) for r in self.rhs):
            raise SdpError("non-finite right-hand side")

    def digest(self) -> str:
        return hashlib.sha256(export_sdpa(self).encode()).hexdigest()


class SdpBuilder:
    """Mutable accumulator; :meth:`build` canonicalises into an :class:`SdpProblem`."""

    def __init__(self):
        self.blocks: list[tuple[str, int]] = []
        self.free_vars: list[str] = []
        self._rows: list[tuple[dict[VarKey, float], float]] = []
        self.objective: dict[VarKey, float] = {}

    def add_block(self, label: str, size: int) -> int:
        if size < 1:
            raise SdpError("block size must be positive")
        self.blocks.append((label, size))
        return len(self.blocks) - 1

    def add_free(self, label: str) -> VarKey:
        self.free_vars.append(label)
        return free_key(len(self.free_vars) - 1)

    @staticmethod
    def entry(block: int, i: int, j: int) -> VarKey:
        return (block, i, j) if i <= j else (block, j, i)

    def add_equality(self, coefs: Mapping[VarKey, float], rhs: float = 0.0) -> None:
        self._rows.append((dict(coefs), float(rhs) + 0.0))

    def build(self) -> SdpProblem:
        canon = set()
        for coefs, rhs in self._rows:
            items = tuple(sorted((k, float(c)) for k, c in coefs.items() if c != 0.0))
            if not items and rhs == 0.0:
                continue
            canon.add((items, rhs))
        ordered = sorted(canon)
        prob = SdpProblem(
            blocks=tuple(self.blocks),
            free_vars=tuple(self.free_vars),
            rows=tuple(r for r, _ in ordered),
            rhs=tuple(b for _, b in ordered),
            objective=tuple(sorted((k, float(c)) for k, c in self.objective.items() if c != 0.0)),
        )
        prob.validate()
        return prob


@dataclass
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 200
    time_limit: float = 300.0
    backend: str | None = None
    verbose: bool = False


@dataclass
class SdpSolution:
    status: Status
    block_values: list[np.ndarray] = field(default_factory=list)
    free_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residual: float | None = None
    min_eig: float | None = None
    objective: float | None = None
    dual_ray: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def value(self, key: VarKey) -> float:
        b, i, j = key
        if b == -1:
            return float(self.free_values[i])
        return float(self.block_values[b][i, j])


class Backend(Protocol):
    name: str

    def solve(self, problem: SdpProblem, cfg: SolverConfig) -> SdpSolution: ...


# helpers shared by backends


def _offsets(problem: SdpProblem) -> tuple[int, list[int]]:
    """Column offsets of each block's svec inside the stacked variable vector."""
    offs = []
    pos = len(problem.free_vars)
    for _, n in problem.blocks:
        offs.append(pos)
        pos += n * (n + 1) // 2
    return pos, offs


def _svec_index(i: int, j: int) -> int:
    # upper triangle, column-major
    return j * (j + 1) // 2 + i


def equality_matrix(problem: SdpProblem) -> tuple[sp.csr_matrix, np.ndarray]:
    """Rows over the stacked vector [free, upper-triangle entries per block] (unscaled)."""
    nvar, offs = _offsets(problem)
    data, ri, ci = [], [], []
    for r, row in enumerate(problem.rows):
        for (b, i, j), c in row:
            col = i if b == -1 else offs[b] + _svec_index(i, j)
            data.append(c)
            ri.append(r)
            ci.append(col)
    A = sp.csr_matrix((data, (ri, ci)), shape=(len(problem.rows), nvar))
    return A, np.array(problem.rhs, dtype=float)


def stack_solution(problem: SdpProblem, free: np.ndarray, blocks: Sequence[np.ndarray]) -> np.ndarray:
    nvar, offs = _offsets(problem)
    x = np.zeros(nvar)
    x[: len(problem.free_vars)] = free
    for b, (_, n) in enumerate(problem.blocks):
        iu, ju = np.triu_indices(n)
        x[offs[b] + ju * (ju + 1) // 2 + iu] = blocks[b][iu, ju]
    return x


def residual_and_eig(problem: SdpProblem, free: np.ndarray, blocks: Sequence[np.ndarray]) -> tuple[float, float]:
    """Max absolute equality violation and smallest block eigenvalue."""
    A, b = equality_matrix(problem)
    x = stack_solution(problem, free, blocks)
    res = float(np.max(np.abs(A @ x - b))) if A.shape[0] else 0.0
    eigs = [float(np.linalg.eigvalsh(B).min()) for B in blocks]
    return res, (min(eigs) if eigs else math.inf)


def objective_value(problem: SdpProblem, sol: SdpSolution) -> float:
    return float(sum(c * sol.value(k) for k, c in problem.objective))


def _trivially_infeasible(problem: SdpProblem) -> int | None:
    for r, (row, rhs) in enumerate(zip(problem.rows, problem.rhs)):
        if not row and rhs != 0.0:
            return r
    return None


def _classify_feasible(problem: SdpProblem, sol: SdpSolution, cfg: SolverConfig) -> SdpSolution:
    res, eig = residual_and_eig(problem, sol.free_values, sol.block_values)
    sol.residual, sol.min_eig = res, eig
    sol.objective = objective_value(problem, sol)
    if res <= cfg.tol and eig >= -cfg.tol:
        sol.status = Status.FEASIBLE
    else:
        sol.status = Status.UNKNOWN
        sol.meta["reason"] = f"residual {res:.3e} / min eig {eig:.3e} outside tolerance {cfg.tol:.1e}"
    return sol


class ClarabelBackend:
    """Reference backend wrapping the Clarabel interior-point solver."""

    name = "clarabel"
    # numerical breakdowns are retried without equilibration, then with more regularisation
    RETRY_SETTINGS = ({}, {"equilibrate_enable": False}, {"static_regularization_constant": 1e-7})

    def solve(self, problem: SdpProblem, cfg: SolverConfig) -> SdpSolution:
        import clarabel

        nfree = len(problem.free_vars)
        nvar, offs = _offsets(problem)
        m = len(problem.rows)
        r2 = math.sqrt(2.0)

        # equality rows in scaled svec coordinates
        data, ri, ci = [], [], []
        for r, row in enumerate(problem.rows):
            for (b, i, j), c in row:
                if b == -1:
                    col = i
                else:
                    col = offs[b] + _svec_index(i, j)
                    if i != j:
                        c = c / r2
                data.append(c)
                ri.append(r)
                ci.append(col)

        cones = []
        if m:
            cones.append(clarabel.ZeroConeT(m))
        nrow = m
        rhs = list(problem.rhs)
        scalar_blocks = [b for b, (_, n) in enumerate(problem.blocks) if n == 1]
        if scalar_blocks:
            for b in scalar_blocks:
                data.append(-1.0)
                ri.append(nrow)
                ci.append(offs[b])
                nrow += 1
            rhs.extend([0.0] * len(scalar_blocks))
            cones.append(clarabel.NonnegativeConeT(len(scalar_blocks)))
        for b, (_, n) in enumerate(problem.blocks):
            if n == 1:
                continue
            k = n * (n + 1) // 2
            data.extend([-1.0] * k)
            ri.extend(range(nrow, nrow + k))
            ci.extend(range(offs[b], offs[b] + k))
            nrow += k
            rhs.extend([0.0] * k)
            cones.append(clarabel.PSDTriangleConeT(n))

        A = sp.csc_matrix((data, (ri, ci)), shape=(nrow, nvar))
        q = np.zeros(nvar)
        for (b, i, j), c in problem.objective:
            if b == -1:
                q[i] -= c
            else:
                q[offs[b] + _svec_index(i, j)] -= c if i == j else c / r2
        P = sp.csc_matrix((nvar, nvar))

        t0 = time.perf_counter()
        for attempt, extra in enumerate(self.RETRY_SETTINGS):
            settings = clarabel.DefaultSettings()
            settings.verbose = cfg.verbose
            settings.max_iter = cfg.max_iter
            settings.time_limit = max(1.0, cfg.time_limit - (time.perf_counter() - t0))
            settings.tol_feas = min(1e-9, cfg.tol / 10)
            settings.tol_gap_abs = 1e-9
            settings.tol_gap_rel = 1e-9
            for k, v in extra.items():
                setattr(settings, k, v)
            solver = clarabel.DefaultSolver(P, q, A, np.array(rhs), cones, settings)
            res = solver.solve()
            raw = str(res.status)
            if raw not in ("NumericalError", "InsufficientProgress"):
                break
            log.info("clarabel attempt %d ended with %s", attempt, raw)
        elapsed = time.perf_counter() - t0
        meta = {"solver": self.name, "raw_status": raw, "iterations": res.iterations, "time": elapsed,
                "attempts": attempt + 1}

        x = np.array(res.x)
        free = x[:nfree].copy()
        blocks = []
        for b, (_, n) in enumerate(problem.blocks):
            v = x[offs[b]: offs[b] + n * (n + 1) // 2]
            M = np.zeros((n, n))
            iu, ju = np.triu_indices(n)
            sv = v[ju * (ju + 1) // 2 + iu]
            scale = np.where(iu == ju, 1.0, 1.0 / r2)
            M[iu, ju] = sv * scale
            M[ju, iu] = sv * scale
            blocks.append(M)
        sol = SdpSolution(Status.UNKNOWN, blocks, free, meta=meta)

        if raw in ("Solved", "AlmostSolved", "MaxIterations", "MaxTime", "InsufficientProgress"):
            return _classify_feasible(problem, sol, cfg)
        if raw in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            z = np.array(res.z)
            if raw == "PrimalInfeasible" or _ray_is_certificate(A, np.array(rhs), z, m):
                sol.status = Status.INFEASIBLE
                sol.dual_ray = z[:m].copy()
            return sol
        sol.meta["reason"] = raw
        return sol


def _ray_is_certificate(A: sp.csc_matrix, b: np.ndarray, z: np.ndarray, m: int) -> bool:
    """Loose check of a near-infeasibility ray: A'z ≈ 0 relative to b'z < 0."""
    bz = float(b @ z)
    if not bz < 0:
        return False
    return float(np.max(np.abs(A.T @ z))) <= 1e-6 * abs(bz)


class CvxoptBackend:
    """Alternative backend on CVXOPT's conelp; dependent equality rows are pruned first."""

    name = "cvxopt"

    def solve(self, problem: SdpProblem, cfg: SolverConfig) -> SdpSolution:
        import cvxopt
        from scipy.linalg import qr

        nfree = len(problem.free_vars)
        nvar, offs = _offsets(problem)
        A, b = equality_matrix(problem)
        Ad = A.toarray()
        keep = np.arange(A.shape[0])
        if A.shape[0]:
            _, R, piv = qr(Ad.T, mode="economic", pivoting=True)
            diag = np.abs(np.diag(R))
            rank = int(np.sum(diag > 1e-10 * max(1.0, diag.max() if diag.size else 1.0)))
            keep = np.sort(piv[:rank])
            # dropped rows must be implied by the kept ones
            if rank < A.shape[0]:
                coef, *_ = np.linalg.lstsq(Ad[keep].T, Ad.T, rcond=None)
                if np.max(np.abs(coef.T @ b[keep] - b)) > 1e-9 * max(1.0, np.abs(b).max()):
                    return SdpSolution(Status.INFEASIBLE, meta={"solver": self.name, "reason": "inconsistent rows"})

        # cone rows: diagonal scalar blocks in 'l', the rest in 's' (full column-major)
        Gd, Gi, Gj = [], [], []
        row = 0
        scal = [bk for bk, (_, n) in enumerate(problem.blocks) if n == 1]
        for bk in scal:
            Gd.append(-1.0)
            Gi.append(row)
            Gj.append(offs[bk])
            row += 1
        sdims = []
        for bk, (_, n) in enumerate(problem.blocks):
            if n == 1:
                continue
            for jj in range(n):
                for ii in range(n):
                    i, j = min(ii, jj), max(ii, jj)
                    Gd.append(-1.0)
                    Gi.append(row + jj * n + ii)
                    Gj.append(offs[bk] + _svec_index(i, j))
            row += n * n
            sdims.append(n)
        c = np.zeros(nvar)
        for (bk, i, j), v in problem.objective:
            c[i if bk == -1 else offs[bk] + _svec_index(i, j)] -= v
        G = cvxopt.spmatrix(Gd, Gi, Gj, (row, nvar))
        h = cvxopt.matrix(0.0, (row, 1))
        Ak = A[keep].tocoo()
        Acv = cvxopt.spmatrix(Ak.data.tolist(), Ak.row.tolist(), Ak.col.tolist(), (len(keep), nvar))
        opts = {"show_progress": cfg.verbose, "maxiters": cfg.max_iter, "abstol": 1e-9, "reltol": 1e-9, "feastol": 1e-10}
        t0 = time.perf_counter()
        try:
            out = cvxopt.solvers.conelp(cvxopt.matrix(c), G, h, {"l": len(scal), "q": [], "s": sdims},
                                        Acv, cvxopt.matrix(b[keep]), options=opts)
        except (ValueError, ArithmeticError) as exc:
            return SdpSolution(Status.UNKNOWN, meta={"solver": self.name, "reason": str(exc)})
        meta = {"solver": self.name, "raw_status": out["status"], "time": time.perf_counter() - t0}
        if out["status"] == "primal infeasible":
            return SdpSolution(Status.INFEASIBLE, meta=meta)
        if out["x"] is None:
            return SdpSolution(Status.UNKNOWN, meta=meta)
        x = np.array(out["x"]).ravel()
        blocks = []
        for bk, (_, n) in enumerate(problem.blocks):
            M = np.zeros((n, n))
            iu, ju = np.triu_indices(n)
            M[iu, ju] = x[offs[bk] + ju * (ju + 1) // 2 + iu]
            M[ju, iu] = M[iu, ju]
            blocks.append(M)
        sol = SdpSolution(Status.UNKNOWN, blocks, x[:nfree].copy(), meta=meta)
        return _classify_feasible(problem, sol, cfg)


BACKENDS: dict[str, type] = {"clarabel": ClarabelBackend, "cvxopt": CvxoptBackend}


def get_backend(name: str | None = None) -> Backend:
    name = (name or os.environ.get(BACKEND_ENV) or "clarabel").lower()
    if name not in BACKENDS:
        raise ValueError(f"unknown SDP backend {name!r}; choose from {sorted(BACKENDS)}")
    return BACKENDS[name]()


def solve(problem: SdpProblem, cfg: SolverConfig | None = None, backend: Backend | None = None) -> SdpSolution:
    """Solve through the configured backend; numerical failures become ``Unknown``."""
    cfg = cfg or SolverConfig()
    problem.validate()
    if not problem.blocks and not problem.free_vars:
        bad = _trivially_infeasible(problem)
        if bad is not None:
            return SdpSolution(Status.INFEASIBLE, meta={"solver": "presolve", "row": bad})
        return SdpSolution(Status.FEASIBLE, [], np.zeros(0), residual=0.0, min_eig=math.inf, objective=0.0,
                           meta={"solver": "presolve"})
    bad = _trivially_infeasible(problem)
    if bad is not None:
        return SdpSolution(Status.INFEASIBLE, meta={"solver": "presolve", "row": bad})
    backend = backend or get_backend(cfg.backend)
    try:
        sol = backend.solve(problem, cfg)
    except Exception as exc:  # backend crashes must not escape as panics
        log.warning("backend %s failed: %s", getattr(backend, "name", backend), exc)
        return SdpSolution(Status.UNKNOWN, meta={"solver": getattr(backend, "name", "?"), "reason": repr(exc)})
    log.info("sdp %s: %d blocks, %d rows -> %s (%s)", backend.name, len(problem.blocks), problem.n_rows,
             sol.status.value, sol.meta.get("raw_status"))
    return sol


# SDPA export


def _fmt(v: float) -> str:
    return repr(float(v) + 0.0)  # folds -0.0 into 0.0


def sdpa_structure(problem: SdpProblem) -> list[int]:
    """Block sizes after lowering each free variable to a 2x2 difference block."""
    return [n for _, n in problem.blocks] + [2] * len(problem.free_vars)


def export_sdpa(problem: SdpProblem) -> str:
    """Sparse SDPA (.dat-s) text.  Free variable k becomes ``Y[0,0] - Y[1,1]`` of its own block."""
    nb = len(problem.blocks)
    sizes = sdpa_structure(problem)
    lines = [str(len(problem.rows)), str(len(sizes)), " ".join(str(s) for s in sizes),
             " ".join(_fmt(b) for b in problem.rhs)]

    def entries(k: int, row) -> list[tuple]:
        acc: dict[tuple[int, int, int], float] = {}
        for (b, i, j), c in row:
            if b == -1:
                blk = nb + i + 1
                acc[(blk, 1, 1)] = acc.get((blk, 1, 1), 0.0) + c
                acc[(blk, 2, 2)] = acc.get((blk, 2, 2), 0.0) - c
            else:
                val = c if i == j else c / 2.0
                key = (b + 1, i + 1, j + 1)
                acc[key] = acc.get(key, 0.0) + val
        return [(k,) + key + (v,) for key, v in sorted(acc.items()) if v != 0.0]

    out = entries(0, problem.objective)
    for k, row in enumerate(problem.rows, start=1):
        out.extend(entries(k, row))
    for k, blk, i, j, v in out:
        lines.append(f"{k} {blk} {i} {j} {_fmt(v)}")
    return "\n".join(lines) + "\n"


def solution_from_sdpa_blocks(problem: SdpProblem, Y: Sequence[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Map block values of the exported SDPA problem back to (free values, blocks)."""
    nb = len(problem.blocks)
    if len(Y) != nb + len(problem.free_vars):
        raise SdpError("block count does not match the exported structure")
    blocks = [np.asarray(Y[b], dtype=float) for b in range(nb)]
    free = np.array([Y[nb + k][0, 0] - Y[nb + k][1, 1] for k in range(len(problem.free_vars))])
    return free, blocks


class RecordedBackend:
    """Replays block values recorded from an external solver run on the SDPA export."""

    name = "recorded"

    def __init__(self, records: Mapping[str, Mapping]):
        self.records = records

    def solve(self, problem: SdpProblem, cfg: SolverConfig) -> SdpSolution:
        rec = self.records.get(problem.digest())
        if rec is None:
            return SdpSolution(Status.UNKNOWN, meta={"solver": self.name, "reason": "no recording"})
        meta = {"solver": self.name, "raw_status": rec["status"], "source": rec.get("source")}
        if rec["status"] == "infeasible":
            return SdpSolution(Status.INFEASIBLE, meta=meta)
        Y = [np.array(B, dtype=float) for B in rec["blocks"]]
        free, blocks = solution_from_sdpa_blocks(problem, Y)
        return _classify_feasible(problem, SdpSolution(Status.UNKNOWN, blocks, free, meta=meta), cfg)


def psd_project(M: np.ndarray, sym_tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Clip negative eigenvalues; returns the projection and the original minimum eigenvalue."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if M.size == 0:
        return M.copy(), math.inf
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > sym_tol * scale:
        raise ValueError("matrix is not symmetric")
    S = (M + M.T) / 2
    w, V = np.linalg.eigh(S)
    P = (V * np.clip(w, 0.0, None)) @ V.T
    return (P + P.T) / 2, float(w.min())
