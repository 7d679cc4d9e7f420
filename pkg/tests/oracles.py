"""Reference computations that share no code with the package under test."""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import product

import numpy as np

SQRT_PI = math.sqrt(math.pi)


def gamma_half_integer(x2: int) -> float:
    """Gamma(x2 / 2) from the recurrences Gamma(1)=1, Gamma(1/2)=sqrt(pi), Gamma(z+1)=z Gamma(z)."""
    if x2 < 1:
        raise ValueError("positive arguments only")
    if x2 % 2 == 0:
        return float(math.factorial(x2 // 2 - 1))
    coef = Fraction(1)
    z = Fraction(1, 2)
    while z < Fraction(x2, 2):
        coef *= z
        z += 1
    return float(coef) * SQRT_PI


def kurdyka_reference(n: int, d: int) -> float:
    return 4 * gamma_half_integer(1) * gamma_half_integer(n + 2) / gamma_half_integer(n + 1) * d * (4 * d - 5) ** (n - 1)


# SDPA


def read_sdpa(text: str) -> dict:
    """Minimal sparse SDPA reader: header plus per-constraint dense matrices."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith(("*", '"'))]
    m = int(lines[0])
    nb = int(lines[1])
    sizes = [int(s) for s in lines[2].replace(",", " ").split()]
    rhs = [float(s) for s in lines[3].replace(",", " ").split()] if m else []
    assert len(sizes) == nb
    F = [[np.zeros((abs(s), abs(s))) for s in sizes] for _ in range(m + 1)]
    for ln in lines[4 if m else 3:]:
        if not ln or ln.count(" ") < 4:
            continue
        k, b, i, j, v = ln.split()
        k, b, i, j, v = int(k), int(b) - 1, int(i) - 1, int(j) - 1, float(v)
        F[k][b][i, j] = v
        F[k][b][j, i] = v
    return {"m": m, "nblocks": nb, "sizes": sizes, "rhs": rhs, "F": F}


def solve_sdpa_cvxopt(doc: dict, trace_weight: float = 1e-3) -> dict:
    """Solve ``<F_k, Y> = c_k, Y PSD`` with CVXOPT's dense SDP solver.

    Maximises ``<F_0, Y> - trace_weight * trace(Y)``; the trace term keeps the
    lowered free variables (difference blocks) bounded.
    """
    from cvxopt import matrix, solvers

    sizes = doc["sizes"]
    m = doc["m"]
    nvec = [s * s for s in sizes]
    offs = np.concatenate([[0], np.cumsum(nvec)])
    N = int(offs[-1])
    # variables: vec(Y_b) stacked, Y = Y^T imposed through symmetric data
    A = np.zeros((m, N))
    for k in range(1, m + 1):
        A[k - 1] = np.concatenate([doc["F"][k][b].ravel() for b in range(len(sizes))])
    c0 = np.concatenate([(doc["F"][0][b] - trace_weight * np.eye(s)).ravel() for b, s in enumerate(sizes)])
    # symmetry rows for off-diagonal entries
    sym = []
    for b, s in enumerate(sizes):
        for i in range(s):
            for j in range(i + 1, s):
                r = np.zeros(N)
                r[offs[b] + i * s + j] = 1
                r[offs[b] + j * s + i] = -1
                sym.append(r)
    Aeq = np.vstack([A] + ([np.array(sym)] if sym else []))
    beq = np.concatenate([doc["rhs"], np.zeros(len(sym))])
    # drop dependent rows
    q, r, piv = _qr(Aeq.T)
    rank = int((np.abs(np.diag(r)) > 1e-10 * max(1.0, abs(r[0, 0]))).sum())
    keep = sorted(piv[:rank])
    Aeq, beq = Aeq[keep], beq[keep]
    Gs = [matrix(-np.eye(N)[offs[b]:offs[b + 1]].copy()) for b in range(len(sizes))]
    hs = [matrix(np.zeros((s, s))) for s in sizes]
    solvers.options["show_progress"] = False
    solvers.options["abstol"] = 1e-10
    solvers.options["reltol"] = 1e-10
    solvers.options["feastol"] = 1e-10
    sol = solvers.sdp(matrix(-c0), Gs=Gs, hs=hs, A=matrix(Aeq), b=matrix(beq))
    x = np.array(sol["x"]).ravel()
    blocks = [x[offs[b]:offs[b + 1]].reshape(s, s) for b, s in enumerate(sizes)]
    return {"status": sol["status"], "blocks": [((B + B.T) / 2).tolist() for B in blocks]}


def _qr(M):
    from scipy.linalg import qr

    return qr(M, pivoting=True, mode="economic")


# occupation moments of explicit trajectories


def gauss_legendre(a: float, b: float, k: int = 40):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def trajectory_moments(x_of_t, u_of_t, T: float, n: int, degree: int, segments=(0.0,), k: int = 40) -> dict:
    """Moments of the initial, terminal and occupation measures of one trajectory.

    ``x_of_t`` and ``u_of_t`` map an array of times to arrays of shape (len, n).
    Returns dicts keyed by measure id, each mapping exponent tuples to moments;
    the occupation measure is on (t, x, u) and the box-split measures
    ``sig+``, ``sig-``, ``sighat`` on (t, x) are included as well.
    """
    cuts = list(segments) + [T]
    ts, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        t, w = gauss_legendre(a, b, k)
        ts.append(t)
        ws.append(w)
    t = np.concatenate(ts)
    w = np.concatenate(ws)
    X = np.asarray(x_of_t(t)).reshape(len(t), n)
    U = np.asarray(u_of_t(t)).reshape(len(t), n)
    x0 = np.asarray(x_of_t(np.array([0.0]))).reshape(n)
    xT = np.asarray(x_of_t(np.array([T]))).reshape(n)

    def exps(nv):
        return [e for e in product(range(degree + 1), repeat=nv) if sum(e) <= degree]

    out = {("mu0", 0): {}, ("muT", 0): {}, ("mu", 0): {}}
    for e in exps(n):
        out[("mu0", 0)][e] = float(np.prod(x0 ** np.array(e)))
        out[("muT", 0)][e] = float(np.prod(xT ** np.array(e)))
    TX = np.column_stack([t, X])
    TXU = np.column_stack([t, X, U])
    for e in exps(2 * n + 1):
        out[("mu", 0)][e] = float(np.sum(w * np.prod(TXU ** np.array(e), axis=1)))
    box = {("mu", 0, "tx"): {}}
    for e in exps(n + 1):
        box[("mu", 0, "tx")][e] = float(np.sum(w * np.prod(TX ** np.array(e), axis=1)))
    for i in range(n):
        up, um = np.maximum(U[:, i], 0), np.maximum(-U[:, i], 0)
        for tag, wt in (("sig+", up), ("sig-", um), ("sighat", 1 - up - um)):
            box[(tag, 0, i)] = {e: float(np.sum(w * wt * np.prod(TX ** np.array(e), axis=1))) for e in exps(n + 1)}
    out["box"] = box
    return out


# sampled barrier LP


def grid_barrier_lp(problem, degree: int, nx: int = 41, nt: int = 21) -> bool:
    """Is there any v(t, x) of total degree ``degree`` meeting the barrier inequalities on a grid?

    Box control only; X0 and X1 must be single points.  Sampling relaxes the
    constraints, so ``False`` proves that no barrier of this degree exists.
    """
    from scipy.optimize import linprog

    n = problem.n
    mons = [e for e in product(range(degree + 1), repeat=n + 1) if sum(e) <= degree]
    box = problem.X.bounding_box()
    mesh = np.meshgrid(*[np.linspace(lo, hi, nx) for lo, hi in box], indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    pts = pts[problem.X.member_mask(pts)]

    def feats(t, xs, dvar=None):
        Z = np.column_stack([np.full(len(xs), t), xs])
        M = np.empty((len(xs), len(mons)))
        for k, e in enumerate(mons):
            e = list(e)
            c = 1.0
            if dvar is not None:
                c = e[dvar]
                e[dvar] = max(e[dvar] - 1, 0)
            M[:, k] = c * np.prod(Z ** np.array(e), axis=1)
        return M

    a0 = problem.X0.components[0].pinned_point()
    a1 = problem.X1.components[0].pinned_point()
    A = [-feats(0.0, a0[None])[0], feats(problem.T, a1[None])[0]]
    b = [-1.0, 0.0]
    for t in np.linspace(0.0, problem.T, nt):
        dt = feats(t, pts, 0)
        dx = [feats(t, pts, i + 1) for i in range(n)]
        for signs in product((-1.0, 1.0), repeat=n):
            L = dt + sum(s * d for s, d in zip(signs, dx))
            A.extend(-L)
            b.extend([0.0] * len(L))
    res = linprog(np.zeros(len(mons)), A_ub=np.array(A), b_ub=np.array(b), bounds=[(None, None)] * len(mons),
                  method="highs")
    if res.status not in (0, 2):
        raise RuntimeError(res.message)
    return res.status == 0


def read_sdpa_sparse(text: str) -> dict:
    """Header plus a {(k, block, i, j): value} map with 0-based block/row indices."""
    lines = [ln.strip() for ln in text.splitlines()]
    m, nb = int(lines[0]), int(lines[1])
    sizes = [int(s) for s in lines[2].split()]
    rhs = [float(s) for s in lines[3].split()]
    entries = {}
    for ln in lines[4:]:
        if not ln:
            continue
        k, b, i, j, v = ln.split()
        entries[(int(k), int(b) - 1, int(i) - 1, int(j) - 1)] = float(v)
    return {"m": m, "nblocks": nb, "sizes": sizes, "rhs": rhs, "entries": entries}
