"""Degree-raising driver that alternates the barrier program and the moment relaxation.

At each order ``d`` the barrier program is solved first.  A feasible solution
with margin at least ``MARGIN_THRESHOLD`` whose extracted certificate passes the
verifier ends the run as ``Disconnected``.  Otherwise the moment relaxation of
the same order is solved.

Two policies decide what a feasible relaxation means:

``persist`` (default)
    keep raising the order; the run ends ``RelaxationFeasible`` only when the
    relaxation is still feasible at ``d_max``.  Finite relaxations are
    alternatives to the barrier program of the *same* order, so stopping at the
    first feasible relaxation would hide certificates that need a higher degree.
``literal``
    stop at the first feasible relaxation.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .certificate import BarrierCertificate
from .moments import ConnectResult, solve_connect
from .poly import tx_space
from .sdp import SolverConfig, Status
from .semialg import ProblemInstance
from .sos import MARGIN_THRESHOLD, DisconnectResult, solve_disconnect
from .verify import N_SAMPLES, VerificationReport, verify

log = logging.getLogger(__name__)

MODES = ("persist", "literal")
MAX_UNKNOWN_STREAK = 3


class Verdict(str, Enum):
    DISCONNECTED = "Disconnected"
    RELAXATION_FEASIBLE = "RelaxationFeasible"
    EXHAUSTED = "Exhausted"


STRICT_LABELS = {
    Verdict.DISCONNECTED: "PATH-DISCONNECTED",
    Verdict.RELAXATION_FEASIBLE: "PATH-CONNECTED",
    Verdict.EXHAUSTED: "EXHAUSTED",
}
HONEST_LABELS = {
    Verdict.DISCONNECTED: "DISCONNECTED (certified)",
    Verdict.RELAXATION_FEASIBLE: "RELAXATION-FEASIBLE (connectedness evidence, not a certificate)",
    Verdict.EXHAUSTED: "EXHAUSTED",
}


class SolverFailure(RuntimeError):
    """Both programs ended Unknown for several consecutive orders."""


@dataclass
class DegreeRecord:
    order: int
    disconnect_status: str
    margin: float | None
    verified: bool | None
    connect_status: str | None
    seconds: float


@dataclass
class RunOutcome:
    verdict: Verdict
    degree: int
    history: list[DegreeRecord] = field(default_factory=list)
    certificate: BarrierCertificate | None = None
    report: VerificationReport | None = None
    certificate_path: str | None = None
    first_relaxation_degree: int | None = None

    def label(self, strict_paper_labels: bool = False) -> str:
        return (STRICT_LABELS if strict_paper_labels else HONEST_LABELS)[self.verdict]

    @property
    def timings(self) -> dict[int, float]:
        return {r.order: r.seconds for r in self.history}

    def to_json(self, strict_paper_labels: bool = False) -> dict:
        return {
            "verdict": self.verdict.value,
            "label": self.label(strict_paper_labels),
            "degree": self.degree,
            "first_relaxation_degree": self.first_relaxation_degree,
            "certificate_path": self.certificate_path,
            "history": [vars(r) for r in self.history],
        }


def _certified(res: DisconnectResult, problem: ProblemInstance, n_samples: int, seed: int
               ) -> tuple[bool, VerificationReport | None]:
    if not res.certified:
        return False, None
    rep = verify(res.certificate, problem, n_samples=n_samples, seed=seed)
    return rep.ok, rep


def meta_algorithm(problem: ProblemInstance, d0: int = 1, d_max: int = 6, mode: str = "persist",
                   cfg: SolverConfig | None = None, backend=None, n_samples: int = N_SAMPLES, seed: int = 0,
                   parallel: bool = False, out_dir: str | Path | None = None) -> RunOutcome:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if not 1 <= d0 <= d_max:
        raise ValueError("need 1 <= d0 <= d_max")
    history: list[DegreeRecord] = []
    first_relax = None
    relax_at_last = False
    unknown_streak = 0
    for d in range(d0, d_max + 1):
        t0 = time.perf_counter()
        conn: ConnectResult | None = None
        if parallel:
            with ThreadPoolExecutor(max_workers=2) as ex:
                fd = ex.submit(solve_disconnect, problem, d, None, cfg, backend)
                fc = ex.submit(solve_connect, problem, d, None, cfg, backend)
                disc, conn = fd.result(), fc.result()
        else:
            disc = solve_disconnect(problem, d, cfg=cfg, backend=backend)
        ok, rep = _certified(disc, problem, n_samples, seed)
        if ok:
            history.append(DegreeRecord(d, disc.status.value, disc.margin, True,
                                        conn.status.value if conn else None, time.perf_counter() - t0))
            out = RunOutcome(Verdict.DISCONNECTED, d, history, disc.certificate, rep,
                             first_relaxation_degree=first_relax)
            if out_dir is not None:
                path = Path(out_dir) / f"certificate_d{d}.json"
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(disc.certificate.dumps())
                out.certificate_path = str(path)
            return out
        if conn is None:
            conn = solve_connect(problem, d, cfg=cfg, backend=backend)
        history.append(DegreeRecord(d, disc.status.value, disc.margin, False if rep else None,
                                    conn.status.value, time.perf_counter() - t0))
        log.info("order %d: barrier %s, relaxation %s", d, disc.status.value, conn.status.value)
        relax_at_last = conn.feasible
        if conn.feasible:
            first_relax = d if first_relax is None else first_relax
            if mode == "literal":
                return RunOutcome(Verdict.RELAXATION_FEASIBLE, d, history, first_relaxation_degree=first_relax)
        if disc.status == Status.UNKNOWN and conn.status == Status.UNKNOWN:
            unknown_streak += 1
            if unknown_streak >= MAX_UNKNOWN_STREAK:
                raise SolverFailure(f"both programs returned Unknown for orders {d - unknown_streak + 1}..{d}")
        else:
            unknown_streak = 0
    if relax_at_last:
        return RunOutcome(Verdict.RELAXATION_FEASIBLE, d_max, history, first_relaxation_degree=first_relax)
    return RunOutcome(Verdict.EXHAUSTED, d_max, history, first_relaxation_degree=first_relax)


def contour_grid(cert: BarrierCertificate, times: Sequence[float], bounds: Sequence[Sequence[float]],
                 resolution: int) -> list[tuple[float, ...]]:
    """Rows ``(t, x1[, x2], v)`` of v on a regular grid for each requested time."""
    n = cert.n
    if n not in (1, 2):
        raise ValueError("contour data is produced for n = 1 or 2 only")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if len(bounds) != n:
        raise ValueError(f"need {n} bound pairs")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    xs = np.column_stack([m.ravel() for m in mesh])
    rows = []
    for t in times:
        pts = np.column_stack([np.full(len(xs), float(t)), xs])
        vals = cert.v.evaluate_many(pts)
        rows.extend(tuple(float(a) for a in p) + (float(v),) for p, v in zip(pts, vals))
    return rows


def contour_csv(rows: Sequence[tuple[float, ...]], n: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(tx_space(n)) + ["v"])
    w.writerows(rows)
    return buf.getvalue()
