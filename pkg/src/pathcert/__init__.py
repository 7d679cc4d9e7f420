"""Certificates of path-disconnectedness for semialgebraic sets.

The package lowers time-dependent barrier programs and their occupation-measure
duals to semidefinite programs, solves them through a pluggable conic backend
and checks returned certificates independently.
"""

from .certificate import BarrierCertificate
from .driver import RunOutcome, Verdict, meta_algorithm
from .moments import build_connect_box, build_connect_full, solve_connect
from .poly import Polynomial, gram_size
from .sdp import SdpProblem, SdpSolution, SolverConfig, Status, export_sdpa, solve
from .semialg import BasicSet, Control, ProblemInstance, SetUnion, load_problem, parse_problem
from .sos import build_disconnect_box, build_disconnect_full, extract_certificate, solve_disconnect
from .verify import check_algebraic, check_samples, grid_connectivity_oracle, strict_shift

__version__ = "0.1.0"

__all__ = [
    "BarrierCertificate", "BasicSet", "Control", "Polynomial", "ProblemInstance", "RunOutcome", "SdpProblem",
    "SdpSolution", "SetUnion", "SolverConfig", "Status", "Verdict", "build_connect_box", "build_connect_full",
    "build_disconnect_box", "build_disconnect_full", "check_algebraic", "check_samples", "export_sdpa",
    "extract_certificate", "gram_size", "grid_connectivity_oracle", "load_problem", "meta_algorithm",
    "parse_problem", "solve", "solve_connect", "solve_disconnect", "strict_shift",
]
