"""Command-line entry point ``pathcert``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import examples
from .certificate import BarrierCertificate
from .driver import SolverFailure, Verdict, contour_csv, contour_grid, meta_algorithm
from .horizon import problem_bounds
from .moments import build_connect, moment_report, solve_connect
from .sdp import SolverConfig, Status, export_sdpa
from .semialg import ProblemError, ProblemInstance, load_problem
from .sos import build_disconnect, solve_disconnect
from .verify import FingerprintError, N_SAMPLES, verify

EXIT_OK = 0
EXIT_EXHAUSTED = 2
EXIT_SOLVER = 3
EXIT_VIOLATION = 4
EXIT_INPUT = 5


def _problem(arg: str) -> ProblemInstance:
    """A path, or ``example:<name>`` for a shipped document."""
    if arg.startswith("example:"):
        return examples.load(arg.split(":", 1)[1])
    return load_problem(arg)


def _cfg(args) -> SolverConfig:
    return SolverConfig(tol=args.sdp_tol, max_iter=args.sdp_max_iter, time_limit=args.time_limit,
                        backend=args.backend)


def _emit(doc, out: str | None = None) -> None:
    text = json.dumps(doc, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_disconnect(args) -> int:
    prob = _problem(args.problem)
    builder = "full" if args.full_u else ("box" if args.box else None)
    res = solve_disconnect(prob, args.degree, builder, _cfg(args))
    doc = {"program": "disconnect", "builder": res.decoder.builder, "order": args.degree,
           "status": res.status.value, "margin": res.margin, "certified": res.certified,
           "solver": res.solution.meta}
    if res.certificate is not None:
        rep = verify(res.certificate, prob, n_samples=args.samples)
        doc["verification"] = rep.verdict.value
        if args.cert:
            Path(args.cert).write_text(res.certificate.dumps())
            doc["certificate_path"] = args.cert
    _emit(doc)
    if res.status == Status.UNKNOWN:
        return EXIT_SOLVER
    return EXIT_OK


def cmd_connect(args) -> int:
    prob = _problem(args.problem)
    variant = "box" if args.box_split else "full"
    res = solve_connect(prob, args.degree, variant, _cfg(args))
    rep = moment_report(res.solution, res.decoder)
    if res.feasible:
        rep["label"] = "RELAXATION-FEASIBLE (connectedness evidence, not a certificate)"
    _emit(rep, args.report)
    if args.report:
        print(json.dumps({"status": rep["status"], "report": args.report}))
    return EXIT_SOLVER if res.status == Status.UNKNOWN else EXIT_OK


def cmd_auto(args) -> int:
    prob = _problem(args.problem)
    try:
        out = meta_algorithm(prob, args.d0, args.dmax, args.mode, _cfg(args), n_samples=args.samples,
                             parallel=args.parallel_programs, out_dir=args.out_dir)
    except SolverFailure as exc:
        print(json.dumps({"error": str(exc)}))
        return EXIT_SOLVER
    _emit(out.to_json(args.strict_paper_labels))
    return EXIT_EXHAUSTED if out.verdict == Verdict.EXHAUSTED else EXIT_OK


def cmd_verify(args) -> int:
    cert = BarrierCertificate.loads(Path(args.certificate).read_text())
    prob = _problem(args.problem)
    try:
        rep = verify(cert, prob, n_samples=args.samples, seed=args.seed, tau_margin=args.tau_margin,
                     tau_res=args.tau_res)
    except FingerprintError as exc:
        print(json.dumps({"verdict": "FingerprintMismatch", "error": str(exc)}))
        return EXIT_VIOLATION
    _emit(rep.to_json(), args.report)
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def cmd_bound(args) -> int:
    prob = _problem(args.problem)
    _emit({"problem": prob.name, "bounds": [b.to_json() for b in problem_bounds(prob)],
           "note": "bounds are advisory; the run uses the document's T"})
    return EXIT_OK


def cmd_export(args) -> int:
    prob = _problem(args.problem)
    if args.program == "disconnect":
        sdp, _ = build_disconnect(prob, args.degree)
    else:
        sdp, _ = build_connect(prob, args.degree)
    text = export_sdpa(sdp)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_contour(args) -> int:
    cert = BarrierCertificate.loads(Path(args.certificate).read_text())
    if args.bounds:
        vals = args.bounds
        if len(vals) != 2 * cert.n:
            raise ValueError(f"--bounds needs {2 * cert.n} numbers")
        bounds = [(vals[2 * i], vals[2 * i + 1]) for i in range(cert.n)]
    elif args.problem:
        bounds = list(_problem(args.problem).X.bounding_box())
    else:
        bounds = [(-1.0, 1.0)] * cert.n
    times = args.times if args.times else [0.0, cert.T / 2, cert.T]
    text = contour_csv(contour_grid(cert, times, bounds, args.res), cert.n)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pathcert", description="Certify path-disconnectedness of semialgebraic sets.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_opts(sp):
        sp.add_argument("--sdp-tol", type=float, default=1e-8)
        sp.add_argument("--sdp-max-iter", type=int, default=200)
        sp.add_argument("--time-limit", type=float, default=300.0, help="seconds per SDP")
        sp.add_argument("--backend", choices=["clarabel", "cvxopt"], default=None)

    sp = sub.add_parser("disconnect", help="solve the barrier program at one order")
    sp.add_argument("problem")
    sp.add_argument("--degree", type=int, required=True, help="relaxation order k (v has degree 2k)")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--full-u", action="store_true")
    g.add_argument("--box", action="store_true")
    sp.add_argument("--cert", help="write the certificate JSON here")
    sp.add_argument("--samples", type=int, default=N_SAMPLES)
    solver_opts(sp)
    sp.set_defaults(func=cmd_disconnect)

    sp = sub.add_parser("connect", help="solve the moment relaxation at one order")
    sp.add_argument("problem")
    sp.add_argument("--degree", type=int, required=True)
    sp.add_argument("--box-split", action="store_true")
    sp.add_argument("--report", help="write the moment report here")
    solver_opts(sp)
    sp.set_defaults(func=cmd_connect)

    sp = sub.add_parser("auto", help="raise the order until a verdict is reached")
    sp.add_argument("problem")
    sp.add_argument("--d0", type=int, default=1)
    sp.add_argument("--dmax", type=int, default=6)
    sp.add_argument("--mode", choices=["persist", "literal"], default="persist")
    sp.add_argument("--strict-paper-labels", action="store_true")
    sp.add_argument("--parallel-programs", action="store_true")
    sp.add_argument("--out-dir", default=None)
    sp.add_argument("--samples", type=int, default=N_SAMPLES)
    solver_opts(sp)
    sp.set_defaults(func=cmd_auto)

    sp = sub.add_parser("verify", help="check a certificate against a problem")
    sp.add_argument("certificate")
    sp.add_argument("problem")
    sp.add_argument("--samples", type=int, default=N_SAMPLES)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tau-margin", type=float, default=1e-6)
    sp.add_argument("--tau-res", type=float, default=1e-6)
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("bound", help="print horizon bounds")
    sp.add_argument("problem")
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("export-sdpa", help="write the SDPA form of a program")
    sp.add_argument("problem")
    sp.add_argument("--degree", type=int, required=True)
    sp.add_argument("--program", choices=["disconnect", "connect"], default="disconnect")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("contour", help="CSV of v on a grid at chosen times")
    sp.add_argument("certificate")
    sp.add_argument("--times", type=float, nargs="+")
    sp.add_argument("--res", type=int, default=101)
    sp.add_argument("--bounds", type=float, nargs="+", help="lo1 hi1 [lo2 hi2]")
    sp.add_argument("--problem", help="take bounds from this problem's bounding box")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_contour)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ProblemError, ValueError, KeyError, OSError) as exc:
        print(f"pathcert: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
