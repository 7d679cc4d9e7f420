import json
import random

import numpy as np
import pytest

import oracles
from pathcert import examples
from pathcert.sdp import (
    RecordedBackend,
    SdpBuilder,
    SdpError,
    SolverConfig,
    Status,
    export_sdpa,
    psd_project,
    residual_and_eig,
    solve,
)
from pathcert.sos import build_disconnect

BACKENDS = ["clarabel", "cvxopt"]


def scalar_problem(rhs):
    b = SdpBuilder()
    k = b.add_block("X", 1)
    b.add_equality({(k, 0, 0): 1.0}, rhs)
    return b.build()


@pytest.mark.parametrize("backend", BACKENDS)
def test_unit_scalar_is_feasible(backend):
    sol = solve(scalar_problem(1.0), SolverConfig(backend=backend))
    assert sol.status == Status.FEASIBLE
    assert sol.block_values[0][0, 0] == pytest.approx(1.0, abs=1e-7)
    assert sol.residual is not None and sol.min_eig is not None


@pytest.mark.parametrize("backend", BACKENDS)
def test_negative_scalar_is_infeasible(backend):
    assert solve(scalar_problem(-1.0), SolverConfig(backend=backend)).status == Status.INFEASIBLE


def test_empty_problem_is_feasible():
    assert solve(SdpBuilder().build()).status == Status.FEASIBLE


def test_out_of_range_index_rejected():
    b = SdpBuilder()
    k = b.add_block("X", 2)
    b.add_equality({(k, 0, 5): 1.0}, 1.0)
    with pytest.raises(SdpError):
        b.build()


def test_non_finite_data_rejected():
    b = SdpBuilder()
    k = b.add_block("X", 1)
    b.add_equality({(k, 0, 0): float("nan")}, 1.0)
    with pytest.raises(SdpError):
        b.build()


def test_unknown_backend_name():
    with pytest.raises(ValueError):
        solve(scalar_problem(1.0), SolverConfig(backend="nope"))


def test_backend_env_variable(monkeypatch):
    monkeypatch.setenv("DISCONNECT_SDP_BACKEND", "cvxopt")
    sol = solve(scalar_problem(1.0))
    assert sol.meta["solver"] == "cvxopt"


def test_backend_crash_becomes_unknown():
    class Boom:
        name = "boom"

        def solve(self, problem, cfg):
            raise FloatingPointError("kaput")

    assert solve(scalar_problem(1.0), backend=Boom()).status == Status.UNKNOWN


def test_toy_export_matches_hand_written_file():
    assert export_sdpa(scalar_problem(1.0)) == "1\n1\n1\n1.0\n1 1 1 1 1.0\n"


def test_empty_export_is_header_only():
    assert export_sdpa(SdpBuilder().build()) == "0\n0\n\n\n"


def test_export_round_trips_through_independent_reader():
    sdp, _ = build_disconnect(examples.load("arc_cut"), 2)
    doc = oracles.read_sdpa(export_sdpa(sdp))
    assert doc["m"] == sdp.n_rows
    assert doc["sizes"] == [n for _, n in sdp.blocks] + [2] * len(sdp.free_vars)


def test_export_is_stable_under_row_permutation():
    rows = [({(0, 0, 0): 1.0, (1, 0, 1): 2.0}, 1.0), ({(1, 1, 1): 1.0}, 0.5), ({(0, 0, 0): 3.0}, 3.0)]
    texts = set()
    for seed in range(4):
        random.Random(seed).shuffle(rows)
        b = SdpBuilder()
        b.add_block("a", 1)
        b.add_block("b", 2)
        for coefs, rhs in rows:
            b.add_equality(coefs, rhs)
        texts.add(export_sdpa(b.build()))
    assert len(texts) == 1


def test_duplicate_rows_collapse():
    b = SdpBuilder()
    k = b.add_block("X", 1)
    b.add_equality({(k, 0, 0): 1.0}, 1.0)
    b.add_equality({(k, 0, 0): 1.0}, 1.0)
    assert b.build().n_rows == 1


def test_psd_project_examples():
    P, w = psd_project(np.diag([1.0, -0.5]))
    assert np.allclose(P, np.diag([1.0, 0.0])) and w == pytest.approx(-0.5)
    P, w = psd_project(np.eye(3))
    assert np.allclose(P, np.eye(3)) and w == pytest.approx(1.0)


def test_psd_project_small_perturbation():
    rng = np.random.default_rng(0)
    G = rng.standard_normal((6, 6))
    M = G @ G.T
    E = rng.standard_normal((6, 6))
    M2 = M + 1e-10 * (E + E.T) / 2
    P, _ = psd_project(M2)
    assert np.abs(P - M2).max() <= 1e-9


def test_psd_project_rejects_asymmetric():
    with pytest.raises(ValueError):
        psd_project(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_solve_is_deterministic():
    sdp, _ = build_disconnect(examples.load("hyperelliptic_curve"), 1)
    statuses = {solve(sdp).status for _ in range(3)}
    assert statuses == {Status.FEASIBLE}


def test_reported_residual_matches_recomputation():
    sdp, _ = build_disconnect(examples.load("slanted_cut"), 2)
    cfg = SolverConfig()
    sol = solve(sdp, cfg)
    assert sol.status == Status.FEASIBLE
    res, eig = residual_and_eig(sdp, sol.free_values, sol.block_values)
    # independent recomputation through the SDPA text
    doc = oracles.read_sdpa(export_sdpa(sdp))
    Y = [B for B in sol.block_values] + [np.diag([max(f, 0.0), max(-f, 0.0)]) for f in sol.free_values]
    lhs = np.array([sum(np.sum(doc["F"][k][b] * Y[b]) for b in range(len(Y))) for k in range(1, doc["m"] + 1)])
    indep = np.abs(lhs - np.array(doc["rhs"])).max()
    assert abs(indep - sol.residual) <= 10 * cfg.tol
    assert abs(eig - sol.min_eig) <= 10 * cfg.tol


def test_recorded_backend_replays_cvxopt_solution(fixtures_dir):
    sdp, dec = build_disconnect(examples.load("hyperelliptic_curve"), 1)
    records = json.loads((fixtures_dir / "recorded_hyperelliptic_d1.json").read_text())
    sol = solve(sdp, SolverConfig(), RecordedBackend(records))
    assert sol.status == Status.FEASIBLE
    assert sol.value(dec.lam_key) >= 1e-6


def test_recorded_backend_without_record_is_unknown():
    assert solve(scalar_problem(1.0), backend=RecordedBackend({})).status == Status.UNKNOWN
