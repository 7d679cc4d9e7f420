import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pathcert import examples
from pathcert.horizon import HorizonBound, HorizonMethod, box_union_time_bound, kurdyka_time_bound, problem_bounds


@pytest.mark.parametrize("n, deg, expected", [(2, 2, 48.0), (2, 3, 168.0), (3, 2, 54 * math.pi)])
def test_kurdyka_closed_forms(n, deg, expected):
    assert kurdyka_time_bound(n, deg) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("n", range(2, 7))
@pytest.mark.parametrize("deg", range(2, 7))
def test_kurdyka_matches_exact_gamma(n, deg):
    assert kurdyka_time_bound(n, deg) == pytest.approx(oracles.kurdyka_reference(n, deg), rel=1e-12)


def test_kurdyka_is_monotone():
    grid = np.array([[kurdyka_time_bound(n, d) for d in range(2, 7)] for n in range(2, 7)])
    assert (np.diff(grid, axis=0) > 0).all()
    assert (np.diff(grid, axis=1) > 0).all()


@pytest.mark.parametrize("n, deg", [(1, 2), (2, 1), (0, 0)])
def test_kurdyka_domain(n, deg):
    with pytest.raises(ValueError):
        kurdyka_time_bound(n, deg)


def test_box_union_values():
    unit = [[0, 1], [0, 1]]
    assert box_union_time_bound([unit]) == pytest.approx(math.sqrt(2))
    assert box_union_time_bound([unit, [[0.5, 1.5], [0, 1]]]) == pytest.approx(2 * math.sqrt(2))
    assert box_union_time_bound([[[0, 3], [0, 4]]]) == pytest.approx(5.0)


def test_box_union_is_additive():
    a = [[[0, 1], [0, 2]]]
    b = [[[1, 4], [0, 1]], [[0, 1], [2, 3]]]
    assert box_union_time_bound(a + b) == pytest.approx(box_union_time_bound(a) + box_union_time_bound(b))


@pytest.mark.parametrize("boxes", [[], [[[1, 1]]], [[[0, 1], [2, 1]]]])
def test_box_union_rejects_bad_input(boxes):
    with pytest.raises(ValueError):
        box_union_time_bound(boxes)


def test_bound_must_be_positive():
    with pytest.raises(ValueError):
        HorizonBound(0.0, HorizonMethod.USER)


def test_problem_bounds_for_box_union():
    p = examples.load("univariate_gap")
    methods = {b.method: b for b in problem_bounds(p)}
    assert methods[HorizonMethod.USER].value == p.T
    assert methods[HorizonMethod.BOX_UNION].value == pytest.approx(0.6)
    assert HorizonMethod.KURDYKA not in methods


def test_problem_bounds_for_single_inequality():
    p = examples.load("slanted_cut")
    kur = [b for b in problem_bounds(p) if b.method == HorizonMethod.KURDYKA]
    assert len(kur) == 1
    assert kur[0].label == "lifted-variety bound"
    assert kur[0].to_json()["inputs"] == {"n": 2, "deg": p.X.components[0].ineqs[0].degree()}


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000))
def test_bound_exceeds_chain_path_length(k, seed):
    """A polyline through overlap centres stays in the union; its length is below the bound."""
    rng = np.random.default_rng(seed)
    boxes = []
    lo = rng.uniform(-1, 0, 2)
    for _ in range(k):
        hi = lo + rng.uniform(0.3, 1.0, 2)
        boxes.append(np.column_stack([lo, hi]))
        lo = lo + rng.uniform(0.05, 0.9, 2) * (hi - lo)
    first, last = boxes[0], boxes[-1]
    p = rng.uniform(first[:, 0], first[:, 1])
    q = rng.uniform(last[:, 0], last[:, 1])
    waypoints = [p]
    for a, b in zip(boxes[:-1], boxes[1:]):
        olo, ohi = np.maximum(a[:, 0], b[:, 0]), np.minimum(a[:, 1], b[:, 1])
        assert (olo < ohi).all()
        waypoints.append((olo + ohi) / 2)
    waypoints.append(q)
    length = sum(np.linalg.norm(b - a) for a, b in zip(waypoints[:-1], waypoints[1:]))
    assert length <= box_union_time_bound([b.tolist() for b in boxes]) + 1e-12
