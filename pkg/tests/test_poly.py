import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathcert.poly import (
    MonomialBasis,
    Polynomial,
    basis,
    differentiate,
    evaluate,
    gram_size,
    lie_derivative,
    single_integrator_field,
    tx_space,
    txu_space,
    x_space,
)

X2 = x_space(2)


def xs(space=X2):
    return [Polynomial.variable(v, space) for v in space]


def test_power_rule():
    x1, x2 = xs()
    assert differentiate(x1**2 * x2, "x1") == 2 * x1 * x2


def test_derivative_of_time():
    t = Polynomial.variable("t", tx_space(1))
    assert differentiate(t, "t") == Polynomial.constant(tx_space(1), 1.0)


def test_derivative_of_absent_variable_is_zero():
    x1, _ = xs()
    assert differentiate(x1**2, "x2").is_zero()


def test_unknown_variable_rejected():
    x1, _ = xs()
    with pytest.raises(KeyError):
        differentiate(x1, "u1")


def test_zero_polynomial_degree():
    assert Polynomial.zero(X2).degree() == 0


def test_no_stored_zeros():
    x1, _ = xs()
    p = x1 - x1
    assert p.terms == {}


def test_space_mismatch_rejected():
    with pytest.raises(ValueError):
        Polynomial.variable("x1", x_space(1)) + Polynomial.variable("t", tx_space(1))


@pytest.mark.parametrize(
    "v, expected",
    [
        (lambda t, x: t, lambda t, x, u: Polynomial.constant(txu_space(1), 1.0)),
        (lambda t, x: x, lambda t, x, u: u),
        (lambda t, x: x * x, lambda t, x, u: 2 * x * u),
    ],
)
def test_lie_derivative_single_integrator(v, expected):
    t, x = xs(tx_space(1))
    T, X, U = xs(txu_space(1))
    got = lie_derivative(v(t, x), single_integrator_field(1))
    assert got == expected(T, X, U)


def test_lie_derivative_dimension_mismatch():
    t, x = xs(tx_space(1))
    with pytest.raises(ValueError):
        lie_derivative(t * x, single_integrator_field(2))


@pytest.mark.parametrize("nv, d, expected", [(7, 6, 1716), (4, 6, 210), (5, 0, 1), (2, 2, 6)])
def test_gram_size(nv, d, expected):
    assert gram_size(nv, d) == expected
    assert len(MonomialBasis(tuple(f"y{i}" for i in range(nv)), d)) == expected


def test_basis_order_is_grlex():
    b = list(basis(tx_space(1), 2))
    assert b == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_evaluate_examples():
    x1 = Polynomial.variable("x1", x_space(1))
    assert evaluate(x1**2 + 2, [3.0]) == 11.0
    assert evaluate(Polynomial.zero(x_space(1)), [0.7]) == 0.0
    assert evaluate(0.01 - x1**2, [0.1]) == pytest.approx(0.0, abs=1e-15)


def test_evaluate_length_mismatch():
    with pytest.raises(ValueError):
        evaluate(Polynomial.variable("x1", X2), [1.0])


def test_canonical_text():
    x1, x2 = xs()
    assert str(2 * x1**2 * x2 - x1 + 3) == "3 - 1 * x1 + 2 * x1^2 x2"


def test_json_round_trip():
    x1, x2 = xs()
    p = 0.25 * x1**3 - x2 + 1.5
    assert Polynomial.from_json(p.to_json(), X2) == p


# property checks

coef = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


@st.composite
def polys(draw, space=X2, max_deg=3):
    n = len(space)
    k = draw(st.integers(0, 6))
    terms = {}
    for _ in range(k):
        e = tuple(draw(st.integers(0, max_deg)) for _ in range(n))
        terms[e] = draw(coef)
    return Polynomial(space, terms)


points = st.lists(st.floats(-1.5, 1.5, allow_nan=False), min_size=2, max_size=2)


@given(polys(), polys(), points)
def test_evaluation_is_multiplicative(p, q, pt):
    lhs = evaluate(p * q, pt)
    rhs = evaluate(p, pt) * evaluate(q, pt)
    assert math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-12 * (1 + abs(rhs)) * 50)


@given(polys(), polys())
def test_derivative_is_additive(p, q):
    assert (differentiate(p + q, "x1")).allclose(differentiate(p, "x1") + differentiate(q, "x1"), 1e-12)


@given(polys())
def test_mixed_partials_commute(p):
    a = differentiate(differentiate(p, "x1"), "x2")
    b = differentiate(differentiate(p, "x2"), "x1")
    assert a.allclose(b, 1e-12)


@given(st.integers(1, 4), st.integers(0, 5))
def test_basis_strictly_increasing(nv, d):
    space = tuple(f"y{i}" for i in range(nv))
    b = list(basis(space, d))
    assert len(b) == gram_size(nv, d)
    keys = [(sum(e), tuple(-x for x in e)) for e in b]
    assert all(k1 < k2 for k1, k2 in zip(keys, keys[1:]))


@settings(max_examples=40)
@given(polys(tx_space(2), max_deg=2), st.lists(st.floats(-1, 1), min_size=5, max_size=5))
def test_lie_matches_finite_differences(v, vals):
    t0, x1, x2, u1, u2 = vals
    lie = lie_derivative(v, single_integrator_field(2))
    exact = lie(t0, x1, x2, u1, u2)
    errs = []
    for h in (1e-3, 5e-4):
        fd = (v(t0 + h, x1 + u1 * h, x2 + u2 * h) - v(t0, x1, x2)) / h
        errs.append(abs(fd - exact))
    scale = 1 + v.max_abs_coef() * 50
    assert errs[1] <= scale * 5e-4 + 1e-9
