import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hnspectral import DegenerateInput, NotHerglotz, OmegaVector, PoleProximity, RationalHNFunction, RealPolynomial
from hnspectral.hn_functions import (
    evaluate,
    evaluate_derivative,
    index,
    omega_poly,
    omega_to_hn,
    polynomial_roots,
    resultant,
    up_down,
)

from conftest import CONST2, LINEAR, ONE_POLE


@st.composite
def hn_functions(draw, max_d=4):
    d = draw(st.integers(0, max_d))
    h0 = draw(st.one_of(st.just(0.0), st.floats(0.1, 5.0)))
    h = draw(st.floats(-5.0, 5.0))
    gaps = draw(st.lists(st.floats(0.2, 2.0), min_size=d, max_size=d))
    start = draw(st.floats(-4.0, 1.0))
    hk = start + np.cumsum(gaps) if d else []
    deltas = draw(st.lists(st.floats(0.1, 3.0), min_size=d, max_size=d))
    return RationalHNFunction(h0, h, tuple(zip(map(float, hk), deltas)))


def _away_from_poles(f, lam, gap=1e-3):
    return all(abs(lam - hk) > gap for hk, _ in f.poles)


# --- examples --------------------------------------------------------------------


@pytest.mark.parametrize(
    "f, lam, expected",
    [(CONST2, 5.0, 2.0), (LINEAR, 3.0, 3.0), (ONE_POLE, 0.0, 0.5)],
)
def test_evaluate_examples(f, lam, expected):
    assert evaluate(f, lam) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize(
    "f, lam, expected",
    [(CONST2, 7.0, 0.0), (LINEAR, 7.0, 1.0), (ONE_POLE, 0.0, 0.25)],
)
def test_derivative_examples(f, lam, expected):
    assert evaluate_derivative(f, lam) == pytest.approx(expected, abs=1e-15)


def test_evaluation_near_pole_raises():
    with pytest.raises(PoleProximity):
        evaluate(ONE_POLE, 2.0)
    with pytest.raises(PoleProximity):
        evaluate_derivative(ONE_POLE, 2.0 + 1e-12)
    assert evaluate(ONE_POLE, 2.0 + 1e-6) == pytest.approx(-1e6, rel=1e-9)


@pytest.mark.parametrize(
    "f, up, down",
    [(CONST2, (2.0,), (1.0,)), (LINEAR, (0.0, 1.0), (1.0,)), (ONE_POLE, (1.0,), (2.0, -1.0))],
)
def test_up_down_examples(f, up, down):
    u, d = up_down(f)
    assert u.coeffs == pytest.approx(up)
    assert d.coeffs == pytest.approx(down)


def test_up_down_scales_by_inverse_slope():
    f = RationalHNFunction(h0=2.0, h=1.0, poles=((0.0, 3.0),))
    up, down = up_down(f)
    # f_down = (1/2)(0 - lam), f_up = f * f_down
    assert down.coeffs == pytest.approx((0.0, -0.5))
    for lam in (-1.3, 0.7, 4.0):
        assert up(lam) / down(lam) == pytest.approx(f(lam), rel=1e-14)


@pytest.mark.parametrize(
    "f, expected",
    [(CONST2, 0), (LINEAR, 1), (RationalHNFunction(1.0, 0.0, ((2.0, 1.0),)), 3), (ONE_POLE, 2)],
)
def test_index_examples(f, expected):
    assert index(f) == expected
    assert f.index == expected


@pytest.mark.parametrize(
    "f, omegas",
    [(CONST2, [-2.0]), (LINEAR, [1.0, 0.0]), (ONE_POLE, [0.0, -2.0, 1.0])],
)
def test_omega_poly_examples(f, omegas):
    w = omega_poly(f)
    assert w.ind_f == index(f)
    assert list(w.omegas) == pytest.approx(omegas, abs=1e-15)


@pytest.mark.parametrize(
    "omegas, f",
    [([-2.0], CONST2), ([1.0, 0.0], LINEAR), ([0.0, -2.0, 1.0], ONE_POLE)],
)
def test_omega_to_hn_examples(omegas, f):
    g = omega_to_hn(OmegaVector(len(omegas) - 1, tuple(omegas)))
    assert g.h0 == pytest.approx(f.h0, abs=1e-14)
    assert g.h == pytest.approx(f.h, abs=1e-14)
    assert len(g.poles) == len(f.poles)
    for (a, b), (c, d) in zip(g.poles, f.poles):
        assert a == pytest.approx(c, rel=1e-14)
        assert b == pytest.approx(d, rel=1e-14)


def test_omega_to_hn_rejects_non_herglotz():
    # f_down = 2 - lam with residue of the wrong sign
    with pytest.raises(NotHerglotz):
        omega_to_hn(OmegaVector(2, (0.0, -2.0, -1.0)))
    # odd index with negative slope
    with pytest.raises(NotHerglotz):
        omega_to_hn(OmegaVector(1, (-1.0, 0.0)))
    # f_down = 1 + lam^2 has no real roots
    with pytest.raises(NotHerglotz):
        omega_to_hn(OmegaVector(4, (0.0, 1.0, 0.0, 1.0, 0.0)))


@pytest.mark.parametrize(
    "p, q, expected",
    [
        (RealPolynomial((0.0, 1.0)), RealPolynomial((1.0,)), 1.0),
        (RealPolynomial((2.0, -1.0)), RealPolynomial((1.0,)), 1.0),
        (RealPolynomial((-1.0, 1.0)), RealPolynomial((-1.0, 1.0)), 0.0),
    ],
)
def test_resultant_examples(p, q, expected):
    assert resultant(p, q) == pytest.approx(expected, abs=1e-15)


def test_resultant_matches_root_product():
    # res(p, q) = lead(p)^deg q * prod q(roots of p)
    p = RealPolynomial.from_roots([1.0, -2.0, 0.5], lead=3.0)
    q = RealPolynomial.from_roots([4.0, 0.25], lead=-2.0)
    expected = 3.0**2 * np.prod([q(r) for r in (1.0, -2.0, 0.5)])
    assert abs(resultant(p, q)) == pytest.approx(abs(expected), rel=1e-12)


def test_resultant_degenerate():
    with pytest.raises(DegenerateInput):
        resultant(RealPolynomial(), RealPolynomial((0.0, 0.0)))
    assert resultant(RealPolynomial(), RealPolynomial((1.0, 1.0))) == 0.0
    # Neumann data: f_up = 0 against f_down = 1 is an empty Sylvester determinant
    assert resultant(RealPolynomial((1.0,)), RealPolynomial()) == 1.0


def test_real_polynomial_canonical_form():
    p = RealPolynomial((1.0, 2.0, 0.0, 0.0))
    assert p.coeffs == (1.0, 2.0)
    assert p.degree == 1
    assert RealPolynomial((0.0, 0.0)).degree == -1
    a, b = divmod(RealPolynomial.from_roots([1.0, 2.0, 3.0]), RealPolynomial.from_roots([2.0]))
    assert a.coeffs == pytest.approx(RealPolynomial.from_roots([1.0, 3.0]).coeffs)
    assert b.is_zero() or abs(b.coeffs[0]) < 1e-14


def test_polynomial_roots_polished():
    roots = [-3.0, -0.5, 0.25, 2.0, 7.0]
    found = np.sort(polynomial_roots(RealPolynomial.from_roots(roots).coeffs).real)
    assert found == pytest.approx(roots, abs=1e-12)


def test_serialization_round_trip():
    f = RationalHNFunction(0.5, -1.0, ((-1.0, 0.5), (3.0, 2.0)))
    assert f.to_dict() == {"h0": 0.5, "h": -1.0, "poles": [{"hk": -1.0, "delta": 0.5}, {"hk": 3.0, "delta": 2.0}]}
    assert RationalHNFunction.from_dict(f.to_dict()) == f


def test_constructor_validation():
    with pytest.raises(NotHerglotz):
        RationalHNFunction(h0=-1.0)
    with pytest.raises(NotHerglotz):
        RationalHNFunction(poles=((0.0, -1.0),))
    with pytest.raises(NotHerglotz):
        RationalHNFunction(poles=((1.0, 1.0), (0.0, 1.0)))


# --- properties ------------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(hn_functions(), st.floats(-20.0, 20.0))
def test_herglotz_monotonicity(f, lam):
    if _away_from_poles(f, lam):
        assert evaluate_derivative(f, lam) >= 0.0


@settings(max_examples=200, deadline=None)
@given(hn_functions(), st.floats(-20.0, 20.0))
def test_up_down_consistency(f, lam):
    if _away_from_poles(f, lam, 1e-2):
        up, down = up_down(f)
        value = evaluate(f, lam)
        # Monomial-basis evaluation carries a relative error of order n * eps * kappa,
        # kappa = sum |c_i| |lam|^i / |p(lam)|; that term is added to the fixed bound.
        powers = abs(lam) ** np.arange(len(up.coeffs))
        kappa_up = np.dot(np.abs(up.coeffs), powers) / max(abs(up(lam)), 1e-300)
        powers = abs(lam) ** np.arange(len(down.coeffs))
        kappa_down = np.dot(np.abs(down.coeffs), powers) / abs(down(lam))
        rounding = 4 * (f.d + 2) * np.finfo(float).eps * (kappa_up + kappa_down) * abs(value)
        assert abs(value - up(lam) / down(lam)) < 1e-12 * (1.0 + abs(value)) + rounding


@settings(max_examples=200, deadline=None)
@given(hn_functions())
def test_omega_poly_is_monic_of_right_degree(f):
    p = omega_poly(f).polynomial()
    assert p.degree == index(f) + 1
    assert p.lead == 1.0


@settings(max_examples=200, deadline=None)
@given(hn_functions())
def test_omega_round_trip(f):
    g = omega_to_hn(omega_poly(f))
    assert g.h0 == pytest.approx(f.h0, rel=1e-9, abs=1e-9)
    assert g.h == pytest.approx(f.h, rel=1e-9, abs=1e-9)
    assert g.d == f.d
    for (a, b), (c, d) in zip(g.poles, f.poles):
        assert a == pytest.approx(c, rel=1e-9, abs=1e-9)
        assert b == pytest.approx(d, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(hn_functions())
def test_up_down_are_coprime(f):
    up, down = up_down(f)
    assert resultant(down, up) != 0.0
