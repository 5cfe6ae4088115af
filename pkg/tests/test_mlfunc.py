import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import special

from fracmild import mlfunc
from fracmild.errors import (
    AccuracyLossError,
    DomainError,
    GammaOverflowError,
    ParameterError,
    PoleError,
)
from fracmild.mlfunc import MLParams, mittag_leffler

AT_ZERO_TESTS = [
    pytest.param(1.0, 1.0, id="exp"),
    pytest.param(1.5, 1.0, id="S kind"),
    pytest.param(1.5, 2.0, id="K kind"),
    pytest.param(1.5, 1.5, id="T kind"),
    pytest.param(0.5, 0.7, id="small alpha"),
    pytest.param(1.9, 3.3, id="large beta"),
]


@pytest.mark.dependency(name="ml_at_zero")
@pytest.mark.parametrize("alpha, beta", AT_ZERO_TESTS)
def test_value_at_zero(alpha, beta):
    value = mlfunc.ml_e(MLParams(alpha=alpha, beta=beta), 0.0)
    assert value == pytest.approx(1.0 / math.gamma(beta), abs=1e-13)


CLOSED_FORM_TESTS = [
    pytest.param(1.0, 1.0, np.linspace(-10, 10, 100), np.exp, id="E_1,1 = exp"),
    pytest.param(
        2.0,
        1.0,
        np.linspace(0, 10, 100),
        lambda z: np.cosh(np.sqrt(z)),
        id="E_2,1 = cosh sqrt",
    ),
    pytest.param(
        2.0,
        1.0,
        np.linspace(-10, 0, 100),
        lambda z: np.cos(np.sqrt(-z)),
        id="E_2,1 = cos sqrt",
    ),
    pytest.param(
        1.0,
        2.0,
        np.linspace(0.5, 10, 40),
        lambda z: np.expm1(z) / z,
        id="E_1,2 = expm1 / z",
    ),
    pytest.param(
        2.0,
        2.0,
        np.linspace(0.5, 10, 40),
        lambda z: np.sinh(np.sqrt(z)) / np.sqrt(z),
        id="E_2,2 = sinh sqrt / sqrt",
    ),
]


@pytest.mark.dependency(depends=["ml_at_zero"])
@pytest.mark.parametrize("alpha, beta, z, closed_form", CLOSED_FORM_TESTS)
def test_closed_forms(alpha, beta, z, closed_form):
    np.testing.assert_allclose(
        mittag_leffler(z, alpha, beta), closed_form(z), rtol=1e-10, atol=1e-10
    )


def test_keeps_argument_shape():
    z = np.linspace(-1, 1, 6).reshape(2, 3)
    assert mittag_leffler(z, 1.5, 1.0).shape == (2, 3)
    assert mittag_leffler(0.5, 1.5, 1.0).shape == ()


def test_large_positive_argument():
    np.testing.assert_allclose(
        mittag_leffler(np.array([50.0, 200.0]), 1.0, 1.0),
        np.exp([50.0, 200.0]),
        rtol=1e-10,
    )


def test_large_negative_argument_for_alpha_one():
    z = np.array([-15.0, -60.0])
    np.testing.assert_allclose(mittag_leffler(z, 1.0, 1.0), np.exp(z), atol=1e-15)
    np.testing.assert_allclose(
        mittag_leffler(z, 1.0, 2.0), np.expm1(z) / z, rtol=1e-12
    )


BRANCH_CUT_TESTS = [
    pytest.param(1.5, 1.0, -15.0, id="S kind, moderate"),
    pytest.param(1.5, 1.0, -60.0, id="S kind, far"),
    pytest.param(1.5, 2.0, -25.0, id="K kind"),
    pytest.param(1.5, 1.5, -25.0, id="T kind"),
    pytest.param(1.2, 1.0, -40.0, id="alpha near one"),
    pytest.param(1.8, 1.8, -30.0, id="alpha near two"),
    pytest.param(1.5, 3.0, -20.0, id="recurrence for large beta"),
]


@pytest.mark.dependency(depends=["ml_at_zero"])
@pytest.mark.parametrize("alpha, beta, z", BRANCH_CUT_TESTS)
def test_branch_cut_against_extended_precision(alpha, beta, z):
    expected = mlfunc.ml_e_reference(alpha, beta, z)
    assert mlfunc.ml_e(MLParams(alpha=alpha, beta=beta), z) == pytest.approx(
        expected, abs=1e-9
    )


def test_series_against_extended_precision():
    for z in (-9.5, -3.0, 0.25, 4.0, 9.0):
        assert mittag_leffler(z, 1.5, 1.5) == pytest.approx(
            mlfunc.ml_e_reference(1.5, 1.5, z), rel=1e-11, abs=1e-12
        )


def test_both_sides_of_the_series_limit_agree():
    below = mittag_leffler(-mlfunc.SERIES_LIMIT, 1.5, 1.0)
    above = mittag_leffler(-mlfunc.SERIES_LIMIT - 1e-9, 1.5, 1.0)
    assert float(below) == pytest.approx(float(above), abs=1e-8)


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
@pytest.mark.parametrize("beta", [1.0, 1.5, 2.0])
def test_small_arguments_match_a_plain_partial_sum(alpha, beta):
    z = np.linspace(-1.0, 1.0, 41)
    k = np.arange(100)
    partial = np.sum(z[:, None] ** k * special.rgamma(alpha * k + beta), axis=1)
    np.testing.assert_allclose(mittag_leffler(z, alpha, beta), partial, atol=1e-12)


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
@pytest.mark.parametrize("beta", [1.0, 1.5, 2.0])
def test_recurrence_in_beta(alpha, beta):
    # E_{α,β}(z) = z E_{α,α+β}(z) + 1/Γ(β)
    z = np.array([-19.5, -12.0, -5.0, 0.5, 7.0, 15.0, 19.5])
    value = mittag_leffler(z, alpha, beta)
    shifted = z * mittag_leffler(z, alpha, alpha + beta) + 1.0 / math.gamma(beta)
    assert np.all(np.abs(value - shifted) <= 1e-10 * np.maximum(1.0, np.abs(value)))


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_bounded_on_the_negative_axis(alpha):
    z = np.linspace(-60.0, 0.0, 121)
    for beta in (1.0, 2.0, alpha):
        values = mittag_leffler(z, alpha, beta)
        assert np.all(np.abs(values) <= 1.0 / math.gamma(beta) + 1.0)


LAPLACE_TESTS = [
    pytest.param(1.5, 1.0, -1.0, 2.0, id="S kind, decaying"),
    pytest.param(1.5, 2.0, -1.0, 1.0, id="K kind, decaying"),
    pytest.param(1.5, 1.5, -1.0, 1.5, id="T kind, decaying"),
    pytest.param(1.2, 1.2, 0.5, 2.0, id="growing"),
    pytest.param(1.8, 1.0, -4.0, 1.5, id="oscillating"),
    pytest.param(1.5, 1.5, 1.0, 3.0, id="growing T kind"),
    pytest.param(1.5, 1.0, 0.0, 1.0, id="zero omega"),
    pytest.param(1.0, 1.0, 1.0, 2.0, id="exponential"),
    pytest.param(1.5, 1.5, 1.0, 2.0, id="growing T kind, steeper"),
    pytest.param(2.0, 1.0, 4.0, 3.0, id="hyperbolic cosine"),
    pytest.param(1.3, 1.0, -1.0, 1.0, id="S kind, alpha 1.3"),
    pytest.param(1.3, 1.3, -2.0, 2.0, id="T kind, alpha 1.3"),
    pytest.param(1.7, 2.0, -0.5, 1.0, id="K kind, slow decay"),
    pytest.param(1.9, 1.9, 0.5, 1.5, id="T kind near two"),
    pytest.param(1.2, 2.0, 1.0, 2.5, id="K kind, growing"),
    pytest.param(1.4, 1.0, 2.0, 3.0, id="S kind, growing"),
    pytest.param(1.6, 1.6, -3.0, 2.0, id="T kind, fast decay"),
    pytest.param(1.5, 2.5, -1.0, 1.0, id="beta above alpha plus one"),
    pytest.param(1.8, 1.5, 0.0, 0.5, id="zero omega, small lambda"),
    pytest.param(1.25, 1.75, 0.25, 1.0, id="mixed orders"),
]


@pytest.mark.dependency(depends=["ml_at_zero"])
@pytest.mark.parametrize("alpha, beta, omega, lam", LAPLACE_TESTS)
def test_laplace_transform_identity(alpha, beta, omega, lam):
    lhs, rhs = mlfunc.ml_laplace_check(MLParams(alpha=alpha, beta=beta), omega, lam)
    assert abs(lhs - rhs) <= 1e-6


LAPLACE_DOMAIN_TESTS = [
    pytest.param(1.0, 1.0, id="lambda at the abscissa"),
    pytest.param(4.0, 1.5, id="lambda below the abscissa"),
    pytest.param(-1.0, 0.0, id="lambda zero"),
    pytest.param(-1.0, -2.0, id="lambda negative"),
]


@pytest.mark.parametrize("omega, lam", LAPLACE_DOMAIN_TESTS)
def test_laplace_check_domain(omega, lam):
    with pytest.raises(DomainError):
        mlfunc.ml_laplace_check(MLParams(alpha=1.5, beta=1.0), omega, lam)


def test_laplace_transform_of_a_power():
    # ∫ e^{-λt} t^{1/2} dt = Γ(3/2) / λ^{3/2}
    value = mlfunc.laplace_transform(np.sqrt, 2.0, rate=2.0)
    assert value == pytest.approx(math.gamma(1.5) / 2.0**1.5, rel=1e-10)


INVALID_PARAMS = [
    pytest.param(0.0, 1.0, id="alpha zero"),
    pytest.param(-1.0, 1.0, id="alpha negative"),
    pytest.param(1.5, 0.0, id="beta zero"),
    pytest.param(float("nan"), 1.0, id="alpha nan"),
    pytest.param(1.5, float("inf"), id="beta infinite"),
]


@pytest.mark.parametrize("alpha, beta", INVALID_PARAMS)
def test_invalid_params(alpha, beta):
    with pytest.raises(ValidationError):
        MLParams(alpha=alpha, beta=beta)


def test_non_finite_argument():
    with pytest.raises(ParameterError):
        mittag_leffler(np.array([0.0, np.nan]), 1.5, 1.0)


def test_complex_argument():
    with pytest.raises(ParameterError):
        mlfunc.ml_e(MLParams(alpha=1.5, beta=1.0), 1j)  # type: ignore


def test_large_negative_argument_needs_alpha_up_to_two():
    with pytest.raises(AccuracyLossError):
        mittag_leffler(-50.0, 2.5, 1.0)


GAMMA_ERRORS = [
    pytest.param(0.0, PoleError, id="pole at zero"),
    pytest.param(-3.0, PoleError, id="pole at negative integer"),
    pytest.param(200.0, GammaOverflowError, id="overflow"),
    pytest.param(float("inf"), ParameterError, id="infinite"),
]


@pytest.mark.parametrize("x, error", GAMMA_ERRORS)
def test_gamma_errors(x, error):
    with pytest.raises(error):
        mlfunc.gamma(x)


def test_gamma_values():
    assert mlfunc.gamma(5.0) == pytest.approx(24.0, rel=1e-15)
    assert mlfunc.gamma(-0.5) == pytest.approx(-2.0 * math.sqrt(math.pi), rel=1e-14)
