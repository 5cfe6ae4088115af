"""
Gamma and two-parameter Mittag-Leffler functions.

    E_{α,β}(z) = Σ_{k≥0} z^k / Γ(αk + β)

Arguments with |z| below SERIES_LIMIT are summed directly with a compensated
(Kahan) sum. Large positive arguments use the same series with terms formed in
log space. Large negative arguments, where the series cancels catastrophically,
use the Hankel representation collapsed onto the negative real axis: for
1 < α ≤ 2 the two poles s^α = z lie on the principal sheet and contribute
residues, and the branch cut leaves a real integral that is smooth enough for
adaptive vector quadrature over all requested arguments at once.
"""

import math
from typing import Callable

import mpmath
import numpy as np
from pydantic import BaseModel, validator
from scipy import integrate, special

from fracmild.errors import (
    AccuracyLossError,
    DomainError,
    GammaOverflowError,
    ParameterError,
    PoleError,
)
from fracmild.log import get_logger

logger = get_logger(__name__)

SERIES_LIMIT = 10.0
MAX_TERMS = 2000
CUT_UPPER = 60.0
CUT_TOLERANCE = 1e-10


class MLParams(BaseModel):
    alpha: float
    beta: float

    @validator("alpha", "beta")
    def check_positive(cls, value: float) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError("must be a finite positive number")
        return value

    class Config:
        frozen = True


def gamma(x: float) -> float:
    if not math.isfinite(x):
        raise ParameterError(f"gamma argument must be finite, got {x!r}")
    if x <= 0 and float(x).is_integer():
        raise PoleError(f"gamma has a pole at {x!r}")
    value = float(special.gamma(x))
    if not math.isfinite(value):
        raise GammaOverflowError(f"gamma({x!r}) exceeds the floating point range")
    return value


def _series_limit(alpha: float) -> float:
    # cancellation in the alternating series grows like exp(|z|^(1/α))
    if alpha >= 1.0:
        return SERIES_LIMIT
    return SERIES_LIMIT**alpha


def _series(z: np.ndarray, alpha: float, beta: float, *, log_terms: bool) -> np.ndarray:
    absmax = float(np.max(np.abs(z)))
    k_peak = 1
    if absmax > 1.0:
        k_peak = math.ceil(absmax ** (1.0 / alpha) / alpha) + 1
    log_z = np.log(z) if log_terms else None

    total = np.zeros_like(z)
    compensation = np.zeros_like(z)
    quiet = 0
    for k in range(MAX_TERMS):
        if log_z is not None:
            term = np.exp(k * log_z - special.gammaln(alpha * k + beta))
        else:
            term = z**k * special.rgamma(alpha * k + beta)
        y = term - compensation
        t = total + y
        compensation = (t - total) - y
        total = t
        if k < k_peak:
            continue
        if np.all(np.abs(term) <= 1e-17 * np.maximum(1.0, np.abs(total))):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
    raise AccuracyLossError(
        f"Mittag-Leffler series did not settle within {MAX_TERMS} terms "
        f"(alpha={alpha}, beta={beta}, max|z|={absmax})"
    )


def _hankel(z: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Residues plus real-axis cut integral, z < 0, 0 < α ≤ 2, β < 1 + α."""
    x = -z
    value = np.zeros_like(z)
    if alpha > 1.0:
        pole = x ** (1.0 / alpha) * np.exp(1j * math.pi / alpha)
        value += 2.0 / alpha * np.real(pole ** (1.0 - beta) * np.exp(pole))

    sin_b = math.sin(math.pi * beta)
    sin_ab = math.sin(math.pi * (alpha - beta))
    cos_a = math.cos(math.pi * alpha)

    def rational(r: float) -> np.ndarray:
        ra = r**alpha
        return (ra * sin_b + z * sin_ab) / (ra * ra - 2.0 * ra * z * cos_a + z * z)

    if beta > alpha:
        # r = w^q removes the r^(α-β) endpoint singularity
        q = 1.0 / (1.0 + alpha - beta)

        def integrand(w: float) -> np.ndarray:
            r = w**q
            return q * math.exp(-r) * rational(r)

        upper = CUT_UPPER ** (1.0 / q)
    else:

        def integrand(w: float) -> np.ndarray:
            return w ** (alpha - beta) * math.exp(-w) * rational(w)

        upper = CUT_UPPER

    cut, error = integrate.quad_vec(
        integrand,
        0.0,
        upper,
        epsabs=1e-14,
        epsrel=1e-12,
        norm="max",
        limit=4000,
    )
    if not error <= CUT_TOLERANCE:
        raise AccuracyLossError(
            f"branch cut quadrature error {error:.3e} exceeds {CUT_TOLERANCE:.0e}"
        )
    return value + np.asarray(cut) / math.pi


def _large_negative(z: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    if alpha > 2.0:
        raise AccuracyLossError(
            f"large negative arguments need 0 < alpha <= 2, got alpha={alpha}"
        )
    if alpha == 1.0:
        if beta == 1.0:
            return np.exp(z)
        if beta == 2.0:
            return np.expm1(z) / z
        raise AccuracyLossError(
            f"alpha=1 with beta={beta} is not supported below z={-SERIES_LIMIT}"
        )
    if beta >= 1.0 + alpha:
        # E_{α,β}(z) = (E_{α,β-α}(z) - 1/Γ(β-α)) / z
        lower = _large_negative(z, alpha, beta - alpha)
        return (lower - special.rgamma(beta - alpha)) / z
    return _hankel(z, alpha, beta)


def mittag_leffler(z, alpha: float, beta: float) -> np.ndarray:
    """Vectorized E_{α,β}(z) for real z, returned with the shape of ``z``."""
    params = MLParams(alpha=alpha, beta=beta)
    alpha, beta = params.alpha, params.beta
    z_arr = np.asarray(z, dtype=float)
    flat = z_arr.reshape(-1)
    if not np.all(np.isfinite(flat)):
        raise ParameterError("Mittag-Leffler arguments must be finite")
    out = np.empty_like(flat)
    if flat.size == 0:
        return out.reshape(z_arr.shape)

    limit = _series_limit(alpha)
    direct = np.abs(flat) <= limit
    growing = flat > limit
    decaying = flat < -limit
    if direct.any():
        out[direct] = _series(flat[direct], alpha, beta, log_terms=False)
    if growing.any():
        out[growing] = _series(flat[growing], alpha, beta, log_terms=True)
    if decaying.any():
        logger.debug(
            "E_{%s,%s}: %d argument(s) below %s via the branch cut",
            alpha,
            beta,
            int(decaying.sum()),
            -limit,
        )
        out[decaying] = _large_negative(flat[decaying], alpha, beta)
    if not np.all(np.isfinite(out)):
        raise AccuracyLossError(
            f"E_{{{alpha},{beta}}} is not representable for max z={flat.max()}"
        )
    return out.reshape(z_arr.shape)


def ml_e(params: MLParams, z: float) -> float:
    if isinstance(z, complex):
        raise ParameterError("complex arguments are not supported")
    return float(mittag_leffler(float(z), params.alpha, params.beta))


def ml_e_reference(
    alpha: float,
    beta: float,
    z: float,
    *,
    min_terms: int = 200,
    extra_digits: int = 30,
) -> float:
    """
    Truncated series in extended precision.

    The working precision covers the cancellation (about |z|^(1/α)/ln 10 digits)
    plus ``extra_digits``. Summation stops after ``min_terms`` once the terms
    decay geometrically and the tail bound |t_k|·ρ/(1-ρ) drops below the
    working epsilon.
    """
    lost = abs(z) ** (1.0 / alpha) / math.log(10.0) if z else 0.0
    dps = extra_digits + int(math.ceil(lost))
    with mpmath.workdps(dps):
        a, b, x = mpmath.mpf(alpha), mpmath.mpf(beta), mpmath.mpf(z)
        eps = mpmath.mpf(10) ** (-dps + 5)
        total = mpmath.mpf(0)
        previous = None
        for k in range(MAX_TERMS * 10):
            term = x**k * mpmath.rgamma(a * k + b)
            total += term
            if k >= min_terms and previous:
                ratio = abs(term / previous)
                if ratio < 0.5 and abs(term) * ratio / (1 - ratio) < eps * max(
                    1, abs(total)
                ):
                    return float(total)
            previous = term if term != 0 else previous
        raise AccuracyLossError(f"reference series for z={z} did not settle")


def laplace_transform(
    func: Callable[[np.ndarray], np.ndarray],
    lam: float,
    *,
    rate: float,
    frequency: float = 0.0,
    levels: int = 60,
    order: int = 20,
) -> float:
    """
    ∫_0^∞ e^{-λt} g(t) dt on a composite Gauss-Legendre mesh.

    ``rate`` is the net exponential decay of e^{-λt} g(t) and fixes the
    truncation point; ``frequency`` is the oscillation scale of g and fixes the
    panel width. Panels are graded geometrically towards t = 0, where g may
    carry algebraic singularities.
    """
    if rate <= 0:
        raise DomainError(f"the integrand must decay, got rate={rate}")
    t_max = 45.0 / rate
    split = min(1.0, t_max)
    edges = split * 0.5 ** np.arange(levels, -1, -1, dtype=float)
    width = 2.0 / (rate + frequency + 1.0)
    if t_max > split:
        count = int(math.ceil((t_max - split) / width))
        edges = np.concatenate([edges, np.linspace(split, t_max, count + 1)[1:]])

    x, w = special.roots_legendre(order)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    t = ((a + b)[:, None] * 0.5 + half[:, None] * x[None, :]).reshape(-1)
    weights = (half[:, None] * w[None, :]).reshape(-1)
    values = np.asarray(func(t), dtype=float)
    return float(np.sum(weights * np.exp(-lam * t) * values))


def ml_laplace_check(params: MLParams, omega: float, lam: float) -> tuple[float, float]:
    alpha, beta = params.alpha, params.beta
    if omega > 0:
        abscissa = omega ** (1.0 / alpha)
        if lam <= abscissa:
            raise DomainError(
                f"lambda={lam} must exceed omega^(1/alpha)={abscissa:.6g}"
            )
        rate = lam - abscissa
        if abscissa * 45.0 / rate > 650.0:
            raise DomainError("lambda is too close to omega^(1/alpha)")
    else:
        if lam <= 0:
            raise DomainError(f"lambda={lam} must be positive")
        rate = lam
    frequency = abs(omega) ** (1.0 / alpha)

    def integrand(t: np.ndarray) -> np.ndarray:
        return t ** (beta - 1.0) * mittag_leffler(omega * t**alpha, alpha, beta)

    lhs = laplace_transform(integrand, lam, rate=rate, frequency=frequency)
    rhs = lam ** (alpha - beta) / (lam**alpha - omega)
    return lhs, rhs
