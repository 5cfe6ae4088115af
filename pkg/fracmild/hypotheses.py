"""
Computable parts of the existence results.

Three independent checks read the same LipschitzData:

- contraction: Δ = M [m l_i + m l_j + ∫_0^T l_f] < 1 (unique solution, Picard
  converges);
- Krasnoselskii (linear growth m_f): Θ = M ∫_0^T m_f < 1, with the radius
  r ≥ M [‖φ(0)‖ + ‖ϕ(0)‖ + m C_i + m C_j] / (1 - Θ);
- Leray-Schauder (growth m_f Ω_f): M ∫_0^T m_f < ∫_{C'}^∞ ds / Ω_f(s),
  C' = M [‖φ(0)‖ + ‖ϕ(0)‖ + m C_i + m C_j], truncated at s_max.
"""

import math
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate

from fracmild.errors import DomainError, ParameterError
from fracmild.log import get_logger
from fracmild.models import HypothesisReport, LipschitzData
from fracmild.operators import (
    BOUND_MARGIN,
    BOUND_POINTS,
    OperatorFunctionKind,
    SpectralOperator,
    bound_M,
    sectorial_ratio,
)

logger = get_logger(__name__)

# a tail carrying at least this share of an earlier decade counts as divergent
DIVERGENCE_SHARE = 0.5


def _bound(data: LipschitzData) -> float:
    if data.M is None:
        raise ParameterError("the operator bound M is missing")
    return data.M


def integrate_rate(rate: Union[float, Callable], T: float) -> float:
    """∫_0^T rate(s) ds; constants are integrated exactly."""
    if not callable(rate):
        return float(rate) * T
    value, _ = integrate.quad(lambda s: float(rate(s)), 0.0, T, limit=200)
    if value < 0:
        raise ParameterError(f"rate function integrates to {value} < 0")
    return value


def check_contraction(data: LipschitzData, T: float) -> tuple[float, bool]:
    M = _bound(data)
    delta = M * (data.m * data.l_i + data.m * data.l_j + integrate_rate(data.l_f, T))
    return delta, delta < 1.0


def _initial_size(data: LipschitzData) -> float:
    return _bound(data) * (
        data.phi0_norm + data.varphi0_norm + data.m * data.C_i + data.m * data.C_j
    )


def check_krasnoselskii(
    data: LipschitzData, T: float
) -> tuple[float, Optional[float], bool]:
    theta = _bound(data) * integrate_rate(data.m_f, T)
    if theta >= 1.0:
        return theta, None, False
    return theta, _initial_size(data) / (1.0 - theta), True


def _reciprocal_integral(omega: Callable, lower: float, upper: float) -> float:
    """∫_lower^upper ds / Ω(s) in the variable v = ln(1 + s - lower)."""
    if upper <= lower:
        return 0.0

    def integrand(v: float) -> float:
        grown = math.exp(v)
        return grown / float(omega(lower + grown - 1.0))

    value, _ = integrate.quad(integrand, 0.0, math.log1p(upper - lower), limit=400)
    return value


def check_leray_schauder(
    data: LipschitzData,
    T: float,
    s_max: float,
) -> tuple[float, float, bool, bool]:
    """(lhs, rhs, rhs_infinite, pass)."""
    if data.Omega_f is None:
        raise ParameterError("the growth function Omega_f is missing")
    lhs = _bound(data) * integrate_rate(data.m_f, T)
    c_prime = _initial_size(data)
    if not s_max > c_prime:
        raise DomainError(f"s_max={s_max} must exceed C'={c_prime}")
    omega = data.Omega_f
    # the earlier dyadic window starts at C' when it fits below s_max / 4
    start = min(max(c_prime, s_max / 2000.0), s_max / 4.0)
    nodes = np.array([start, c_prime, s_max])
    if np.any(np.asarray(omega(nodes), dtype=float) <= 0):
        raise ParameterError("Omega_f must be positive")

    rhs = _reciprocal_integral(omega, c_prime, s_max)
    tail = _reciprocal_integral(omega, s_max / 2.0, s_max)
    earlier = _reciprocal_integral(omega, start, 2.0 * start)
    infinite = tail >= DIVERGENCE_SHARE * earlier
    logger.debug("leray tail %.4g against earlier %.4g", tail, earlier)
    passed = math.isfinite(lhs) if infinite else lhs < rhs
    return lhs, rhs, infinite, passed


def check_sectorial(op: SpectralOperator) -> tuple[bool, float, bool]:
    """(accepted, sampled resolvent ratio, ratio within M) for a declared type."""
    params = op.sectorial_params
    if params is None:
        raise ParameterError("the operator declares no sectorial type")
    ratio = sectorial_ratio(op, params)
    logger.debug("sectorial ratio %.4g against M=%.4g", ratio, params.M)
    return op.accepted_as_sectorial, ratio, ratio <= params.M


def build_report(
    data: LipschitzData,
    T: float,
    *,
    op: Optional[SpectralOperator] = None,
    alpha: Optional[float] = None,
    bound_points: int = BOUND_POINTS,
    bound_margin: float = BOUND_MARGIN,
) -> HypothesisReport:
    """
    Run every check. Without a given M the bound is scanned from ``op``; a
    missing Ω_f skips the Leray-Schauder check.
    """
    source = "given"
    if data.M is None:
        if op is None or alpha is None:
            raise ParameterError("M is missing and no operator was given to scan")
        scanned = bound_M(
            op,
            alpha,
            T,
            list(OperatorFunctionKind),
            points=bound_points,
            margin=bound_margin,
        )
        data = data.copy(update={"M": scanned})
        source = "scan"
    M = _bound(data)

    delta, contraction = check_contraction(data, T)
    theta, r_min, krasnoselskii = check_krasnoselskii(data, T)
    verdicts = {
        "contraction": "pass" if contraction else "fail",
        "krasnoselskii": "pass" if krasnoselskii else "fail",
        "leray_schauder": "skipped",
    }
    lhs = M * integrate_rate(data.m_f, T)
    rhs, infinite = 0.0, False
    if data.Omega_f is not None:
        lhs, rhs, infinite, passed = check_leray_schauder(data, T, data.s_max)
        verdicts["leray_schauder"] = "pass" if passed else "fail"
    for name, verdict in verdicts.items():
        logger.info("%s: %s", name, verdict)
    sectorial: dict[str, object] = {}
    if op is not None and op.sectorial_params is not None:
        accepted, ratio, _ = check_sectorial(op)
        sectorial = {
            "sectorial_accepted": accepted,
            "sectorial_ratio": ratio,
            "sectorial_M": op.sectorial_params.M,
        }
    return HypothesisReport(
        M=M,
        M_source=source,
        delta=delta,
        theta=theta,
        r_min=r_min,
        C_prime=_initial_size(data),
        leray_lhs=lhs,
        leray_rhs=rhs,
        leray_rhs_infinite=infinite,
        s_max=data.s_max,
        verdicts=verdicts,
        **sectorial,
    )


def estimate_lipschitz(
    func: Callable[[np.ndarray], np.ndarray],
    dim: int,
    *,
    samples: int = 256,
    radius: float = 1.0,
    seed: int = 0,
) -> float:
    """Largest |f(x) - f(y)| / |x - y| over random pairs in a ball; a hint only."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-radius, radius, size=(samples, dim))
    y = x + rng.normal(scale=radius * 1e-2, size=(samples, dim))
    worst = 0.0
    for a, b in zip(x, y):
        distance = float(np.linalg.norm(a - b))
        if distance == 0:
            continue
        change = np.asarray(func(a), dtype=float) - np.asarray(func(b), dtype=float)
        worst = max(worst, float(np.linalg.norm(change)) / distance)
    return worst
