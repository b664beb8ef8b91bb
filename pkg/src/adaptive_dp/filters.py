"""Fully adaptive privacy filter and classical composition formulas.

The filter halts an interaction as soon as the next declared round would
push ``sqrt(2 log(1/delta') V) + V/2`` past the epsilon budget, or the sum
of per-round deltas past ``delta''``. Only declared parameters are
inspected, so the stopping decision can be made before each round runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    CompositionState,
    EpsDelta,
    FilterConfig,
    PrivacyError,
    PrivacySpend,
    append_spend,
    validate_positive,
    validate_spend,
    validate_unit_open,
)

# Slack on threshold comparisons so that a candidate sitting exactly on the
# boundary (after float rounding of y*) is admitted.
REL_TOL = 1e-12


@dataclass(frozen=True)
class FilterDecision:
    admitted: bool
    projected_epsilon: float
    projected_delta_sum: float


def _log_inv(delta_prime: float) -> float:
    validate_unit_open(delta_prime, "delta_prime")
    return -math.log(delta_prime)


def filter_threshold(v, delta_prime: float):
    """f(v) = sqrt(2 log(1/delta') v) + v/2; accepts arrays."""
    c = _log_inv(delta_prime)
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise PrivacyError("intrinsic time must be nonnegative")
    out = np.sqrt(2.0 * c * v) + 0.5 * v
    return float(out) if out.ndim == 0 else out


def y_star(epsilon: float, delta_prime: float) -> float:
    """Intrinsic time at which the filter threshold reaches ``epsilon``.

    f is quadratic in sqrt(y): y/2 + c sqrt(y) = epsilon with
    c = sqrt(2 log(1/delta')), so sqrt(y) = sqrt(c^2 + 2 epsilon) - c.
    Written as 2 epsilon / (sqrt(c^2 + 2 epsilon) + c) to avoid cancellation.
    """
    validate_positive(epsilon, "epsilon")
    c2 = 2.0 * _log_inv(delta_prime)
    root = 2.0 * epsilon / (math.sqrt(c2 + 2.0 * epsilon) + math.sqrt(c2))
    return root * root


def y_star_printed(epsilon: float, delta_prime: float) -> float:
    """Variant with ``+ epsilon`` in the radicand; solves f(y) = epsilon / 2.

    Kept for side-by-side diagnostics only.
    """
    validate_positive(epsilon, "epsilon")
    c2 = 2.0 * _log_inv(delta_prime)
    return (math.sqrt(c2 + epsilon) - math.sqrt(c2)) ** 2


def y_star_bisect(epsilon: float, delta_prime: float, iterations: int = 200) -> float:
    """Root of f(y) = epsilon by bisection; independent check on ``y_star``."""
    validate_positive(epsilon, "epsilon")
    lo, hi = 0.0, 2.0 * epsilon  # f(2 eps) >= eps
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if filter_threshold(mid, delta_prime) < epsilon:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _within(value: float, limit: float) -> bool:
    return value <= limit + REL_TOL * max(1.0, abs(limit))


def filter_admits(state: CompositionState, candidate: PrivacySpend, cfg: FilterConfig) -> FilterDecision:
    validate_spend(candidate)
    v_next = state.v + candidate.epsilon**2
    projected_eps = filter_threshold(v_next, cfg.delta_prime)
    projected_delta = state.delta_sum + candidate.delta
    admitted = _within(projected_eps, cfg.epsilon_budget) and _within(projected_delta, cfg.delta_dprime)
    return FilterDecision(admitted, projected_eps, projected_delta)


def remaining_v(state: CompositionState, cfg: FilterConfig) -> float:
    """Largest extra squared epsilon the filter still admits from ``state``."""
    return max(0.0, y_star(cfg.epsilon_budget, cfg.delta_prime) - state.v)


def stopping_time(spends: Sequence[PrivacySpend], cfg: FilterConfig) -> int:
    """Number of leading spends the filter lets through.

    Equals the filter's stopping index when the breach happens inside
    ``spends``; otherwise ``len(spends)``.
    """
    state = CompositionState()
    for s in spends:
        if not filter_admits(state, s, cfg).admitted:
            return state.n
        state = append_spend(state, s)
    return state.n


def _check_pairs(epsilons: Sequence[float], deltas: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    eps = np.asarray(epsilons, dtype=float).reshape(-1)
    dels = np.asarray(deltas, dtype=float).reshape(-1)
    if eps.shape != dels.shape:
        raise PrivacyError("epsilons and deltas must have the same length")
    if np.any(~np.isfinite(eps)) or np.any(eps < 0):
        raise PrivacyError("epsilons must be finite and nonnegative")
    if np.any(dels < 0) or np.any(dels > 1):
        raise PrivacyError("deltas must lie in [0, 1]")
    return eps, dels


def advanced_composition(
    epsilons: Sequence[float], deltas: Sequence[float], delta_prime: float
) -> EpsDelta:
    """Advanced composition for parameters fixed in advance.

    eps = sqrt(2 log(1/delta') sum eps_m^2) + sum eps_m (e^eps_m - 1)/(e^eps_m + 1)
    """
    eps, dels = _check_pairs(epsilons, deltas)
    c = _log_inv(delta_prime)
    # (e^x - 1)/(e^x + 1) == tanh(x/2)
    total = math.sqrt(2.0 * c * float(np.sum(eps * eps))) + float(np.sum(eps * np.tanh(eps / 2.0)))
    return EpsDelta(total, min(1.0, delta_prime + float(np.sum(dels))))


def basic_composition(epsilons: Sequence[float], deltas: Sequence[float]) -> EpsDelta:
    eps, dels = _check_pairs(epsilons, deltas)
    return EpsDelta(float(np.sum(eps)), min(1.0, float(np.sum(dels))))


def dp_to_pdp(e: EpsDelta) -> EpsDelta:
    """(eps, delta)-DP implies (2 eps, 2 delta / (eps e^eps))-pDP."""
    if e.epsilon <= 0:
        raise PrivacyError("DP to pDP conversion needs epsilon > 0")
    return EpsDelta(2.0 * e.epsilon, min(1.0, 2.0 * e.delta / (e.epsilon * math.exp(e.epsilon))))


def lower_order_gap(epsilon):
    """eps^2/2 - eps tanh(eps/2): filter's drift term minus advanced composition's."""
    eps = np.asarray(epsilon, dtype=float)
    out = 0.5 * eps * eps - eps * np.tanh(eps / 2.0)
    return float(out) if out.ndim == 0 else out
