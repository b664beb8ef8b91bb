"""Domain types and the running composition accumulator.

Everything here is an immutable value. The accountant only ever sees
declared privacy parameters, never data or mechanism outputs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable


class PrivacyError(ValueError):
    """Raised when a privacy parameter violates its declared domain."""


class SpendKind(str, enum.Enum):
    APPROX_DP = "dp"
    ZCDP = "zcdp"


@dataclass(frozen=True)
class PrivacySpend:
    """Declared privacy cost of a single round."""

    kind: SpendKind
    epsilon: float
    delta: float = 0.0

    @classmethod
    def dp(cls, epsilon: float, delta: float = 0.0) -> "PrivacySpend":
        return cls(SpendKind.APPROX_DP, float(epsilon), float(delta))

    @classmethod
    def zcdp(cls, epsilon: float) -> "PrivacySpend":
        return cls(SpendKind.ZCDP, float(epsilon), 0.0)


@dataclass(frozen=True)
class EpsDelta:
    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        if not (self.epsilon >= 0.0):
            raise PrivacyError(f"epsilon must be nonnegative, got {self.epsilon!r}")
        if not (0.0 <= self.delta <= 1.0):
            raise PrivacyError(f"delta must lie in [0, 1], got {self.delta!r}")


@dataclass(frozen=True)
class CompositionState:
    """Running sums over composed rounds.

    ``v`` is the intrinsic time (sum of squared epsilons), ``delta_sum`` the
    sum of approximation parameters and ``n`` the number of rounds.
    """

    v: float = 0.0
    delta_sum: float = 0.0
    n: int = 0


@dataclass(frozen=True)
class FilterConfig:
    """Global budget of a privacy filter.

    The total approximation parameter is ``delta_prime + delta_dprime``:
    ``delta_prime`` is spent on the martingale bound, ``delta_dprime`` caps
    the sum of per-round deltas.
    """

    epsilon_budget: float
    delta_prime: float
    delta_dprime: float = 0.0

    def __post_init__(self) -> None:
        if not (self.epsilon_budget > 0.0 and math.isfinite(self.epsilon_budget)):
            raise PrivacyError(f"epsilon_budget must be positive, got {self.epsilon_budget!r}")
        validate_unit_open(self.delta_prime, "delta_prime")
        if not (0.0 <= self.delta_dprime <= 1.0):
            raise PrivacyError(f"delta_dprime must lie in [0, 1], got {self.delta_dprime!r}")

    @property
    def total_delta(self) -> float:
        return self.delta_prime + self.delta_dprime


def validate_unit_open(value: float, name: str) -> float:
    if not (0.0 < value < 1.0):
        raise PrivacyError(f"{name} must lie in (0, 1), got {value!r}")
    return value


def validate_positive(value: float, name: str) -> float:
    if not (value > 0.0):
        raise PrivacyError(f"{name} must be positive, got {value!r}")
    return value


def validate_spend(s: PrivacySpend) -> PrivacySpend:
    """Return ``s`` unchanged if it is a legal spend, else raise PrivacyError."""
    try:
        kind = SpendKind(s.kind)
    except ValueError:
        raise PrivacyError(f"unknown spend kind {s.kind!r}") from None
    if not (math.isfinite(s.epsilon) and s.epsilon >= 0.0):
        raise PrivacyError(f"epsilon must be finite and nonnegative, got {s.epsilon!r}")
    if not (0.0 <= s.delta <= 1.0):
        raise PrivacyError(f"delta must lie in [0, 1], got {s.delta!r}")
    if kind is SpendKind.ZCDP and s.delta != 0.0:
        raise PrivacyError(f"zCDP spends carry delta = 0, got {s.delta!r}")
    return s


def append_spend(state: CompositionState, s: PrivacySpend) -> CompositionState:
    validate_spend(s)
    return CompositionState(
        v=state.v + s.epsilon * s.epsilon,
        delta_sum=state.delta_sum + s.delta,
        n=state.n + 1,
    )


def compose(spends: Iterable[PrivacySpend], state: CompositionState | None = None) -> CompositionState:
    """Fold ``append_spend`` over ``spends`` starting from ``state``."""
    state = CompositionState() if state is None else state
    for s in spends:
        state = append_spend(state, s)
    return state
