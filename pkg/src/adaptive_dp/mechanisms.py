"""Worst-case privacy-loss samplers and adaptive adversaries.

Randomized response realizes the extremal pure/approximate DP loss (support
at +-eps, +inf on a reveal); the Gaussian loss N(eps^2/2, eps^2) meets the
zCDP moment bound with equality. Adversaries choose the next epsilon from
the loss observed so far, never from the round about to be drawn.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import PrivacyError, validate_positive


class RROutcome(enum.Enum):
    BIT0 = "0"
    BIT1 = "1"
    TOP = "top"
    BOTTOM = "bottom"


class Mechanism(str, enum.Enum):
    RR = "rr"
    GAUSSIAN = "gaussian"


def _check_rr(eps: float, delta: float) -> None:
    validate_positive(eps, "eps")
    if not 0.0 <= delta <= 1.0:
        raise PrivacyError(f"delta must lie in [0, 1], got {delta!r}")


def rr_probabilities(eps: float, delta: float) -> tuple[float, float, float]:
    """P(keep bit), P(flip bit), P(reveal)."""
    _check_rr(eps, delta)
    keep = (1.0 - delta) / (1.0 + math.exp(-eps))
    return keep, (1.0 - delta) - keep, delta


def rr_sample(bit: int, eps: float, delta: float, rng: np.random.Generator) -> RROutcome:
    if bit not in (0, 1):
        raise PrivacyError("randomized response takes a single bit")
    keep, _, _ = rr_probabilities(eps, delta)
    u = rng.random()
    if u < keep:
        out = bit
    elif u < 1.0 - delta:
        out = 1 - bit
    else:
        return RROutcome.TOP if bit == 1 else RROutcome.BOTTOM
    return RROutcome.BIT1 if out == 1 else RROutcome.BIT0


def rr_loss_from_uniform(eps, delta, u):
    """Privacy loss of R(0) against R(1) given the uniform variate driving R(0).

    Vectorized over any of the arguments; matches ``rr_sample`` draw for draw.
    """
    eps = np.asarray(eps, dtype=float)
    keep = (1.0 - delta) / (1.0 + np.exp(-eps))
    out = np.where(u < keep, eps, -eps)
    # u < 1 always, so delta = 0 never reveals
    return np.where(u < 1.0 - np.asarray(delta), out, np.inf)


def rr_loss_sample(eps: float, delta: float, rng: np.random.Generator) -> float:
    outcome = rr_sample(0, eps, delta, rng)
    if outcome is RROutcome.BIT0:
        return eps
    if outcome is RROutcome.BIT1:
        return -eps
    return math.inf


def rr_loss_mean(eps):
    """E[loss] = eps (e^eps - 1)/(e^eps + 1) for delta = 0."""
    eps = np.asarray(eps, dtype=float)
    out = eps * np.tanh(eps / 2.0)
    return float(out) if out.ndim == 0 else out


def rr_loss_mgf(eps, lam):
    """E exp(lam * loss) for pure randomized response."""
    eps = np.asarray(eps, dtype=float)
    lam = np.asarray(lam, dtype=float)
    out = (np.exp(eps) * np.exp(lam * eps) + np.exp(-lam * eps)) / (1.0 + np.exp(eps))
    return float(out) if out.ndim == 0 else out


def zcdp_mgf_bound(eps, lam):
    """exp(lam (lam + 1) eps^2 / 2)."""
    eps = np.asarray(eps, dtype=float)
    lam = np.asarray(lam, dtype=float)
    out = np.exp(0.5 * lam * (lam + 1.0) * eps * eps)
    return float(out) if out.ndim == 0 else out


def gaussian_loss_mgf(eps, lam):
    """Closed-form MGF of N(eps^2/2, eps^2) at lam."""
    eps = np.asarray(eps, dtype=float)
    lam = np.asarray(lam, dtype=float)
    out = np.exp(lam * eps * eps / 2.0 + lam * lam * eps * eps / 2.0)
    return float(out) if out.ndim == 0 else out


def gaussian_loss_from_normal(eps, z):
    eps = np.asarray(eps, dtype=float)
    return 0.5 * eps * eps + eps * z


def gaussian_loss_sample(eps: float, rng: np.random.Generator) -> float:
    validate_positive(eps, "eps")
    return float(gaussian_loss_from_normal(eps, rng.standard_normal()))


def loss_from_variate(mechanism: Mechanism, eps, delta, x):
    """Map the per-round variate (uniform for RR, normal for Gaussian) to a loss."""
    if mechanism is Mechanism.RR:
        return rr_loss_from_uniform(eps, delta, x)
    return gaussian_loss_from_normal(eps, x)


def variate_kind(mechanism: Mechanism) -> str:
    return "uniform" if mechanism is Mechanism.RR else "normal"


@dataclass(frozen=True)
class Constant:
    eps: float

    def __post_init__(self) -> None:
        validate_positive(self.eps, "eps")


@dataclass(frozen=True)
class FrontLoaded:
    eps_list: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "eps_list", tuple(float(e) for e in self.eps_list))
        if not self.eps_list:
            raise PrivacyError("FrontLoaded needs at least one epsilon")
        for e in self.eps_list:
            validate_positive(e, "eps")


@dataclass(frozen=True)
class SignAdaptive:
    """Spend ``eps_high`` while the running loss is positive, else ``eps_low``."""

    eps_low: float
    eps_high: float

    def __post_init__(self) -> None:
        validate_positive(self.eps_low, "eps_low")
        validate_positive(self.eps_high, "eps_high")


AdversaryStrategy = Union[Constant, FrontLoaded, SignAdaptive]


def is_adaptive(strategy: AdversaryStrategy) -> bool:
    return isinstance(strategy, SignAdaptive)


def next_epsilon(strategy: AdversaryStrategy, running_loss: float, round: int) -> float:
    """Epsilon for the round after ``round`` completed ones (0-based)."""
    if isinstance(strategy, Constant):
        return strategy.eps
    if isinstance(strategy, FrontLoaded):
        return strategy.eps_list[min(round, len(strategy.eps_list) - 1)]
    if isinstance(strategy, SignAdaptive):
        return strategy.eps_high if running_loss > 0 else strategy.eps_low
    raise TypeError(f"unknown strategy {strategy!r}")


def next_epsilon_array(strategy: AdversaryStrategy, running_loss: np.ndarray, round: int) -> np.ndarray:
    """``next_epsilon`` applied to many paths at once."""
    if isinstance(strategy, SignAdaptive):
        return np.where(running_loss > 0, strategy.eps_high, strategy.eps_low)
    return np.full(running_loss.shape, next_epsilon(strategy, 0.0, round))


def fixed_schedule(strategy: AdversaryStrategy, horizon: int) -> np.ndarray:
    """Epsilons of a non-adaptive strategy for rounds 0..horizon-1."""
    if is_adaptive(strategy):
        raise PrivacyError("adaptive strategies have no fixed schedule")
    return np.array([next_epsilon(strategy, 0.0, n) for n in range(horizon)], dtype=float)


def parse_strategy(text: str) -> AdversaryStrategy:
    """Parse ``constant:0.1``, ``frontloaded:0.5,0.1`` or ``sign:0.05,0.2``."""
    name, _, args = text.partition(":")
    try:
        values: Sequence[float] = [float(x) for x in args.split(",") if x.strip()]
    except ValueError:
        raise PrivacyError(f"bad strategy parameters in {text!r}") from None
    name = name.strip().lower()
    if name == "constant" and len(values) == 1:
        return Constant(values[0])
    if name in ("frontloaded", "front-loaded") and values:
        return FrontLoaded(tuple(values))
    if name in ("sign", "signadaptive", "sign-adaptive") and len(values) == 2:
        return SignAdaptive(values[0], values[1])
    raise PrivacyError(f"cannot parse strategy {text!r}")
