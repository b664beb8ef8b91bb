"""Coverage experiments for filters and odometers under adaptive composition.

Every trial owns a generator derived from (seed, trial_index) and draws one
variate per round up front: a uniform for randomized response, a standard
normal for the Gaussian loss. The adversary's epsilon for round n is a
function of losses from rounds < n only, so pre-drawing is equivalent to
sampling online. Trials are grouped into fixed blocks and can be spread
over threads without changing any count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .core import CompositionState, FilterConfig, PrivacyError, PrivacySpend
from .filters import REL_TOL, filter_admits, filter_threshold
from .mechanisms import (
    AdversaryStrategy,
    Mechanism,
    fixed_schedule,
    is_adaptive,
    loss_from_variate,
    next_epsilon,
    next_epsilon_array,
    variate_kind,
)
from .odometers import OdometerSpec, n_delta_stop, odometer_value, odometer_values
from .report import CoverageReport, TrialStreams, draw_block, run_blocks, trial_rng

Guard = Union[FilterConfig, OdometerSpec]

# Adaptive paths advance round by round over a whole block, reading
# variates in chunks of rounds.
ADAPTIVE_BLOCK = 5000
ROUND_CHUNK = 256


@dataclass(frozen=True)
class ExperimentConfig:
    """One coverage experiment.

    ``round_delta`` is the approximation parameter declared every round;
    ``max_v`` stops a path before a round that would push intrinsic time
    past it.
    """

    strategy: AdversaryStrategy
    mechanism: Mechanism
    guard: Guard
    horizon: int
    trials: int
    seed: int = 0
    round_delta: float = 0.0
    max_v: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mechanism", Mechanism(self.mechanism))
        if self.horizon < 1:
            raise PrivacyError("horizon must be at least 1")
        if self.trials < 1:
            raise PrivacyError("trials must be at least 1")
        if self.seed < 0:
            raise PrivacyError("seed must be nonnegative")
        if not 0.0 <= self.round_delta < 1.0:
            raise PrivacyError("round_delta must lie in [0, 1)")
        if self.mechanism is Mechanism.GAUSSIAN and self.round_delta != 0.0:
            raise PrivacyError("Gaussian (zCDP) rounds carry delta = 0")
        if self.max_v is not None and not self.max_v > 0:
            raise PrivacyError("max_v must be positive")

    @property
    def delta_prime(self) -> float:
        return self.guard.delta_prime

    @property
    def target(self) -> float:
        """Failure probability the guard promises: delta' + delta''."""
        return self.guard.delta_prime + self.guard.delta_dprime


def _odometer_stop(cfg: ExperimentConfig) -> int:
    return n_delta_stop([cfg.round_delta] * cfg.horizon, cfg.guard.delta_dprime)


def _fixed_rounds(cfg: ExperimentConfig, eps: np.ndarray, v: np.ndarray) -> int:
    """Rounds executed by every path when the schedule is fixed."""
    live = np.ones(cfg.horizon, dtype=bool)
    if cfg.max_v is not None:
        live &= v <= cfg.max_v
    if isinstance(cfg.guard, FilterConfig):
        g = cfg.guard
        f = filter_threshold(v, g.delta_prime)
        dsum = np.cumsum(np.full(cfg.horizon, cfg.round_delta))
        live &= f <= g.epsilon_budget + REL_TOL * max(1.0, g.epsilon_budget)
        live &= dsum <= g.delta_dprime + REL_TOL * max(1.0, g.delta_dprime)
    blocked = np.flatnonzero(~live)
    return int(blocked[0]) if blocked.size else cfg.horizon


def _block_fixed(cfg: ExperimentConfig, x: np.ndarray) -> np.ndarray:
    eps = fixed_schedule(cfg.strategy, cfg.horizon)
    v = np.cumsum(eps * eps)
    rounds = _fixed_rounds(cfg, eps, v)
    if rounds == 0:
        return np.zeros(x.shape[0], dtype=bool)
    losses = loss_from_variate(cfg.mechanism, eps[:rounds], cfg.round_delta, x[:, :rounds])
    running = np.cumsum(losses, axis=1)
    if isinstance(cfg.guard, FilterConfig):
        return np.any(running > cfg.guard.epsilon_budget, axis=1)
    gated = min(rounds, _odometer_stop(cfg))
    if gated == 0:
        return np.zeros(x.shape[0], dtype=bool)
    bound = odometer_values(cfg.guard, v[:gated])
    return np.any(running[:, :gated] > bound, axis=1)


def _block_adaptive(cfg: ExperimentConfig, streams: TrialStreams) -> np.ndarray:
    b = len(streams.rngs)
    running = np.zeros(b)
    v = np.zeros(b)
    alive = np.ones(b, dtype=bool)
    violated = np.zeros(b, dtype=bool)
    is_filter = isinstance(cfg.guard, FilterConfig)
    stop = math.inf if is_filter else _odometer_stop(cfg)
    dsum = 0.0
    chunk = np.empty((0, b))
    for n in range(cfg.horizon):
        if n % ROUND_CHUNK == 0:
            chunk = streams.take(min(ROUND_CHUNK, cfg.horizon - n))
        eps = next_epsilon_array(cfg.strategy, running, n)
        v_next = v + eps * eps
        if cfg.max_v is not None:
            alive &= v_next <= cfg.max_v
        if is_filter:
            g = cfg.guard
            dsum_next = dsum + cfg.round_delta
            f = filter_threshold(v_next, g.delta_prime)
            alive &= f <= g.epsilon_budget + REL_TOL * max(1.0, g.epsilon_budget)
            if dsum_next > g.delta_dprime + REL_TOL * max(1.0, g.delta_dprime):
                alive[:] = False
            dsum = dsum_next
        if not alive.any():
            break
        loss = loss_from_variate(cfg.mechanism, eps, cfg.round_delta, chunk[n % ROUND_CHUNK])
        running = np.where(alive, running + loss, running)
        v = np.where(alive, v_next, v)
        if is_filter:
            violated |= alive & (running > cfg.guard.epsilon_budget)
        elif n + 1 <= stop:
            violated |= alive & (running > odometer_values(cfg.guard, v))
    return violated


def simulate_block(cfg: ExperimentConfig, lo: int, hi: int) -> np.ndarray:
    """Violation flag for trials lo..hi-1."""
    kind = variate_kind(cfg.mechanism)
    if is_adaptive(cfg.strategy):
        return _block_adaptive(cfg, TrialStreams(cfg.seed, lo, hi, kind))
    return _block_fixed(cfg, draw_block(cfg.seed, lo, hi, cfg.horizon, kind))


def _block_size(cfg: ExperimentConfig) -> int | None:
    return ADAPTIVE_BLOCK if is_adaptive(cfg.strategy) else None


def _run(cfg: ExperimentConfig, workers: int) -> CoverageReport:
    def count(lo: int, hi: int) -> int:
        return int(np.count_nonzero(simulate_block(cfg, lo, hi)))

    violations = run_blocks(count, cfg.trials, cfg.horizon, workers, _block_size(cfg))
    return CoverageReport.from_counts(cfg.trials, violations, cfg.horizon, cfg.seed)


def run_filter_experiment(cfg: ExperimentConfig, workers: int = 1) -> CoverageReport:
    """Rate of paths whose loss ever exceeds the budget before the filter halts."""
    if not isinstance(cfg.guard, FilterConfig):
        raise PrivacyError("run_filter_experiment needs a FilterConfig guard")
    return _run(cfg, workers)


def run_odometer_experiment(cfg: ExperimentConfig, workers: int = 1) -> CoverageReport:
    """Rate of paths whose loss ever exceeds the odometer."""
    if not isinstance(cfg.guard, OdometerSpec):
        raise PrivacyError("run_odometer_experiment needs an OdometerSpec guard")
    return _run(cfg, workers)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> CoverageReport:
    return _run(cfg, workers)


@dataclass
class PathTrace:
    epsilons: list[float] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    running: list[float] = field(default_factory=list)
    v: list[float] = field(default_factory=list)
    violated: bool = False


def simulate_path(cfg: ExperimentConfig, trial_index: int) -> PathTrace:
    """One trial, round by round, through the scalar API.

    Slow; serves as a reference for the vectorized engine.
    """
    rng = trial_rng(cfg.seed, trial_index)
    kind = variate_kind(cfg.mechanism)
    x = rng.random(cfg.horizon) if kind == "uniform" else rng.standard_normal(cfg.horizon)
    trace = PathTrace()
    state = CompositionState()
    deltas: list[float] = []
    running = 0.0
    stop = None if isinstance(cfg.guard, FilterConfig) else _odometer_stop(cfg)
    for n in range(cfg.horizon):
        eps = next_epsilon(cfg.strategy, running, n)
        spend = PrivacySpend.dp(eps, cfg.round_delta)
        if cfg.max_v is not None and state.v + eps * eps > cfg.max_v:
            break
        if stop is None and not filter_admits(state, spend, cfg.guard).admitted:
            break
        loss = float(loss_from_variate(cfg.mechanism, eps, cfg.round_delta, x[n]))
        running += loss
        state = CompositionState(state.v + eps * eps, state.delta_sum + cfg.round_delta, state.n + 1)
        deltas.append(cfg.round_delta)
        trace.epsilons.append(eps)
        trace.losses.append(loss)
        trace.running.append(running)
        trace.v.append(state.v)
        if stop is None:
            if running > cfg.guard.epsilon_budget:
                trace.violated = True
        elif state.n <= stop and running > odometer_value(cfg.guard, state.v).value:
            trace.violated = True
    return trace


def any_reveal_rate(cfg: ExperimentConfig, workers: int = 1) -> CoverageReport:
    """Rate of paths with an infinite-loss round before the delta'' stop."""
    if cfg.mechanism is not Mechanism.RR or is_adaptive(cfg.strategy):
        raise PrivacyError("reveal rate is defined for randomized response with a fixed schedule")
    eps = fixed_schedule(cfg.strategy, cfg.horizon)
    v = np.cumsum(eps * eps)
    if isinstance(cfg.guard, FilterConfig):
        rounds = _fixed_rounds(cfg, eps, v)
    else:
        rounds = min(_fixed_rounds(cfg, eps, v), _odometer_stop(cfg))

    def count(lo: int, hi: int) -> int:
        if rounds == 0:
            return 0
        x = draw_block(cfg.seed, lo, hi, cfg.horizon, "uniform")
        losses = loss_from_variate(cfg.mechanism, eps[:rounds], cfg.round_delta, x[:, :rounds])
        return int(np.count_nonzero(np.any(np.isinf(losses), axis=1)))

    violations = run_blocks(count, cfg.trials, cfg.horizon, workers)
    return CoverageReport.from_counts(cfg.trials, violations, cfg.horizon, cfg.seed)


def default_checkpoints(cfg: ExperimentConfig) -> list[float]:
    """Intrinsic times doubling from the first round's epsilon squared."""
    first = next_epsilon(cfg.strategy, 0.0, 0) ** 2
    if is_adaptive(cfg.strategy):
        top_eps = max(cfg.strategy.eps_low, cfg.strategy.eps_high)
        reach = cfg.horizon * min(cfg.strategy.eps_low, cfg.strategy.eps_high) ** 2
        first = min(first, top_eps**2)
    else:
        reach = float(np.sum(fixed_schedule(cfg.strategy, cfg.horizon) ** 2))
    if cfg.max_v is not None:
        reach = min(reach, cfg.max_v)
    points = []
    c = first
    while c <= reach * (1 + 1e-12):
        points.append(c)
        c *= 2.0
    return points


def empirical_sup_profile(
    cfg: ExperimentConfig, checkpoints: Sequence[float] | None = None, workers: int = 1
) -> list[tuple[float, float]]:
    """Empirical (1 - delta') quantile of the running loss at each checkpoint.

    A path contributes its running loss at the first round where intrinsic
    time reaches the checkpoint; checkpoints no path reaches are dropped.
    The guard only supplies delta'; paths are not stopped.
    """
    points = np.asarray(default_checkpoints(cfg) if checkpoints is None else checkpoints, dtype=float)
    level = 1.0 - cfg.delta_prime
    values = np.full((cfg.trials, points.size), np.nan)

    def fill(lo: int, hi: int) -> int:
        streams = TrialStreams(cfg.seed, lo, hi, variate_kind(cfg.mechanism))
        running = np.zeros(hi - lo)
        v = np.zeros(hi - lo)
        hit = np.full((hi - lo, points.size), np.nan)
        chunk = np.empty((0, hi - lo))
        for n in range(cfg.horizon):
            if n % ROUND_CHUNK == 0:
                chunk = streams.take(min(ROUND_CHUNK, cfg.horizon - n))
            eps = next_epsilon_array(cfg.strategy, running, n)
            v_next = v + eps * eps
            if cfg.max_v is not None and np.all(v_next > cfg.max_v):
                break
            keep = np.ones(hi - lo, dtype=bool) if cfg.max_v is None else v_next <= cfg.max_v
            loss = loss_from_variate(cfg.mechanism, eps, cfg.round_delta, chunk[n % ROUND_CHUNK])
            running = np.where(keep, running + loss, running)
            v = np.where(keep, v_next, v)
            reached = keep[:, None] & (v[:, None] >= points[None, :]) & np.isnan(hit)
            hit = np.where(reached, running[:, None], hit)
            if not np.isnan(hit).any():
                break
        values[lo:hi] = hit
        return 0

    run_blocks(fill, cfg.trials, cfg.horizon, workers, ADAPTIVE_BLOCK)
    profile = []
    for j, c in enumerate(points):
        col = values[:, j]
        col = col[~np.isnan(col)]
        if col.size:
            profile.append((float(c), float(np.quantile(col, level))))
    return profile
