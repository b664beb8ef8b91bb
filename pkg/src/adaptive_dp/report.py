"""Coverage reports and the seeded, order-independent trial runner."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy import stats

CONFIDENCE = 0.997
# Upper bound on floats held per simulated block of trials.
BLOCK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class CoverageReport:
    trials: int
    violations: int
    rate: float
    upper_cb: float
    horizon: int
    seed: int

    @classmethod
    def from_counts(cls, trials: int, violations: int, horizon: int, seed: int) -> "CoverageReport":
        if trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0 <= violations <= trials:
            raise ValueError("violations must lie in [0, trials]")
        return cls(
            trials=trials,
            violations=violations,
            rate=violations / trials,
            upper_cb=clopper_pearson_upper(violations, trials),
            horizon=horizon,
            seed=seed,
        )

    def within(self, target: float) -> bool:
        """True when the rate is at most ``target`` plus three binomial sigmas."""
        return self.rate <= coverage_threshold(target, self.trials)

    def to_json(self) -> str:
        return dumps_record(asdict(self))


def clopper_pearson_upper(k: int, n: int, confidence: float = CONFIDENCE) -> float:
    """Exact one-sided binomial upper confidence bound for k successes in n trials."""
    if k >= n:
        return 1.0
    return float(stats.beta.ppf(confidence, k + 1, n - k))


def coverage_threshold(target: float, trials: int) -> float:
    return target + 3.0 * math.sqrt(target * (1.0 - target) / trials)


def format_number(x: float) -> float | str:
    """Round to 9 significant digits; infinities become the string "inf"."""
    if isinstance(x, (bool, int, np.integer)):
        return int(x)
    x = float(x)
    if math.isinf(x) and x > 0:
        return "inf"
    if math.isnan(x):
        return "nan"
    return float(f"{x:.9g}")


def _normalize(obj):
    if isinstance(obj, dict):
        return {k: _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, float, np.integer, np.floating)):
        return format_number(obj)
    return obj


def dumps_record(obj) -> str:
    """Single-line JSON with every float cut to 9 significant digits."""
    return json.dumps(_normalize(obj), separators=(",", ":"), sort_keys=False)


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Generator for one trial, derived only from (seed, trial_index)."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial_index,)))


def draw_block(
    seed: int, start: int, stop: int, horizon: int, kind: str
) -> np.ndarray:
    """(stop - start, horizon) matrix; row i holds trial ``start + i``'s variates."""
    out = np.empty((stop - start, horizon))
    for row, index in enumerate(range(start, stop)):
        rng = trial_rng(seed, index)
        if kind == "normal":
            rng.standard_normal(out=out[row])
        elif kind == "uniform":
            rng.random(out=out[row])
        else:
            raise ValueError(f"unknown variate kind {kind!r}")
    return out


class TrialStreams:
    """Per-trial generators for trials lo..hi-1, read a chunk of rounds at a time.

    Chunked reads return exactly the values a single full-horizon draw would.
    """

    def __init__(self, seed: int, lo: int, hi: int, kind: str):
        if kind not in ("normal", "uniform"):
            raise ValueError(f"unknown variate kind {kind!r}")
        self.kind = kind
        self.rngs = [trial_rng(seed, i) for i in range(lo, hi)]

    def take(self, rounds: int) -> np.ndarray:
        """(rounds, trials) array, so that a round's variates are contiguous."""
        out = np.empty((len(self.rngs), rounds))
        for row, rng in enumerate(self.rngs):
            if self.kind == "normal":
                rng.standard_normal(out=out[row])
            else:
                rng.random(out=out[row])
        return np.ascontiguousarray(out.T)


def block_size(horizon: int) -> int:
    return max(1, BLOCK_ELEMENTS // max(horizon, 1))


def run_blocks(
    count_block: Callable[[int, int], int],
    trials: int,
    horizon: int,
    workers: int = 1,
    size: int | None = None,
) -> int:
    """Sum ``count_block(start, stop)`` over fixed-size trial blocks.

    Block boundaries depend only on ``trials``, ``horizon`` and ``size``, so
    the total is the same for any ``workers``.
    """
    size = block_size(horizon) if size is None else size
    spans = [(lo, min(lo + size, trials)) for lo in range(0, trials, size)]
    if workers <= 1 or len(spans) == 1:
        return sum(count_block(lo, hi) for lo, hi in spans)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(lambda span: count_block(*span), spans))
