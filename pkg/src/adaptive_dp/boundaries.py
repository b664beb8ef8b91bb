"""Time-uniform boundaries for martingales with subGaussian increments.

All boundaries are functions of intrinsic time ``v`` (the accumulated
variance proxy). They accept floats or numpy arrays; scalar input gives a
float back. Logarithms are natural.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import PrivacyError, validate_positive, validate_unit_open
from .report import CoverageReport, draw_block, run_blocks

# Stitching constants for the simplified polynomial-stitched boundary.
STITCH_SCALE = 1.7
STITCH_CONF_WEIGHT = 0.72
STITCH_CONF_NUMERATOR = 5.2


class DomainError(PrivacyError):
    """Boundary evaluated outside the region where it is nontrivial."""


@dataclass(frozen=True)
class LineCrossingParams:
    a: float
    b: float

    def __post_init__(self) -> None:
        validate_positive(self.a, "a")
        validate_positive(self.b, "b")

    @classmethod
    def optimized(cls, v: float, delta: float) -> "LineCrossingParams":
        """Line tight at intrinsic time ``v`` with crossing probability ``delta``."""
        validate_unit_open(delta, "delta")
        return cls(a=v, b=float(np.sqrt(2.0 * np.log(1.0 / delta) * v)))


@dataclass(frozen=True)
class LineCrossing:
    params: LineCrossingParams


@dataclass(frozen=True)
class Mixture:
    rho: float

    def __post_init__(self) -> None:
        validate_positive(self.rho, "rho")


@dataclass(frozen=True)
class Stitched:
    v0: float

    def __post_init__(self) -> None:
        validate_positive(self.v0, "v0")


@dataclass(frozen=True)
class Ville:
    initial_mean: float

    def __post_init__(self) -> None:
        validate_positive(self.initial_mean, "initial_mean")


BoundaryKind = Union[LineCrossing, Mixture, Stitched, Ville]


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _nonnegative(v):
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or np.any(np.isnan(v)):
        raise PrivacyError("intrinsic time must be nonnegative")
    return v


def line_crossing_bound(v, p: LineCrossingParams):
    v = _nonnegative(v)
    return _scalar(p.b / 2.0 + (p.b / (2.0 * p.a)) * v)


def crossing_probability(p: LineCrossingParams) -> float:
    return float(np.exp(-p.b * p.b / (2.0 * p.a)))


def mixture_bound(v, rho: float, delta: float):
    validate_positive(rho, "rho")
    validate_unit_open(delta, "delta")
    v = _nonnegative(v)
    s = v + rho
    # log((1/delta) * sqrt(s / rho)) split to keep precision for tiny delta
    return _scalar(np.sqrt(2.0 * s * (np.log(1.0 / delta) + 0.5 * np.log(s / rho))))


def stitched_inner(v, v0: float, delta: float):
    """loglog(2v/v0) + 0.72 log(5.2/delta); positive whenever v >= v0."""
    v = np.asarray(v, dtype=float)
    return np.log(np.log(2.0 * v / v0)) + STITCH_CONF_WEIGHT * np.log(STITCH_CONF_NUMERATOR / delta)


def stitched_bound(v, v0: float, delta: float):
    validate_positive(v0, "v0")
    validate_unit_open(delta, "delta")
    v = _nonnegative(v)
    if np.any(v < v0):
        raise DomainError(f"stitched boundary is trivial below v0={v0}")
    inner = stitched_inner(v, v0, delta)
    if np.any(inner <= 0):
        raise PrivacyError("stitched boundary radicand is nonpositive")
    return _scalar(STITCH_SCALE * np.sqrt(v * inner))


def ville_threshold(initial_mean: float, delta: float) -> float:
    validate_positive(initial_mean, "initial_mean")
    validate_unit_open(delta, "delta")
    return initial_mean / delta


def _boundary_on_grid(kind: BoundaryKind, v: np.ndarray, delta: float) -> np.ndarray:
    """Upper boundary for M_n at each grid point; +inf where trivial."""
    if isinstance(kind, LineCrossing):
        return np.asarray(line_crossing_bound(v, kind.params), dtype=float)
    if isinstance(kind, Mixture):
        return np.asarray(mixture_bound(v, kind.rho, delta), dtype=float)
    if isinstance(kind, Stitched):
        out = np.full(v.shape, np.inf)
        live = v >= kind.v0
        if np.any(live):
            out[live] = stitched_bound(v[live], kind.v0, delta)
        return out
    if isinstance(kind, Ville):
        # X_n = mean * exp(M_n - V_n / 2) crosses mean/delta iff
        # M_n >= log(1/delta) + V_n / 2.
        ville_threshold(kind.initial_mean, delta)
        return np.log(1.0 / delta) + v / 2.0
    raise TypeError(f"unknown boundary kind {kind!r}")


def boundary_target(kind: BoundaryKind, delta: float) -> float:
    """Error probability the boundary promises."""
    if isinstance(kind, LineCrossing):
        return crossing_probability(kind.params)
    return delta


def mc_validate_boundary(
    kind: BoundaryKind,
    increment_sigma: float,
    horizon: int,
    trials: int,
    seed: int,
    delta: float = 0.05,
    workers: int = 1,
) -> CoverageReport:
    """Fraction of Gaussian random walks that ever reach the boundary.

    Increments are N(0, increment_sigma**2), so V_n = n * increment_sigma**2.
    ``delta`` is ignored for line-crossing boundaries, whose error
    probability is fixed by (a, b).
    """
    validate_positive(increment_sigma, "increment_sigma")
    if trials < 1:
        raise PrivacyError("trials must be at least 1")
    if horizon < 0:
        raise PrivacyError("horizon must be nonnegative")
    if not isinstance(kind, LineCrossing):
        validate_unit_open(delta, "delta")
    if horizon == 0:
        return CoverageReport.from_counts(trials, 0, horizon, seed)

    v = increment_sigma**2 * np.arange(1, horizon + 1)
    bound = _boundary_on_grid(kind, v, delta)

    def count(lo: int, hi: int) -> int:
        paths = np.cumsum(draw_block(seed, lo, hi, horizon, "normal"), axis=1)
        paths *= increment_sigma
        return int(np.count_nonzero(np.any(paths >= bound, axis=1)))

    violations = run_blocks(count, trials, horizon, workers)
    return CoverageReport.from_counts(trials, violations, horizon, seed)
