"""Privacy odometers: time-uniform upper bounds on accumulated privacy loss.

Each family is a function of intrinsic time ``v = sum eps_m^2`` plus the
drift ``v/2``. Once the per-round deltas outgrow ``delta''`` every family
trivializes to +inf.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .boundaries import mixture_bound, stitched_bound
from .core import PrivacyError, PrivacySpend, validate_positive, validate_spend, validate_unit_open
from .filters import y_star


class Family(str, enum.Enum):
    FILTER = "filter"
    MIXTURE = "mixture"
    STITCHED = "stitched"
    ROGERS = "rogers"


@dataclass(frozen=True)
class OdometerSpec:
    """One odometer family plus its tuning parameter.

    ``param`` is the target epsilon (filter), rho (mixture), v0 (stitched)
    or the dataset size (rogers).
    """

    family: Family
    param: float
    delta_prime: float
    delta_dprime: float = 0.0
    # Multiplies the concentration term; only the stress harness moves it off 1.
    boundary_scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        validate_unit_open(self.delta_prime, "delta_prime")
        if not self.delta_dprime >= 0:
            raise PrivacyError("delta_dprime must be nonnegative")
        validate_positive(self.boundary_scale, "boundary_scale")
        if self.family is Family.ROGERS:
            if self.param < 3 or self.param != int(self.param):
                raise PrivacyError("rogers odometer needs an integer dataset size >= 3")
            if self.delta_prime > 1.0 / math.e:
                raise PrivacyError("rogers odometer needs delta_prime <= 1/e")
        else:
            validate_positive(self.param, f"{self.family.value} parameter")

    @classmethod
    def filter(cls, epsilon_target: float, delta_prime: float, delta_dprime: float = 0.0) -> "OdometerSpec":
        return cls(Family.FILTER, epsilon_target, delta_prime, delta_dprime)

    @classmethod
    def mixture(cls, rho: float, delta_prime: float, delta_dprime: float = 0.0) -> "OdometerSpec":
        return cls(Family.MIXTURE, rho, delta_prime, delta_dprime)

    @classmethod
    def stitched(cls, v0: float, delta_prime: float, delta_dprime: float = 0.0) -> "OdometerSpec":
        return cls(Family.STITCHED, v0, delta_prime, delta_dprime)

    @classmethod
    def rogers(cls, dataset_size: int, delta_prime: float, delta_dprime: float = 0.0) -> "OdometerSpec":
        return cls(Family.ROGERS, dataset_size, delta_prime, delta_dprime)


@dataclass(frozen=True)
class OdometerValue:
    value: float
    trivialized: bool = False

    @classmethod
    def trivial(cls) -> "OdometerValue":
        return cls(math.inf, True)

    def __float__(self) -> float:
        return self.value


def n_delta_stop(deltas: Iterable[float], delta_dprime: float) -> int:
    """inf{n >= 0 : delta'' < sum_{m <= n+1} delta_m}, or len(deltas) if never."""
    total = 0.0
    n = 0
    for d in deltas:
        total += d
        if total > delta_dprime:
            return n
        n += 1
    return n


def _check_v(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or np.any(np.isnan(v)):
        raise PrivacyError("intrinsic time must be nonnegative")
    return v


def filter_odometer_values(v, epsilon_target: float, delta_prime: float, scale: float = 1.0):
    """Line tangent to the filter threshold at y*(epsilon_target)."""
    v = _check_v(v)
    ys = y_star(epsilon_target, delta_prime)
    c = math.sqrt(2.0 * math.log(1.0 / delta_prime))
    line = c * math.sqrt(ys) / 2.0 + (c / (2.0 * math.sqrt(ys))) * v
    return scale * line + 0.5 * v


def mixture_odometer_values(v, rho: float, delta_prime: float, scale: float = 1.0):
    v = _check_v(v)
    return scale * np.asarray(mixture_bound(v, rho, delta_prime)) + 0.5 * v


def stitched_odometer_values(v, v0: float, delta_prime: float, scale: float = 1.0):
    v = _check_v(v)
    out = np.full(v.shape, np.inf)
    live = v >= v0
    if np.any(live):
        out[live] = scale * np.asarray(stitched_bound(v[live], v0, delta_prime)) + 0.5 * v[live]
    return out


def rogers_in_range(v, dataset_size: int):
    v = np.asarray(v, dtype=float)
    return (v >= 1.0 / dataset_size**2) & (v <= 1.0)


def rogers_odometer_values(v, dataset_size: int, delta_prime: float, scale: float = 1.0):
    """Two-branch odometer with explicit dataset-size dependence."""
    v = _check_v(v)
    n = float(dataset_size)
    inside = math.log(110.0 * math.e) + 2.0 * math.log(math.log(n) / delta_prime)
    near = np.sqrt(2.0 * v * inside)
    loglog = math.log(math.log((4.0 / delta_prime) * math.log2(n)))
    far = np.sqrt(2.0 * (1.0 / n**2 + v) * (1.0 + 0.5 * np.log1p(n * n * v)) * loglog)
    return scale * np.where(rogers_in_range(v, dataset_size), near, far) + 0.5 * v


def odometer_values(spec: OdometerSpec, v) -> np.ndarray:
    """Vectorized odometer over intrinsic times; +inf where trivial (v < v0)."""
    fam, p, dp, k = spec.family, spec.param, spec.delta_prime, spec.boundary_scale
    if fam is Family.FILTER:
        out = filter_odometer_values(v, p, dp, k)
    elif fam is Family.MIXTURE:
        out = mixture_odometer_values(v, p, dp, k)
    elif fam is Family.STITCHED:
        out = stitched_odometer_values(v, p, dp, k)
    else:
        out = rogers_odometer_values(v, int(p), dp, k)
    return np.asarray(out, dtype=float)


def _wrap(x) -> OdometerValue:
    x = float(x)
    return OdometerValue.trivial() if math.isinf(x) else OdometerValue(x)


def _require(spec: OdometerSpec, family: Family) -> None:
    if spec.family is not family:
        raise PrivacyError(f"expected a {family.value} odometer, got {spec.family.value}")


def filter_odometer(v: float, spec: OdometerSpec) -> OdometerValue:
    _require(spec, Family.FILTER)
    return _wrap(odometer_values(spec, v))


def mixture_odometer(v: float, spec: OdometerSpec) -> OdometerValue:
    _require(spec, Family.MIXTURE)
    return _wrap(odometer_values(spec, v))


def stitched_odometer(v: float, spec: OdometerSpec) -> OdometerValue:
    _require(spec, Family.STITCHED)
    return _wrap(odometer_values(spec, v))


def rogers_odometer(v: float, spec: OdometerSpec) -> OdometerValue:
    _require(spec, Family.ROGERS)
    return _wrap(odometer_values(spec, v))


def odometer_value(spec: OdometerSpec, v: float) -> OdometerValue:
    return _wrap(odometer_values(spec, v))


def gated_value(spec: OdometerSpec, v: float, n: int, deltas: Sequence[float]) -> OdometerValue:
    """Odometer at round ``n``; trivial once n exceeds the delta'' stopping index."""
    if n > n_delta_stop(deltas, spec.delta_dprime):
        return OdometerValue.trivial()
    return odometer_value(spec, v)


def odometer_sequence(spec: OdometerSpec, spends: Sequence[PrivacySpend]) -> list[OdometerValue]:
    """Odometer after each of rounds 1..len(spends)."""
    for s in spends:
        validate_spend(s)
    stop = n_delta_stop([s.delta for s in spends], spec.delta_dprime)
    v = np.cumsum([s.epsilon**2 for s in spends]) if spends else np.empty(0)
    values = odometer_values(spec, v)
    return [
        OdometerValue.trivial() if n > stop else _wrap(x)
        for n, x in enumerate(values, start=1)
    ]


def odometer_curve(spec: OdometerSpec, v_grid: Sequence[float]) -> list[tuple[float, float]]:
    grid = np.asarray(v_grid, dtype=float)
    if grid.size > 1 and np.any(np.diff(grid) < 0):
        raise PrivacyError("v grid must be sorted ascending")
    return [(float(v), float(x)) for v, x in zip(grid, odometer_values(spec, grid))]
