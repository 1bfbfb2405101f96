"""Growth-function and VC-dimension bounds for rule lists, loss concentration
bounds, and the minimal certified sample size.

Real-valued bounds are evaluated in float64; ``growth_upper`` is exact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dataset import BinaryDataset

MAX_SHATTER_ROWS = 24


class GuardError(ValueError):
    """An enumeration guard would be exceeded."""


@dataclass(frozen=True)
class BoundParams:
    k: int
    z: int
    d: int
    epsilon: float
    theta: float
    delta: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 1 <= self.z <= self.d:
            raise ValueError(f"need 1 <= z <= d, got z={self.z}, d={self.d}")
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if not 0 < self.theta <= 1:
            raise ValueError(f"theta must be in (0, 1], got {self.theta}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")

    @property
    def omega(self) -> float:
        return omega(self.k, self.z, self.d)


def omega(k: int, z: int, d: int) -> float:
    """Complexity term k*z*ln(2*e*d/z) + 2."""
    if not 1 <= z <= d:
        raise ValueError(f"need 1 <= z <= d, got z={z}, d={d}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return k * z * (1.0 + math.log(2.0 * d / z)) + 2.0


def omega_single_term(k: int, d: int) -> float:
    """Tighter z=1 alternative, k*ln(2d) + 2 (natural-log form of the z=1 VC bound)."""
    return k * math.log(2.0 * d) + 2.0


def growth_upper(k: int, d: int) -> int:
    """Upper bound on the number of distinct projections of k-rule single-term lists."""
    if k < 0 or d < 1:
        raise ValueError("need k >= 0 and d >= 1")
    total = 2
    falling = 1
    for j in range(1, k + 1):
        falling *= d - (j - 1)
        if falling <= 0:
            break
        total += (1 << j) * falling
    return total


def _floor(x: float) -> int:
    """floor() that does not drop an exact integer value computed as n - 1ulp."""
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return math.floor(x)


def vc_upper(k: int, z: int, d: int) -> int:
    if not 1 <= z <= d:
        raise ValueError(f"need 1 <= z <= d, got z={z}, d={d}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if z == 1:
        return _floor(k * math.log2(2 * d) + 2)
    return _floor(k * z * math.log2(2 * math.e * d / z) + 2)


def _root(k: int, z: int) -> float:
    r = round(k ** (1.0 / z))
    return float(r) if r ** z == k else k ** (1.0 / z)


def vc_lower(k: int, z: int, d: int) -> int:
    """Lower bound on the VC-dimension; 0 outside the formula's valid regime."""
    if k < 1 or z < 1 or d < 1:
        raise ValueError("k, z, d must be positive")
    if z == 1:
        return max(0, _floor(k * math.log2((d + k) / k)))
    ratio = d / (z * _root(k, z))
    if ratio <= 1:
        return 0
    return max(0, _floor(k * z * math.log2(ratio)))


def _confidence_term(omega_value: float, delta: float) -> float:
    return omega_value + math.log(2.0 / delta)


def deviation_upper(loss_s: float, m: int, omega_value: float, delta: float) -> float:
    """Upper bound on the dataset loss of any rule list given its sample loss."""
    if m < 1:
        raise ValueError("sample size must be >= 1")
    c = _confidence_term(omega_value, delta)
    return loss_s + math.sqrt(2.0 * loss_s * c / m) + 2.0 * c / m


def opt_concentration(loss_d: float, m: int, delta: float) -> float:
    """Upper bound on the sample loss of a fixed rule list with dataset loss ``loss_d``."""
    if m < 1:
        raise ValueError("sample size must be >= 1")
    return loss_d + math.sqrt(3.0 * loss_d * math.log(2.0 / delta) / m)


def sample_condition_lhs(m: int, theta: float, delta: float, omega_value: float) -> float:
    ln2d = math.log(2.0 / delta)
    c = omega_value + ln2d
    dev = math.sqrt(3.0 * theta * ln2d / m)
    return dev + math.sqrt(2.0 * (theta + dev) * c / m) + 2.0 * c / m


def check_sample_condition(m: int, params: BoundParams, omega_value: float | None = None) -> bool:
    if m < 1:
        raise ValueError("sample size must be >= 1")
    w = params.omega if omega_value is None else omega_value
    lhs = sample_condition_lhs(m, params.theta, params.delta, w)
    return lhs <= params.epsilon * params.theta


def sample_size(params: BoundParams, omega_value: float | None = None) -> int:
    """Smallest m >= 1 satisfying the sample condition (doubling, then bisection)."""
    w = params.omega if omega_value is None else omega_value
    if check_sample_condition(1, params, w):
        return 1
    hi = 2
    while not check_sample_condition(hi, params, w):
        hi *= 2
    lo = hi // 2  # fails
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if check_sample_condition(mid, params, w):
            hi = mid
        else:
            lo = mid
    return hi


def sample_size_analytic(params: BoundParams, omega_value: float | None = None) -> int:
    """Closed-form sufficient sample size; never below ``sample_size``."""
    w = params.omega if omega_value is None else omega_value
    c = _confidence_term(w, params.delta)
    eps, theta = params.epsilon, params.theta
    value = (
        c * math.sqrt(14.0) * math.sqrt(8.0 * eps + 14.0) / (2.0 * eps**2 * theta)
        + 2.0 * c / (eps * theta)
        + 7.0 * c / (eps**2 * theta)
    )
    return math.ceil(value)


# Shattering constructions ----------------------------------------------------


def shatter_matrix(a: int) -> np.ndarray:
    """a x (2^a - 1) matrix whose columns are all nonzero binary a-vectors.

    Columns are ordered by subset size, then lexicographically.
    """
    if a < 1:
        raise ValueError("a must be >= 1")
    if a > 20:
        raise GuardError(f"a={a} exceeds the guard a <= 20")
    subsets = [s for size in range(1, a + 1) for s in itertools.combinations(range(a), size)]
    C = np.zeros((a, len(subsets)), dtype=np.uint8)
    for col, s in enumerate(subsets):
        C[list(s), col] = 1
    return C


def shatter_dataset(a: int, k: int) -> BinaryDataset:
    """Block-diagonal dataset with k copies of the shatter matrix (labels all 0)."""
    if a < 1 or k < 1:
        raise ValueError("a and k must be >= 1")
    if a * k > MAX_SHATTER_ROWS:
        raise GuardError(f"a*k={a * k} exceeds the guard {MAX_SHATTER_ROWS}")
    C = shatter_matrix(a)
    b = C.shape[1]
    X = np.zeros((a * k, b * k), dtype=np.uint8)
    for i in range(k):
        X[i * a:(i + 1) * a, i * b:(i + 1) * b] = C
    names = tuple(f"x{j + 1}" for j in range(b * k))
    return BinaryDataset(X, np.zeros(a * k, dtype=np.uint8), names)


def verify_shattering(ds: BinaryDataset, k: int, z: int) -> bool:
    """True iff every labeling of the rows is realized exactly by some list of at most k rules with at most z terms."""
    from .solver import enumerate_conditions, realizable

    n = ds.n
    if n > MAX_SHATTER_ROWS:
        raise GuardError(f"n={n} exceeds the guard {MAX_SHATTER_ROWS}")
    conditions = enumerate_conditions(ds.features, z)
    for code in range(1 << n):
        y = np.array([(code >> i) & 1 for i in range(n)], dtype=bool)
        if not realizable(conditions, y, k):
            return False
    return True
