"""Zipf content popularity and the combined MPC/LCD cache placement.

Rank ``m`` files are ordered by popularity (1 = most popular). A cluster of
``K`` SBSs each with ``M`` slots stores ranks ``1..floor(rho*M)`` in every SBS
(MPC range) and spreads ranks ``floor(rho*M)+1 .. floor(rho*M)+K*(M-floor(rho*M))``
as disjoint partitions (LCD range).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ApproximationDomainError, DomainError

# rho*M within this of an integer is treated as that integer
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class ZipfPopularity:
    N: int
    gamma: float
    Z: float = field(init=False, repr=False)
    _prefix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"library size N must be a positive integer, got {self.N}")
        if not self.gamma >= 0:
            raise DomainError(f"Zipf shape gamma must be >= 0, got {self.gamma}")
        object.__setattr__(self, "N", int(self.N))
        weights = np.arange(1, self.N + 1, dtype=np.float64) ** (-float(self.gamma))
        Z = math.fsum(weights)
        prefix = np.empty(self.N + 1)
        prefix[0] = 0.0
        np.cumsum(weights, out=prefix[1:])
        prefix /= prefix[-1]
        prefix[-1] = 1.0
        prefix.setflags(write=False)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "_prefix", prefix)

    def pm(self, m: int) -> float:
        return zipf_pm(self, m)

    def probabilities(self) -> np.ndarray:
        """All ``p_1..p_N`` as an array."""
        return np.arange(1, self.N + 1, dtype=np.float64) ** (-float(self.gamma)) / self.Z

    def mass(self, upto):
        """``sum_{m<=upto} p_m``; ``upto`` is clamped to ``[0, N]``. Accepts arrays."""
        idx = np.clip(np.asarray(upto, dtype=np.int64), 0, self.N)
        out = self._prefix[idx]
        return float(out) if out.ndim == 0 else out


def zipf_pm(pop: ZipfPopularity, m: int) -> float:
    if int(m) != m or not 1 <= m <= pop.N:
        raise DomainError(f"rank must lie in [1, {pop.N}], got {m}")
    return 1.0 / (float(m) ** pop.gamma * pop.Z)


def mpc_slots(rho, M: int):
    """Exact ``floor(rho*M)``; works elementwise on arrays."""
    prod = np.asarray(rho, dtype=np.float64) * M
    out = np.floor(prod + _FLOOR_EPS).astype(np.int64)
    return int(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CachePlan:
    rho: float
    M: int
    K: int

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise DomainError(f"rho must lie in [0, 1], got {self.rho}")
        if int(self.M) != self.M or self.M < 1:
            raise DomainError(f"per-SBS capacity M must be a positive integer, got {self.M}")
        if int(self.K) != self.K or self.K < 1:
            raise DomainError(f"cluster size K must be a positive integer, got {self.K}")

    @property
    def mpc_count(self) -> int:
        return mpc_slots(self.rho, self.M)

    @property
    def lcd_count(self) -> int:
        return self.K * (self.M - self.mpc_count)

    @property
    def cached_total(self) -> int:
        return self.mpc_count + self.lcd_count

    def bounds(self, N: int) -> tuple[int, int]:
        """Last rank of the MPC range and of the cached set, both clamped to ``N``."""
        return min(self.mpc_count, N), min(self.cached_total, N)


def range_bounds(rho, M: int, K: int, N: int):
    """Vectorized :meth:`CachePlan.bounds` over an array of ``rho``."""
    mpc = mpc_slots(rho, M)
    total = mpc + K * (M - mpc)
    return np.minimum(mpc, N), np.minimum(total, N)


def cache_hit_prob(pop: ZipfPopularity, plan: CachePlan) -> float:
    _, end = plan.bounds(pop.N)
    return pop.mass(end)


def cache_range_probs(pop: ZipfPopularity, plan: CachePlan) -> tuple[float, float, float]:
    """Exact ``(p_ch_mpc, p_ch_lcd, p_cm)``; the three sum to one."""
    mpc_end, end = plan.bounds(pop.N)
    p_mpc = pop.mass(mpc_end)
    p_lcd = pop.mass(end) - p_mpc
    return p_mpc, p_lcd, 1.0 - p_mpc - p_lcd


def range_probs_array(pop: ZipfPopularity, rho, M: int, K: int):
    """:func:`cache_range_probs` for an array of ``rho`` values."""
    mpc_end, end = range_bounds(rho, M, K, pop.N)
    p_mpc = pop.mass(mpc_end)
    p_lcd = pop.mass(end) - p_mpc
    return p_mpc, p_lcd, 1.0 - p_mpc - p_lcd


def approx_range_probs_array(gamma: float, N: int, rho, M: int, K: int):
    """Power-law approximation ``sum_{m<=L} p_m ~ (L/N)^(1-gamma)`` of the three range
    probabilities, continuous in ``rho``."""
    if gamma >= 1.0:
        raise ApproximationDomainError(
            f"continuous popularity approximation needs gamma < 1, got {gamma}")
    if K * M > N:
        warnings.warn(f"K*M = {K * M} exceeds N = {N}; approximation is inaccurate",
                      RuntimeWarning, stacklevel=2)
    rho = np.asarray(rho, dtype=np.float64)
    e = 1.0 - gamma
    scale = (M / N) ** e
    mpc = scale * rho ** e
    total = scale * (rho * (1 - K) + K) ** e
    return mpc, total - mpc, 1.0 - total


def approx_range_probs(pop: ZipfPopularity, plan: CachePlan) -> tuple[float, float, float]:
    mpc, lcd, miss = approx_range_probs_array(pop.gamma, pop.N, plan.rho, plan.M, plan.K)
    return float(mpc), float(lcd), float(miss)
