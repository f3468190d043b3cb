"""Cache-split optimization: cache service probability and energy efficiency.

SCDP values enter as plain numbers so the same code serves analytic and
simulated estimates. ``rho`` is the fraction of each SBS cache given to the
most-popular (MPC) range; the rest holds disjoint LCD partitions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import ApproximationDomainError, DomainError, PreconditionWarning
from .interference import ClusterGeometry, cluster_size_pmf
from .popularity import (CachePlan, ZipfPopularity, approx_range_probs_array,
                         range_probs_array)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
EE_COARSE_STEP = 0.02


@dataclass(frozen=True)
class PowerModel:
    P_t: float = 1.0
    P_b: float = 10.0

    def __post_init__(self):
        if not self.P_t > 0 or not self.P_b >= 0:
            raise DomainError("need P_t > 0 and P_b >= 0")


@dataclass(frozen=True)
class OptimizationResult:
    rho_star: float
    value: float
    method: str
    K: int
    flags: tuple[str, ...] = ()


def _range_probs(pop: ZipfPopularity, rho, M: int, K: int, approximate: bool):
    if approximate:
        return approx_range_probs_array(pop.gamma, pop.N, rho, M, K)
    return range_probs_array(pop, rho, M, K)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


# ---------------------------------------------------------------------------
# cache service probability
# ---------------------------------------------------------------------------

def service_prob(pop: ZipfPopularity, rho, M: int, K: int, scdp_jt_val: float,
                 scdp_pts_val: float, approximate: bool = False):
    """``f(rho|K)`` for scalar or array ``rho``."""
    mpc, lcd, _ = _range_probs(pop, rho, M, K, approximate)
    return _scalar(mpc * scdp_jt_val + lcd * scdp_pts_val)


def cache_service_prob(pop: ZipfPopularity, plan: CachePlan, scdp_jt_val: float,
                       scdp_pts_val: float, approximate: bool = False) -> float:
    """Probability that a request is cached in the cluster and delivered in time."""
    for v in (scdp_jt_val, scdp_pts_val):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"SCDP values must lie in [0, 1], got {v}")
    return service_prob(pop, plan.rho, plan.M, plan.K, scdp_jt_val, scdp_pts_val, approximate)


def _approx_service_shape(rho, K: int, gamma: float, jt: float, pts: float):
    # approximate f without the positive (M/N)^(1-gamma) factor
    e = 1.0 - gamma
    rho = np.asarray(rho, dtype=np.float64)
    return rho ** e * jt + ((rho * (1 - K) + K) ** e - rho ** e) * pts


def rho_star_service(K: int, gamma: float, scdp_jt_val: float, scdp_pts_val: float,
                     grid_step: float = 0.01) -> OptimizationResult:
    """Closed-form maximizer of the approximate service probability.

    Objective values in the result are on the unscaled approximate curve
    (the ``(M/N)^(1-gamma)`` factor does not move the maximizer).
    """
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    if gamma >= 1.0:
        raise ApproximationDomainError(f"closed form needs gamma < 1, got {gamma}")
    jt, pts = float(scdp_jt_val), float(scdp_pts_val)

    def shape(r):
        return float(_approx_service_shape(r, K, gamma, jt, pts))

    if K == 1:
        return OptimizationResult(1.0, shape(1.0), "closed-form", 1, ("no-op-split",))
    if pts <= 0.0:
        return OptimizationResult(1.0, shape(1.0), "closed-form", K)
    ratio = jt / pts
    if ratio <= 1.0:
        warnings.warn(f"SCDP ratio {ratio:.6g} <= 1: objective not strictly concave, "
                      "falling back to grid search", PreconditionWarning, stacklevel=2)
        res = grid_search_rho(shape, grid_step)
        return OptimizationResult(res.rho_star, res.value, "grid-search", K,
                                  ("concavity-precondition",))
    if ratio >= K:
        rho = 1.0
    elif gamma == 0.0:
        # linear objective; interior ratio means the LCD end wins
        rho = 0.0
    else:
        base = (K - 1) / (ratio - 1.0)
        with np.errstate(over="ignore"):
            bracket = base ** (1.0 / gamma)
        rho = min(K / (bracket + K - 1.0), 1.0) if math.isfinite(bracket) else 0.0
    return OptimizationResult(rho, shape(rho), "closed-form", K)


# ---------------------------------------------------------------------------
# search helpers
# ---------------------------------------------------------------------------

def rho_grid(step: float) -> np.ndarray:
    if not 0.0 < step <= 0.5:
        raise DomainError(f"grid step must lie in (0, 0.5], got {step}")
    n = int(math.floor(1.0 / step + 1e-9))
    grid = step * np.arange(n + 1)
    if grid[-1] < 1.0 - 1e-12:
        grid = np.append(grid, 1.0)
    grid[-1] = 1.0
    return grid


def grid_search_rho(objective: Callable[[float], float], step: float = 0.01,
                    K: int = 0) -> OptimizationResult:
    """Exhaustive maximization on ``{0, step, 2*step, ..., 1}``; ties go to the smaller rho."""
    grid = rho_grid(step)
    vals = np.array([objective(float(r)) for r in grid])
    i = int(np.argmax(vals))
    return OptimizationResult(float(grid[i]), float(vals[i]), "grid-search", K)


def golden_section_max(f: Callable[[float], float], a: float, b: float,
                       tol: float = 1e-6) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


# ---------------------------------------------------------------------------
# energy efficiency
# ---------------------------------------------------------------------------

def effective_rate(pop: ZipfPopularity, plan: CachePlan, R_d: float, scdp_jt1: float,
                   scdp_pts2: float, scdp_jt3: float, approximate: bool = False) -> float:
    """Average successfully delivered bit rate over MPC hits, LCD hits and misses."""
    mpc, lcd, miss = _range_probs(pop, plan.rho, plan.M, plan.K, approximate)
    return float(R_d * (mpc * scdp_jt1 + lcd * scdp_pts2 + miss * scdp_jt3))


def average_power(power: PowerModel, K: int, p_cm) -> float:
    """Transmit power of all K SBSs plus backhaul power on a cache miss."""
    return _scalar(K * power.P_t + K * power.P_b * np.asarray(p_cm, dtype=np.float64))


def ee_curve(pop: ZipfPopularity, rho, M: int, K: int, power: PowerModel, R_d: float,
             scdps: tuple[float, float, float], approximate: bool = False):
    """``eta(rho|K)`` in bit/s/W for scalar or array ``rho``."""
    jt1, pts2, jt3 = scdps
    mpc, lcd, miss = _range_probs(pop, rho, M, K, approximate)
    rate = R_d * (mpc * jt1 + lcd * pts2 + miss * jt3)
    return _scalar(rate / (K * power.P_t + K * power.P_b * miss))


def energy_efficiency(pop: ZipfPopularity, plan: CachePlan, power: PowerModel, targets,
                      scdps: tuple[float, float, float], approximate: bool = False) -> float:
    """EE of the plan; ``targets`` supplies ``R_d`` (a :class:`SirTargets`)."""
    return ee_curve(pop, plan.rho, plan.M, plan.K, power, targets.R_d, scdps, approximate)


def no_cache_ee(K: int, power: PowerModel, R_d: float, scdp_jt3: float) -> float:
    """Every request goes through the backhaul and is served by delayed JT."""
    return R_d * scdp_jt3 / (K * (power.P_t + power.P_b))


def maximize_ee(pop: ZipfPopularity, K: int, power: PowerModel, targets,
                scdps: tuple[float, float, float], tol: float = 1e-4,
                M: int = 5000) -> OptimizationResult:
    """Maximize the approximate EE: coarse grid, then golden section around the best node."""
    if not 0.0 < tol <= 0.1:
        raise DomainError(f"tol must lie in (0, 0.1], got {tol}")
    if K == 1:
        val = ee_curve(pop, 1.0, M, 1, power, targets.R_d, scdps, approximate=True)
        return OptimizationResult(1.0, val, "golden-section", 1, ("no-op-split",))

    def eta(r):
        return ee_curve(pop, r, M, K, power, targets.R_d, scdps, approximate=True)

    grid = rho_grid(EE_COARSE_STEP)
    vals = eta(grid)
    i = int(np.argmax(vals))
    best_rho, best_val = float(grid[i]), float(vals[i])
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, len(grid) - 1)])
    x, fx = golden_section_max(eta, lo, hi, tol)
    if fx > best_val:
        best_rho, best_val = x, fx
    return OptimizationResult(best_rho, float(best_val), "golden-section", K)


# ---------------------------------------------------------------------------
# averaging over the cluster size
# ---------------------------------------------------------------------------

def average_over_k(values: Mapping[int, float] | Callable[[int], float], geom: ClusterGeometry,
                   K_max: int = 10, renormalize: bool = False) -> float:
    """``sum_{K=1..K_max} P(n=K) * value(K)``, optionally divided by the included mass."""
    if K_max < 1:
        raise DomainError(f"K_max must be >= 1, got {K_max}")
    get = values if callable(values) else values.__getitem__
    weights = [cluster_size_pmf(geom, K) for K in range(1, K_max + 1)]
    total = math.fsum(w * get(K) for K, w in zip(range(1, K_max + 1), weights))
    if renormalize:
        total /= math.fsum(weights)
    return total
