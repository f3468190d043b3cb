"""Successful content delivery probabilities (SCDP) for JT, PT-SS and PT-OS.

Fading and out-of-cluster interference are integrated out by the Laplace
transform, leaving an expectation over in-cluster distances. The estimators
average that kernel over sampled distances (common random numbers across a
theta sweep); a tensor Gauss-Legendre rule is available for ``K <= 3``.

Sampling is split into fixed blocks, each with its own seed stream, so the
estimate does not depend on how blocks are grouped into shards.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _accel
from .errors import DomainError
from .interference import ClusterGeometry, PathlossModel, log_laplace

BLOCK = 10_000
DEFAULT_BUDGET = 200_000
SCHEMES = ("JT", "PT-SS", "PT-OS")
_STREAM = {"JT": 11, "PT-SS": 12, "PT-OS": 13, "PT-OS-joint": 14}


@dataclass(frozen=True)
class SirTargets:
    """SIR thresholds implied by target rate ``R_d`` over bandwidth ``W``."""

    R_d: float
    W: float
    K: int
    beta: float = 1.0

    def __post_init__(self):
        if not self.R_d >= 0 or not self.W > 0:
            raise DomainError("need R_d >= 0 and W > 0")
        if self.K < 1:
            raise DomainError(f"K must be >= 1, got {self.K}")
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"beta must lie in (0, 1], got {self.beta}")

    @property
    def theta1(self) -> float:
        """Single-stream target (JT and PT-OS)."""
        return 2.0 ** (self.R_d / self.W) - 1.0

    @property
    def theta2(self) -> float:
        """Per-stream target when K streams share the band (PT-SS)."""
        return 2.0 ** (self.R_d / (self.K * self.W)) - 1.0

    @property
    def theta3(self) -> float:
        """JT target after backhaul delay leaves a fraction beta of the slot."""
        return 2.0 ** (self.R_d / (self.beta * self.W)) - 1.0


@dataclass(frozen=True)
class ScdpEstimate:
    value: float
    std_error: float
    n_samples: int
    method: str

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0 and self.std_error >= 0 and self.n_samples >= 1):
            raise DomainError(f"invalid estimate {self!r}")


# ---------------------------------------------------------------------------
# per-block kernels: return (sum, sum of squares) per theta
# ---------------------------------------------------------------------------

@_accel.jit
def _jt_a4_loop(u, R, lam, thetas):
    n, K = u.shape
    T = thetas.shape[0]
    sums = np.zeros(T)
    sq = np.zeros(T)
    R2 = R * R
    c = -math.pi * lam
    for i in range(n):
        agg = 0.0
        for k in range(K):
            x2 = R2 * u[i, k]
            agg += 1.0 / (x2 * x2)
        for t in range(T):
            root = math.sqrt(thetas[t] / agg)
            v = math.exp(c * root * math.atan2(root, R2))
            sums[t] += v
            sq[t] += v * v
    return sums, sq


def _jt_a4_numpy(u, R, lam, thetas):
    R2 = R * R
    with np.errstate(divide="ignore"):
        agg = np.sum((R2 * u) ** -2.0, axis=1)
    root = np.sqrt(thetas[:, None] / agg[None, :])
    v = np.exp(-math.pi * lam * root * np.arctan2(root, R2))
    return v.sum(axis=1), (v * v).sum(axis=1)


@_accel.jit
def _ptss_a4_loop(u, R, lam, thetas):
    # u: uniforms already sorted along axis 1, so x_k = R*sqrt(u_k) is ordered
    n, K = u.shape
    T = thetas.shape[0]
    sums = np.zeros(T)
    sq = np.zeros(T)
    R2 = R * R
    c = -math.pi * lam
    for t in range(T):
        rt = math.sqrt(thetas[t])
        inner = math.atan(rt)
        for i in range(n):
            acc = 0.0
            for k in range(K - 1):
                acc += R2 * u[i, k]
            xK2 = R2 * u[i, K - 1]
            logv = c * rt * (acc * inner + xK2 * math.atan2(rt * xK2, R2))
            v = math.exp(logv)
            sums[t] += v
            sq[t] += v * v
    return sums, sq


def _ptss_a4_numpy(u, R, lam, thetas):
    R2 = R * R
    rt = np.sqrt(thetas)[:, None]
    inner = R2 * u[:, :-1].sum(axis=1)[None, :]
    xK2 = R2 * u[:, -1][None, :]
    v = np.exp(-math.pi * lam * rt * (inner * np.arctan(rt) + xK2 * np.arctan2(rt * xK2, R2)))
    return v.sum(axis=1), (v * v).sum(axis=1)


_jt_a4 = _accel.select(_jt_a4_loop, _jt_a4_numpy)
_ptss_a4 = _accel.select(_ptss_a4_loop, _ptss_a4_numpy)


def _jt_general(u, R, lam, alpha, thetas):
    x = R * np.sqrt(u)
    with np.errstate(divide="ignore"):
        agg = np.sum(x ** -alpha, axis=1)
    v = np.exp(log_laplace(thetas[:, None] / agg[None, :], R, lam, alpha))
    return v.sum(axis=1), (v * v).sum(axis=1)


def _ptss_general(u, R, lam, alpha, thetas):
    x = R * np.sqrt(u)
    th = thetas[:, None, None]
    near = x[None, :, :-1]
    logv = log_laplace(th * near ** alpha, near, lam, alpha).sum(axis=2)
    far = x[None, :, -1]
    logv += log_laplace(thetas[:, None] * far ** alpha, R, lam, alpha)
    v = np.exp(logv)
    return v.sum(axis=1), (v * v).sum(axis=1)


def _single_link(x, R, lam, alpha, thetas):
    """``L_{I|R}(theta * x^alpha)`` for each theta and distance; shape ``(T, n)``."""
    return np.exp(log_laplace(thetas[:, None] * x[None, :] ** alpha, R, lam, alpha))


# ---------------------------------------------------------------------------
# block driver
# ---------------------------------------------------------------------------

def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, block)))


def block_sizes(total: int, block: int = BLOCK) -> list[int]:
    if total < 1:
        raise DomainError(f"budget must be >= 1, got {total}")
    full, rest = divmod(total, block)
    return [block] * full + ([rest] if rest else [])


def shard_plan(n_blocks: int, shards: int) -> list[range]:
    """Contiguous block ranges, one per shard."""
    shards = max(1, min(shards, n_blocks))
    edges = np.linspace(0, n_blocks, shards + 1).round().astype(int)
    return [range(a, b) for a, b in zip(edges[:-1], edges[1:])]


def run_blocks(work: Callable[[int], object], n_blocks: int, shards: int = 1,
               executor: Executor | None = None) -> list:
    """Evaluate ``work(b)`` for every block and return results in block order."""
    plan = shard_plan(n_blocks, shards)

    def run_shard(blocks: range) -> list:
        return [work(b) for b in blocks]

    if executor is None:
        parts = [run_shard(p) for p in plan]
    else:
        parts = list(executor.map(run_shard, plan))
    return [r for part in parts for r in part]


def _summarize(sums: np.ndarray, sq: np.ndarray, n: int, method: str) -> list[ScdpEstimate]:
    mean = sums / n
    if n > 1:
        var = np.maximum(sq - n * mean * mean, 0.0) / (n - 1)
        se = np.sqrt(var / n)
    else:
        se = np.zeros_like(mean)
    mean = np.clip(mean, 0.0, 1.0)
    return [ScdpEstimate(float(m), float(e), n, method) for m, e in zip(mean, se)]


def _check(K: int, thetas: np.ndarray, budget: int):
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    if np.any(thetas < 0) or not np.all(np.isfinite(thetas)):
        raise DomainError("theta must be finite and non-negative")
    if budget < 1:
        raise DomainError(f"budget must be >= 1, got {budget}")


def _sweep(scheme: str, geom: ClusterGeometry, model: PathlossModel, K: int,
           thetas: Sequence[float], budget: int, seed: int, shards: int,
           executor: Executor | None) -> list[ScdpEstimate]:
    thetas = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    _check(K, thetas, budget)
    R, lam, alpha = geom.R, geom.lambda_b, model.alpha
    sizes = block_sizes(budget)
    stream = _STREAM[scheme]

    def work(b):
        rng = block_rng(seed, stream, b)
        if scheme == "PT-OS":
            x = R * np.sqrt(rng.random(sizes[b]))
            v = _single_link(x, R, lam, alpha, thetas)
            return v.sum(axis=1), (v * v).sum(axis=1)
        u = rng.random((sizes[b], K))
        if scheme == "JT":
            if alpha == 4.0:
                return _jt_a4(u, R, lam, thetas)
            return _jt_general(u, R, lam, alpha, thetas)
        u.sort(axis=1)
        if alpha == 4.0:
            return _ptss_a4(u, R, lam, thetas)
        return _ptss_general(u, R, lam, alpha, thetas)

    results = run_blocks(work, len(sizes), shards, executor)
    sums = np.zeros(len(thetas))
    sq = np.zeros(len(thetas))
    for s, q in results:
        sums += s
        sq += q
    est = _summarize(sums, sq, budget, "analytic-mc")
    if scheme == "PT-OS":
        # per-stream success is i.i.d. across the K streams: value = m^K,
        # standard error by the delta method
        est = [ScdpEstimate(e.value ** K, K * e.value ** (K - 1) * e.std_error, budget,
                            "analytic-mc") for e in est]
    return est


def scdp_jt_sweep(geom, model, K, thetas, budget=DEFAULT_BUDGET, seed=0, shards=1,
                  executor=None) -> list[ScdpEstimate]:
    """JT SCDP for every theta in ``thetas`` from one shared set of distance draws."""
    return _sweep("JT", geom, model, K, thetas, budget, seed, shards, executor)


def scdp_pt_ss_sweep(geom, model, K, thetas, budget=DEFAULT_BUDGET, seed=0, shards=1,
                     executor=None) -> list[ScdpEstimate]:
    return _sweep("PT-SS", geom, model, K, thetas, budget, seed, shards, executor)


def scdp_pt_os_sweep(geom, model, K, thetas, budget=DEFAULT_BUDGET, seed=0, shards=1,
                     executor=None) -> list[ScdpEstimate]:
    return _sweep("PT-OS", geom, model, K, thetas, budget, seed, shards, executor)


def scdp_jt(geom: ClusterGeometry, model: PathlossModel, K: int, theta: float,
            budget: int = DEFAULT_BUDGET, seed: int = 0, shards: int = 1) -> ScdpEstimate:
    """JT: mean over i.i.d. distances of ``L_{I|R}(theta / sum_i x_i^-alpha)``."""
    return scdp_jt_sweep(geom, model, K, [theta], budget, seed, shards)[0]


def scdp_pt_ss(geom: ClusterGeometry, model: PathlossModel, K: int, theta: float,
               budget: int = DEFAULT_BUDGET, seed: int = 0, shards: int = 1) -> ScdpEstimate:
    """PT-SS with distance-ordered SIC under the PPP approximation.

    Streams ``k < K`` see interference from outside their own distance; the
    last stream sees only out-of-cluster interference beyond ``R``.
    """
    return scdp_pt_ss_sweep(geom, model, K, [theta], budget, seed, shards)[0]


def scdp_pt_os(geom: ClusterGeometry, model: PathlossModel, K: int, theta: float,
               budget: int = DEFAULT_BUDGET, seed: int = 0, shards: int = 1) -> ScdpEstimate:
    """PT-OS: ``(E[L_{I|R}(theta x^alpha)])^K`` over a single uniform-disc distance."""
    return scdp_pt_os_sweep(geom, model, K, [theta], budget, seed, shards)[0]


def scdp_pt_os_joint(geom: ClusterGeometry, model: PathlossModel, K: int, theta: float,
                     budget: int = DEFAULT_BUDGET, seed: int = 0) -> ScdpEstimate:
    """PT-OS from the unfactorized K-dimensional product; used to check the factorization."""
    thetas = np.array([float(theta)])
    _check(K, thetas, budget)
    R, lam, alpha = geom.R, geom.lambda_b, model.alpha
    sizes = block_sizes(budget)
    sums = sq = 0.0
    for b, n in enumerate(sizes):
        x = R * np.sqrt(block_rng(seed, _STREAM["PT-OS-joint"], b).random((n, K)))
        v = np.exp(log_laplace(thetas[0] * x ** alpha, R, lam, alpha).sum(axis=1))
        sums += v.sum()
        sq += (v * v).sum()
    return _summarize(np.array([sums]), np.array([sq]), budget, "analytic-mc")[0]


# ---------------------------------------------------------------------------
# tensor Gauss-Legendre cross-check
# ---------------------------------------------------------------------------

def scdp_quadrature(scheme: str, geom: ClusterGeometry, model: PathlossModel, K: int,
                    theta: float, nodes: int = 64) -> ScdpEstimate:
    """Deterministic SCDP by tensor Gauss-Legendre over ``[0, 1]^K``, ``K <= 3``.

    Distances are written as ``x = R*t`` (weight ``2t``) for the unordered
    schemes and as ``x_K = R*t_K``, ``x_k = x_{k+1}*t_k`` (weight
    ``2k*t_k^(2k-1)``) for the ordered PT-SS chain, so the integrand is smooth.
    """
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}")
    if not 1 <= K <= 3:
        raise DomainError("tensor quadrature is limited to K <= 3")
    R, lam, alpha = geom.R, geom.lambda_b, model.alpha
    g, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (g + 1.0)
    w = 0.5 * w
    if scheme == "PT-OS":
        x = R * t
        m = np.sum(w * 2 * t * np.exp(log_laplace(theta * x ** alpha, R, lam, alpha)))
        return ScdpEstimate(float(np.clip(m ** K, 0, 1)), 0.0, nodes, "analytic-quadrature")
    grids = np.meshgrid(*([t] * K), indexing="ij")
    wts = np.meshgrid(*([w] * K), indexing="ij")
    tt = np.stack([a.ravel() for a in grids], axis=1)
    ww = np.prod(np.stack([a.ravel() for a in wts], axis=1), axis=1)
    if scheme == "JT":
        x = R * tt
        dens = np.prod(2 * tt, axis=1)
        agg = np.sum(x ** -alpha, axis=1)
        vals = np.exp(log_laplace(theta / agg, R, lam, alpha))
    else:
        x = np.empty_like(tt)
        x[:, K - 1] = R * tt[:, K - 1]
        for k in range(K - 1, 0, -1):
            x[:, k - 1] = x[:, k] * tt[:, k - 1]
        ks = np.arange(1, K + 1)
        dens = np.prod(2 * ks * tt ** (2 * ks - 1), axis=1)
        logv = log_laplace(theta * x[:, -1] ** alpha, R, lam, alpha)
        if K > 1:
            near = x[:, :-1]
            logv = logv + log_laplace(theta * near ** alpha, near, lam, alpha).sum(axis=1)
        vals = np.exp(logv)
    val = float(np.sum(ww * dens * vals))
    return ScdpEstimate(float(np.clip(val, 0, 1)), 0.0, nodes ** K, "analytic-quadrature")
