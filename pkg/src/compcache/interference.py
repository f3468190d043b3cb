"""Stochastic-geometry kernels for a cluster-centre user.

Interference comes from a PPP of SBSs outside an exclusion ball of radius
``x``; with Rayleigh fading its Laplace transform is

    L(s | x) = exp(-pi * lam * s^(2/a) * T(x^2 / s^(2/a))),
    T(c)     = int_c^inf dw / (1 + w^(a/2)).

``T`` has an arctan closed form for ``a == 4``. For other exponents the
scalar API integrates numerically and the vectorized path uses a Gauss
hypergeometric representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from . import _accel
from .errors import DivergenceError, DomainError

HEX_TO_DISC = math.sqrt(2.0 * math.sqrt(3.0) / math.pi)


@dataclass(frozen=True)
class ClusterGeometry:
    """Hexagonal cluster of half-spacing ``R_h`` and its equal-area disc."""

    R_h: float
    lambda_b: float

    def __post_init__(self):
        if not self.R_h > 0:
            raise DomainError(f"R_h must be positive, got {self.R_h}")
        if not self.lambda_b >= 0:
            raise DomainError(f"lambda_b must be non-negative, got {self.lambda_b}")

    @property
    def R(self) -> float:
        return self.R_h * HEX_TO_DISC

    @property
    def area(self) -> float:
        return 2.0 * math.sqrt(3.0) * self.R_h ** 2

    @property
    def mean_size(self) -> float:
        return self.lambda_b * self.area


@dataclass(frozen=True)
class PathlossModel:
    alpha: float = 4.0

    def __post_init__(self):
        if not self.alpha > 2:
            raise DivergenceError(f"alpha must exceed 2, got {self.alpha}")


def cluster_size_pmf(geom: ClusterGeometry, K: int) -> float:
    """Poisson probability of exactly ``K`` SBSs in a cluster."""
    if K < 0:
        return 0.0
    mu = geom.mean_size
    if mu == 0.0:
        return 1.0 if K == 0 else 0.0
    return math.exp(K * math.log(mu) - mu - math.lgamma(K + 1))


# ---------------------------------------------------------------------------
# tail integral T(c)
# ---------------------------------------------------------------------------

def _tail_quad(c: float, alpha: float, epsrel: float = 1e-13) -> float:
    """Adaptive Gauss-Kronrod evaluation of ``T(c)``.

    ``[1, inf)`` is folded onto ``(0, 1]`` by ``w = 1/v``; a remaining
    ``[c, 1)`` piece is integrated directly.
    """
    d = 0.5 * alpha
    opts = dict(epsabs=0.0, epsrel=epsrel, limit=500)
    lo = max(c, 1.0)
    # w = lo / v  =>  dw = lo / v^2 dv
    def folded(v):
        return lo * v ** (d - 2.0) / (v ** d + lo ** d)

    total, _ = integrate.quad(folded, 0.0, 1.0, **opts)
    if c < 1.0:
        head, _ = integrate.quad(lambda w: 1.0 / (1.0 + w ** d), c, 1.0, **opts)
        total += head
    return total


def _tail_hyp2f1(c: np.ndarray, alpha: float) -> np.ndarray:
    d = 0.5 * alpha
    c = np.asarray(c, dtype=np.float64)
    out = np.empty_like(c)
    lo = c <= 1.0
    cl = c[lo]
    whole = (math.pi / d) / math.sin(math.pi / d)
    out[lo] = whole - cl * special.hyp2f1(1.0, 1.0 / d, 1.0 + 1.0 / d, -(cl ** d))
    ch = c[~lo]
    out[~lo] = ch ** (1.0 - d) / (d - 1.0) * special.hyp2f1(
        1.0, 1.0 - 1.0 / d, 2.0 - 1.0 / d, -(ch ** (-d)))
    with np.errstate(over="ignore", invalid="ignore"):
        out[np.isinf(c)] = 0.0
    return out


def tail_integral(c, alpha: float, method: str = "auto"):
    """``T(c) = int_c^inf dw / (1 + w^(alpha/2))``.

    method: ``"closed"`` (alpha == 4 only), ``"quad"``, ``"hyp2f1"`` or ``"auto"``
    (closed form at alpha == 4, hypergeometric otherwise).
    """
    if not alpha > 2:
        raise DivergenceError(f"alpha must exceed 2, got {alpha}")
    if method == "auto":
        method = "closed" if alpha == 4.0 else "hyp2f1"
    scalar = np.ndim(c) == 0
    c = np.asarray(c, dtype=np.float64)
    if np.any(c < 0):
        raise DomainError("tail integral lower limit must be non-negative")
    if method == "closed":
        if alpha != 4.0:
            raise DomainError("arctan closed form requires alpha == 4")
        out = np.arctan2(1.0, c)
    elif method == "hyp2f1":
        out = _tail_hyp2f1(c, alpha)
    elif method == "quad":
        out = np.array([_tail_quad(float(ci), alpha) if np.isfinite(ci) else 0.0
                        for ci in c.ravel()]).reshape(c.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# Laplace transform
# ---------------------------------------------------------------------------

def laplace_interference(geom: ClusterGeometry, model: PathlossModel, s: float, x: float,
                         method: str = "auto") -> float:
    """Laplace transform at ``s`` of PPP interference from outside ``B(0, x)``.

    ``method="auto"`` uses the arctan form for alpha == 4 and adaptive
    quadrature otherwise; ``"quad"`` forces quadrature.
    """
    if s < 0 or x < 0:
        raise DomainError("s and x must be non-negative")
    alpha = model.alpha
    if s == 0.0 or geom.lambda_b == 0.0 or math.isinf(x):
        return 1.0
    if method == "auto":
        method = "closed" if alpha == 4.0 else "quad"
    scale = s ** (2.0 / alpha)
    if method == "closed" and alpha == 4.0:
        # pi/2 - arctan(x^2/sqrt(s)) written without cancellation
        tail = math.atan2(scale, x * x)
    else:
        tail = tail_integral(x * x / scale, alpha, method=method)
    return math.exp(-math.pi * geom.lambda_b * scale * tail)


def _log_laplace_a4_numpy(s, x, lam):
    root = np.sqrt(s)
    return -math.pi * lam * root * np.arctan2(root, x * x)


@_accel.jit
def _log_laplace_a4_loop(s, x, lam):
    out = np.empty(s.shape[0])
    c = -math.pi * lam
    for i in range(s.shape[0]):
        root = math.sqrt(s[i])
        out[i] = c * root * math.atan2(root, x[i] * x[i])
    return out


_log_laplace_a4 = _accel.select(_log_laplace_a4_loop, _log_laplace_a4_numpy)


def log_laplace(s, x, lam: float, alpha: float) -> np.ndarray:
    """Vectorized ``log L(s | x)``; ``s`` and ``x`` broadcast together."""
    s, x = np.broadcast_arrays(np.asarray(s, dtype=np.float64), np.asarray(x, dtype=np.float64))
    shape = s.shape
    s = np.ascontiguousarray(s).ravel()
    x = np.ascontiguousarray(x).ravel()
    if alpha == 4.0:
        return _log_laplace_a4(s, x, float(lam)).reshape(shape)
    scale = s ** (2.0 / alpha)
    out = np.zeros_like(s)
    live = scale > 0
    c = x[live] ** 2 / scale[live]
    out[live] = -math.pi * lam * scale[live] * _tail_hyp2f1(c, alpha)
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# distance sampling (inverse CDF)
# ---------------------------------------------------------------------------

def distances_from_uniform(u, R: float):
    """Inverse CDF of the pdf ``2x/R^2`` on ``[0, R]``."""
    return R * np.sqrt(u)


def sample_unordered_distances(geom: ClusterGeometry, K: int, rng: np.random.Generator,
                               size: int | None = None) -> np.ndarray:
    """``K`` i.i.d. distances of uniform points in the disc to its centre.

    Returns shape ``(K,)``, or ``(size, K)`` when ``size`` is given.
    """
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    shape = (K,) if size is None else (size, K)
    return distances_from_uniform(rng.random(shape), geom.R)


def sample_ordered_distances(geom: ClusterGeometry, K: int, rng: np.random.Generator,
                             size: int | None = None) -> np.ndarray:
    """Increasing distances of ``K`` uniform points (sorted unordered draws)."""
    return np.sort(sample_unordered_distances(geom, K, rng, size), axis=-1)


def sample_ordered_distances_sequential(geom: ClusterGeometry, K: int,
                                        rng: np.random.Generator,
                                        size: int | None = None) -> np.ndarray:
    """Same law as :func:`sample_ordered_distances`, built from the outside in.

    The farthest distance has CDF ``(x/R)^(2K)``; given the ``k``-th, the
    ``(k-1)``-th has CDF ``(y/x_k)^(2(k-1))`` on ``[0, x_k]``.
    """
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    n = 1 if size is None else size
    u = rng.random((n, K))
    out = np.empty((n, K))
    out[:, K - 1] = geom.R * u[:, K - 1] ** (1.0 / (2 * K))
    for k in range(K - 1, 0, -1):
        out[:, k - 1] = out[:, k] * u[:, k - 1] ** (1.0 / (2 * k))
    return out[0] if size is None else out
