"""Physical-layer Monte Carlo simulator for the cluster-centre user.

SBSs form a PPP in a square window centred on the cluster of interest. The
SBSs inside the cluster (hexagon or equal-area disc) cooperate; everything
else in the window interferes. Fading is Rayleigh: JT uses complex
coefficients summed coherently, PT schemes use power gains.

Realizations are generated in fixed-size blocks, each seeded from
``(seed, block index)``, so success counts do not depend on the shard plan.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from .errors import DomainError
from .interference import ClusterGeometry, PathlossModel
from .scdp import SCHEMES, ScdpEstimate, block_rng, block_sizes, run_blocks

SIM_BLOCK = 1000
_SIM_STREAM = 21
_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class SimProtocol:
    window: float = 1000.0
    n_realizations: int = 40_000
    cluster_mode: str = "hexagon"
    K: Optional[int] = None
    seed: int = 0

    def validate(self, geom: ClusterGeometry) -> None:
        if self.cluster_mode not in ("hexagon", "disc"):
            raise DomainError(f"cluster_mode must be 'hexagon' or 'disc', got {self.cluster_mode!r}")
        if self.window < 4 * geom.R_h:
            raise DomainError(f"window side {self.window} must be >= 4*R_h = {4 * geom.R_h}")
        if self.n_realizations < 1:
            raise DomainError("n_realizations must be >= 1")
        if self.K is not None and self.K < 1:
            raise DomainError(f"conditioning K must be >= 1, got {self.K}")


@dataclass
class NetworkRealization:
    """One SBS layout with its fading draws. Positions in metres, user at the origin.

    ``intf_gain`` is the interferer fading on the shared band (JT, PT-SS and
    the first PT-OS sub-band); ``intf_gain_streams[k]`` is the interferer
    fading on PT-OS sub-band ``k``, with row 0 equal to ``intf_gain``.
    """

    coop_xy: np.ndarray
    intf_xy: np.ndarray
    coop_h: np.ndarray
    intf_gain: np.ndarray
    intf_gain_streams: Optional[np.ndarray] = None
    coop_gain: np.ndarray = field(init=False)

    def __post_init__(self):
        # PT streams see the power of the same coefficient JT combines coherently
        self.coop_gain = np.abs(self.coop_h) ** 2
        if self.intf_gain_streams is None:
            self.intf_gain_streams = np.tile(self.intf_gain, (len(self.coop_xy), 1))

    @property
    def coop_dist(self) -> np.ndarray:
        return np.hypot(self.coop_xy[:, 0], self.coop_xy[:, 1])

    @property
    def intf_dist(self) -> np.ndarray:
        return np.hypot(self.intf_xy[:, 0], self.intf_xy[:, 1])


# ---------------------------------------------------------------------------
# cluster shapes
# ---------------------------------------------------------------------------

def in_cluster(xy: np.ndarray, geom: ClusterGeometry, mode: str) -> np.ndarray:
    """Membership in the origin cluster: flat-top hexagon of apothem ``R_h`` or the disc."""
    x, y = np.abs(xy[..., 0]), np.abs(xy[..., 1])
    if mode == "disc":
        return x * x + y * y <= geom.R ** 2
    return (y <= geom.R_h) & (math.sqrt(3.0) * x + y <= 2.0 * geom.R_h)


def uniform_in_cluster(u: np.ndarray, geom: ClusterGeometry, mode: str) -> np.ndarray:
    """Map uniforms of shape ``(..., 3)`` to uniform points of the cluster, no rejection."""
    if mode == "disc":
        r = geom.R * np.sqrt(u[..., 0])
        phi = 2.0 * math.pi * u[..., 1]
        return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
    # one of six equilateral triangles, then a folded uniform point in it
    circ = 2.0 * geom.R_h / math.sqrt(3.0)
    k = np.minimum(np.floor(6.0 * u[..., 0]), 5.0)
    a = u[..., 1]
    b = u[..., 2]
    fold = a + b > 1.0
    a = np.where(fold, 1.0 - a, a)
    b = np.where(fold, 1.0 - b, b)
    ang0 = k * (math.pi / 3.0)
    ang1 = ang0 + math.pi / 3.0
    px = circ * (a * np.cos(ang0) + b * np.cos(ang1))
    py = circ * (a * np.sin(ang0) + b * np.sin(ang1))
    return np.stack([px, py], axis=-1)


# ---------------------------------------------------------------------------
# batched layouts
# ---------------------------------------------------------------------------

@dataclass
class RealizationBatch:
    """Many layouts in flat form.

    Cooperators are padded to ``(n, kmax)`` and sorted by distance (padding has
    infinite distance). Interferers of realization ``i`` are
    ``intf_r2[off[i]:off[i+1]]``. Fading is drawn independently per scheme.
    """

    coop_r2: np.ndarray
    coop_count: np.ndarray
    intf_r2: np.ndarray
    intf_off: np.ndarray
    jt_re: np.ndarray
    jt_im: np.ndarray
    ss_gain: np.ndarray
    os_gain: np.ndarray
    jt_intf: np.ndarray  # (T,)
    ss_intf: np.ndarray  # (T,)
    os_intf: np.ndarray  # (kmax, T): one sub-band per PT-OS stream
    redraws: int = 0

    @property
    def n(self) -> int:
        return self.coop_r2.shape[0]


def _ppp_window(rng, geom, protocol, n):
    half = 0.5 * protocol.window
    counts = rng.poisson(geom.lambda_b * protocol.window ** 2, size=n)
    xy = rng.uniform(-half, half, size=(int(counts.sum()), 2))
    return counts, xy


def draw_layouts(protocol: SimProtocol, geom: ClusterGeometry, rng: np.random.Generator,
                 n: int):
    """Return cooperator and interferer positions for ``n`` non-empty layouts.

    Output: list of cooperator arrays, flat interferer positions, offsets, redraws.
    """
    coops: list[np.ndarray] = []
    intfs: list[np.ndarray] = []
    redraws = 0
    while len(coops) < n:
        need = n - len(coops)
        if protocol.K is not None:
            K = protocol.K
            cxy = uniform_in_cluster(rng.random((need, K, 3)), geom, protocol.cluster_mode)
            counts, xy = _ppp_window(rng, geom, protocol, need)
            outside = ~in_cluster(xy, geom, protocol.cluster_mode)
            for i, part in enumerate(np.split(xy, np.cumsum(counts)[:-1])):
                coops.append(cxy[i])
                intfs.append(part[outside[np.cumsum(counts)[i] - counts[i]:np.cumsum(counts)[i]]])
        else:
            counts, xy = _ppp_window(rng, geom, protocol, need)
            inside = in_cluster(xy, geom, protocol.cluster_mode)
            ends = np.cumsum(counts)
            for i in range(need):
                lo, hi = ends[i] - counts[i], ends[i]
                mask = inside[lo:hi]
                if not mask.any():
                    redraws += 1
                    continue
                coops.append(xy[lo:hi][mask])
                intfs.append(xy[lo:hi][~mask])
    return coops, intfs, redraws


def draw_batch(protocol: SimProtocol, geom: ClusterGeometry, rng: np.random.Generator,
               n: int) -> RealizationBatch:
    coops, intfs, redraws = draw_layouts(protocol, geom, rng, n)
    counts = np.array([len(c) for c in coops], dtype=np.int64)
    kmax = int(counts.max())
    r2 = np.full((n, kmax), np.inf)
    for i, c in enumerate(coops):
        r2[i, :len(c)] = np.sort(c[:, 0] ** 2 + c[:, 1] ** 2)
    lens = np.array([len(p) for p in intfs], dtype=np.int64)
    off = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lens, out=off[1:])
    flat = np.concatenate(intfs) if off[-1] else np.zeros((0, 2))
    intf_r2 = flat[:, 0] ** 2 + flat[:, 1] ** 2
    jt = rng.standard_normal((2, n, kmax)) * math.sqrt(0.5)
    ss = np.maximum(rng.standard_exponential((n, kmax)), _TINY)
    os_ = np.maximum(rng.standard_exponential((n, kmax)), _TINY)
    ig = np.maximum(rng.standard_exponential((2 + kmax, int(off[-1]))), _TINY)
    return RealizationBatch(r2, counts, intf_r2, off, jt[0], jt[1], ss, os_,
                            ig[0], ig[1], ig[2:], redraws)


def draw_realization(protocol: SimProtocol, geom: ClusterGeometry,
                     rng: np.random.Generator) -> NetworkRealization:
    protocol.validate(geom)
    coops, intfs, _ = draw_layouts(protocol, geom, rng, 1)
    coop = coops[0]
    h = (rng.standard_normal(len(coop)) + 1j * rng.standard_normal(len(coop))) * math.sqrt(0.5)
    g = np.maximum(rng.standard_exponential((len(coop), len(intfs[0]))), _TINY)
    return NetworkRealization(coop, intfs[0], h, g[0], g)


# ---------------------------------------------------------------------------
# per-realization SIRs (reference implementations)
# ---------------------------------------------------------------------------

def _interference(real: NetworkRealization, alpha: float, gain=None) -> float:
    gain = real.intf_gain if gain is None else gain
    return float(np.sum(gain * real.intf_dist ** -alpha))


def _ratio(signal: float, interference: float) -> float:
    return math.inf if interference == 0.0 else signal / interference


def sir_jt(real: NetworkRealization, model: PathlossModel) -> float:
    """Coherent joint-transmission SIR; ``inf`` when nothing interferes."""
    if len(real.coop_xy) < 1:
        raise DomainError("need at least one cooperator")
    amp = np.sum(real.coop_h * real.coop_dist ** (-model.alpha / 2))
    return _ratio(abs(amp) ** 2, _interference(real, model.alpha))


def sir_pt_os(real: NetworkRealization, model: PathlossModel) -> np.ndarray:
    """Per-stream SIRs on orthogonal sub-bands (only out-of-cluster interference).

    Each sub-band has its own interferer fading draw.
    """
    if len(real.coop_xy) < 1:
        raise DomainError("need at least one cooperator")
    sig = real.coop_gain * real.coop_dist ** -model.alpha
    return np.array([_ratio(s, _interference(real, model.alpha, g))
                     for s, g in zip(sig, real.intf_gain_streams)])


def sic_chain_pt_ss(real: NetworkRealization, model: PathlossModel,
                    theta2: float) -> tuple[bool, np.ndarray]:
    """Exact distance-ordered SIC chain.

    Stream ``k`` (nearest first) is decoded against the not-yet-cancelled
    farther cooperators plus all interferers. Returns the success flag and the
    per-stream SIRs in decoding order.
    """
    order = np.argsort(real.coop_dist)
    pw = (real.coop_gain * real.coop_dist ** -model.alpha)[order]
    interference = _interference(real, model.alpha)
    sirs = np.empty(len(pw))
    remaining = 0.0
    for k in range(len(pw) - 1, -1, -1):
        sirs[k] = _ratio(pw[k], remaining + interference)
        remaining += pw[k]
    return bool(np.all(sirs > theta2) or theta2 == 0.0), sirs


# ---------------------------------------------------------------------------
# batched SIR kernels: (sir_jt, min sir pt-ss, min sir pt-os) per realization
# ---------------------------------------------------------------------------

@_accel.jit
def _batch_sirs_loop(coop_r2, coop_count, intf_r2, intf_off, jt_re, jt_im, ss_gain,
                     os_gain, jt_intf, ss_intf, os_intf, alpha):
    n = coop_r2.shape[0]
    out = np.empty((3, n))
    half = -0.5 * alpha
    quarter = -0.25 * alpha
    # path loss of every interferer, computed once and reused by all streams
    pl = np.empty(intf_r2.shape[0])
    for j in range(intf_r2.shape[0]):
        pl[j] = intf_r2[j] ** half
    for i in range(n):
        lo = intf_off[i]
        hi = intf_off[i + 1]
        i0 = 0.0
        i1 = 0.0
        for j in range(lo, hi):
            i0 += jt_intf[j] * pl[j]
            i1 += ss_intf[j] * pl[j]
        re = 0.0
        im = 0.0
        for k in range(coop_count[i]):
            a = coop_r2[i, k] ** quarter
            re += jt_re[i, k] * a
            im += jt_im[i, k] * a
        out[0, i] = (re * re + im * im) / i0 if i0 > 0.0 else np.inf
        best = np.inf
        for k in range(coop_count[i]):
            ik = 0.0
            for j in range(lo, hi):
                ik += os_intf[k, j] * pl[j]
            s = os_gain[i, k] * coop_r2[i, k] ** half
            v = s / ik if ik > 0.0 else np.inf
            if v < best:
                best = v
        out[2, i] = best
        best = np.inf
        rem = 0.0
        for k in range(coop_count[i] - 1, -1, -1):
            p = ss_gain[i, k] * coop_r2[i, k] ** half
            tot = rem + i1
            v = p / tot if tot > 0.0 else np.inf
            if v < best:
                best = v
            rem += p
        out[1, i] = best
    return out


def _batch_sirs_numpy(coop_r2, coop_count, intf_r2, intf_off, jt_re, jt_im, ss_gain,
                      os_gain, jt_intf, ss_intf, os_intf, alpha):
    n, kmax = coop_r2.shape
    ids = np.repeat(np.arange(n), np.diff(intf_off))
    pl = intf_r2 ** (-0.5 * alpha)
    i_jt = np.bincount(ids, weights=jt_intf * pl, minlength=n)
    i_ss = np.bincount(ids, weights=ss_intf * pl, minlength=n)
    i_os = np.stack([np.bincount(ids, weights=os_intf[k] * pl, minlength=n)
                     for k in range(kmax)], axis=1)
    amp = coop_r2 ** (-0.25 * alpha)
    pad = ~(np.arange(kmax)[None, :] < coop_count[:, None])
    re = np.sum(jt_re * amp, axis=1)
    im = np.sum(jt_im * amp, axis=1)
    out = np.empty((3, n))
    with np.errstate(divide="ignore", invalid="ignore"):
        out[0] = np.where(i_jt > 0, (re * re + im * im) / i_jt, np.inf)
        plc = coop_r2 ** (-0.5 * alpha)
        sir_os = np.where(i_os > 0, os_gain * plc / i_os, np.inf)
        out[2] = np.where(pad, np.inf, sir_os).min(axis=1)
        p = np.where(pad, 0.0, ss_gain * plc)
        rc = np.cumsum(p[:, ::-1], axis=1)[:, ::-1]
        rem = np.zeros_like(p)
        rem[:, :-1] = rc[:, 1:]
        tot = rem + i_ss[:, None]
        sir_ss = np.where(tot > 0, p / tot, np.inf)
        out[1] = np.where(pad, np.inf, sir_ss).min(axis=1)
    return out


_batch_sirs = _accel.select(_batch_sirs_loop, _batch_sirs_numpy)


def batch_sirs(batch: RealizationBatch, model: PathlossModel, backend: str | None = None):
    """Rows: JT SIR, PT-SS bottleneck SIR, PT-OS bottleneck SIR."""
    fn = {"numba": _batch_sirs_loop, "numpy": _batch_sirs_numpy, None: _batch_sirs}[backend]
    return fn(batch.coop_r2, batch.coop_count, batch.intf_r2, batch.intf_off,
              batch.jt_re, batch.jt_im, batch.ss_gain, batch.os_gain, batch.jt_intf,
              batch.ss_intf, batch.os_intf, float(model.alpha))


# ---------------------------------------------------------------------------
# estimation
# ---------------------------------------------------------------------------

@dataclass
class SimOutcome:
    """Bottleneck SIRs of every realization, in realization order."""

    sirs: np.ndarray  # (3, n): JT, PT-SS, PT-OS
    coop_count: np.ndarray
    redraws: int

    @property
    def n(self) -> int:
        return self.sirs.shape[1]

    def successes(self, scheme: str, thetas) -> np.ndarray:
        row = self.sirs[SCHEMES.index(scheme)]
        th = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
        return np.array([n_ok if t == 0.0 else int(np.count_nonzero(row > t))
                         for t, n_ok in zip(th, [self.n] * len(th))])

    def estimates(self, scheme: str, thetas) -> list[ScdpEstimate]:
        n = self.n
        out = []
        for k in self.successes(scheme, thetas):
            p = k / n
            out.append(ScdpEstimate(p, math.sqrt(p * (1 - p) / n), n, "simulation"))
        return out


def simulate(protocol: SimProtocol, geom: ClusterGeometry, model: PathlossModel,
             shards: int = 1, executor: Executor | None = None) -> SimOutcome:
    protocol.validate(geom)
    sizes = block_sizes(protocol.n_realizations, SIM_BLOCK)

    def work(b):
        rng = block_rng(protocol.seed, _SIM_STREAM, b)
        batch = draw_batch(protocol, geom, rng, sizes[b])
        return batch_sirs(batch, model), batch.coop_count, batch.redraws

    parts = run_blocks(work, len(sizes), shards, executor)
    return SimOutcome(np.concatenate([p[0] for p in parts], axis=1),
                      np.concatenate([p[1] for p in parts]),
                      sum(p[2] for p in parts))


def estimate_scdp_sim(protocol: SimProtocol, geom: ClusterGeometry, model: PathlossModel,
                      scheme: str, theta: float, shards: int = 1) -> ScdpEstimate:
    """Success frequency of ``scheme`` at SIR target ``theta`` with binomial error."""
    if scheme not in SCHEMES:
        raise DomainError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    return simulate(protocol, geom, model, shards).estimates(scheme, [theta])[0]
