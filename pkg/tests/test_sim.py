import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from compcache.errors import DomainError
from compcache.interference import ClusterGeometry, PathlossModel, cluster_size_pmf
from compcache.scdp import block_rng, scdp_jt, scdp_pt_os, scdp_pt_ss
from compcache.sim import (NetworkRealization, SimProtocol, batch_sirs, draw_batch,
                           draw_realization, estimate_scdp_sim, in_cluster, sic_chain_pt_ss,
                           simulate, sir_jt, sir_pt_os, uniform_in_cluster)

GEOM = ClusterGeometry(100.0, 1e-4)
A4 = PathlossModel(4.0)


@pytest.mark.parametrize("mode", ["hexagon", "disc"])
def test_cluster_area(mode):
    rng = np.random.default_rng(0)
    box = 2.4 * GEOM.R_h  # covers the hexagon vertices at 2*R_h/sqrt(3)
    xy = rng.uniform(-box / 2, box / 2, size=(1_000_000, 2))
    frac = in_cluster(xy, GEOM, mode).mean()
    p = GEOM.area / box ** 2
    assert abs(frac - p) < 4 * math.sqrt(p * (1 - p) / len(xy))


def test_hexagon_vertices_and_apothem():
    circ = 2 * GEOM.R_h / math.sqrt(3)
    inside = np.array([[0.0, 0.999 * GEOM.R_h], [0.999 * circ, 0.0]])
    outside = np.array([[0.0, 1.001 * GEOM.R_h], [1.001 * circ, 0.0]])
    assert in_cluster(inside, GEOM, "hexagon").all()
    assert not in_cluster(outside, GEOM, "hexagon").any()


@pytest.mark.parametrize("mode,second_moment", [
    ("hexagon", 5 / 12 * (2 * 100.0 / math.sqrt(3)) ** 2),
    ("disc", GEOM.R ** 2 / 2),
])
def test_uniform_in_cluster(mode, second_moment):
    rng = np.random.default_rng(1)
    xy = uniform_in_cluster(rng.random((400_000, 3)), GEOM, mode)
    assert in_cluster(xy * (1 - 1e-12), GEOM, mode).all()
    r2 = (xy ** 2).sum(axis=1)
    assert abs(r2.mean() - second_moment) < 4 * r2.std() / math.sqrt(len(r2))
    # rotational symmetry of order six: first moments vanish
    assert abs(xy[:, 0].mean()) < 4 * xy[:, 0].std() / math.sqrt(len(xy))


def test_unconditioned_cluster_statistics():
    out = simulate(SimProtocol(window=800, n_realizations=20_000), GEOM, A4)
    p0 = cluster_size_pmf(GEOM, 0)
    drawn = out.n + out.redraws
    assert abs(out.redraws / drawn - p0) < 4 * math.sqrt(p0 * (1 - p0) / drawn)
    mu = GEOM.mean_size
    mean_nonempty = mu / (1 - math.exp(-mu))
    assert abs(out.coop_count.mean() - mean_nonempty) < 4 * out.coop_count.std() / math.sqrt(out.n)


def test_conditioned_cluster_has_k_members():
    rng = block_rng(0, 99, 0)
    batch = draw_batch(SimProtocol(window=800, K=3), GEOM, rng, 200)
    assert np.all(batch.coop_count == 3) and batch.redraws == 0
    assert np.all(np.diff(batch.coop_r2, axis=1) >= 0)
    # interferer count is Poisson with mean lambda*(window^2 - cluster area)
    lens = np.diff(batch.intf_off)
    assert abs(lens.mean() - 1e-4 * (800 ** 2 - GEOM.area)) < 4 * math.sqrt(64 / 200)


def _row_realizations(batch, i):
    k = batch.coop_count[i]
    r = np.sqrt(batch.coop_r2[i, :k])
    coop = np.stack([r, np.zeros(k)], axis=1)
    lo, hi = batch.intf_off[i], batch.intf_off[i + 1]
    ri = np.sqrt(batch.intf_r2[lo:hi])
    intf = np.stack([ri, np.zeros_like(ri)], axis=1)
    jt = NetworkRealization(coop, intf, batch.jt_re[i, :k] + 1j * batch.jt_im[i, :k],
                            batch.jt_intf[lo:hi])
    ss = NetworkRealization(coop, intf, np.sqrt(batch.ss_gain[i, :k]), batch.ss_intf[lo:hi])
    os_ = NetworkRealization(coop, intf, np.sqrt(batch.os_gain[i, :k]), batch.os_intf[0, lo:hi],
                             batch.os_intf[:k, lo:hi])
    return jt, ss, os_


@pytest.mark.parametrize("K", [None, 2])
def test_batch_kernel_matches_reference_functions(K):
    rng = block_rng(3, 99, 0)
    batch = draw_batch(SimProtocol(window=600, K=K), GEOM, rng, 150)
    got = batch_sirs(batch, A4)
    for i in range(batch.n):
        jt, ss, os_ = _row_realizations(batch, i)
        assert got[0, i] == pytest.approx(sir_jt(jt, A4), rel=1e-10)
        assert got[1, i] == pytest.approx(sic_chain_pt_ss(ss, A4, 0.5)[1].min(), rel=1e-10)
        assert got[2, i] == pytest.approx(sir_pt_os(os_, A4).min(), rel=1e-10)


def test_batch_backends_agree():
    rng = block_rng(4, 99, 0)
    batch = draw_batch(SimProtocol(window=1000), GEOM, rng, 1000)
    np.testing.assert_allclose(batch_sirs(batch, A4, "numba"), batch_sirs(batch, A4, "numpy"),
                               rtol=1e-12)


def test_sic_chain_by_hand():
    coop = np.array([[10.0, 0.0], [0.0, 20.0]])
    intf = np.array([[200.0, 0.0]])
    real = NetworkRealization(coop, intf, np.ones(2, dtype=complex), np.ones(1))
    ok, sirs = sic_chain_pt_ss(real, A4, 0.1)
    i = 200.0 ** -4
    assert sirs[0] == pytest.approx(10.0 ** -4 / (20.0 ** -4 + i))
    assert sirs[1] == pytest.approx(20.0 ** -4 / i)
    assert ok


def test_jt_coherent_sum_by_hand():
    coop = np.array([[10.0, 0.0], [0.0, 10.0]])
    real = NetworkRealization(coop, np.array([[100.0, 0.0]]), np.array([1.0, 1j]), np.ones(1))
    # |1 + i|^2 = 2 times the per-link amplitude squared
    assert sir_jt(real, A4) == pytest.approx(2 * 10.0 ** -4 / 100.0 ** -4)


def test_no_interferers_gives_infinite_sir():
    real = NetworkRealization(np.array([[5.0, 0.0]]), np.zeros((0, 2)), np.ones(1, complex),
                              np.zeros(0))
    assert sir_jt(real, A4) == math.inf


def test_draw_realization_shapes():
    real = draw_realization(SimProtocol(window=600, K=3), GEOM, np.random.default_rng(5))
    assert real.coop_xy.shape == (3, 2) and real.intf_gain_streams.shape[0] == 3


def test_zero_threshold_succeeds_everywhere():
    out = simulate(SimProtocol(window=500, n_realizations=500, K=2), GEOM, A4)
    for scheme in ("JT", "PT-SS", "PT-OS"):
        assert out.estimates(scheme, [0.0])[0].value == 1.0


def test_shard_invariance_is_bitwise():
    proto = SimProtocol(window=600, n_realizations=3500, seed=11)
    a = simulate(proto, GEOM, A4)
    with ThreadPoolExecutor(2) as ex:
        b = simulate(proto, GEOM, A4, shards=3, executor=ex)
    np.testing.assert_array_equal(a.sirs, b.sirs)
    np.testing.assert_array_equal(a.coop_count, b.coop_count)


def test_single_cooperator_agrees_with_analytic():
    # with one cooperator the three schemes reduce to the same link
    proto = SimProtocol(window=2000, n_realizations=20_000, K=1)
    out = simulate(proto, GEOM, A4)
    ref = scdp_jt(GEOM, A4, 1, 1.0)
    for scheme, fn in (("JT", scdp_jt), ("PT-SS", scdp_pt_ss), ("PT-OS", scdp_pt_os)):
        est = out.estimates(scheme, [1.0])[0]
        assert abs(est.value - ref.value) < 4 * math.hypot(est.std_error, ref.std_error)


def test_protocol_validation():
    with pytest.raises(DomainError):
        SimProtocol(window=100).validate(GEOM)
    with pytest.raises(DomainError):
        SimProtocol(cluster_mode="square").validate(GEOM)
    with pytest.raises(DomainError):
        estimate_scdp_sim(SimProtocol(window=500, n_realizations=10), GEOM, A4, "XX", 1.0)
