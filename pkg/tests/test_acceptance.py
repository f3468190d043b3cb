"""Acceptance checks, one PASS/FAIL line per criterion.

Run under pytest (``pytest tests/test_acceptance.py -v``) or as a script
(``python tests/test_acceptance.py``), which prints the same lines and a tally.
Tolerances are pinned below; Monte Carlo budgets are the package defaults
(200000 analytic draws, 40000 simulated layouts).
"""

from __future__ import annotations

import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np
import pytest
from scipy import stats

from compcache.config import SystemConfig
from compcache.experiments import analytic_table, averaged_ee, averaged_service, simulated_table
from compcache.interference import (cluster_size_pmf, laplace_interference,
                                    sample_ordered_distances_sequential,
                                    sample_unordered_distances)
from compcache.optimize import (ee_curve, grid_search_rho, maximize_ee, rho_grid,
                                rho_star_service, service_prob)
from compcache.popularity import CachePlan, ZipfPopularity, cache_hit_prob, range_probs_array
from compcache.scdp import SirTargets, scdp_pt_ss_sweep
from compcache.sim import SimProtocol, simulate

# pinned tolerances
TOL_EMPTY = 1e-4
TOL_LAPLACE = 1e-9
SIGMA_SIM = 3.0
ABS_PTSS = 0.03
SIGMA_ORDER = 2.0
TOL_RHO = 0.05
TOL_DOMINANCE = 1e-12
TOL_ZIPF = 1e-9
TOL_PARTITION = 1e-12
TOL_KS = 0.005

SIM_WINDOW = 3000.0  # square side; see the notes on edge truncation
SIM_RATES = (5e6, 10e6, 20e6, 30e6)
KS = (2, 3, 4)
CFG = SystemConfig()

RESULTS: list[tuple[str, bool]] = []


def report(label: str, ok: bool, detail: str = "") -> bool:
    RESULTS.append((label, ok))
    print(f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else ""), flush=True)
    return ok


@lru_cache(maxsize=None)
def table(K: int):
    return analytic_table(CFG, K, CFG.R_d, betas=tuple(sorted({*CFG.beta_list, 0.5, CFG.beta})),
                          with_os=K in KS)


@lru_cache(maxsize=None)
def sim_pair(K: int):
    return analytic_table(CFG, K, SIM_RATES, with_os=True), \
        simulated_table(CFG, K, SIM_RATES, window=SIM_WINDOW)


def tables_all():
    return {K: table(K) for K in range(1, CFG.K_max + 1)}


# ---------------------------------------------------------------------------

def check_1_empty_cluster():
    p0 = cluster_size_pmf(CFG.geometry, 0)
    return report("1 empty-cluster probability e^-2sqrt3",
                  abs(p0 - 0.0313) <= TOL_EMPTY and abs(p0 - math.exp(-2 * math.sqrt(3))) < 1e-15,
                  f"P0={p0:.6f}")


def check_2_laplace():
    geom, model = CFG.geometry, CFG.pathloss
    worst = 0.0
    for s in np.geomspace(1e2, 1e12, 10):
        for x in np.geomspace(1.0, 1000.0, 10):
            closed = laplace_interference(geom, model, s, x, method="closed")
            quad = laplace_interference(geom, model, s, x, method="quad")
            worst = max(worst, abs(closed - quad) / closed)
    return report("2 Laplace closed form vs quadrature (100 points)", worst <= TOL_LAPLACE,
                  f"max rel err={worst:.2e}")


def check_3_sim_vs_analytic(scheme: str):
    worst, lines = -np.inf, []
    for K in KS:
        ana, sim = sim_pair(K)
        a_col = {"JT": ana.jt1, "PT-SS": ana.pts2, "PT-OS": ana.pto1}[scheme]
        s_col = {"JT": sim.jt1, "PT-SS": sim.pts2, "PT-OS": sim.pto1}[scheme]
        for r, a, s in zip(SIM_RATES, a_col, s_col):
            se = math.hypot(a.std_error, s.std_error)
            tol = max(SIGMA_SIM * se, ABS_PTSS) if scheme == "PT-SS" else SIGMA_SIM * se
            gap = abs(a.value - s.value)
            worst = max(worst, gap / tol)
            if gap > tol:
                lines.append(f"K={K} {r / 1e6:g}Mbps ana={a.value:.4f} sim={s.value:.4f} "
                             f"z={(s.value - a.value) / se:+.1f}")
    return report(f"3 analytic vs simulation SCDP, {scheme}", worst <= 1.0,
                  f"worst gap/tol={worst:.2f}" + ("; " + "; ".join(lines) if lines else ""))


def check_4_scheme_ordering():
    t = table(3)
    bad = 0
    for jt, ss, os_ in zip(t.jt1, t.pts2, t.pto1):
        bad += jt.value < ss.value - SIGMA_ORDER * math.hypot(jt.std_error, ss.std_error)
        bad += ss.value < os_.value - SIGMA_ORDER * math.hypot(ss.std_error, os_.std_error)
    return report("4 scheme ordering JT >= PT-SS >= PT-OS at K=3", bad == 0, f"violations={bad}")


def check_5_k_monotonicity():
    bad = 0
    for i in range(len(CFG.R_d)):
        for K in KS[:-1]:
            a, b = table(K), table(K + 1)
            bad += b.jt1[i].value < a.jt1[i].value - SIGMA_ORDER * math.hypot(
                a.jt1[i].std_error, b.jt1[i].std_error)
            bad += b.pts2[i].value > a.pts2[i].value + SIGMA_ORDER * math.hypot(
                a.pts2[i].std_error, b.pts2[i].std_error)
    return report("5 JT non-decreasing, PT-SS non-increasing in K", bad == 0, f"violations={bad}")


def check_6_hit_monotonicity():
    pop = CFG.popularity()
    rhos = np.round(np.arange(0, 101) * 0.01, 10)
    mono = True
    ends = set()
    for K in KS:
        hits = [cache_hit_prob(pop, CachePlan(float(r), CFG.M, K)) for r in rhos]
        mono &= all(b <= a for a, b in zip(hits, hits[1:]))
        ends.add(hits[-1])
    return report("6 hit probability non-increasing in rho, equal at rho=1", mono and len(ends) == 1)


def _rho_closed_and_grid(K, gamma):
    t, pop = table(K), CFG.popularity(gamma)
    closed, grid = [], []
    for jt, ss in zip(t.jt1, t.pts2):
        closed.append(rho_star_service(K, gamma, jt.value, ss.value).rho_star)
        f = lambda r: service_prob(pop, r, CFG.M, K, jt.value, ss.value)
        grid.append(grid_search_rho(f, 0.01).rho_star)
    return np.array(closed), np.array(grid)


def check_7_closed_form_accuracy():
    rho = {(K, g): _rho_closed_and_grid(K, g) for K in KS for g in CFG.gamma_list}
    dmax = max(np.max(np.abs(c - g)) for c, g in rho.values())
    rate_mono = all(np.all(np.diff(c) >= 0) for c, _ in rho.values())
    gamma_ok = all(np.all(rho[(K, 0.9)][0] >= rho[(K, 0.5)][0]) for K in KS)
    k_ok = all(np.all(rho[(KS[i + 1], g)][0] <= rho[(KS[i], g)][0])
               for i in range(len(KS) - 1) for g in CFG.gamma_list)
    return report("7 closed-form rho* vs exact grid search and trends",
                  dmax <= TOL_RHO and rate_mono and gamma_ok and k_ok,
                  f"max|d rho|={dmax:.3f} rate-monotone={rate_mono} gamma-order={gamma_ok} "
                  f"K-order={k_ok}")


def check_8_service_dominance():
    tabs = tables_all()
    worst_k, worst_avg = np.inf, np.inf
    for gamma in CFG.gamma_list:
        pop = CFG.popularity(gamma)
        for K in range(2, CFG.K_max + 1):
            for jt, ss in zip(tabs[K].jt1, tabs[K].pts2):
                r = rho_star_service(K, gamma, jt.value, ss.value).rho_star
                f = lambda x: service_prob(pop, x, CFG.M, K, jt.value, ss.value)
                worst_k = min(worst_k, f(r) - max(f(0.0), f(1.0)))
        avg = averaged_service(CFG, gamma, tabs)
        for c, m, l in zip(avg["combined"], avg["MPC"], avg["LCD"]):
            for other in (m, l):
                worst_avg = min(worst_avg, (c[0] - other[0]) + SIGMA_ORDER * math.hypot(c[1], other[1]))
    return report("8 combined service probability dominates MPC-only and LCD-only",
                  worst_k >= -TOL_DOMINANCE and worst_avg >= 0,
                  f"per-K margin={worst_k:.2e} (K>=2), averaged margin incl. 2 sigma={worst_avg:.2e}")


def check_9_ee_maximizer(gamma: float):
    K, t = 3, table(3)
    pop = CFG.popularity(gamma)
    dmax, rho_at = 0.0, {}
    for beta in CFG.beta_list:
        approx = []
        for i, r in enumerate(CFG.R_d):
            sc = t.triple(i, beta)
            a = maximize_ee(pop, K, CFG.power, SirTargets(r, CFG.W, K, beta), sc, M=CFG.M).rho_star
            e = grid_search_rho(lambda x: ee_curve(pop, x, CFG.M, K, CFG.power, r, sc), 0.01).rho_star
            dmax = max(dmax, abs(a - e))
            approx.append(a)
        rho_at[beta] = np.array(approx)
    lo, hi = min(CFG.beta_list), max(CFG.beta_list)
    order = bool(np.all(rho_at[lo] <= rho_at[hi] + 1e-9))
    return report(f"9 EE maximizer vs exact search, gamma={gamma:g}", dmax <= TOL_RHO and order,
                  f"max|d rho|={dmax:.3f} beta-order={order}")


def check_10_ee_dominance():
    tabs = tables_all()
    worst = np.inf
    for gamma in CFG.gamma_list:
        for beta in sorted({*CFG.beta_list, 0.5}):
            avg = averaged_ee(CFG, gamma, beta, tabs)
            for i in range(len(CFG.R_d)):
                c = avg["combined"][i]
                for s in ("MPC", "LCD", "no-cache"):
                    o = avg[s][i]
                    worst = min(worst, (c[0] - o[0] + SIGMA_ORDER * math.hypot(c[1], o[1])) / c[0])
    return report("10 averaged EE at rho* dominates MPC, LCD and no-cache", worst >= 0,
                  f"min relative margin incl. 2 sigma={worst:.2e}")


def check_11_properties():
    zipf = max(abs(ZipfPopularity(CFG.N, g).probabilities().sum() - 1.0) for g in (0.0, 0.5, 0.9, 1.2))
    part = 0.0
    for g in CFG.gamma_list:
        pop = CFG.popularity(g)
        for K in range(1, CFG.K_max + 1):
            mpc, lcd, miss = range_probs_array(pop, rho_grid(0.01), CFG.M, K)
            part = max(part, float(np.max(np.abs(mpc + lcd + miss - 1.0))))
    concave = True
    for K in KS:
        for jt, ss in zip(table(K).jt1, table(K).pts2):
            if jt.value > ss.value:
                for g in CFG.gamma_list:
                    f = service_prob(CFG.popularity(g), rho_grid(0.01), CFG.M, K, jt.value,
                                     ss.value, approximate=True)
                    concave &= bool(np.all(np.diff(f, 2) <= 0))
    geom, rng = CFG.geometry, np.random.default_rng(2024)
    d = sample_unordered_distances(geom, 1, rng, size=1_000_000).ravel()
    ks1 = stats.kstest(d, lambda x: np.clip((x / geom.R) ** 2, 0, 1)).statistic
    far = sample_ordered_distances_sequential(geom, 3, rng, size=1_000_000)[:, -1]
    ks2 = stats.kstest(far, lambda x: np.clip(x / geom.R, 0, 1) ** 6).statistic
    g, m = geom, CFG.pathloss
    base_a = scdp_pt_ss_sweep(g, m, 3, [0.1, 0.3], budget=60_000, seed=5)
    base_s = simulate(SimProtocol(600, 5000, seed=5), g, m).sirs
    repro = True
    with ThreadPoolExecutor(4) as ex:
        for shards in (2, 3, 4, 6):
            repro &= scdp_pt_ss_sweep(g, m, 3, [0.1, 0.3], budget=60_000, seed=5, shards=shards,
                                      executor=ex) == base_a
            repro &= np.array_equal(simulate(SimProtocol(600, 5000, seed=5), g, m, shards=shards,
                                             executor=ex).sirs, base_s)
    ok = zipf <= TOL_ZIPF and part <= TOL_PARTITION and concave and max(ks1, ks2) < TOL_KS and repro
    return report("11 property suites", ok,
                  f"zipf={zipf:.1e} partition={part:.1e} concave={concave} "
                  f"KS={max(ks1, ks2):.4f} shard-reproducible={repro}")


# ---------------------------------------------------------------------------
# pytest entry points: each check prints its line outside output capture

@pytest.fixture
def shown(capsys):
    def run(check, *args):
        with capsys.disabled():
            print()
            return check(*args)
    return run


def test_1_empty_cluster(shown):
    assert shown(check_1_empty_cluster)


def test_2_laplace(shown):
    assert shown(check_2_laplace)


@pytest.mark.parametrize("scheme", ["JT", "PT-SS", "PT-OS"])
def test_3_sim_vs_analytic(shown, scheme):
    assert shown(check_3_sim_vs_analytic, scheme)


def test_4_scheme_ordering(shown):
    assert shown(check_4_scheme_ordering)


def test_5_k_monotonicity(shown):
    assert shown(check_5_k_monotonicity)


def test_6_hit_monotonicity(shown):
    assert shown(check_6_hit_monotonicity)


def test_7_closed_form_accuracy(shown):
    assert shown(check_7_closed_form_accuracy)


def test_8_service_dominance(shown):
    assert shown(check_8_service_dominance)


@pytest.mark.parametrize("gamma", [0.5, 0.9])
def test_9_ee_maximizer(shown, gamma):
    assert shown(check_9_ee_maximizer, gamma)


def test_10_ee_dominance(shown):
    assert shown(check_10_ee_dominance)


def test_11_properties(shown):
    assert shown(check_11_properties)


if __name__ == "__main__":
    warnings.simplefilter("ignore")
    check_1_empty_cluster()
    check_2_laplace()
    for scheme in ("JT", "PT-SS", "PT-OS"):
        check_3_sim_vs_analytic(scheme)
    check_4_scheme_ordering()
    check_5_k_monotonicity()
    check_6_hit_monotonicity()
    check_7_closed_form_accuracy()
    check_8_service_dominance()
    for gamma in (0.5, 0.9):
        check_9_ee_maximizer(gamma)
    check_10_ee_dominance()
    check_11_properties()
    n_ok = sum(ok for _, ok in RESULTS)
    print(f"{n_ok}/{len(RESULTS)} criteria passed")
    sys.exit(0 if n_ok == len(RESULTS) else 1)
