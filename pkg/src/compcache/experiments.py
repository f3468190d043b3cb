"""Figure recipes and single-point evaluations.

Each recipe reproduces one figure's sweep and returns rows
``(x, series, method, value, stderr)``; the CLI writes them as CSV with the
full configuration echoed on every row.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .config import SystemConfig, parse_value
from .errors import ConfigError, DomainError
from .interference import cluster_size_pmf
from .optimize import (ee_curve, grid_search_rho, maximize_ee, no_cache_ee,
                       rho_star_service, service_prob)
from .popularity import CachePlan, cache_hit_prob, approx_range_probs_array, range_probs_array
from .scdp import (SCHEMES, ScdpEstimate, SirTargets, scdp_jt_sweep, scdp_pt_os_sweep,
                   scdp_pt_ss_sweep, scdp_quadrature)
from .sim import simulate

GRID_STEP = 0.01
HIT_RHO_STEP = 0.02
EE_AVG_BETA = 0.5  # backhaul time fraction used for the averaged-EE figure


@dataclass
class Row:
    x: float
    series: str
    method: str
    value: float
    stderr: float = 0.0


@dataclass
class ExperimentRecord:
    params: dict
    metric: str
    value: float
    std_error: float
    method: str
    wall_time: float = 0.0

    def as_dict(self) -> dict:
        return {"params": self.params, "metric": self.metric, "value": self.value,
                "std_error": self.std_error, "method": self.method,
                "wall_time": self.wall_time}


# ---------------------------------------------------------------------------
# SCDP tables shared by the recipes
# ---------------------------------------------------------------------------

@dataclass
class ScdpTable:
    """SCDP estimates for one K over a list of target rates."""

    K: int
    rates: list[float]
    jt1: list[ScdpEstimate]
    pts2: list[ScdpEstimate]
    pto1: list[ScdpEstimate] = field(default_factory=list)
    jt3: dict[float, list[ScdpEstimate]] = field(default_factory=dict)

    def triple(self, i: int, beta: float) -> tuple[float, float, float]:
        return self.jt1[i].value, self.pts2[i].value, self.jt3[beta][i].value


def analytic_table(cfg: SystemConfig, K: int, rates, betas=(), with_os: bool = False) -> ScdpTable:
    """Analytic SCDPs for every rate; the JT sweep covers theta1 and each theta3."""
    rates = [float(r) for r in rates]
    geom, model = cfg.geometry, cfg.pathloss
    th1 = [SirTargets(r, cfg.W, K).theta1 for r in rates]
    th2 = [SirTargets(r, cfg.W, K).theta2 for r in rates]
    th3 = [SirTargets(r, cfg.W, K, b).theta3 for b in betas for r in rates]
    jt = scdp_jt_sweep(geom, model, K, th1 + th3, cfg.budget, cfg.seed)
    n = len(rates)
    table = ScdpTable(K, rates, jt[:n], scdp_pt_ss_sweep(geom, model, K, th2, cfg.budget, cfg.seed))
    for j, b in enumerate(betas):
        table.jt3[b] = jt[n * (j + 1):n * (j + 2)]
    if with_os:
        table.pto1 = scdp_pt_os_sweep(geom, model, K, th1, cfg.budget, cfg.seed)
    return table


def simulated_table(cfg: SystemConfig, K: int, rates, betas=(), window: float | None = None) -> ScdpTable:
    """Simulated SCDPs conditioned on K cooperators; one set of realizations for all rates."""
    rates = [float(r) for r in rates]
    out = simulate(cfg.protocol(K, window=window), cfg.geometry, cfg.pathloss)
    th1 = [SirTargets(r, cfg.W, K).theta1 for r in rates]
    th2 = [SirTargets(r, cfg.W, K).theta2 for r in rates]
    table = ScdpTable(K, rates, out.estimates("JT", th1), out.estimates("PT-SS", th2),
                      out.estimates("PT-OS", th1))
    for b in betas:
        table.jt3[b] = out.estimates("JT", [SirTargets(r, cfg.W, K, b).theta3 for r in rates])
    return table


# ---------------------------------------------------------------------------
# recipes
# ---------------------------------------------------------------------------

def _scdp_rows(cfg: SystemConfig, Ks, schemes) -> list[Row]:
    rows = []
    for K in Ks:
        tables = [("analytic-mc", analytic_table(cfg, K, cfg.R_d, with_os=True)),
                  ("simulation", simulated_table(cfg, K, cfg.R_d))]
        for method, tab in tables:
            cols = {"JT": tab.jt1, "PT-SS": tab.pts2, "PT-OS": tab.pto1}
            for scheme in schemes:
                for r, est in zip(tab.rates, cols[scheme]):
                    rows.append(Row(r, f"{scheme} K={K}", method, est.value, est.std_error))
    return rows


def fig_scdp_vs_rate(cfg: SystemConfig) -> list[Row]:
    return _scdp_rows(cfg, [3], SCHEMES)


def fig_scdp_vs_rate_k(cfg: SystemConfig) -> list[Row]:
    return _scdp_rows(cfg, cfg.K_list, ("JT", "PT-SS"))


def fig_hit_vs_rho(cfg: SystemConfig) -> list[Row]:
    pop = cfg.popularity()
    rhos = np.round(np.arange(0, 1 + 1e-9, HIT_RHO_STEP), 10)
    rows = []
    for K in cfg.K_list:
        mpc, lcd, _ = range_probs_array(pop, rhos, cfg.M, K)
        rows += [Row(float(r), f"K={K}", "exact", float(v)) for r, v in zip(rhos, mpc + lcd)]
        if pop.gamma < 1:
            a_mpc, a_lcd, _ = approx_range_probs_array(pop.gamma, cfg.N, rhos, cfg.M, K)
            rows += [Row(float(r), f"K={K}", "approximate", float(v))
                     for r, v in zip(rhos, a_mpc + a_lcd)]
    return rows


def _rhostar_rows(cfg: SystemConfig, pairs) -> list[Row]:
    """pairs: (K, gamma). Closed form and exhaustive search on analytic and simulated SCDPs."""
    rows = []
    cache: dict[int, tuple[ScdpTable, ScdpTable]] = {}
    for K, gamma in pairs:
        if K not in cache:
            cache[K] = (analytic_table(cfg, K, cfg.R_d), simulated_table(cfg, K, cfg.R_d))
        ana, sim = cache[K]
        pop = cfg.popularity(gamma)
        series = f"K={K} gamma={gamma:g}"
        for i, r in enumerate(ana.rates):
            jt, pts = ana.jt1[i].value, ana.pts2[i].value
            rows.append(Row(r, series, "closed-form",
                            rho_star_service(K, gamma, jt, pts).rho_star))
            rows.append(Row(r, series, "grid-search", grid_search_rho(
                lambda x: service_prob(pop, x, cfg.M, K, jt, pts), GRID_STEP).rho_star))
            sj, sp = sim.jt1[i].value, sim.pts2[i].value
            rows.append(Row(r, series, "grid-search-simulation", grid_search_rho(
                lambda x: service_prob(pop, x, cfg.M, K, sj, sp), GRID_STEP).rho_star))
    return rows


def fig_rhostar_service(cfg: SystemConfig) -> list[Row]:
    return _rhostar_rows(cfg, [(3, g) for g in cfg.gamma_list])


def fig_rhostar_service_k(cfg: SystemConfig) -> list[Row]:
    return _rhostar_rows(cfg, [(K, cfg.gamma) for K in cfg.K_list])


def averaged_service(cfg: SystemConfig, gamma: float, tables: dict[int, ScdpTable] | None = None):
    """Per rate: averaged service probability of (combined at rho*, MPC only, LCD only).

    Returns dict series -> list of (value, stderr).
    """
    pop = cfg.popularity(gamma)
    geom = cfg.geometry
    Ks = range(1, cfg.K_max + 1)
    tables = tables or {K: analytic_table(cfg, K, cfg.R_d) for K in Ks}
    out = {"combined": [], "MPC": [], "LCD": []}
    for i in range(len(cfg.R_d)):
        acc = {s: [0.0, 0.0] for s in out}
        for K in Ks:
            w = cluster_size_pmf(geom, K)
            jt, pts = tables[K].jt1[i], tables[K].pts2[i]
            rho = {"combined": rho_star_service(K, gamma, jt.value, pts.value).rho_star,
                   "MPC": 1.0, "LCD": 0.0}
            for s, r in rho.items():
                mpc, lcd, _ = range_probs_array(pop, r, cfg.M, K)
                acc[s][0] += w * float(mpc * jt.value + lcd * pts.value)
                acc[s][1] += w * w * float(mpc ** 2 * jt.std_error ** 2 + lcd ** 2 * pts.std_error ** 2)
        for s in out:
            out[s].append((acc[s][0], math.sqrt(acc[s][1])))
    return out


def fig_service_avg(cfg: SystemConfig) -> list[Row]:
    tables = {K: analytic_table(cfg, K, cfg.R_d) for K in range(1, cfg.K_max + 1)}
    rows = []
    for gamma in cfg.gamma_list:
        avg = averaged_service(cfg, gamma, tables)
        for s, vals in avg.items():
            rows += [Row(r, f"{s} gamma={gamma:g}", "analytic-mc", v, e)
                     for r, (v, e) in zip(cfg.R_d, vals)]
    return rows


def ee_rhostar(cfg: SystemConfig, K: int, gamma: float, beta: float, table: ScdpTable):
    """Per rate: (approximate-EE maximizer, exact-EE grid maximizer)."""
    pop = cfg.popularity(gamma)
    out = []
    for i, r in enumerate(table.rates):
        sc = table.triple(i, beta)
        tg = SirTargets(r, cfg.W, K, beta)
        approx = maximize_ee(pop, K, cfg.power, tg, sc, M=cfg.M).rho_star
        exact = grid_search_rho(lambda x: ee_curve(pop, x, cfg.M, K, cfg.power, r, sc),
                                GRID_STEP).rho_star
        out.append((approx, exact))
    return out


def fig_rhostar_ee(cfg: SystemConfig) -> list[Row]:
    K = 3
    table = analytic_table(cfg, K, cfg.R_d, betas=cfg.beta_list)
    rows = []
    for gamma in cfg.gamma_list:
        for beta in cfg.beta_list:
            series = f"K={K} gamma={gamma:g} beta={beta:g}"
            for r, (a, e) in zip(cfg.R_d, ee_rhostar(cfg, K, gamma, beta, table)):
                rows.append(Row(r, series, "golden-section", a))
                rows.append(Row(r, series, "grid-search", e))
    return rows


def averaged_ee(cfg: SystemConfig, gamma: float, beta: float,
                tables: dict[int, ScdpTable] | None = None):
    """Per rate: averaged EE of (combined at rho*, MPC, LCD, no-cache); dict of (value, stderr)."""
    pop = cfg.popularity(gamma)
    geom, power = cfg.geometry, cfg.power
    Ks = range(1, cfg.K_max + 1)
    tables = tables or {K: analytic_table(cfg, K, cfg.R_d, betas=(beta,)) for K in Ks}
    out = {"combined": [], "MPC": [], "LCD": [], "no-cache": []}
    for i, r in enumerate(cfg.R_d):
        acc = {s: [0.0, 0.0] for s in out}
        for K in Ks:
            w = cluster_size_pmf(geom, K)
            tab = tables[K]
            sc = tab.triple(i, beta)
            se = (tab.jt1[i].std_error, tab.pts2[i].std_error, tab.jt3[beta][i].std_error)
            tg = SirTargets(r, cfg.W, K, beta)
            rho = {"combined": maximize_ee(pop, K, power, tg, sc, M=cfg.M).rho_star,
                   "MPC": 1.0, "LCD": 0.0}
            for s, x in rho.items():
                mpc, lcd, miss = (float(v) for v in range_probs_array(pop, x, cfg.M, K))
                den = K * power.P_t + K * power.P_b * miss
                acc[s][0] += w * ee_curve(pop, x, cfg.M, K, power, r, sc)
                var = sum((r * c / den) ** 2 * e ** 2 for c, e in zip((mpc, lcd, miss), se))
                acc[s][1] += w * w * var
            acc["no-cache"][0] += w * no_cache_ee(K, power, r, sc[2])
            acc["no-cache"][1] += (w * r / (K * (power.P_t + power.P_b)) * se[2]) ** 2
        for s in out:
            out[s].append((acc[s][0], math.sqrt(acc[s][1])))
    return out


def fig_ee_avg(cfg: SystemConfig) -> list[Row]:
    tables = {K: analytic_table(cfg, K, cfg.R_d, betas=(EE_AVG_BETA,))
              for K in range(1, cfg.K_max + 1)}
    rows = []
    for gamma in cfg.gamma_list:
        avg = averaged_ee(cfg, gamma, EE_AVG_BETA, tables)
        for s, vals in avg.items():
            rows += [Row(r, f"{s} gamma={gamma:g} beta={EE_AVG_BETA:g}", "analytic-mc", v, e)
                     for r, (v, e) in zip(cfg.R_d, vals)]
    return rows


FIGURES: dict[str, Callable[[SystemConfig], list[Row]]] = {
    "scdp-vs-rate": fig_scdp_vs_rate,
    "scdp-vs-rate-K": fig_scdp_vs_rate_k,
    "hit-vs-rho": fig_hit_vs_rho,
    "rhostar-service": fig_rhostar_service,
    "rhostar-service-K": fig_rhostar_service_k,
    "service-avg": fig_service_avg,
    "rhostar-ee": fig_rhostar_ee,
    "ee-avg": fig_ee_avg,
}

CSV_HEAD = ["figure", "x", "series", "method", "value", "stderr", "config_hash"]


def _cell(v) -> str:
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(name: str, rows: list[Row], cfg: SystemConfig) -> str:
    params = cfg.as_dict()
    keys = sorted(params)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEAD + keys)
    echo = [_cell(params[k]) for k in keys]
    digest = cfg.digest()
    for row in rows:
        w.writerow([name, _cell(float(row.x)), row.series, row.method, _cell(float(row.value)),
                    _cell(float(row.stderr)), digest] + echo)
    return buf.getvalue()


def run_figure(name: str, cfg: SystemConfig, out_path: str | Path | None = None) -> str:
    """Run a recipe and write its CSV to ``out_path``; returns the CSV text."""
    if name not in FIGURES:
        raise DomainError(f"unknown figure {name!r}; available: {', '.join(FIGURES)}")
    text = rows_to_csv(name, FIGURES[name](cfg), cfg)
    if out_path is not None:
        Path(out_path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# single points
# ---------------------------------------------------------------------------

METRICS = ("scdp", "hitprob", "service", "ee", "rhostar-service", "rhostar-ee")
POINT_KEYS = {"rho": float, "K": int, "scheme": str, "theta": float, "rate": float,
              "ratio": float, "method": str}


def split_overrides(overrides: dict[str, str]) -> tuple[dict, dict]:
    """Separate config keys from point keys; values are parsed text."""
    cfg_kw, point = {}, {}
    for key, raw in overrides.items():
        if key in POINT_KEYS:
            conv = POINT_KEYS[key]
            try:
                point[key] = int(float(raw)) if conv is int else conv(raw)
            except ValueError:
                raise ConfigError(f"{key}: cannot parse value {raw!r}") from None
        else:
            try:
                cfg_kw[key] = parse_value(key, raw)
            except ConfigError as exc:
                raise ConfigError(f"invalid override key '{key}'" if "unknown key" in str(exc)
                                  else str(exc)) from None
    return cfg_kw, point


def run_point(cfg: SystemConfig, metric: str, overrides: dict[str, str] | None = None) -> list[ExperimentRecord]:
    """Evaluate one metric at one parameter point.

    Point keys (besides any config key): ``rho``, ``K``, ``scheme``, ``theta``,
    ``rate`` (single target rate in bit/s; defaults to 10 Mbit/s), ``ratio``
    (forces the JT/PT-SS ratio for ``rhostar-service``) and ``method``
    (``analytic``, ``simulation`` or ``quadrature`` for ``scdp``).
    """
    if metric not in METRICS:
        raise DomainError(f"unknown metric {metric!r}; available: {', '.join(METRICS)}")
    cfg_kw, pt = split_overrides(overrides or {})
    cfg = cfg.with_overrides(**cfg_kw) if cfg_kw else cfg
    t0 = time.perf_counter()
    K = pt.get("K", 3)
    rate = pt.get("rate", 10e6)
    rho = pt.get("rho", 1.0)
    params = {"config_hash": cfg.digest(), "K": K}
    pop = cfg.popularity()
    tg = SirTargets(rate, cfg.W, K, cfg.beta)
    geom, model = cfg.geometry, cfg.pathloss

    def analytic_pair():
        jt = scdp_jt_sweep(geom, model, K, [tg.theta1, tg.theta3], cfg.budget, cfg.seed)
        pts = scdp_pt_ss_sweep(geom, model, K, [tg.theta2], cfg.budget, cfg.seed)[0]
        return jt[0], pts, jt[1]

    if metric == "scdp":
        scheme = pt.get("scheme", "JT")
        if scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {', '.join(SCHEMES)}")
        theta = pt.get("theta", tg.theta2 if scheme == "PT-SS" else tg.theta1)
        method = pt.get("method", "analytic")
        if method == "analytic":
            fn = {"JT": scdp_jt_sweep, "PT-SS": scdp_pt_ss_sweep, "PT-OS": scdp_pt_os_sweep}[scheme]
            est = fn(geom, model, K, [theta], cfg.budget, cfg.seed)[0]
        elif method == "simulation":
            est = simulate(cfg.protocol(K), geom, model).estimates(scheme, [theta])[0]
        elif method == "quadrature":
            est = scdp_quadrature(scheme, geom, model, K, theta)
        else:
            raise ConfigError("method must be analytic, simulation or quadrature")
        params.update(scheme=scheme, theta=theta)
        value, se, tag = est.value, est.std_error, est.method
    elif metric == "hitprob":
        value, se, tag = cache_hit_prob(pop, CachePlan(rho, cfg.M, K)), 0.0, "exact"
        params.update(rho=rho, gamma=cfg.gamma)
    elif metric == "service":
        jt, pts, _ = analytic_pair()
        value = service_prob(pop, rho, cfg.M, K, jt.value, pts.value)
        mpc, lcd, _ = range_probs_array(pop, rho, cfg.M, K)
        se = float(math.hypot(mpc * jt.std_error, lcd * pts.std_error))
        tag = "exact"
        params.update(rho=rho, rate=rate, gamma=cfg.gamma)
    elif metric == "ee":
        jt, pts, jt3 = analytic_pair()
        value = ee_curve(pop, rho, cfg.M, K, cfg.power, rate, (jt.value, pts.value, jt3.value))
        se, tag = 0.0, "exact"
        params.update(rho=rho, rate=rate, gamma=cfg.gamma, beta=cfg.beta)
    elif metric == "rhostar-service":
        if "ratio" in pt:
            jt_v, pts_v = pt["ratio"], 1.0
        else:
            jt, pts, _ = analytic_pair()
            jt_v, pts_v = jt.value, pts.value
        res = rho_star_service(K, cfg.gamma, jt_v, pts_v)
        value, se, tag = res.rho_star, 0.0, res.method
        params.update(gamma=cfg.gamma, ratio=jt_v / pts_v if pts_v else math.inf, rate=rate)
    else:
        jt, pts, jt3 = analytic_pair()
        res = maximize_ee(pop, K, cfg.power, tg, (jt.value, pts.value, jt3.value), M=cfg.M)
        value, se, tag = res.rho_star, 0.0, res.method
        params.update(gamma=cfg.gamma, beta=cfg.beta, rate=rate)
    return [ExperimentRecord(params, metric, float(value), float(se), tag,
                             time.perf_counter() - t0)]
