"""Flat ``key = value`` configuration with the reference-scenario defaults."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .interference import ClusterGeometry, PathlossModel, cluster_size_pmf
from .optimize import PowerModel
from .popularity import ZipfPopularity
from .sim import SimProtocol


def default_rates() -> list[float]:
    """25 log-spaced target rates from 1 to 50 Mbit/s."""
    return [float(r) for r in np.geomspace(1e6, 50e6, 25)]


@dataclass(frozen=True)
class SystemConfig:
    lambda_b: float = 1e-4
    R_h: float = 100.0
    alpha: float = 4.0
    P_t: float = 1.0
    P_b: float = 10.0
    W: float = 10e6
    M: int = 5000
    N: int = 100_000
    gamma: float = 0.5
    beta: float = 0.95
    R_d: tuple[float, ...] = field(default_factory=lambda: tuple(default_rates()))
    seed: int = 0
    n_realizations: int = 40_000
    budget: int = 200_000
    K_list: tuple[int, ...] = (2, 3, 4)
    K_max: int = 10
    gamma_list: tuple[float, ...] = (0.5, 0.9)
    beta_list: tuple[float, ...] = (0.95, 0.3)
    cluster_mode: str = "hexagon"
    window: float = 1000.0

    def validate(self) -> "SystemConfig":
        def need(ok, key, msg):
            if not ok:
                raise ConfigError(f"{key} {msg}")

        need(self.lambda_b > 0, "lambda_b", "must be positive")
        need(self.R_h > 0, "R_h", "must be positive")
        need(self.alpha > 2, "alpha", "must exceed 2")
        need(self.P_t > 0, "P_t", "must be positive")
        need(self.P_b >= 0, "P_b", "must be non-negative")
        need(self.W > 0, "W", "must be positive")
        need(self.M >= 1, "M", "must be >= 1")
        need(self.N >= 1, "N", "must be >= 1")
        need(self.M <= self.N, "M", "must not exceed N")
        for key in ("gamma",):
            need(getattr(self, key) >= 0, key, "must be non-negative")
        need(all(g >= 0 for g in self.gamma_list) and self.gamma_list, "gamma_list",
             "must be a non-empty list of non-negative values")
        need(0 < self.beta <= 1, "beta", "must lie in (0, 1]")
        need(all(0 < b <= 1 for b in self.beta_list) and self.beta_list, "beta_list",
             "must be a non-empty list in (0, 1]")
        need(all(r > 0 for r in self.R_d) and self.R_d, "R_d", "must be a non-empty list of positive rates")
        need(self.n_realizations >= 1, "n_realizations", "must be >= 1")
        need(self.budget >= 1, "budget", "must be >= 1")
        need(all(k >= 1 for k in self.K_list) and self.K_list, "K_list", "must be a non-empty list of K >= 1")
        need(self.K_max >= 1, "K_max", "must be >= 1")
        need(self.cluster_mode in ("hexagon", "disc"), "cluster_mode", "must be 'hexagon' or 'disc'")
        need(self.window >= 4 * self.R_h, "window", "must be at least 4*R_h")
        need(self.seed >= 0, "seed", "must be non-negative")
        return self

    # derived objects
    @property
    def geometry(self) -> ClusterGeometry:
        return ClusterGeometry(self.R_h, self.lambda_b)

    @property
    def pathloss(self) -> PathlossModel:
        return PathlossModel(self.alpha)

    @property
    def power(self) -> PowerModel:
        return PowerModel(self.P_t, self.P_b)

    def popularity(self, gamma: float | None = None) -> ZipfPopularity:
        return _zipf(self.N, self.gamma if gamma is None else gamma)

    def protocol(self, K: int | None, n_realizations: int | None = None,
                 window: float | None = None) -> SimProtocol:
        return SimProtocol(self.window if window is None else window,
                           self.n_realizations if n_realizations is None else n_realizations,
                           self.cluster_mode, K, self.seed)

    def as_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def report(self) -> dict:
        geom = self.geometry
        return {
            "config": self.as_dict(),
            "config_hash": self.digest(),
            "derived": {
                "R": geom.R,
                "cluster_area": geom.area,
                "mean_cluster_size": geom.mean_size,
                "P_empty_cluster": cluster_size_pmf(geom, 0),
            },
        }

    def with_overrides(self, **kw) -> "SystemConfig":
        return replace(self, **kw).validate()


_ZIPF_CACHE: dict[tuple[int, float], ZipfPopularity] = {}


def _zipf(N: int, gamma: float) -> ZipfPopularity:
    key = (int(N), float(gamma))
    if key not in _ZIPF_CACHE:
        _ZIPF_CACHE[key] = ZipfPopularity(*key)
    return _ZIPF_CACHE[key]


_FIELDS = {f.name: f for f in fields(SystemConfig)}
_INT_KEYS = {"M", "N", "seed", "n_realizations", "budget", "K_max"}
_LIST_KEYS = {"R_d": float, "K_list": int, "gamma_list": float, "beta_list": float}


def parse_value(key: str, raw: str):
    """Convert the text of one config value to the field's type."""
    if key not in _FIELDS:
        raise ConfigError(f"unknown key '{key}'")
    raw = raw.strip()
    try:
        if key in _LIST_KEYS:
            conv = _LIST_KEYS[key]
            items = [s for s in raw.replace(";", ",").split(",") if s.strip()]
            return tuple(_to_int(s) if conv is int else float(s) for s in items)
        if key in _INT_KEYS:
            return _to_int(raw)
        if key == "cluster_mode":
            return raw
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse value {raw!r}") from None


def _to_int(s: str) -> int:
    v = float(s)
    if not math.isfinite(v) or v != int(v):
        raise ValueError(s)
    return int(v)


def parse_config(text: str, source: str = "<config>") -> SystemConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        try:
            values[key] = parse_value(key, raw)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return SystemConfig(**values).validate()


def load_config(path: str | Path | None) -> SystemConfig:
    """Read a config file; missing keys take the reference-scenario defaults. ``None`` gives pure defaults."""
    if path is None:
        return SystemConfig().validate()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p))
