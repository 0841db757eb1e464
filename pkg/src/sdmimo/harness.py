"""Experiment configuration, seeded Monte Carlo orchestration and result tables.

Every trial (or channel draw) t of a run with seed s uses its own generator
keyed by (s, t), and trials are grouped into fixed-size chunks whose partial
sums are reduced in chunk order. Results are therefore identical for any
number of worker processes, and every estimator sees the same channels.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np
import yaml

from .channel import ScenarioGeometry
from .coupling import CouplingParams
from .estimator import TAGS, parse_tag, scenario_estimator, to_db
from .rate import (RECEIVERS, RateReport, _empirical_sums, combine_sums, data_phase_model,
                   finish_empirical, model_report, mrc_terms)
from .scenario import Scenario
from .sigma_delta import QuantizerSpec

CHUNK = 25
CSV_COLUMNS = ("sweep_name", "sweep_value", "tag", "metric", "theory", "empirical", "trials", "seed")

PRESETS = {
    "desk": {"M": 32, "trials": 100, "rate_draws": 100},
    "full": {"M": 128, "trials": 500, "rate_draws": 200},
}

DEFAULT_SWEEPS = {
    "ne-snr": [-10, -5, 0, 5, 10, 15, 20, 25, 30],
    "ne-angle": [10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120],
    "ne-antennas": [8, 16, 32, 64, 128],
    "se-snr": [-10, -5, 0, 5, 10, 15, 20, 25, 30],
    "rate-users": [2, 4, 6, 8, 10, 12, 14, 16, 20, 24],
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # geometry
    M: int = 128
    K: int = 10
    N: int | None = None  # None: N = K
    delta: float = 1 / 6
    theta_deg: float = 60.0
    psi: float = 0.0
    L: int = 50
    # physics
    coupling: bool = True
    R: float = 50.0
    T_A: float = 290.0
    B: float = 20e6
    # quantization
    tags: tuple = TAGS
    beta: float = 1.05
    # operating point and sweep
    snr_db: float = 10.0
    sweep_values: tuple | None = None  # None: the subcommand's default axis
    deltas: tuple = (1 / 2, 1 / 3, 1 / 4, 1 / 6)
    compare_uncoupled: bool = True
    receivers: tuple = RECEIVERS
    # Monte Carlo
    trials: int = 500
    rate_draws: int = 200
    n_symbols: int = 20
    T: int = 200
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("tags", "receivers", "deltas"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.sweep_values is not None:
            object.__setattr__(self, "sweep_values", tuple(self.sweep_values))

    @classmethod
    def from_mapping(cls, data: dict, preset: str | None = None) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        base = dict(PRESETS[preset]) if preset else {}
        base.update(data)
        return cls(**base)

    @classmethod
    def load(cls, path, preset: str | None = None) -> "ExperimentConfig":
        """Read a YAML or JSON document of field names."""
        text = Path(path).read_text()
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigError("config must be a key-value mapping")
        return cls.from_mapping(data, preset)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def geometry(self, **kw) -> ScenarioGeometry:
        vals = dict(M=self.M, K=self.K, N=self.N, delta=self.delta, theta_deg=self.theta_deg,
                    psi=self.psi, L=self.L)
        vals.update(kw)
        if vals["N"] is None:
            vals["N"] = vals["K"]
        return ScenarioGeometry(**vals)

    def params(self) -> CouplingParams:
        return CouplingParams(R=self.R, T_A=self.T_A, B=self.B)

    def validate(self, command: str | None = None) -> None:
        """Check every field against the module preconditions before running."""
        try:
            self.geometry()
            self.params()
            for t in self.tags:
                bits, sd = parse_tag(t)
                QuantizerSpec(bits, self.beta if sd else 1.0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for r in self.receivers:
            if r not in RECEIVERS:
                raise ConfigError(f"unknown receiver {r!r}")
        if self.trials < 1 or self.rate_draws < 1 or self.n_symbols < 1:
            raise ConfigError("trials, rate_draws and n_symbols must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if command is not None:
            values = self.sweep(command)
            if not values:
                raise ConfigError("empty sweep")
            try:
                for v in values:
                    if command == "ne-angle":
                        for d in self.deltas:
                            self.geometry(theta_deg=v, delta=d)
                    elif command == "ne-antennas":
                        self.geometry(M=int(v))
                    elif command == "rate-users":
                        self.geometry(K=int(v), N=int(v))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if command in ("se-snr", "rate-users"):
                N = max(self.geometry().N, max(int(v) for v in values) if command == "rate-users" else 0)
                if not N < self.T:
                    raise ConfigError("coherence interval T must exceed the pilot length")

    def sweep(self, command: str) -> tuple:
        return self.sweep_values if self.sweep_values is not None else tuple(DEFAULT_SWEEPS[command])


# ---------------------------------------------------------------------------
# result table


@dataclass(frozen=True)
class Row:
    sweep_name: str
    sweep_value: float
    tag: str
    metric: str
    theory: float
    empirical: float
    trials: int
    seed: int


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".9g")
    return str(v)


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def add(self, *args) -> None:
        self.rows.append(Row(*args))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v
        rows = [{c: clean(getattr(r, c)) for c in CSV_COLUMNS} for r in self.rows]
        return json.dumps({"columns": list(CSV_COLUMNS), "rows": rows}, indent=1)

    def render(self, fmt: str = "csv") -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown format {fmt!r}")

    def select(self, **match) -> list:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]


# ---------------------------------------------------------------------------
# cached construction (per process)


@lru_cache(maxsize=64)
def _scenario(geometry: ScenarioGeometry, coupling: bool, params: CouplingParams, snr_db: float) -> Scenario:
    return _base_scenario(geometry, coupling, params).with_snr(snr_db)


@lru_cache(maxsize=16)
def _base_scenario(geometry, coupling, params):
    return Scenario.build(geometry, 0.0, coupling=coupling, params=params)


@lru_cache(maxsize=256)
def _estimator(geometry, coupling, params, snr_db, tag, beta):
    return scenario_estimator(_scenario(geometry, coupling, params, snr_db), tag, beta)


@lru_cache(maxsize=256)
def _data_model(geometry, coupling, params, snr_db, tag, beta):
    sc = _scenario(geometry, coupling, params, snr_db)
    return data_phase_model(tag, sc.stats, sc.C_N, sc.rho, beta, geometry.psi)


@dataclass(frozen=True)
class Point:
    geometry: ScenarioGeometry
    coupling: bool
    params: CouplingParams
    snr_db: float

    @property
    def key(self):
        return (self.geometry, self.coupling, self.params, float(self.snr_db))


def _chunks(total: int):
    return [(s, min(CHUNK, total - s)) for s in range(0, total, CHUNK)]


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*tasks)))


# ---------------------------------------------------------------------------
# channel estimation sweeps


def _ne_chunk(point: Point, tags: tuple, beta: float, seed: int, start: int, count: int) -> dict:
    sc = _scenario(*point.key)
    g, x = sc.draw_trials(seed, count, first=start)
    out = {}
    p_g = float(np.sum(np.abs(g) ** 2))
    for tag in tags:
        g_hat = _estimator(*point.key, tag, beta)(x)
        cross = complex(np.sum(g_hat.conj() * g))
        out[tag] = np.array([cross.real, cross.imag, float(np.sum(np.abs(g_hat) ** 2)), p_g])
    return out


def ne_points(cfg: ExperimentConfig, points: list) -> list:
    """(theory, empirical) NE in dB for every point and tag: list of dicts tag -> pair."""
    tasks = [(p, cfg.tags, cfg.beta, cfg.seed, s, c) for p in points for s, c in _chunks(cfg.trials)]
    parts = _map(_ne_chunk, tasks, cfg.workers)
    n_chunks = len(_chunks(cfg.trials))
    results = []
    for i, p in enumerate(points):
        chunk = parts[i * n_chunks:(i + 1) * n_chunks]
        res = {}
        for tag in cfg.tags:
            acc = np.zeros(4)
            for part in chunk:
                acc = acc + part[tag]
            n = cfg.trials
            cross = complex(acc[0], acc[1]) / n
            emp = 1 - abs(cross) ** 2 / ((acc[2] / n) * (acc[3] / n))
            theory = _estimator(*p.key, tag, cfg.beta).theoretical_ne()
            res[tag] = (to_db(theory), to_db(emp))
        results.append(res)
    return results


def run_ne_vs_snr(cfg: ExperimentConfig) -> ResultTable:
    cfg.validate("ne-snr")
    geo, params = cfg.geometry(), cfg.params()
    values = cfg.sweep("ne-snr")
    variants = [cfg.coupling] + ([False] if cfg.compare_uncoupled and cfg.coupling else [])
    points = [Point(geo, c, params, float(v)) for v in values for c in variants]
    res = ne_points(cfg, points)
    table = ResultTable()
    for p, r in zip(points, res):
        for tag in cfg.tags:
            label = tag if p.coupling else f"{tag}|coupling=off"
            table.add("snr_db", p.snr_db, label, "ne_db", *r[tag], cfg.trials, cfg.seed)
    return table


def run_ne_vs_angle(cfg: ExperimentConfig) -> ResultTable:
    cfg.validate("ne-angle")
    params = cfg.params()
    values = cfg.sweep("ne-angle")
    variants = [cfg.coupling] + ([False] if cfg.compare_uncoupled and cfg.coupling else [])
    points = [Point(cfg.geometry(theta_deg=float(v), delta=float(d)), c, params, cfg.snr_db)
              for v in values for d in cfg.deltas for c in variants]
    res = ne_points(cfg, points)
    table = ResultTable()
    for p, r in zip(points, res):
        for tag in cfg.tags:
            label = f"{tag}|delta={p.geometry.delta:.6g}|coupling={'on' if p.coupling else 'off'}"
            table.add("theta_deg", p.geometry.theta_deg, label, "ne_db", *r[tag], cfg.trials, cfg.seed)
    return table


def run_ne_vs_antennas(cfg: ExperimentConfig) -> ResultTable:
    cfg.validate("ne-antennas")
    params = cfg.params()
    values = cfg.sweep("ne-antennas")
    variants = [cfg.coupling] + ([False] if cfg.compare_uncoupled and cfg.coupling else [])
    points = [Point(cfg.geometry(M=int(v)), c, params, cfg.snr_db) for v in values for c in variants]
    res = ne_points(cfg, points)
    table = ResultTable()
    for p, r in zip(points, res):
        for tag in cfg.tags:
            label = tag if p.coupling else f"{tag}|coupling=off"
            table.add("M", p.geometry.M, label, "ne_db", *r[tag], cfg.trials, cfg.seed)
    return table


# ---------------------------------------------------------------------------
# rate sweeps


def _rate_chunk(point: Point, tag: str, receiver: str, beta: float, seed: int, n_symbols: int,
                start: int, count: int) -> dict:
    sc = _scenario(*point.key)
    est = _estimator(*point.key, tag, beta)
    model = _data_model(*point.key, tag, beta)
    return _empirical_sums(receiver, sc, tag, seed, count, n_symbols, None, beta, start, est, model)


def rate_points(cfg: ExperimentConfig, points: list) -> list:
    """Per point, dict (receiver, tag) -> (theory RateReport, empirical RateReport, gaussian MRC)."""
    combos = [(p, tag, rx) for p in points for tag in cfg.tags for rx in cfg.receivers]
    chunks = _chunks(cfg.rate_draws)
    tasks = [(p, tag, rx, cfg.beta, cfg.seed, cfg.n_symbols, s, c) for p, tag, rx in combos for s, c in chunks]
    parts = _map(_rate_chunk, tasks, cfg.workers)
    out = [dict() for _ in points]
    for i, (p, tag, rx) in enumerate(combos):
        sc = _scenario(*p.key)
        acc = combine_sums(parts[i * len(chunks):(i + 1) * len(chunks)])
        emp = RateReport(rx, tag, finish_empirical(acc, sc.K, sc.rho))
        est = _estimator(*p.key, tag, cfg.beta)
        model = _data_model(*p.key, tag, cfg.beta)
        theory = model_report(rx, sc, tag, cfg.seed, max(200, cfg.rate_draws), estimator=est, model=model)
        extra = None
        if rx == "mrc":
            C_ghat, _ = est.covariance()
            extra = RateReport("mrc", tag, mrc_terms(C_ghat.blocks[0], sc.stats.C_G, sc.C_N,
                                                      model.C_qn, sc.rho, sc.K))
        out[points.index(p)][(rx, tag)] = (theory, emp, extra)
    return out


def run_se_vs_snr(cfg: ExperimentConfig) -> ResultTable:
    cfg.validate("se-snr")
    geo, params = cfg.geometry(), cfg.params()
    points = [Point(geo, cfg.coupling, params, float(v)) for v in cfg.sweep("se-snr")]
    res = rate_points(cfg, points)
    table = ResultTable()
    N = geo.N
    for p, r in zip(points, res):
        for rx in cfg.receivers:
            for tag in cfg.tags:
                th, em, extra = r[(rx, tag)]
                table.add("snr_db", p.snr_db, f"{rx}|{tag}", "sum_se", th.sum_se(cfg.T, N),
                          em.sum_se(cfg.T, N), cfg.rate_draws, cfg.seed)
                if extra is not None:
                    table.add("snr_db", p.snr_db, f"{rx}|{tag}", "sum_se_trace_form",
                              extra.sum_se(cfg.T, N), float("nan"), cfg.rate_draws, cfg.seed)
    return table


def run_rate_vs_users(cfg: ExperimentConfig) -> ResultTable:
    cfg.validate("rate-users")
    params = cfg.params()
    points = [Point(cfg.geometry(K=int(v), N=int(v)), cfg.coupling, params, cfg.snr_db)
              for v in cfg.sweep("rate-users")]
    res = rate_points(cfg, points)
    table = ResultTable()
    for p, r in zip(points, res):
        for rx in cfg.receivers:
            for tag in cfg.tags:
                th, em, extra = r[(rx, tag)]
                table.add("K", p.geometry.K, f"{rx}|{tag}", "per_user_rate", float(np.mean(th.rates)),
                          float(np.mean(em.rates)), cfg.rate_draws, cfg.seed)
                if extra is not None:
                    table.add("K", p.geometry.K, f"{rx}|{tag}", "per_user_rate_trace_form",
                              float(np.mean(extra.rates)), float("nan"), cfg.rate_draws, cfg.seed)
    return table


COMMANDS = {
    "ne-snr": run_ne_vs_snr,
    "ne-angle": run_ne_vs_angle,
    "ne-antennas": run_ne_vs_antennas,
    "se-snr": run_se_vs_snr,
    "rate-users": run_rate_vs_users,
}


def build_config(command: str, path=None, preset: str | None = None, **overrides) -> ExperimentConfig:
    """Layer the command's operating point, the preset, a config file and
    explicit overrides (later wins). The antenna sweep runs at SNR 0 dB, the
    user sweep at 5 dB and the angle sweep at 10 dB."""
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    data = {}
    if command == "ne-antennas":
        data["snr_db"] = 0.0
    elif command == "rate-users":
        data["snr_db"] = 5.0
    if preset:
        data.update(PRESETS[preset])
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a key-value mapping")
        ExperimentConfig.from_mapping(loaded)  # rejects unknown keys
        data.update(loaded)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_mapping(data)
