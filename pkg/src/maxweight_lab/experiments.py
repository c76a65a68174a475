"""The six experiment types behind ``maxweight-lab run``.

Each runner takes a validated :class:`ExperimentConfig` and returns an
:class:`ExperimentResult`: a JSON-ready report, CSV rows with fixed
columns, and whether every asserted bound held.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (BoundReport, TailBoundConstants, iq_heuristic_exponent, k_bar,
                     ldp_objective, ldp_theta_upper, ltilde_drift_bound, nu_bar,
                     excursion_level_for, stationary_tail_bound, excursion_bound,
                     iq_tail_bound)
from .errors import InvalidParameterError
from .geometry import load, load_iq
from .lyapunov import L_alpha
from .model import NetworkInstance, ScheduleSet, load_schedule_set, schedule_set_from_dict
from .policy import PolicyConfig, w_alpha_batch
from .sim import (TraceConfig, require_underload, calibrate_drift_threshold, estimate_stationary,
                  exact_drift_batch, max_excursion_trials, network_load, sample_states,
                  ssc_experiment)

EXPERIMENTS = ("capacity", "drift", "tail", "excursion", "ssc", "ldp-bound")

CSV_COLUMNS = {
    "capacity": ["method", "rho"],
    "drift": ["state", "L_alpha", "drift", "target", "violates"],
    "tail": ["ell", "threshold", "empirical", "standard_error", "bound", "satisfied"],
    "excursion": ["b", "horizon", "replications", "empirical", "standard_error", "bound", "satisfied"],
    "ssc": ["r", "replication", "D_r", "sup_scaled_norm", "grid_points"],
    "ldp-bound": ["eps", "objective"],
}


@dataclass
class ExperimentConfig:
    """One experiment.  ``network`` is ``{"iq": m}``, ``{"schedule_file": path}``
    or an inline ``{"M": .., "schedules": [..]}``; rates come from ``rates``
    or from ``load`` (spread uniformly over an IQ switch)."""

    experiment: str
    network: dict = field(default_factory=lambda: {"iq": 2})
    rates: list | None = None
    load: float | None = None
    alpha: float = 1.0
    horizon: int = 1_000_000
    replications: int = 1000
    seed: int = 0
    output: str = "results"
    params: dict = field(default_factory=dict)
    base_dir: str = field(default=".", repr=False)

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise InvalidParameterError("config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        unknown = set(doc) - known
        if unknown:
            raise InvalidParameterError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**doc, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise InvalidParameterError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not (isinstance(self.alpha, (int, float)) and self.alpha > 0):
            raise InvalidParameterError("alpha must be a positive number")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidParameterError("seed must be a nonnegative integer")
        if self.horizon < 1 or self.replications < 1:
            raise InvalidParameterError("horizon and replications must be positive")
        if self.experiment != "ldp-bound":
            self.build_network()

    # -- network construction

    def iq_size(self) -> int | None:
        return self.network.get("iq")

    def schedule_set(self) -> ScheduleSet | None:
        if "iq" in self.network:
            return None
        if "schedule_file" in self.network:
            path = Path(self.base_dir) / self.network["schedule_file"]
            if not path.exists():
                raise InvalidParameterError(f"schedule file {str(path)!r} does not exist")
            return load_schedule_set(path)
        return schedule_set_from_dict(self.network)

    def build_network(self) -> NetworkInstance:
        m = self.iq_size()
        if m is not None:
            if self.rates is not None:
                return NetworkInstance.iq(int(m), self.rates)
            if self.load is None:
                raise InvalidParameterError("IQ network needs 'rates' or 'load'")
            return NetworkInstance.iq_uniform(int(m), float(self.load))
        S = self.schedule_set()
        if self.rates is None:
            raise InvalidParameterError("a general schedule set needs explicit 'rates'")
        return NetworkInstance(S, np.asarray(self.rates, float).ravel())


@dataclass
class ExperimentResult:
    report: dict
    rows: list[list]
    columns: list[str]
    bounds_ok: bool = True


def _bound_list(reports) -> list[dict]:
    return [r.to_dict() for r in reports]


def run_capacity(cfg: ExperimentConfig) -> ExperimentResult:
    net = cfg.build_network()
    rows = []
    report = {}
    ok = True
    if net.schedules is not None:
        res = load(net.rates, net.schedules)
        report["rho_lp"] = res.rho
        report["decomposition"] = {
            str(net.schedules.schedules[k].tolist()): a for k, a in res.decomposition.items()
        }
        rows.append(["lp", res.rho])
    if net.iq_size is not None:
        rho_iq = load_iq(net.rates)
        report["rho_closed_form"] = rho_iq
        rows.append(["closed_form", rho_iq])
        if "rho_lp" in report:
            diff = abs(report["rho_lp"] - rho_iq)
            report["agreement_abs_diff"] = diff
            ok = diff <= 1e-9
    report["rho"] = report.get("rho_lp", report.get("rho_closed_form"))
    report["in_capacity_region"] = report["rho"] < 1
    return ExperimentResult(report, rows, CSV_COLUMNS["capacity"], ok)


def run_drift(cfg: ExperimentConfig) -> ExperimentResult:
    net = cfg.build_network()
    alpha = float(cfg.alpha)
    rho = require_underload(net, "calibrate_drift_threshold")
    calib = calibrate_drift_threshold(net, alpha, rho=rho)
    n_states = int(cfg.params.get("n_states", 1000))
    spread = float(cfg.params.get("spread", 4.0))
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    states = sample_states(rng, net.M, alpha, n_states, calib.B, spread * calib.B)
    drift = exact_drift_batch(states, net, alpha, "L")
    Ls = L_alpha(states.astype(float), alpha)
    bad = drift > calib.target
    reports = [BoundReport("lyapunov_drift", calib.target, float(drift.max()),
                           parameters={"alpha": alpha, "rho": rho, "B": calib.B, "n_states": n_states})]
    if alpha >= 1:
        ltd = exact_drift_batch(states, net, alpha, "L_tilde")
        reports.append(BoundReport("ltilde_drift", ltilde_drift_bound(alpha, net.M, rho), float(ltd.max()),
                                   parameters={"alpha": alpha, "rho": rho, "k_bar": k_bar(alpha, net.M)}))
    if net.schedules is not None:
        lhs = (np.where(states > 0, states.astype(float), 0.0) ** alpha) @ net.rates
        rhs = rho * w_alpha_batch(states, alpha, net.schedules)
        reports.append(BoundReport("arrival_weight_vs_rho_w", 0.0, float(np.max(lhs - rhs - 1e-9 * (1 + rhs))),
                                   parameters={"alpha": alpha}))
    rows = [[" ".join(map(str, q.tolist())), L, d, calib.target, int(v)]
            for q, L, d, v in zip(states, Ls, drift, bad)]
    report = {"calibration": calib.to_dict(), "violations": int(bad.sum()), "rho": rho,
              "bounds": _bound_list(reports)}
    return ExperimentResult(report, rows, CSV_COLUMNS["drift"], all(r.satisfied for r in reports))


def tail_slope(thresholds, tail, samples, min_count: int = 50) -> float | None:
    """Least-squares decay rate ``-d log P / d x`` over well-populated tail points."""
    thr = np.asarray(thresholds, float)
    p = np.asarray(tail, float)
    use = p * samples >= min_count
    if use.sum() < 2:
        return None
    slope = np.polyfit(thr[use], np.log(p[use]), 1)[0]
    return float(-slope)


def run_tail(cfg: ExperimentConfig) -> ExperimentResult:
    net = cfg.build_network()
    alpha = float(cfg.alpha)
    rho = require_underload(net, "estimate_stationary")
    M = net.M
    calib = calibrate_drift_threshold(net, alpha, rho=rho)
    B = calib.B if alpha >= 1 else calib.B + 2.0 * M ** (1.0 / (alpha + 1.0))
    consts = TailBoundConstants.for_network(net.rates, rho, alpha, B)
    n_ell = int(cfg.params.get("n_ell", 16))
    n_se = float(cfg.params.get("tolerance_se", 3.0))
    ell_thr = [stationary_tail_bound(l, consts, alpha, M) for l in range(n_ell)]
    fine = np.arange(B, B + 2.0 * consts.nu_max * n_ell + 1.0, 1.0)
    thresholds = np.concatenate([[t for t, _ in ell_thr], fine])
    tcfg = TraceConfig(net, PolicyConfig(alpha), cfg.horizon, seed=cfg.seed)
    est = estimate_stationary(tcfg, burn_in=cfg.params.get("burn_in"), thresholds=thresholds)
    reports, rows = [], []
    for l, (t, pb) in enumerate(ell_thr):
        rep = BoundReport("stationary_tail", pb, float(est.tail[l]), float(est.tail_se[l]),
                          parameters={"ell": l, "threshold": t}, tolerance_se=n_se,
                          raw_theoretical=stationary_tail_bound(l, consts, alpha, M, raw=True)[1])
        reports.append(rep)
        rows.append([l, t, est.tail[l], est.tail_se[l], pb, int(rep.satisfied)])
    slope = tail_slope(fine, est.tail[n_ell:], est.samples)
    unit_factor = 2.0 if alpha >= 1 else 10.0
    ratio = consts.gamma / consts.nu_bar if alpha >= 1 else consts.gamma / (5.0 * consts.nu_bar)
    slope_bound = math.log1p(ratio) / (unit_factor * M ** (1.0 / (alpha + 1.0)))
    # too few populated tail points means the rate is not measurable, not violated
    slope_ok = None if slope is None else bool(slope >= slope_bound)
    report = {
        "rho": rho,
        "constants": asdict(consts),
        "calibration": calib.to_dict(),
        "estimate": est.to_dict(),
        "bounds": _bound_list(reports),
        "decay_rate": {"empirical": slope, "minimum": slope_bound, "satisfied": slope_ok},
    }
    if net.iq_size is not None:
        m = net.iq_size
        report["iq_bound"] = [iq_tail_bound(l, m, rho, alpha, B) for l in range(n_ell)]
        report["iq_heuristic_exponent"] = iq_heuristic_exponent(m, rho, alpha)
    ok = all(r.satisfied for r in reports) and slope_ok is not False
    return ExperimentResult(report, rows, CSV_COLUMNS["tail"], ok)


def run_excursion(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    net = cfg.build_network()
    alpha = float(cfg.alpha)
    rho = require_underload(net, "max_excursion_trials")
    T = cfg.horizon
    if "b" in cfg.params:
        b_values = np.atleast_1d(np.asarray(cfg.params["b"], dtype=float))
    else:
        target = float(cfg.params.get("target_bound", 0.5))
        b_values = np.array([math.ceil(excursion_level_for(target, T, alpha, net.M, rho))], float)
    n_se = float(cfg.params.get("tolerance_se", 3.0))
    tcfg = TraceConfig(net, PolicyConfig(alpha), T, seed=cfg.seed)
    reports, rows = [], []
    for b in b_values:
        est = max_excursion_trials(tcfg, b, cfg.replications, threads=threads)
        bound = excursion_bound(T, b, alpha, net.M, rho)
        rep = BoundReport("excursion", bound, est.probability, est.standard_error,
                          parameters={"b": float(b), "T": T, "alpha": alpha, "rho": rho},
                          raw_theoretical=excursion_bound(T, b, alpha, net.M, rho, raw=True),
                          tolerance_se=n_se)
        reports.append(rep)
        rows.append([float(b), T, cfg.replications, est.probability, est.standard_error, bound,
                     int(rep.satisfied)])
    report = {"rho": rho, "K": (alpha + 1) * k_bar(alpha, net.M), "bounds": _bound_list(reports)}
    return ExperimentResult(report, rows, CSV_COLUMNS["excursion"], all(r.satisfied for r in reports))


def run_ssc(cfg: ExperimentConfig) -> ExperimentResult:
    net = cfg.build_network()
    if net.schedules is None:
        raise InvalidParameterError("ssc needs an enumerable schedule set")
    gamma_dir = cfg.params.get("direction", 0.5)
    direction = np.broadcast_to(np.asarray(gamma_dir, float).ravel(), (net.M,)).copy()
    r_values = [int(r) for r in cfg.params.get("r_values", [5, 10, 20, 40])]
    T_scaled = float(cfg.params.get("T_scaled", 1.0))
    grid = int(cfg.params.get("grid", 1000))
    results = ssc_experiment(net, net.rates, direction, float(cfg.alpha), r_values, T_scaled,
                             cfg.seed, replications=cfg.replications, grid=grid)
    medians = {r: float(np.median([x.D_r for x in results if x.r == r])) for r in r_values}
    med = [medians[r] for r in r_values]
    non_increasing = all(b <= a for a, b in zip(med, med[1:]))
    halved = med[-1] < 0.5 * med[0]
    rows = [[x.r, x.replication, x.D_r, x.sup_scaled_norm, x.grid_points] for x in results]
    report = {"median_D_r": {str(r): v for r, v in medians.items()},
              "non_increasing": non_increasing, "last_below_half_first": halved,
              "grid_points": grid, "direction": direction.tolist(), "T_scaled": T_scaled}
    return ExperimentResult(report, rows, CSV_COLUMNS["ssc"], non_increasing and halved)


def run_ldp(cfg: ExperimentConfig) -> ExperimentResult:
    m = int(cfg.params.get("m", cfg.iq_size() or 4))
    rho = float(cfg.load if cfg.load is not None else cfg.params.get("rho", 0.95))
    alpha = float(cfg.alpha)
    res = ldp_theta_upper(m, rho, alpha)
    eps_grid = np.linspace(1e-3, m - 1 - 1e-3, int(cfg.params.get("grid", 100)))
    rows = [[e, ldp_objective(e, m, rho, alpha)] for e in eps_grid]
    report = {"m": m, "rho": rho, "alpha": alpha, **asdict(res),
              "eps_star_rel_err": abs(res.eps_star - (1 - rho)) / (1 - rho),
              "theta_rel_excess": res.theta_numeric / res.theta_approx - 1.0,
              "nu_bar_uniform": nu_bar(np.full(m * m, rho / m), alpha)}
    return ExperimentResult(report, rows, CSV_COLUMNS["ldp-bound"], True)


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    runner = {
        "capacity": run_capacity,
        "drift": run_drift,
        "tail": run_tail,
        "excursion": lambda c: run_excursion(c, threads),
        "ssc": run_ssc,
        "ldp-bound": run_ldp,
    }[cfg.experiment]
    result = runner(cfg)
    result.report = {"experiment": cfg.experiment, "version": __version__, "seed": cfg.seed,
                     "config": cfg.to_dict(), "bounds_ok": result.bounds_ok, **result.report}
    return result
