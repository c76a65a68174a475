"""Simulation and exact small-instance oracles for MW-alpha networks."""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .bounds import drift_target
from .errors import InvalidParameterError, PreconditionError, SizeError
from .geometry import (CRITICAL_TOL, SscGeometry, dual_extreme_points, load, load_iq,
                       solve_algd, workload_map)
from .lyapunov import L_alpha, LyapunovSpec, norm_alpha1
from .model import NetworkInstance, SeededRng, sample_arrivals, step
from .policy import PolicyConfig, iq_max_weight_matching, max_weight_schedule, powered

CHUNK = 1 << 20
DRIFT_ENUMERATION_CAP = 20


def network_load(network: NetworkInstance) -> float:
    if network.schedules is None:
        return load_iq(network.rates)
    return load(network.rates, network.schedules).rho


def select_schedule(Q, cfg: PolicyConfig, network: NetworkInstance) -> np.ndarray:
    if network.schedules is None:
        return iq_max_weight_matching(Q, cfg.alpha)
    return max_weight_schedule(Q, cfg, network.schedules)


@dataclass
class TraceConfig:
    network: NetworkInstance
    policy: PolicyConfig
    horizon: int
    initial_state: np.ndarray | None = None
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidParameterError("horizon must be at least one slot")
        q0 = np.zeros(self.network.M, np.int64) if self.initial_state is None else self.initial_state
        q0 = np.asarray(q0, dtype=np.int64).ravel()
        if q0.shape != (self.network.M,) or np.any(q0 < 0):
            raise InvalidParameterError("initial state must be a nonnegative vector of length M")
        self.initial_state = q0

    def rng(self, stream_offset: int = 0) -> SeededRng:
        return SeededRng(self.seed, self.stream_id + stream_offset)

    def _schedule_matrix(self) -> np.ndarray:
        return np.ascontiguousarray(self.network.schedules.schedules, dtype=np.int64)


def _arrival_blocks(rates, rng: SeededRng, n_slots: int, chunk: int = CHUNK):
    lam = np.asarray(rates, dtype=float)
    done = 0
    while done < n_slots:
        n = min(chunk, n_slots - done)
        yield rng.uniforms(n, lam.shape[0]) < lam
        done += n


def run_trace(cfg: TraceConfig, engine: str = "auto") -> np.ndarray:
    """``Q(0), ..., Q(T)`` as a ``(T+1, M)`` array.

    ``engine="python"`` steps through :func:`sample_arrivals`,
    :func:`max_weight_schedule` and :func:`step` one slot at a time; the
    compiled engine consumes the same random stream and must agree exactly.
    """
    if engine == "auto":
        engine = "kernel" if cfg.network.enumerable else "python"
    rng = cfg.rng()
    if engine == "python":
        out = np.empty((cfg.horizon + 1, cfg.network.M), dtype=np.int64)
        q = cfg.initial_state.copy()
        out[0] = q
        for t in range(cfg.horizon):
            sigma = select_schedule(q, cfg.policy, cfg.network)
            q = step(q, sigma, sample_arrivals(cfg.network.rates, rng))
            out[t + 1] = q
        return out
    if engine != "kernel":
        raise InvalidParameterError(f"unknown engine {engine!r}")
    S = cfg._schedule_matrix()
    pieces = []
    q = cfg.initial_state.copy()
    for block in _arrival_blocks(cfg.network.rates, rng, cfg.horizon):
        tr = _kernels.trace_kernel(q, S, float(cfg.policy.alpha), block.astype(np.int64))
        pieces.append(tr[1:] if pieces else tr)
        q = tr[-1].copy()
    return np.concatenate(pieces)


# -- exact drift -------------------------------------------------------------------

def arrival_patterns(rates) -> tuple[np.ndarray, np.ndarray]:
    """All ``2**M`` arrival vectors with their probabilities."""
    lam = np.asarray(rates, dtype=float)
    M = lam.shape[0]
    if M > DRIFT_ENUMERATION_CAP:
        raise SizeError(f"exact drift enumerates 2**M outcomes; M={M} exceeds {DRIFT_ENUMERATION_CAP}")
    pats = np.array(list(itertools.product((0, 1), repeat=M)), dtype=np.int64).reshape(-1, M)
    probs = np.prod(np.where(pats == 1, lam, 1.0 - lam), axis=1)
    keep = probs > 0
    return pats[keep], probs[keep]


def _batch_selection(Qs: np.ndarray, alpha: float, S) -> np.ndarray:
    qa = powered(Qs, alpha)
    weights = np.cumsum(qa[:, None, :] * S.schedules[None, :, :], axis=-1)[..., -1]
    return S.schedules[np.argmax(weights, axis=1)].astype(np.int64)


def exact_drift_batch(Qs, network: NetworkInstance, alpha: float, V: str = "L") -> np.ndarray:
    """Exact ``E[V(Q(t+1)) - V(Q(t)) | Q(t)]`` for each row of ``Qs``.

    The schedule is fixed from ``Q(t)`` first, then every arrival pattern
    is weighted by its Bernoulli probability.
    """
    Qs = np.atleast_2d(np.asarray(Qs, dtype=np.int64))
    fn = LyapunovSpec(alpha).function(V)
    pats, probs = arrival_patterns(network.rates)
    if network.schedules is None:
        sig = np.array([iq_max_weight_matching(q, alpha) for q in Qs], dtype=np.int64)
    else:
        sig = _batch_selection(Qs, alpha, network.schedules)
    served = np.maximum(Qs - sig, 0)
    v0 = fn(Qs.astype(float))
    drift = np.zeros(Qs.shape[0])
    for a, p in zip(pats, probs):
        drift += p * (fn((served + a).astype(float)) - v0)
    return drift


def exact_one_step_drift(Q, network: NetworkInstance, policy: PolicyConfig, V: str = "L") -> float:
    return float(exact_drift_batch(np.asarray(Q)[None, :], network, policy.alpha, V)[0])


def enumerate_ball(M: int, alpha: float, radius: float, cap: int = 5_000_000) -> np.ndarray:
    """All integer states with ``L_alpha(Q) <= radius``, built one first-coordinate slice at a time."""
    side = int(math.floor(radius)) + 3
    if side ** (M - 1) > cap:
        raise SizeError(f"ball enumeration slices hold {side ** (M - 1)} states (cap {cap})")
    rest = np.indices((side,) * (M - 1)).reshape(M - 1, -1).T.astype(np.int64)
    slices, kept = [], 0
    for first in range(side):
        grid = np.column_stack([np.full(rest.shape[0], first, np.int64), rest])
        grid = grid[norm_alpha1(grid, alpha) <= radius + 2.0 * M]
        grid = grid[L_alpha(grid.astype(float), alpha) <= radius]
        kept += grid.shape[0]
        if kept > cap:
            raise SizeError(f"ball of radius {radius:.4g} holds more than {cap} states")
        slices.append(grid)
    return np.concatenate(slices)


def sample_states(rng: np.random.Generator, M: int, alpha: float, n: int,
                  lower: float, upper: float) -> np.ndarray:
    """Random integer states with ``lower < L_alpha(Q) <= upper``.

    Each draw picks a random nonempty support, a random direction on it and
    a radius uniform in ``(lower, upper]``, so faces of the orthant (where
    schedules waste service) are well represented.
    """
    out = []
    while len(out) < n:
        mask = rng.random(M) < 0.5
        if not mask.any():
            mask[rng.integers(M)] = True
        direction = np.where(mask, rng.random(M), 0.0)
        nrm = norm_alpha1(direction, alpha)
        if nrm == 0:
            continue
        radius = rng.uniform(lower, upper)
        q = np.floor(direction / nrm * radius + rng.random(M) * mask).astype(np.int64)
        val = L_alpha(q.astype(float), alpha)
        if lower < val <= upper:
            out.append(q)
    return np.array(out, dtype=np.int64)


@dataclass
class DriftCalibration:
    B: float
    unit: float
    target: float
    radius: float
    n_states: int
    n_violations: int
    max_violation_L: float
    method: str = "ball"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def calibrate_drift_threshold(network: NetworkInstance, alpha: float, states=None,
                              radius: float | None = None, rho: float | None = None,
                              fallback_samples: int = 200_000) -> DriftCalibration:
    """Smallest multiple ``B`` of ``M**(1/(alpha+1))`` beyond which the exact drift
    of ``L_alpha`` meets ``-(1-rho)/2 M**(1/(alpha+1)-1)``.

    With explicit ``states`` the search is over those states.  Otherwise
    every integer state in a ball is checked, and the ball grows until no
    violation lies within two units of its edge.  A ball too large to
    enumerate is replaced by a fixed-seed sample of ``fallback_samples``
    states spread over its radii.
    """
    M = network.M
    unit = M ** (1.0 / (alpha + 1.0))
    rho = network_load(network) if rho is None else rho
    if not rho < 1:
        raise PreconditionError(f"drift calibration needs rho < 1, got {rho}")
    target = drift_target(rho, M, alpha)

    def scan(Qs):
        d = exact_drift_batch(Qs, network, alpha, "L")
        Ls = L_alpha(Qs.astype(float), alpha)
        bad = d > target
        worst = float(Ls[bad].max()) if bad.any() else 0.0
        return int(bad.sum()), worst

    method = "states"
    if states is not None:
        Qs = np.asarray(states, dtype=np.int64)
        n_bad, worst = scan(Qs)
        R = float(L_alpha(Qs.astype(float), alpha).max())
    else:
        R = radius if radius is not None else 8.0 * unit
        while True:
            try:
                Qs = enumerate_ball(M, alpha, R)
                method = "ball"
            except SizeError:
                rng = np.random.default_rng(np.random.SeedSequence(0, spawn_key=(M,)))
                Qs = sample_states(rng, M, alpha, fallback_samples, 0.0, R)
                method = "sampled"
            n_bad, worst = scan(Qs)
            if worst <= R - 2.0 * unit:
                break
            R *= 1.5
    B = unit * max(1, math.ceil(worst / unit - 1e-12))
    if B < worst:
        B += unit
    return DriftCalibration(B, unit, target, R, int(Qs.shape[0]), n_bad, worst, method)


# -- stationary estimation -------------------------------------------------------

@dataclass
class StationaryEstimate:
    mean_backlog_l1: float
    mean_backlog_l1_se: float
    thresholds: np.ndarray
    tail: np.ndarray
    tail_se: np.ndarray
    burn_in: int
    samples: int
    n_batches: int
    batch_means_l1: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "mean_backlog_l1": self.mean_backlog_l1,
            "mean_backlog_l1_se": self.mean_backlog_l1_se,
            "thresholds": self.thresholds.tolist(),
            "tail": self.tail.tolist(),
            "tail_se": self.tail_se.tolist(),
            "burn_in": self.burn_in,
            "samples": self.samples,
            "n_batches": self.n_batches,
        }


def default_burn_in(horizon: int) -> int:
    return min(max(horizon // 10, 10_000), horizon // 2)


def _stream_stats(cfg: TraceConfig, n_slots: int, q: np.ndarray, rng: SeededRng, chunk: int = CHUNK):
    """Yield ``(l1, norm)`` blocks of the state recorded at each slot."""
    S = cfg._schedule_matrix()
    p = cfg.policy.alpha + 1.0
    for block in _arrival_blocks(cfg.network.rates, rng, n_slots, chunk):
        yield _kernels.stats_kernel(q, S, float(cfg.policy.alpha), block.astype(np.int64), p)


def require_underload(network: NetworkInstance, op: str) -> float:
    rho = network_load(network)
    if not rho < 1:
        raise PreconditionError(f"{op}: requires rho(lambda) < 1 (no stationary regime), got rho={rho:.6g}")
    return rho


def estimate_stationary(cfg: TraceConfig, burn_in: int | None = None, thresholds=(),
                        n_batches: int = 20) -> StationaryEstimate:
    """Time averages after burn-in, with batch-means standard errors.

    Records ``||Q(t)||_1`` and the exceedance indicator of
    ``||Q(t)||_{alpha+1} > threshold`` for ``t = burn_in, ..., T-1``.
    """
    require_underload(cfg.network, "estimate_stationary")
    if not cfg.network.enumerable:
        raise SizeError("stationary estimation needs an explicit schedule set")
    burn_in = default_burn_in(cfg.horizon) if burn_in is None else int(burn_in)
    samples = cfg.horizon - burn_in
    if n_batches < 2 or samples < n_batches:
        raise InvalidParameterError("need at least two batches and one sample per batch")
    thr = np.asarray(thresholds, dtype=float).ravel()
    batch_len = samples // n_batches
    samples = batch_len * n_batches

    rng = cfg.rng()
    q = cfg.initial_state.copy()
    for _ in _stream_stats(cfg, burn_in, q, rng):
        pass

    sums = np.zeros(n_batches)
    exceed = np.zeros((n_batches, thr.size))
    for b in range(n_batches):
        for l1, nrm in _stream_stats(cfg, batch_len, q, rng):
            sums[b] += l1.sum()
            if thr.size:
                exceed[b] += (nrm[:, None] > thr[None, :]).sum(axis=0)
    bm = sums / batch_len
    tail_b = exceed / batch_len
    se = lambda x: float(np.std(x, ddof=1) / math.sqrt(n_batches))
    return StationaryEstimate(
        mean_backlog_l1=float(bm.mean()),
        mean_backlog_l1_se=se(bm),
        thresholds=thr,
        tail=tail_b.mean(axis=0),
        tail_se=np.array([se(tail_b[:, j]) for j in range(thr.size)]),
        burn_in=burn_in,
        samples=samples,
        n_batches=n_batches,
        batch_means_l1=bm,
    )


def window_averages(cfg: TraceConfig, window: int) -> np.ndarray:
    """Mean of ``||Q(t)||_1`` over consecutive windows of ``window`` slots."""
    if cfg.horizon % window:
        raise InvalidParameterError("horizon must be a multiple of the window length")
    rng = cfg.rng()
    q = cfg.initial_state.copy()
    out = []
    for _ in range(cfg.horizon // window):
        total = 0
        for l1, _nrm in _stream_stats(cfg, window, q, rng):
            total += int(l1.sum())
        out.append(total / window)
    return np.array(out)


# -- transient excursions --------------------------------------------------------

@dataclass
class ExcursionEstimate:
    probability: float
    standard_error: float
    hits: int
    replications: int
    b: float
    horizon: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def excursion_maxima(cfg: TraceConfig, replications: int, threads: int = 1) -> np.ndarray:
    """``max_{t<=T} Q_max(t)`` for each replication; replication k uses stream ``k``."""
    S = cfg._schedule_matrix()
    alpha = float(cfg.policy.alpha)

    def one(k: int) -> int:
        rng = cfg.rng(k)
        block = (rng.uniforms(cfg.horizon, cfg.network.M) < cfg.network.rates).astype(np.int64)
        return int(_kernels.max_kernel(cfg.initial_state.copy(), S, alpha, block))

    if threads <= 1:
        return np.array([one(k) for k in range(replications)], dtype=np.int64)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(one, range(replications))), dtype=np.int64)


def max_excursion_trials(cfg: TraceConfig, b: float, replications: int,
                         threads: int = 1) -> ExcursionEstimate:
    """Fraction of replications whose maximal excursion reaches ``b``."""
    if np.any(cfg.initial_state != 0):
        raise PreconditionError("max_excursion_trials: requires Q(0) = 0")
    if cfg.policy.alpha < 1:
        raise PreconditionError("max_excursion_trials: requires alpha >= 1")
    require_underload(cfg.network, "max_excursion_trials")
    maxima = excursion_maxima(cfg, replications, threads)
    hits = int(np.sum(maxima >= b))
    p = hits / replications
    return ExcursionEstimate(p, math.sqrt(p * (1 - p) / replications), hits, replications, float(b), cfg.horizon)


# -- state space collapse --------------------------------------------------------

@dataclass
class SscRunResult:
    r: int
    replication: int
    D_r: float
    sup_scaled_norm: float
    grid_points: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def collapse_distance(path: np.ndarray, geometry: SscGeometry, alpha: float) -> np.ndarray:
    """``max_i |q_i - Delta(W(q))_i|`` at each row of ``path``."""
    out = np.empty(path.shape[0])
    mu = None
    for j, q in enumerate(path):
        sol = solve_algd(workload_map(q, geometry), geometry, alpha, mu0=mu)
        mu = sol.multipliers
        out[j] = np.max(np.abs(q - sol.x))
    return out


def scaled_path(trace: np.ndarray, r: int, T_scaled: float, grid: int) -> np.ndarray:
    """Sample ``Q(r^2 t) / r`` on a uniform grid of ``[0, T_scaled]``, interpolating linearly."""
    t = np.linspace(0.0, T_scaled, grid)
    slots = t * r * r
    tau = np.arange(trace.shape[0], dtype=float)
    return np.column_stack([np.interp(slots, tau, trace[:, i]) for i in range(trace.shape[1])]) / r


def ssc_experiment(network: NetworkInstance, critical_rates, direction, alpha: float,
                   r_values, T_scaled: float, seed: int, replications: int = 1,
                   grid: int = 1000) -> list[SscRunResult]:
    """Collapse distance ``D(r)`` of the diffusion-scaled path for each ``r``.

    Network ``r`` runs at ``lambda - Gamma/r`` from empty queues for
    ``ceil(r^2 T_scaled)`` slots.  Replication ``k`` at the ``j``-th value
    of ``r`` uses stream ``j * replications + k``.
    """
    if alpha < 1:
        raise InvalidParameterError("state space collapse experiment requires alpha >= 1")
    if not network.enumerable:
        raise SizeError("SSC geometry needs an explicit schedule set")
    S = network.schedules
    lam = np.asarray(critical_rates, dtype=float).ravel()
    gam = np.asarray(direction, dtype=float).ravel()
    if np.any(gam < 0):
        raise InvalidParameterError("direction Gamma must be nonnegative")
    geometry = dual_extreme_points(lam, S)
    for r in r_values:
        lam_r = lam - gam / r
        if np.any(lam_r < 0):
            raise PreconditionError(f"ssc_experiment: lambda - Gamma/r has negative entries at r={r}")
        rho_r = load(lam_r, S).rho
        if not rho_r < 1 - CRITICAL_TOL:
            raise PreconditionError(f"ssc_experiment: rho(lambda - Gamma/r) = {rho_r:.12g} is not < 1 at r={r}")

    results = []
    policy = PolicyConfig(alpha)
    for j, r in enumerate(r_values):
        net_r = network.with_rates(lam - gam / r)
        n_slots = int(math.ceil(r * r * T_scaled))
        for k in range(replications):
            cfg = TraceConfig(net_r, policy, max(n_slots, 1), seed=seed, stream_id=j * replications + k)
            path = scaled_path(run_trace(cfg), r, T_scaled, grid)
            dist = collapse_distance(path, geometry, alpha)
            results.append(SscRunResult(int(r), k, float(dist.max()), float(path.max()), grid))
    return results
