"""Capacity region and heavy-traffic geometry.

``load`` solves the covering LP for rho(lambda).  For a critical rate
vector, ``dual_extreme_points`` enumerates the vertices of the optimal face
of the dual LP, and ``lifting_map``/``workload_map`` implement the maps
between queue space and workload space used to describe state space
collapse.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import InvalidParameterError, NumericalError, PreconditionError, SizeError
from .lyapunov import L_tilde
from .model import ScheduleSet, check_rates

LP_TOL = 1e-9
CRITICAL_TOL = 1e-9
VERTEX_CAP_M = 6
VERTEX_CAP_S = 24


@dataclass(frozen=True)
class LoadResult:
    rho: float
    decomposition: dict[int, float]  # schedule index in S -> weight

    def covering(self, S: ScheduleSet) -> np.ndarray:
        out = np.zeros(S.M)
        for k, a in self.decomposition.items():
            out += a * S.schedules[k]
        return out


def load(rates, S: ScheduleSet) -> LoadResult:
    """``rho(lambda) = min sum(a) s.t. sum_sigma a_sigma sigma >= lambda, a >= 0``."""
    lam = check_rates(rates, S.M)
    if not np.any(lam > 0):
        return LoadResult(0.0, {})
    n = len(S)
    # solve on max-normalized rates so the solver's absolute tolerances stay relative
    scale = float(lam.max())
    res = linprog(
        np.ones(n),
        A_ub=-S.schedules.T.astype(float),
        b_ub=-lam / scale,
        bounds=[(0, None)] * n,
        method="highs",
    )
    if res.status != 0:
        raise NumericalError(f"load LP failed: {res.message}")
    weights = np.where(res.x > LP_TOL * 1e-3, res.x, 0.0) * scale
    decomposition = {int(k): float(weights[k]) for k in np.flatnonzero(weights)}
    return LoadResult(float(weights.sum()), decomposition)


def load_iq(rates) -> float:
    """Largest row or column sum of an ``m x m`` rate matrix."""
    lam = np.asarray(rates, dtype=float)
    if lam.ndim == 1:
        m = int(round(math.sqrt(lam.size)))
        lam = lam.reshape(m, m)
    if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
        raise InvalidParameterError("IQ rates must form a square matrix")
    check_rates(lam)
    if lam.size == 0:
        return 0.0
    return float(max(lam.sum(axis=0).max(), lam.sum(axis=1).max()))


# -- dual optimal face ---------------------------------------------------------

@dataclass(frozen=True)
class SscGeometry:
    """Extreme points ``S*(lambda)`` of the optimal face of DUAL(lambda)."""

    extreme_points: np.ndarray  # (K, M)
    critical_lambda: np.ndarray
    schedules: ScheduleSet = field(repr=False)

    @property
    def K(self) -> int:
        return self.extreme_points.shape[0]

    @property
    def M(self) -> int:
        return self.extreme_points.shape[1]

    def to_dict(self) -> dict:
        return {
            "extreme_points": self.extreme_points.tolist(),
            "critical_lambda": self.critical_lambda.tolist(),
        }


def _face_constraints(S: ScheduleSet):
    M = S.M
    A = np.vstack([-np.eye(M), S.schedules.astype(float)])
    b = np.concatenate([np.zeros(M), np.ones(len(S))])
    return A, b


def dual_extreme_points(rates, S: ScheduleSet) -> SscGeometry:
    """Vertices of ``{xi >= 0 : xi.sigma <= 1 for all sigma, xi.lambda = 1}``.

    Brute force over all ``M-1`` subsets of the inequality constraints; each
    subset together with the equality is solved as a square system and kept
    if nonsingular and feasible.
    """
    lam = check_rates(rates, S.M)
    M = S.M
    if M > VERTEX_CAP_M or len(S) > VERTEX_CAP_S:
        raise SizeError(
            f"vertex enumeration capped at M<={VERTEX_CAP_M}, |S|<={VERTEX_CAP_S}; "
            f"got M={M}, |S|={len(S)}"
        )
    rho = load(lam, S).rho
    if abs(rho - 1.0) > CRITICAL_TOL:
        raise PreconditionError(f"dual_extreme_points needs a critical rate vector; rho={rho!r}")

    A, b = _face_constraints(S)
    combos = list(itertools.combinations(range(A.shape[0]), M - 1))
    subsets = np.array(combos, dtype=int).reshape(len(combos), M - 1)
    n = subsets.shape[0]
    systems = np.empty((n, M, M))
    rhs = np.empty((n, M))
    systems[:, : M - 1, :] = A[subsets]
    rhs[:, : M - 1] = b[subsets]
    systems[:, M - 1, :] = lam
    rhs[:, M - 1] = 1.0
    keep = np.abs(np.linalg.det(systems)) > 1e-10
    if not keep.any():
        raise NumericalError("no nonsingular active set found")
    sol = np.linalg.solve(systems[keep], rhs[keep][..., None])[..., 0]
    feasible = np.all(sol @ A.T <= b + LP_TOL, axis=1)
    sol = sol[feasible]
    sol[np.abs(sol) < LP_TOL] = 0.0

    points: list[np.ndarray] = []
    for x in sol:
        if not any(np.max(np.abs(x - p)) <= 1e-8 for p in points):
            points.append(x)
    pts = np.array(points)
    order = np.lexsort(np.round(pts, 9).T[::-1])[::-1]
    pts = pts[order]
    pts.setflags(write=False)
    return SscGeometry(pts, lam.copy(), S)


def active_constraint_rank(xi, geometry: SscGeometry, tol: float = 1e-9) -> int:
    """Rank of the constraints of the optimal face that are tight at ``xi``."""
    A, b = _face_constraints(geometry.schedules)
    tight = np.abs(A @ np.asarray(xi, float) - b) <= tol
    rows = np.vstack([A[tight], geometry.critical_lambda[None, :]])
    return int(np.linalg.matrix_rank(rows, tol=1e-9))


def workload_map(q, geometry: SscGeometry) -> np.ndarray:
    """``(xi . q)`` for each extreme point, in stored order."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != geometry.M:
        raise InvalidParameterError(f"state has length {q.shape[-1]}, expected {geometry.M}")
    return q @ geometry.extreme_points.T


# -- lifting map ---------------------------------------------------------------

@dataclass
class AlgdSolution:
    x: np.ndarray
    multipliers: np.ndarray
    residual: float
    sweeps: int


def _kkt_residual(slack: np.ndarray, mu: np.ndarray) -> float:
    # slack = xi.x - w; infeasibility and complementarity in one NCP residual
    return float(np.max(np.maximum(-slack, np.abs(np.minimum(mu, slack))))) if slack.size else 0.0


def solve_algd(w, geometry: SscGeometry, alpha: float, mu0=None,
               tol: float = 1e-8, max_sweeps: int = 100_000) -> AlgdSolution:
    """Minimize ``L_tilde(x)`` subject to ``xi.x >= w_xi`` by dual coordinate ascent.

    For multipliers ``mu >= 0`` the inner minimizer is explicit,
    ``x_i = (sum_xi mu_xi xi_i)**(1/alpha)``; each sweep maximizes the dual
    exactly in one multiplier at a time.
    """
    if not alpha > 0:
        raise InvalidParameterError("alpha must be positive")
    w = np.asarray(w, dtype=float)
    Xi = geometry.extreme_points
    if w.shape != (Xi.shape[0],):
        raise InvalidParameterError(f"workload has shape {w.shape}, expected ({Xi.shape[0]},)")
    if np.any(w < 0):
        raise InvalidParameterError("workload must be nonnegative")
    # absolute tolerance until rounding error in xi.x dominates (w beyond ~1e6)
    scale = max(1.0, 1e-6 * float(w.max(initial=0.0)))
    inv = 1.0 / alpha
    mu = np.zeros(Xi.shape[0]) if mu0 is None else np.array(mu0, dtype=float)
    y = mu @ Xi
    x = np.power(y, inv)

    for sweep in range(1, max_sweeps + 1):
        for k in range(Xi.shape[0]):
            xi = Xi[k]
            base = np.maximum(y - mu[k] * xi, 0.0)
            t = _coordinate_root(base, xi, w[k], inv, mu[k])
            if t != mu[k]:
                mu[k] = t
                y = base + t * xi
        x = np.power(y, inv)
        slack = Xi @ x - w
        res = _kkt_residual(slack, mu)
        if res <= tol * scale:
            return AlgdSolution(x, mu, res, sweep)
    raise NumericalError(f"ALGD dual ascent did not converge in {max_sweeps} sweeps (residual {res:.3g})")


def _coordinate_root(base, xi, target, inv, start) -> float:
    """Smallest ``t >= 0`` with ``xi . (base + t xi)**inv >= target``."""
    support = xi > 0
    b, c = base[support], xi[support]

    def h(t):
        return float(np.dot(c, np.power(b + t * c, inv)))

    if h(0.0) >= target:
        return 0.0
    if inv == 1.0:
        return (target - float(np.dot(c, b))) / float(np.dot(c, c))
    lo, hi = 0.0, max(start, 1e-12)
    while h(hi) < target:
        lo, hi = hi, 2.0 * hi
    t = hi
    for _ in range(200):
        val = h(t) - target
        if val > 0:
            hi = t
        else:
            lo = t
        deriv = inv * float(np.dot(c * c, np.power(b + t * c, inv - 1.0)))
        nxt = t - val / deriv if deriv > 0 else 0.5 * (lo + hi)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - t) <= 1e-15 * max(1.0, t):
            return nxt
        t = nxt
    return t


def lifting_map(w, geometry: SscGeometry, alpha: float, **kw) -> np.ndarray:
    """The unique minimizer of ALGD(w)."""
    return solve_algd(w, geometry, alpha, **kw).x


def lift_state(q, geometry: SscGeometry, alpha: float, **kw) -> np.ndarray:
    """``Delta(W(q))``: project a queue state onto the invariant manifold."""
    return lifting_map(workload_map(q, geometry), geometry, alpha, **kw)


def is_feasible_for(x, w, geometry: SscGeometry, tol: float = 1e-8) -> bool:
    return bool(np.all(workload_map(x, geometry) >= np.asarray(w) - tol) and np.all(np.asarray(x) >= -tol))


def algd_objective(x, alpha: float) -> float:
    return L_tilde(np.maximum(np.asarray(x, float), 0.0), alpha)
