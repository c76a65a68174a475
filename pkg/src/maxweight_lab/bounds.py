"""Closed-form performance bounds for MW-alpha and the IQ-switch LDP exponent."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .lyapunov import norm_alpha1
from .policy import w_alpha
from .model import ScheduleSet

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TailBoundConstants:
    nu_bar: float
    gamma: float
    nu_max: float
    B: float

    @classmethod
    def for_network(cls, rates, rho: float, alpha: float, B: float) -> "TailBoundConstants":
        M = len(np.ravel(rates))
        return cls(nu_bar(rates, alpha), gamma(rho, M, alpha), nu_max(M, alpha), B)


@dataclass
class BoundReport:
    bound_name: str
    theoretical: float
    empirical: float | None = None
    standard_error: float | None = None
    parameters: dict = field(default_factory=dict)
    raw_theoretical: float | None = None
    tolerance_se: float = 0.0

    @property
    def satisfied(self) -> bool | None:
        if self.empirical is None:
            return None
        slack = self.tolerance_se * (self.standard_error or 0.0)
        return bool(self.empirical <= self.theoretical + slack)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["satisfied"] = self.satisfied
        return d


def _clamp(p: float) -> float:
    return min(1.0, max(0.0, p))


def arrival_count_pmf(rates) -> np.ndarray:
    """Distribution of the number of arrivals in one slot (Poisson-binomial)."""
    pmf = np.array([1.0])
    for p in np.ravel(np.asarray(rates, dtype=float)):
        nxt = np.zeros(pmf.size + 1)
        nxt[:-1] += pmf * (1.0 - p)
        nxt[1:] += pmf * p
        pmf = nxt
    return pmf


def nu_bar(rates, alpha: float) -> float:
    """``E ||a||_{alpha+1}`` for Bernoulli arrivals.

    With 0/1 arrivals the norm is ``N**(1/(alpha+1))`` where ``N`` counts
    the arrivals, so the expectation is exact for any number of queues.
    """
    if not alpha > 0:
        raise InvalidParameterError("alpha must be positive")
    pmf = arrival_count_pmf(rates)
    n = np.arange(pmf.size, dtype=float)
    return float(np.dot(pmf, np.power(n, 1.0 / (alpha + 1.0))))


def gamma(rho: float, M: int, alpha: float) -> float:
    """Drift margin ``(1 - rho) / (2 M**(alpha/(alpha+1)))``."""
    if not rho < 1:
        raise InvalidParameterError(f"gamma needs rho < 1, got {rho!r}")
    if M < 1 or not alpha > 0:
        raise InvalidParameterError("M must be positive and alpha > 0")
    return (1.0 - rho) / (2.0 * M ** (alpha / (alpha + 1.0)))


def drift_target(rho: float, M: int, alpha: float) -> float:
    """Right-hand side of the norm drift inequality, ``-(1-rho)/2 M**(1/(alpha+1)-1)``."""
    return -(1.0 - rho) / 2.0 * M ** (1.0 / (alpha + 1.0) - 1.0)


def nu_max(M: int, alpha: float) -> float:
    """One-step Lipschitz constant of the tail Lyapunov function."""
    unit = M ** (1.0 / (alpha + 1.0))
    return unit if alpha >= 1 else 5.0 * unit


def stationary_tail_bound(ell: int, c: TailBoundConstants, alpha: float, M: int,
                        raw: bool = False) -> tuple[float, float]:
    """``(threshold, probability)`` for ``P(||Q||_{alpha+1} > threshold)``.

    For ``alpha < 1`` the constant ``c.B`` plays the role of ``B'``.
    """
    if ell < 0:
        raise InvalidParameterError("ell must be nonnegative")
    unit = M ** (1.0 / (alpha + 1.0))
    if alpha >= 1:
        threshold = c.B + 2.0 * unit * ell
        ratio = c.nu_bar / (c.nu_bar + c.gamma)
    else:
        threshold = c.B + 10.0 * unit * ell
        ratio = 5.0 * c.nu_bar / (5.0 * c.nu_bar + c.gamma)
    prob = ratio ** (ell + 1)
    return threshold, (prob if raw else _clamp(prob))


def k_bar(alpha: float, M: int) -> float:
    """``(a-1)^(a-1) 2^(a(a-1)) M^a + a M`` with ``0**0 = 1`` (so ``k_bar(1, M) = 2M``)."""
    if alpha < 1:
        raise InvalidParameterError("the L_tilde drift bound requires alpha >= 1")
    return (alpha - 1.0) ** (alpha - 1.0) * 2.0 ** (alpha * (alpha - 1.0)) * M ** alpha + alpha * M


def ltilde_drift_bound(alpha: float, M: int, rho: float) -> float:
    """Uniform bound ``k_bar / (1-rho)**(alpha-1)`` on the one-step drift of ``L_tilde``."""
    if not rho < 1:
        raise InvalidParameterError("rho must be < 1")
    return k_bar(alpha, M) / (1.0 - rho) ** (alpha - 1.0)


def excursion_constant(alpha: float, M: int) -> float:
    """``K(alpha, M) = (alpha+1) * k_bar(alpha, M)``."""
    return (alpha + 1.0) * k_bar(alpha, M)


def excursion_bound(T: int, b: float, alpha: float, M: int, rho: float,
                             raw: bool = False) -> float:
    """``K T / ((1-rho)**(alpha-1) b**(alpha+1))``: bound on ``P(Q*_max(T) >= b)`` from empty."""
    if alpha < 1:
        raise InvalidParameterError("the excursion bound requires alpha >= 1")
    if not b > 0:
        raise InvalidParameterError("b must be positive")
    if not rho < 1:
        raise InvalidParameterError("rho must be < 1")
    if T < 0:
        raise InvalidParameterError("T must be nonnegative")
    value = excursion_constant(alpha, M) * T / ((1.0 - rho) ** (alpha - 1.0) * b ** (alpha + 1.0))
    return value if raw else _clamp(value)


def excursion_level_for(target: float, T: int, alpha: float, M: int, rho: float) -> float:
    """Smallest ``b`` for which the excursion bound equals ``target``."""
    if not 0 < target:
        raise InvalidParameterError("target must be positive")
    k = excursion_constant(alpha, M) * T / ((1.0 - rho) ** (alpha - 1.0) * target)
    return k ** (1.0 / (alpha + 1.0))


def maximal_inequality_bound(drift_bound: float, T: int, a: float) -> float:
    """``P(max_{n<=T} X_n >= a) <= B T / a`` for ``X_0 = 0`` and drift ``<= B``."""
    if not a > 0:
        raise InvalidParameterError("a must be positive")
    return _clamp(drift_bound * T / a)


def iq_tail_bound(ell: int, m: int, rho: float, alpha: float, B: float,
                       raw: bool = False) -> tuple[float, float]:
    """IQ-switch tail bound ``(threshold, probability)``; ``B`` is ``B'`` when alpha < 1."""
    if not rho < 1:
        raise InvalidParameterError("rho must be < 1")
    unit = m ** (2.0 / (alpha + 1.0))
    if alpha >= 1:
        threshold = B + 2.0 * unit * ell
        ratio = 1.0 / (1.0 + (1.0 - rho) / (2.0 * m))
    else:
        threshold = B + 10.0 * unit * ell
        ratio = 1.0 / (1.0 + (1.0 - rho) / (10.0 * m))
    prob = ratio ** (ell + 1)
    return threshold, (prob if raw else _clamp(prob))


def iq_heuristic_exponent(m: int, rho: float, alpha: float) -> float:
    """Display-only approximate upper bound on the IQ tail exponent."""
    return -(1.0 - rho) / 100.0 * m ** (-1.0 - 2.0 / (alpha + 1.0))


# -- large deviations ------------------------------------------------------------

def _xlogy_ratio(x: float, y: float) -> float:
    """``x log(x/y)`` with ``0 log(0/y) = 0`` and ``+inf`` when ``y = 0 < x``."""
    if x == 0.0:
        return 0.0
    if y == 0.0:
        return math.inf
    return x * math.log(x / y)


def relative_entropy(lam_tilde, lam) -> float:
    """Bernoulli relative entropy ``H(lam_tilde || lam)`` summed over entries (nats)."""
    a = np.ravel(np.asarray(lam_tilde, dtype=float))
    b = np.ravel(np.asarray(lam, dtype=float))
    if a.shape != b.shape:
        raise InvalidParameterError("rate arrays must have the same shape")
    if np.any((a < 0) | (a > 1) | (b < 0) | (b > 1)):
        raise InvalidParameterError("rates must lie in [0, 1]")
    total = 0.0
    for p, q in zip(a.tolist(), b.tolist()):
        total += _xlogy_ratio(p, q) + _xlogy_ratio(1.0 - p, 1.0 - q)
    return total


def r_symmetric(eps: float, m: int, alpha: float) -> float:
    """Overload cost ``eps * m**((1-alpha)/(1+alpha))`` of the uniform direction."""
    if not eps > 0:
        raise InvalidParameterError("eps must be positive")
    return eps * m ** ((1.0 - alpha) / (1.0 + alpha))


def ldp_objective(eps: float, m: int, rho: float, alpha: float) -> float:
    """Entropy-per-cost ratio for uniform overload rates ``(1+eps)/m``."""
    if not eps > 0:
        raise InvalidParameterError("eps must be positive")
    if not eps < m - 1:
        raise InvalidParameterError(f"need (1+eps)/m < 1, i.e. eps < {m - 1}; got {eps!r}")
    if not 0 < rho < 1:
        raise InvalidParameterError("rho must lie in (0, 1)")
    p = (1.0 + eps) / m
    q = rho / m
    per_queue = p * math.log((1.0 + eps) / rho) + (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return m * m / r_symmetric(eps, m, alpha) * per_queue


def golden_section_min(fun, lo: float, hi: float, tol: float = 1e-8, max_iter: int = 500):
    """Golden-section search for a unimodal function; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


@dataclass(frozen=True)
class LdpThetaResult:
    theta_numeric: float
    theta_approx: float
    eps_star: float


def ldp_theta_upper(m: int, rho: float, alpha: float) -> LdpThetaResult:
    """Numerically minimize the symmetric-overload objective over ``eps``."""
    if not 0 < rho < 1:
        raise InvalidParameterError("rho must lie in (0, 1)")
    if m < 2:
        raise InvalidParameterError("the symmetric overload direction needs m >= 2")
    eps_star, theta = golden_section_min(
        lambda e: ldp_objective(e, m, rho, alpha), 1e-6, m - 1 - 1e-6, tol=1e-8
    )
    approx = 2.0 * m ** (2.0 * alpha / (1.0 + alpha)) * (1.0 - rho)
    return LdpThetaResult(theta, approx, eps_star)


def iq_ratio_bound_check(Q, alpha: float, S: ScheduleSet) -> bool:
    """``sum Q_ij**(alpha+1) <= m * w_alpha(Q)**((alpha+1)/alpha)``."""
    q = np.asarray(Q, dtype=float)
    m = q.shape[0] if q.ndim == 2 else int(round(math.sqrt(q.size)))
    lhs = norm_alpha1(q.ravel(), alpha) ** (alpha + 1.0)
    rhs = m * w_alpha(q.ravel(), alpha, S) ** ((alpha + 1.0) / alpha)
    return bool(lhs <= rhs * (1.0 + 1e-12))
