"""Lyapunov functions for MW-alpha: the smoothed power f, its antiderivative F,
the norm-like L, its square Phi, the polynomial L-tilde and the (alpha+1)-norm.

All functions accept scalars or arrays; vector functions reduce over the
last axis so a batch of states is an ``(n, M)`` array.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


def _check_alpha(alpha: float) -> None:
    if not alpha > 0:
        raise InvalidParameterError(f"alpha must be positive, got {alpha!r}")


def _as_nonneg(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise InvalidParameterError("argument must be nonnegative")
    return r


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def f_alpha(r, alpha: float):
    """``r**alpha``, with a cubic on ``[0, 1]`` when ``alpha < 1``.

    The cubic ``(alpha-1) r^3 + (1-alpha) r^2 + r`` matches value and slope
    of ``r**alpha`` at ``r = 1`` and has slope 1 at the origin.
    """
    _check_alpha(alpha)
    r = _as_nonneg(r)
    if alpha >= 1:
        return _out(np.power(r, alpha))
    cubic = ((alpha - 1.0) * r + (1.0 - alpha)) * r * r + r
    return _out(np.where(r >= 1.0, np.power(r, alpha), cubic))


def f_alpha_prime(r, alpha: float):
    _check_alpha(alpha)
    r = _as_nonneg(r)
    with np.errstate(divide="ignore"):
        power = alpha * np.power(r, alpha - 1.0)
    if alpha >= 1:
        return _out(power)
    cubic = 3.0 * (alpha - 1.0) * r * r + 2.0 * (1.0 - alpha) * r + 1.0
    return _out(np.where(r >= 1.0, power, cubic))


def F_alpha(r, alpha: float):
    """Closed-form ``int_0^r f_alpha(s) ds``."""
    _check_alpha(alpha)
    r = _as_nonneg(r)
    a1 = alpha + 1.0
    if alpha >= 1:
        return _out(np.power(r, a1) / a1)
    quartic = (((alpha - 1.0) / 4.0 * r + (1.0 - alpha) / 3.0) * r + 0.5) * r * r
    at_one = (1.0 - alpha) / 12.0 + 0.5
    tail = at_one + (np.power(r, a1) - 1.0) / a1
    return _out(np.where(r >= 1.0, tail, quartic))


def norm_alpha1(Q, alpha: float):
    """The (alpha+1)-norm."""
    _check_alpha(alpha)
    q = np.abs(np.asarray(Q, dtype=float))
    p = alpha + 1.0
    if p == 2.0:
        return _out(np.sqrt(np.sum(q * q, axis=-1)))
    return _out(np.power(np.sum(np.power(q, p), axis=-1), 1.0 / p))


def L_alpha(Q, alpha: float):
    """``[(alpha+1) sum_i F_alpha(Q_i)]**(1/(alpha+1))``; equals the norm for alpha >= 1."""
    _check_alpha(alpha)
    if alpha >= 1:
        return norm_alpha1(_as_nonneg(Q), alpha)
    a1 = alpha + 1.0
    total = a1 * np.sum(F_alpha(Q, alpha), axis=-1)
    return _out(np.power(total, 1.0 / a1))


def phi(Q, alpha: float):
    return _out(np.square(L_alpha(Q, alpha)))


def L_tilde(Q, alpha: float):
    _check_alpha(alpha)
    q = _as_nonneg(Q)
    a1 = alpha + 1.0
    return _out(np.sum(np.power(q, a1), axis=-1) / a1)


@dataclass(frozen=True)
class LyapunovSpec:
    """All Lyapunov evaluators for one value of alpha."""

    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)

    @property
    def smoothed(self) -> bool:
        return self.alpha < 1

    def f(self, r):
        return f_alpha(r, self.alpha)

    def F(self, r):
        return F_alpha(r, self.alpha)

    def L(self, Q):
        return L_alpha(Q, self.alpha)

    def phi(self, Q):
        return phi(Q, self.alpha)

    def L_tilde(self, Q):
        return L_tilde(Q, self.alpha)

    def norm(self, Q):
        return norm_alpha1(Q, self.alpha)

    def function(self, name: str):
        """Look up an evaluator by name: ``L``, ``phi``, ``L_tilde`` or ``norm``."""
        table = {"L": self.L, "phi": self.phi, "L_tilde": self.L_tilde, "norm": self.norm}
        try:
            return table[name]
        except KeyError:
            raise InvalidParameterError(f"unknown Lyapunov function {name!r}") from None
