"""MW-alpha schedule selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidParameterError
from .model import ScheduleSet


@dataclass(frozen=True)
class PolicyConfig:
    alpha: float
    tie_break: str = "lowest-index"

    def __post_init__(self):
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise InvalidParameterError(f"alpha must be a positive real, got {self.alpha!r}")
        if self.tie_break != "lowest-index":
            raise InvalidParameterError(f"unsupported tie-break rule {self.tie_break!r}")


def powered(Q, alpha: float) -> np.ndarray:
    """``Q**alpha`` elementwise with ``0**alpha = 0``."""
    q = np.asarray(Q, dtype=float)
    return np.where(q > 0, np.power(np.maximum(q, 0.0), alpha), 0.0)


def schedule_weights(Q, alpha: float, S: ScheduleSet) -> np.ndarray:
    """Weights of every schedule in ``S``.

    Summation runs in coordinate order (``cumsum`` is sequential) so the
    result matches the compiled simulation kernels bit for bit, which keeps
    tie-breaking identical between the two code paths.
    """
    qa = powered(Q, alpha)
    if qa.shape[-1] != S.M:
        raise InvalidParameterError(f"queue vector has length {qa.shape[-1]}, expected {S.M}")
    return np.cumsum(S.schedules * qa, axis=-1)[..., -1]


def schedule_weight(sigma, Q, alpha: float) -> float:
    sigma = np.asarray(sigma)
    qa = powered(Q, alpha)
    if sigma.shape != qa.shape:
        raise InvalidParameterError(f"dimension mismatch: sigma{sigma.shape}, Q{qa.shape}")
    return float(np.cumsum(sigma * qa)[-1]) if qa.size else 0.0


def max_weight_index(Q, cfg: PolicyConfig, S: ScheduleSet) -> int:
    # np.argmax returns the first maximizer, i.e. the lowest index in S.
    return int(np.argmax(schedule_weights(Q, cfg.alpha, S)))


def max_weight_schedule(Q, cfg: PolicyConfig, S: ScheduleSet) -> np.ndarray:
    return S.schedules[max_weight_index(Q, cfg, S)]


def w_alpha(Q, alpha: float, S: ScheduleSet) -> float:
    """Maximum alpha-weight ``max_sigma sigma . Q**alpha``."""
    return float(schedule_weights(Q, alpha, S).max())


def w_alpha_batch(Qs, alpha: float, S: ScheduleSet) -> np.ndarray:
    """``w_alpha`` for each row of a ``(n, M)`` array of states."""
    return (powered(Qs, alpha) @ S.schedules.T.astype(float)).max(axis=-1)


def iq_max_weight_matching(Q, alpha: float) -> np.ndarray:
    """Max-weight perfect matching on ``Q_ij**alpha`` via the assignment problem.

    ``Q`` is an ``m x m`` matrix (or its row-major flattening).  Returns the
    matching as a flattened 0/1 schedule.
    """
    q = np.asarray(Q, dtype=float)
    if q.ndim == 1:
        m = int(round(np.sqrt(q.size)))
        if m * m != q.size:
            raise InvalidParameterError("flattened IQ state length must be a perfect square")
        q = q.reshape(m, m)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
        raise InvalidParameterError(f"IQ state must be a square matrix, got shape {q.shape}")
    weights = powered(q, alpha)
    rows, cols = linear_sum_assignment(weights, maximize=True)
    sigma = np.zeros_like(weights, dtype=np.int8)
    sigma[rows, cols] = 1
    return sigma.ravel()
