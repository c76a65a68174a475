"""Switched-network data model: schedule sets, arrivals and queue dynamics.

Queue vectors, schedules and arrival samples are plain numpy arrays
(``int64`` for queues, ``int8`` for 0/1 vectors).  Only the objects that
carry invariants beyond "an array of the right length" get a class.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError

IQ_EXHAUSTIVE_CAP = 6


@dataclass(frozen=True)
class ScheduleSet:
    """An ordered, duplicate-free set of feasible 0/1 service vectors.

    Row order is significant: it is the tie-breaking order of the MW-alpha
    policy.
    """

    schedules: np.ndarray
    M: int

    def __post_init__(self):
        arr = np.array(self.schedules, dtype=np.int8, copy=True)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise InvalidParameterError("schedule set must be a nonempty 2-D array")
        if arr.shape[1] != self.M:
            raise InvalidParameterError(
                f"schedules have length {arr.shape[1]}, expected M={self.M}"
            )
        if not np.isin(arr, (0, 1)).all():
            raise InvalidParameterError("schedule entries must be 0 or 1")
        if len({row.tobytes() for row in arr}) != arr.shape[0]:
            raise InvalidParameterError("schedule set contains duplicates")
        arr.setflags(write=False)
        object.__setattr__(self, "schedules", arr)

    def __len__(self) -> int:
        return self.schedules.shape[0]

    def __iter__(self):
        return iter(self.schedules)

    def __getitem__(self, k):
        return self.schedules[k]


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    uncovered: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def validate_schedule_set(S: ScheduleSet) -> ValidationReport:
    """Check that every queue is served by at least one schedule.

    Uncovered coordinates are reported 1-based, matching the usual queue
    numbering.
    """
    covered = S.schedules.max(axis=0) > 0
    uncovered = tuple(int(i) + 1 for i in np.flatnonzero(~covered))
    return ValidationReport(ok=not uncovered, uncovered=uncovered)


def build_iq_schedule_set(m: int) -> ScheduleSet:
    """All ``m!`` permutation matrices of an m-port switch, flattened row-major.

    Queue ``(i, j)`` sits at coordinate ``i*m + j``.  Permutations are listed
    in lexicographic order, so the identity matching comes first.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidParameterError(f"switch size must be a positive integer, got {m!r}")
    if m > IQ_EXHAUSTIVE_CAP:
        raise InvalidParameterError(
            f"exhaustive IQ construction is capped at m={IQ_EXHAUSTIVE_CAP}; got m={m}"
        )
    rows = []
    for perm in itertools.permutations(range(m)):
        sigma = np.zeros((m, m), dtype=np.int8)
        sigma[np.arange(m), perm] = 1
        rows.append(sigma.ravel())
    return ScheduleSet(np.array(rows), M=m * m)


def check_rates(rates, M: int | None = None) -> np.ndarray:
    lam = np.asarray(rates, dtype=float).ravel()
    if M is not None and lam.shape[0] != M:
        raise InvalidParameterError(f"rate vector has length {lam.shape[0]}, expected {M}")
    if not np.all((lam >= 0.0) & (lam <= 1.0)):
        raise InvalidParameterError("arrival rates must lie in [0, 1]")
    return lam


@dataclass(frozen=True)
class NetworkInstance:
    """Queue count, schedule set and Bernoulli arrival rates.

    ``iq_size`` is set for input-queued switches.  Above the exhaustive cap
    ``schedules`` is ``None`` and the policy falls back to the assignment
    solver instead of enumerating ``S``.
    """

    schedules: ScheduleSet | None
    rates: np.ndarray
    iq_size: int | None = None

    def __post_init__(self):
        if self.schedules is None and self.iq_size is None:
            raise InvalidParameterError("a network needs a schedule set or an IQ size")
        lam = check_rates(self.rates, self.M)
        lam.setflags(write=False)
        object.__setattr__(self, "rates", lam)
        if self.schedules is not None:
            report = validate_schedule_set(self.schedules)
            if not report:
                raise InvalidParameterError(
                    f"Assumption 1 fails: coordinates {list(report.uncovered)} are never served"
                )

    @property
    def M(self) -> int:
        if self.schedules is not None:
            return self.schedules.M
        return self.iq_size * self.iq_size

    @property
    def enumerable(self) -> bool:
        return self.schedules is not None

    def with_rates(self, rates) -> "NetworkInstance":
        return NetworkInstance(self.schedules, np.asarray(rates, float).ravel(), self.iq_size)

    @classmethod
    def iq(cls, m: int, rates) -> "NetworkInstance":
        lam = np.asarray(rates, dtype=float).ravel()
        S = build_iq_schedule_set(m) if m <= IQ_EXHAUSTIVE_CAP else None
        return cls(S, lam, iq_size=m)

    @classmethod
    def iq_uniform(cls, m: int, load: float) -> "NetworkInstance":
        return cls.iq(m, np.full(m * m, load / m))


# -- random streams ----------------------------------------------------------

@dataclass
class SeededRng:
    """A reproducible arrival stream identified by ``(seed, stream_id)``.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys,
    so distinct stream ids give independent generators and no global state
    is touched.
    """

    seed: int
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not (0 <= self.seed < 2**64 and 0 <= self.stream_id < 2**64):
            raise InvalidParameterError("seed and stream id must be 64-bit unsigned integers")
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def uniforms(self, n_slots: int, M: int) -> np.ndarray:
        return self.generator.random((n_slots, M))


def sample_arrivals(rates, rng: SeededRng) -> np.ndarray:
    """One slot of independent Bernoulli arrivals; consumes ``M`` uniforms."""
    lam = np.asarray(rates, dtype=float)
    return (rng.generator.random(lam.shape[0]) < lam).astype(np.int8)


def sample_arrival_block(rates, rng: SeededRng, n_slots: int) -> np.ndarray:
    """``n_slots`` consecutive slots; identical to repeated :func:`sample_arrivals`."""
    lam = np.asarray(rates, dtype=float)
    return (rng.uniforms(n_slots, lam.shape[0]) < lam).astype(np.int8)


# -- dynamics ----------------------------------------------------------------

def step(Q, sigma, a) -> np.ndarray:
    """``Q_i <- max(Q_i - sigma_i, 0) + a_i`` for every queue."""
    Q = np.asarray(Q, dtype=np.int64)
    sigma = np.asarray(sigma, dtype=np.int64)
    a = np.asarray(a, dtype=np.int64)
    if not (Q.shape == sigma.shape == a.shape):
        raise InvalidParameterError(
            f"dimension mismatch: Q{Q.shape}, sigma{sigma.shape}, a{a.shape}"
        )
    if np.any(Q >= np.iinfo(np.int64).max):
        raise OverflowError("queue length overflow")
    return np.maximum(Q - sigma, 0) + a


# -- schedule-set files ------------------------------------------------------

def schedule_set_from_dict(doc: dict) -> ScheduleSet:
    try:
        M = doc["M"]
        rows = doc["schedules"]
    except (KeyError, TypeError) as exc:
        raise InvalidParameterError("schedule-set document needs fields 'M' and 'schedules'") from exc
    if not isinstance(M, int) or isinstance(M, bool) or M < 1:
        raise InvalidParameterError("'M' must be a positive integer")
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise InvalidParameterError("'schedules' must be an array of arrays")
    for r in rows:
        if len(r) != M or not all(isinstance(v, int) and not isinstance(v, bool) for v in r):
            raise InvalidParameterError(f"schedule {r!r} must be {M} integers")
    S = ScheduleSet(np.array(rows, dtype=np.int64).reshape(len(rows), M), M=M)
    report = validate_schedule_set(S)
    if not report:
        raise InvalidParameterError(f"Assumption 1 fails at coordinates {list(report.uncovered)}")
    return S


def load_schedule_set(path) -> ScheduleSet:
    with open(path) as fh:
        return schedule_set_from_dict(json.load(fh))


def schedule_set_to_dict(S: ScheduleSet) -> dict:
    return {"M": S.M, "schedules": S.schedules.astype(int).tolist()}


def save_schedule_set(S: ScheduleSet, path) -> None:
    Path(path).write_text(json.dumps(schedule_set_to_dict(S), indent=2) + "\n")
