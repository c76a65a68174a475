import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from maxweight_lab.errors import InvalidParameterError
from maxweight_lab.model import (NetworkInstance, ScheduleSet, SeededRng, build_iq_schedule_set,
                                 load_schedule_set, sample_arrival_block, sample_arrivals,
                                 save_schedule_set, schedule_set_from_dict, step,
                                 validate_schedule_set)


def test_iq_schedule_set_examples():
    assert build_iq_schedule_set(1).schedules.tolist() == [[1]]
    assert build_iq_schedule_set(2).schedules.tolist() == [[1, 0, 0, 1], [0, 1, 1, 0]]
    S3 = build_iq_schedule_set(3)
    assert len(S3) == 6
    for s in S3.schedules:
        mat = s.reshape(3, 3)
        assert (mat.sum(0) == 1).all() and (mat.sum(1) == 1).all()


def test_iq_schedule_set_cap():
    assert len(build_iq_schedule_set(6)) == 720
    with pytest.raises(InvalidParameterError):
        build_iq_schedule_set(7)
    with pytest.raises(InvalidParameterError):
        build_iq_schedule_set(0)


def test_validation():
    assert validate_schedule_set(ScheduleSet([[1, 1]], 2)).ok
    rep = validate_schedule_set(ScheduleSet([[1, 0]], 2))
    assert not rep.ok and tuple(rep.uncovered) == (2,)
    assert validate_schedule_set(build_iq_schedule_set(2)).ok


def test_schedule_set_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        ScheduleSet([[1, 2]], 2)
    with pytest.raises(InvalidParameterError):
        ScheduleSet([[1, 0], [1, 0]], 2)
    with pytest.raises(InvalidParameterError):
        ScheduleSet([[1, 0, 1]], 2)
    with pytest.raises(InvalidParameterError):
        NetworkInstance(ScheduleSet([[1, 0]], 2), [0.1, 0.1])


def test_step_examples():
    assert step([0, 3], [1, 1], [1, 0]).tolist() == [1, 2]
    assert step([5, 0], [0, 0], [0, 0]).tolist() == [5, 0]
    assert step([1, 1], [1, 0], [1, 1]).tolist() == [1, 2]
    with pytest.raises(InvalidParameterError):
        step([1, 1], [1, 0, 0], [0, 0])


@given(st.lists(st.integers(0, 50), min_size=1, max_size=6).flatmap(
    lambda q: st.tuples(st.just(q), st.lists(st.integers(0, 1), min_size=len(q), max_size=len(q)),
                        st.lists(st.integers(0, 1), min_size=len(q), max_size=len(q)))))
def test_step_nonnegative_and_bounded_increment(args):
    q, sigma, a = args
    nxt = step(q, sigma, a)
    assert (nxt >= 0).all()
    assert np.abs(nxt - np.asarray(q)).max() <= 1


def test_arrival_examples():
    rng = SeededRng(3)
    for _ in range(50):
        assert sample_arrivals([0, 0], rng).tolist() == [0, 0]
        assert sample_arrivals([1, 1], rng).tolist() == [1, 1]
    block = sample_arrival_block([0.5, 0.5], SeededRng(11), 10**6)
    assert np.all(np.abs(block.mean(axis=0) - 0.5) <= 0.003)


def test_rng_streams_reproducible_and_distinct():
    a = sample_arrival_block([0.5] * 4, SeededRng(7, 2), 1000)
    b = sample_arrival_block([0.5] * 4, SeededRng(7, 2), 1000)
    c = sample_arrival_block([0.5] * 4, SeededRng(7, 3), 1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    # independent streams: empirical correlation near zero
    corr = np.corrcoef(a[:, 0].astype(float), c[:, 0].astype(float))[0, 1]
    assert abs(corr) < 0.15


def test_block_and_per_slot_draws_agree():
    rng1, rng2 = SeededRng(5), SeededRng(5)
    block = sample_arrival_block([0.3, 0.7, 0.5], rng1, 200)
    slots = np.array([sample_arrivals([0.3, 0.7, 0.5], rng2) for _ in range(200)])
    assert np.array_equal(block, slots)


def test_schedule_set_file_roundtrip(tmp_path):
    S = build_iq_schedule_set(3)
    path = tmp_path / "s.json"
    save_schedule_set(S, path)
    T = load_schedule_set(path)
    assert np.array_equal(S.schedules, T.schedules)
    doc = json.loads(path.read_text())
    assert doc["M"] == 9 and len(doc["schedules"]) == 6


def test_schedule_set_file_validation():
    with pytest.raises(InvalidParameterError):
        schedule_set_from_dict({"M": 2})
    with pytest.raises(InvalidParameterError):
        schedule_set_from_dict({"M": 2, "schedules": [[1, 0]]})
    with pytest.raises(InvalidParameterError):
        schedule_set_from_dict({"M": 2, "schedules": [[1, 0.5], [0, 1]]})


def test_network_instance_rates():
    net = NetworkInstance.iq_uniform(2, 0.8)
    assert np.allclose(net.rates, 0.4) and net.M == 4 and net.enumerable
    assert NetworkInstance.iq(8, np.full(64, 0.1)).schedules is None
    with pytest.raises(InvalidParameterError):
        NetworkInstance.iq(2, [0.5, 1.5, 0, 0])
