import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from acbandit import linalg
from acbandit.errors import InvalidArgument, NumericFailure
from acbandit.linalg import (elliptical_norm, init_covariance, rank_one_update, refresh,
                             sample_from_inverse, solve)


def test_init_identity():
    s = init_covariance(2, 1.0)
    assert np.array_equal(s.sigma, np.eye(2))
    assert s.log_det == 0.0
    assert s.update_count == 0


def test_init_diagonal_values():
    s = init_covariance(3, 4.0)
    assert np.allclose(s.sigma_inv, 0.25 * np.eye(3))
    assert s.log_det == pytest.approx(4.158883083359672, abs=1e-12)
    assert init_covariance(5, 0.01).log_det == pytest.approx(-23.025850929940457, abs=1e-12)


@pytest.mark.parametrize("d, lam", [(0, 1.0), (-1, 1.0), (2, 0.0), (2, -1.0), (2, float("nan")), (1.5, 1.0)])
def test_init_rejects(d, lam):
    with pytest.raises(InvalidArgument):
        init_covariance(d, lam)


def test_update_diagonal():
    s = rank_one_update(init_covariance(2, 1.0), np.array([1.0, 0.0]))
    assert np.allclose(s.sigma_inv, np.diag([0.5, 1.0]))
    assert s.log_det == pytest.approx(math.log(2))
    assert s.last_gain == 1.0


def test_update_zero_vector():
    s = rank_one_update(init_covariance(1, 1.0), np.zeros(1))
    assert s.update_count == 1
    assert np.array_equal(s.sigma, np.eye(1)) and s.log_det == 0.0


def test_update_rejects():
    s = init_covariance(3, 1.0)
    with pytest.raises(InvalidArgument):
        rank_one_update(s, np.ones(2))
    with pytest.raises(InvalidArgument):
        rank_one_update(s, np.array([1.0, np.inf, 0.0]))
    with pytest.raises(InvalidArgument):
        elliptical_norm(s, np.ones(4))
    with pytest.raises(InvalidArgument):
        solve(s, np.ones(2))


def test_long_sequence_matches_brute_force():
    rng = np.random.default_rng(0)
    s = init_covariance(10, 0.5)
    for x in rng.standard_normal((200, 10)):
        rank_one_update(s, x)
    assert s.inverse_error() < 1e-8
    assert s.log_det_error() < 1e-6


def test_refresh_cadence(monkeypatch):
    calls = []
    real = linalg.refresh
    monkeypatch.setattr(linalg, "refresh", lambda st: calls.append(st.update_count) or real(st))
    s = init_covariance(2, 1.0)
    for _ in range(2 * linalg.REFRESH_EVERY + 3):
        rank_one_update(s, np.array([0.3, -0.1]))
    assert calls == [linalg.REFRESH_EVERY, 2 * linalg.REFRESH_EVERY]


def test_refresh_detects_non_pd():
    s = init_covariance(2, 1.0)
    s.sigma = np.diag([1.0, -1.0])
    with pytest.raises(NumericFailure):
        refresh(s)
    with pytest.raises(NumericFailure):
        sample_from_inverse(s, np.random.default_rng(0))


def test_elliptical_norm_examples():
    assert elliptical_norm(init_covariance(3, 4.0), np.eye(3)[0]) == pytest.approx(0.5)
    assert elliptical_norm(init_covariance(3, 4.0), np.zeros(3)) == 0.0
    s = rank_one_update(init_covariance(2, 1.0), np.eye(2)[0])
    assert elliptical_norm(s, np.eye(2)[0]) == pytest.approx(math.sqrt(0.5))


def test_solve_examples():
    s = init_covariance(2, 2.0)
    assert np.allclose(solve(s, np.array([4.0, 0.0])), [2.0, 0.0])
    assert np.array_equal(solve(s, np.zeros(2)), np.zeros(2))
    rng = np.random.default_rng(1)
    s = init_covariance(8, 1.0)
    for x in rng.standard_normal((30, 8)):
        rank_one_update(s, x)
    b = rng.standard_normal(8)
    w = solve(s, b)
    ref = np.linalg.solve(s.sigma, b)
    assert np.linalg.norm(w - ref) <= 1e-8 * np.linalg.norm(ref)
    assert np.linalg.norm(s.sigma @ w - b) <= 1e-8 * np.linalg.norm(b)


def test_sample_from_inverse_moments():
    rng = np.random.default_rng(2)
    w = sample_from_inverse(init_covariance(2, 1.0), rng, size=10_000)
    emp = w.T @ w / len(w)
    assert np.linalg.norm(emp - np.eye(2)) / np.linalg.norm(np.eye(2)) < 0.05
    w = sample_from_inverse(init_covariance(1, 100.0), rng, size=10_000)
    assert w.std() == pytest.approx(0.1, rel=0.05)


def test_sample_from_inverse_deterministic():
    s = rank_one_update(init_covariance(3, 1.0), np.array([1.0, 2.0, 0.5]))
    a = sample_from_inverse(s, np.random.default_rng(9))
    b = sample_from_inverse(s, np.random.default_rng(9))
    assert a.shape == (3,) and np.array_equal(a, b)


update_seqs = st.integers(1, 20).flatmap(lambda d: st.tuples(
    st.just(d),
    st.floats(0.05, 10.0),
    arrays(np.float64, st.tuples(st.integers(0, 60), st.just(d)),
           elements=st.floats(-10 / math.sqrt(d), 10 / math.sqrt(d), allow_nan=False))))


@given(update_seqs)
def test_inverse_and_logdet_consistency(case):
    d, lam, X = case
    s = init_covariance(d, lam)
    for x in X:
        rank_one_update(s, x)
    assert s.inverse_error() < 1e-8
    assert s.log_det_error() < 1e-6
    assert s.symmetry_error() <= 1e-12
    assert np.min(np.linalg.eigvalsh(s.sigma)) >= lam * (1 - 1e-9)
    assert s.update_count == len(X)


@given(update_seqs, st.data())
def test_norm_monotone_and_homogeneous(case, data):
    d, lam, X = case
    s = init_covariance(d, lam)
    for x in X[:-1]:
        rank_one_update(s, x)
    q = data.draw(arrays(np.float64, d, elements=st.floats(-5, 5)))
    c = data.draw(st.floats(-100, 100))
    assert elliptical_norm(s, c * q) == pytest.approx(abs(c) * elliptical_norm(s, q), rel=1e-9, abs=1e-12)
    if len(X):
        before = elliptical_norm(s, q)
        rank_one_update(s, X[-1])
        assert elliptical_norm(s, q) <= before * (1 + 1e-10) + 1e-12
