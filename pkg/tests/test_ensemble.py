import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acbandit.ensemble import (Mode, Oracle, SgdConfig, bonus, bonuses, record, rerandomize,
                               sgd_refresh, warm_start)
from acbandit.errors import InvalidArgument, ModeViolation
from acbandit.linalg import elliptical_norms, init_covariance, rank_one_update


def _history(rng, n, d, lam):
    cov = init_covariance(d, lam)
    X = rng.standard_normal((n, d))
    for x in X:
        rank_one_update(cov, x)
    return cov, X


def test_warm_start_examples():
    e = warm_start(2, 1.0, 1, "incremental", "exact_rls", targets=[[0.3, -0.2]])
    assert np.allclose(e.weights, [[0.3, -0.2]])
    e = warm_start(1, 4.0, 1, "incremental", "exact_rls", targets=[[1.0]])
    assert np.allclose(e.weights, [[0.5]])


def test_warm_start_history_rows():
    e = warm_start(3, 4.0, 2, "lazy", "exact_rls")
    assert np.allclose(e.history.array, 2.0 * np.eye(3))
    assert warm_start(3, 4.0, 2, "incremental", "exact_rls").history is None


def test_warm_start_variance():
    e = warm_start(5, 0.01, 64, "rerandomized", "exact_rls", seed=3)
    assert e.weights.shape == (64, 5)
    assert e.weights.var() == pytest.approx(100.0, rel=0.2)


@pytest.mark.parametrize("kw", [dict(d=0), dict(m=0), dict(lam=0.0), dict(m=1.5)])
def test_warm_start_rejects(kw):
    args = dict(d=2, lam=1.0, m=1, mode="incremental", oracle="exact_rls") | kw
    with pytest.raises(InvalidArgument):
        warm_start(**args)


def test_sgd_config_validation():
    with pytest.raises(InvalidArgument):
        SgdConfig(learning_rate=-1).validate()
    with pytest.raises(InvalidArgument):
        SgdConfig(polyak_start_fraction=1.5).validate()
    with pytest.raises(InvalidArgument):
        SgdConfig(passes_per_refresh=0).validate()


def test_mode_violations():
    cov = init_covariance(2, 1.0)
    with pytest.raises(ModeViolation):
        record(warm_start(2, 1.0, 1, "rerandomized", "exact_rls"), cov, np.ones(2))
    with pytest.raises(ModeViolation):
        rerandomize(warm_start(2, 1.0, 1, "incremental", "exact_rls"), cov)
    with pytest.raises(ModeViolation):
        sgd_refresh(warm_start(2, 1.0, 1, "incremental", "exact_rls"), (np.eye(2), np.zeros((2, 1))))


def test_record_orthogonal_law():
    # 10^4 independent regressors stand in for 10^4 resimulations
    d, lam, n = 3, 0.01, 99
    cov = init_covariance(d, lam)
    e = warm_start(d, lam, 10_000, "incremental", "exact_rls", seed=4)
    x = np.eye(d)[1]
    for _ in range(n):
        rank_one_update(cov, x)
        record(e, cov, x)
    assert e.weights[:, 1].var() == pytest.approx(1.0 / (lam + n), rel=0.05)


def test_record_zero_feature():
    cov = init_covariance(3, 1.0)
    e = warm_start(3, 1.0, 4, "incremental", "exact_rls", seed=1)
    before = e.weights.copy()
    rank_one_update(cov, np.zeros(3))
    record(e, cov, np.zeros(3))
    assert np.allclose(e.weights, before)


def test_record_matches_batch_least_squares():
    rng = np.random.default_rng(5)
    d, lam, m = 5, 0.3, 3
    warm = rng.standard_normal((m, d))
    e = warm_start(d, lam, m, "incremental", "exact_rls", targets=warm)
    cov = init_covariance(d, lam)
    X = rng.standard_normal((50, d))
    Y = rng.standard_normal((50, m))
    for x, y in zip(X, Y):
        rank_one_update(cov, x)
        record(e, cov, x, targets=y)
    rows = np.vstack([math.sqrt(lam) * np.eye(d), X])
    targets = np.vstack([warm.T, Y])
    ref = np.linalg.lstsq(rows, targets, rcond=None)[0].T
    assert np.max(np.abs(e.weights - ref)) <= 1e-8 * max(1.0, np.max(np.abs(ref)))


def test_record_default_targets_are_indexed():
    cov = init_covariance(2, 1.0)
    e = warm_start(2, 1.0, 3, "incremental", "exact_rls", seed=7)
    x = np.array([1.0, 0.5])
    rank_one_update(cov, x)
    expected = e.moments + np.outer(e.targets_for(0), x)
    record(e, cov, x)
    assert np.array_equal(e.moments, expected)
    assert e.record_count == 1


def test_lazy_record_only_extends_history():
    cov = init_covariance(2, 1.0)
    e = warm_start(2, 1.0, 2, "lazy", "exact_rls")
    w = e.weights.copy()
    rank_one_update(cov, np.ones(2))
    record(e, cov, np.ones(2))
    assert len(e.history) == cov.update_count + 2
    assert np.array_equal(e.weights, w)


def test_rerandomize_fresh_is_standard_normal():
    cov = init_covariance(3, 1.0)
    e = warm_start(3, 1.0, 10_000, "rerandomized", "exact_rls", seed=2)
    rerandomize(e, cov)
    emp = np.cov(e.weights, rowvar=False)
    assert np.linalg.norm(emp - np.eye(3)) / np.linalg.norm(np.eye(3)) < 0.05


def test_rerandomize_law_after_history():
    rng = np.random.default_rng(3)
    d, lam = 4, 0.5
    cov, X = _history(rng, 40, d, lam)
    out = {}
    for fast in (False, True):
        e = warm_start(d, lam, 10_000, "rerandomized", "exact_rls", seed=8, fast_rerandomize=fast)
        for x in X:
            e.push_history(x)
        rerandomize(e, cov)
        assert np.allclose(e.weights, e.moments @ cov.sigma_inv, atol=1e-9)
        q = rng.standard_normal(d)
        assert (e.weights @ q).var() == pytest.approx(elliptical_norms(cov, q[None])[0] ** 2, rel=0.05)
        out[fast] = np.cov(e.weights, rowvar=False)
    assert np.linalg.norm(out[True] - out[False]) / np.linalg.norm(out[False]) < 0.05


def test_rerandomize_repeated_calls_differ_and_replay():
    cov = init_covariance(2, 1.0)
    a = warm_start(2, 1.0, 2, "rerandomized", "exact_rls", seed=11)
    b = warm_start(2, 1.0, 2, "rerandomized", "exact_rls", seed=11)
    first = rerandomize(a, cov).weights.copy()
    assert not np.array_equal(rerandomize(a, cov).weights, first)
    assert np.array_equal(rerandomize(b, cov).weights, first)


def test_bonus_examples():
    e = warm_start(2, 1.0, 2, "incremental", "exact_rls", targets=[[1.0, 0.0], [-2.0, 0.0]])
    assert bonus(e, np.array([1.0, 0.0]), 0.5) == pytest.approx(1.0)
    assert bonus(e, np.zeros(2), 3.0) == 0.0
    x = np.array([0.4, -1.3])
    assert bonus(e, x, 2.0) == pytest.approx(2.0 * bonus(e, x, 1.0))
    assert np.allclose(bonuses(e, np.array([[1.0, 0.0], [0.0, 1.0]]), 0.5), [1.0, 0.0])
    with pytest.raises(InvalidArgument):
        bonus(e, np.ones(3), 1.0)


def test_bonus_grows_with_ensemble_size():
    rng = np.random.default_rng(6)
    cov, X = _history(rng, 20, 3, 1.0)
    x = rng.standard_normal(3)
    means = {}
    for m in (1, 64):
        vals = []
        e = warm_start(3, 1.0, m, "rerandomized", "exact_rls", seed=m, fast_rerandomize=True)
        for _ in range(2000):
            rerandomize(e, cov)
            vals.append(bonus(e, x, 1.0))
        means[m] = np.mean(vals)
    assert means[64] >= means[1]


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 10.0))
def test_bonus_nonnegative_homogeneous(seed, beta):
    e = warm_start(3, 0.7, 5, "incremental", "exact_rls", seed=seed)
    x = np.random.default_rng(seed).standard_normal(3)
    b = bonus(e, x, beta)
    assert b >= 0
    assert b == pytest.approx(beta * bonus(e, x, 1.0), rel=1e-12, abs=1e-300)


@given(st.permutations(range(8)))
def test_exact_weights_order_invariant(perm):
    rng = np.random.default_rng(12)
    d, lam = 3, 0.5
    X = rng.standard_normal((8, d))
    Y = rng.standard_normal((8, 2))
    results = []
    for order in (range(8), perm):
        cov = init_covariance(d, lam)
        e = warm_start(d, lam, 2, "incremental", "exact_rls", seed=1)
        for i in order:
            rank_one_update(cov, X[i])
            record(e, cov, X[i], targets=Y[i])
        results.append(e.weights)
    assert np.allclose(results[0], results[1], rtol=1e-9, atol=1e-12)


def _iterates(w0, X, Y, lr):
    w = w0.copy()
    out = []
    for x, y in zip(X, Y):
        w = w - lr * np.outer(w @ x - y, x)
        out.append(w)
    return out


@given(st.integers(1, 60), st.floats(0.0, 1.0))
def test_streaming_tail_average_matches_brute_force(n, frac):
    rng = np.random.default_rng(n)
    d, m, lr = 3, 2, 0.1
    cov = init_covariance(d, 1.0)
    e = warm_start(d, 1.0, m, "incremental", "sgd_polyak", seed=n,
                   sgd=SgdConfig(learning_rate=lr, polyak_start_fraction=frac))
    w0 = e.weights.copy()
    X = rng.standard_normal((n, d)) / 2
    Y = rng.standard_normal((n, m))
    for x, y in zip(X, Y):
        rank_one_update(cov, x)
        record(e, cov, x, targets=y)
    its = _iterates(w0, X, Y, lr)
    lo = min(math.floor(frac * n) + 1, n)
    ref = np.mean(its[lo - 1:], axis=0)
    assert np.allclose(e.polyak_weights, ref, rtol=1e-9, atol=1e-12)
    assert np.allclose(e.weights, its[-1], rtol=1e-12, atol=1e-14)


def test_sgd_refresh_warm_rows_converge():
    d, lam, m = 4, 0.5, 3
    targets = np.random.default_rng(0).standard_normal((m, d))
    exact = warm_start(d, lam, m, "lazy", "exact_rls", targets=targets).weights
    e = warm_start(d, lam, m, "lazy", "sgd_polyak", targets=np.zeros((m, d)))
    rows = math.sqrt(lam) * np.eye(d)
    sgd_refresh(e, (rows, targets.T), SgdConfig(learning_rate=0.5, passes_per_refresh=200))
    assert np.linalg.norm(e.polyak_weights - exact) <= 1e-2 * np.linalg.norm(exact)


def test_sgd_refresh_zero_rate_keeps_weights():
    e = warm_start(3, 1.0, 2, "lazy", "sgd_polyak", seed=3)
    w = e.weights.copy()
    data = [(np.ones(3), np.array([1.0, -1.0])), (np.arange(3.0), np.array([0.5, 2.0]))]
    sgd_refresh(e, data, SgdConfig(learning_rate=0.0, passes_per_refresh=3))
    assert np.array_equal(e.weights, w)
    assert np.allclose(e.polyak_weights, w, rtol=1e-14, atol=0)


def test_sgd_refresh_rejects_empty():
    e = warm_start(3, 1.0, 2, "lazy", "sgd_polyak")
    with pytest.raises(InvalidArgument):
        sgd_refresh(e, [])
    with pytest.raises(InvalidArgument):
        sgd_refresh(e, (np.zeros((0, 3)), np.zeros((0, 2))))


def test_sgd_rerandomize_uses_batch_refresh():
    d, lam = 3, 1.0
    cov = init_covariance(d, lam)
    e = warm_start(d, lam, 2, "rerandomized", "sgd_polyak", seed=1,
                   sgd=SgdConfig(learning_rate=0.2, passes_per_refresh=50))
    x = np.array([1.0, 0.0, 0.5])
    rank_one_update(cov, x)
    e.push_history(x)
    rerandomize(e, cov)
    assert e.refresh_count == 1 and e.polyak_weights.shape == (2, d)


@pytest.mark.xfail(strict=True, reason="constant-step SGD plateaus near 10% relative error here; see notes")
def test_sgd_refresh_random_dataset_one_percent():
    rng = np.random.default_rng(0)
    d, m, lam = 5, 1, 1.0
    X = rng.standard_normal((200, d))
    Y = rng.standard_normal((200, m))
    cov = init_covariance(d, lam)
    for x in X:
        rank_one_update(cov, x)
    exact = np.linalg.lstsq(X, Y, rcond=None)[0].T
    e = warm_start(d, lam, m, "lazy", "sgd_polyak", targets=np.zeros((m, d)))
    sgd_refresh(e, (X, Y), SgdConfig(learning_rate=0.05, passes_per_refresh=100))
    assert np.linalg.norm(e.polyak_weights - exact) <= 1e-2 * np.linalg.norm(exact)
