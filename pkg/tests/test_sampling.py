import numpy as np
import pytest
from scipy import stats

import mph
from mph import core, sampling
from mph.errors import InvalidArgumentError
from models import fig1_models, random_model


def test_exponential_mean():
    m = mph.MphModel([1.0], [[[-1.0]]])
    X = mph.sample(m, 100_000, seed=1)
    assert X.shape == (100_000, 1)
    assert abs(X.mean() - 1.0) < 4 / np.sqrt(100_000)


def test_deterministic_and_positive():
    m = fig1_models()[1]
    a = mph.sample(m, 1000, seed=42)
    b = mph.sample(m, 1000, seed=42)
    np.testing.assert_array_equal(a, b)
    assert np.all(a > 0) and np.all(np.isfinite(a))
    assert not np.array_equal(a, mph.sample(m, 1000, seed=43))


def test_thread_count_does_not_change_output(monkeypatch):
    m = fig1_models()[2]
    n = 2 * sampling.BLOCK_ROWS + 17
    monkeypatch.setenv("MPH_THREADS", "1")
    one = mph.sample(m, n, seed=5)
    monkeypatch.setenv("MPH_THREADS", "3")
    three = mph.sample(m, n, seed=5)
    np.testing.assert_array_equal(one, three)


def test_rejects_bad_n():
    m = fig1_models()[0]
    for n in (0, -3, 2.5):
        with pytest.raises(InvalidArgumentError):
            mph.sample(m, n)


def test_marginal_ks():
    m = fig1_models()[0]
    n = 100_000
    X = mph.sample(m, n, seed=3)
    for i in range(2):
        ks = stats.kstest(X[:, i], lambda x: core.ph_cdf(m.pi, m.T[i], x)).statistic
        assert ks < 1.63 / np.sqrt(n)


def test_path_stats_identities():
    m = random_model(np.random.default_rng(0), 3, 2)
    n = 5000
    X, ps = mph.sample_with_paths(m, n, seed=2)
    np.testing.assert_array_equal(X, mph.sample(m, n, seed=2))
    assert ps.B.sum() == 2 * n
    np.testing.assert_allclose(ps.Z.sum(axis=1), X.sum(axis=0), rtol=1e-12)
    np.testing.assert_array_equal(ps.N_exit.sum(axis=1), n)
    for i in range(2):
        np.testing.assert_array_equal(np.diag(ps.N_trans[i]), 0)
    # flow balance: entries into k (start + jumps in) equal departures from k
    for i in range(2):
        inflow = ps.B / 2 + ps.N_trans[i].sum(axis=0)
        outflow = ps.N_trans[i].sum(axis=1) + ps.N_exit[i]
        np.testing.assert_array_equal(inflow, outflow)


def test_start_state_frequencies():
    m = random_model(np.random.default_rng(1), 4, 1)
    n = 100_000
    _, ps = mph.sample_with_paths(m, n, seed=4)
    freq = ps.B / n
    se = np.sqrt(m.pi * (1 - m.pi) / n)
    assert np.all(np.abs(freq - m.pi) < 4 * se)
