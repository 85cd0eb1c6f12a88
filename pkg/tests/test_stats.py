import math

import numpy as np
import pytest

from housemove.stats import (
    effective_sample_size,
    ks_noise_level,
    ks_two_sample,
    log_mean_exp,
    normalized_weights,
    replicate_effective_size,
    weighted_ks,
)


def test_normalized_weights_survive_large_logs():
    w = normalized_weights(np.array([1000.0, 1000.0 + math.log(3.0)]))
    assert np.allclose(w, [0.25, 0.75])


def test_ess_of_equal_and_degenerate_weights():
    assert effective_sample_size(np.zeros(50)) == pytest.approx(50.0)
    assert effective_sample_size(np.array([0.0, -np.inf, -np.inf])) == pytest.approx(1.0)
    assert effective_sample_size(np.array([])) == 0.0


def test_log_mean_exp():
    assert log_mean_exp(np.log([1.0, 2.0, 3.0])) == pytest.approx(math.log(2.0))


def test_ks_two_sample_same_law_is_quiet():
    rng = np.random.default_rng(0)
    d, p = ks_two_sample(rng.normal(size=2000), rng.normal(size=2000))
    assert d < ks_noise_level(2000, 2000)
    assert p > 0.01
    with pytest.raises(ValueError):
        ks_two_sample([], [1.0])


def test_weighted_ks_equals_plain_ks_for_unit_weights():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=300), rng.normal(0.3, 1.0, size=400)
    d_plain, _ = ks_two_sample(x, y)
    d_w, _ = weighted_ks(x, np.ones_like(x), y, np.ones_like(y))
    assert d_w == pytest.approx(d_plain)


def test_weighted_ks_uses_the_weights():
    # weights turn a uniform sample on {0, 1} into a point mass at 1
    x = np.array([0.0, 1.0])
    y = np.ones(10)
    d, _ = weighted_ks(x, np.array([0.0, 1.0]), y, np.ones(10))
    assert d == pytest.approx(0.0)
    with pytest.raises(ValueError):
        weighted_ks(x, np.zeros(2), y, np.ones(10))


def test_weighted_ks_takes_explicit_sizes():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=400), rng.normal(0.2, 1.0, size=400)
    d, p = weighted_ks(x, np.ones(400), y, np.ones(400))
    d_small, p_small = weighted_ks(x, np.ones(400), y, np.ones(400), sizes=(40.0, 40.0))
    assert d_small == d
    assert p_small > p
    with pytest.raises(ValueError):
        weighted_ks(x, np.ones(400), y, np.ones(400), sizes=(0.0, 10.0))


def test_replicate_effective_size_sees_shared_ancestors():
    rng = np.random.default_rng(3)
    independent = [(rng.normal(size=200), np.ones(200)) for _ in range(8)]
    # 10 distinct values per replicate, each copied 20 times
    copied = [(np.repeat(rng.normal(size=10), 20), np.ones(200)) for _ in range(8)]
    n_independent = replicate_effective_size(independent)
    n_copied = replicate_effective_size(copied)
    assert 400.0 < n_independent <= 1600.0
    assert 1.0 <= n_copied < 400.0
    with pytest.raises(ValueError):
        replicate_effective_size(independent[:1])
