import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchsim.core import ConfigurationError
from switchsim.traffic import (
    TrafficSpec,
    TrafficWarning,
    birkhoff_mixture,
    cyclic_shift,
    diag_weights,
    from_config,
    make_nonuniform,
    make_preset,
    make_uniform,
    preset_weights,
    sample_arrivals,
    sample_into,
)


def test_uniform_rates():
    spec = make_uniform(2, 0.5)
    assert np.allclose(spec.lam, 0.25)
    assert spec.load == 0.5


def test_uniform_sigma_norm():
    # sum of lam(1 - lam) over n^2 entries = (1 - eps)(n - 1 + eps)
    spec = make_uniform(4, 0.1)
    assert spec.sigma_norm2 == pytest.approx(0.9 * 3.1, abs=1e-12)
    assert spec.sigma_norm2 == pytest.approx(2.79, abs=1e-12)
    # eps -> 0 limit is n - 1
    assert make_uniform(4, 1e-9).sigma_norm2 == pytest.approx(3.0, abs=1e-6)


def test_degenerate_mixture_warns():
    with pytest.warns(TrafficWarning):
        spec = make_nonuniform(3, 0.1, [(1.0, np.arange(3))])
    assert np.array_equal(spec.nu, np.eye(3))
    assert spec.nu_min == 0.0


def test_two_perm_mixture_is_uniform():
    nu = birkhoff_mixture(2, [(0.5, [0, 1]), (0.5, [1, 0])])
    assert np.allclose(nu, 0.5)


def test_identity_plus_shifts():
    w = [(0.7, cyclic_shift(4, 0))] + [(0.1, cyclic_shift(4, k)) for k in (1, 2, 3)]
    nu = birkhoff_mixture(4, w)
    expected = np.full((4, 4), 0.1) + 0.6 * np.eye(4)
    assert np.allclose(nu, expected, atol=1e-15)
    assert np.allclose(nu.sum(0), 1, atol=1e-12) and np.allclose(nu.sum(1), 1, atol=1e-12)


def test_mixture_validation():
    with pytest.raises(ConfigurationError):
        birkhoff_mixture(3, [(0.5, [0, 1, 2])])
    with pytest.raises(ConfigurationError):
        birkhoff_mixture(3, [(1.0, [0, 0, 1])])
    with pytest.raises(ConfigurationError):
        birkhoff_mixture(3, [(1.5, [0, 1, 2]), (-0.5, [1, 2, 0])])


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        make_uniform(3, 0.0)
    with pytest.raises(ConfigurationError):
        make_uniform(3, 1.0)
    with pytest.raises(ConfigurationError):
        TrafficSpec(np.full((3, 3), 0.3), 0.1)
    with pytest.raises(ConfigurationError):
        make_uniform(3, 0.1, family="poisson")
    with pytest.raises(ConfigurationError):
        make_uniform(3, 0.1, family="bernoulli", a_max=2)


@pytest.mark.parametrize("n", [2, 4, 16])
def test_preset_is_doubly_stochastic_and_nonuniform(n):
    spec = make_preset(n, 0.1)
    assert np.abs(spec.nu.sum(0) - 1).max() <= 1e-12
    assert np.abs(spec.nu.sum(1) - 1).max() <= 1e-12
    assert spec.nu_min > 0
    assert np.diag(spec.nu).min() > spec.nu[0, n - 1]
    assert sum(a for a, _ in preset_weights(n)) == pytest.approx(1.0)


@given(st.integers(2, 8), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_diag_mixture_is_doubly_stochastic(n, diag):
    nu = birkhoff_mixture(n, diag_weights(n, diag))
    assert np.abs(nu.sum(0) - 1).max() <= 1e-12
    assert np.abs(nu.sum(1) - 1).max() <= 1e-12


@given(st.integers(2, 6), st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6), st.randoms())
@settings(max_examples=60, deadline=None)
def test_random_mixtures_are_doubly_stochastic(n, coefs, pyrng):
    total = sum(coefs)
    weights = []
    for c in coefs:
        perm = list(range(n))
        pyrng.shuffle(perm)
        weights.append((c / total, perm))
    nu = birkhoff_mixture(n, weights)
    assert np.abs(nu.sum(0) - 1).max() <= 1e-12
    assert np.abs(nu.sum(1) - 1).max() <= 1e-12


def test_zero_rate_means_no_arrivals(rng):
    out = np.zeros((3, 3), dtype=np.int64)
    for _ in range(1000):
        sample_into(np.zeros((3, 3)), 1, rng, out)
        assert not out.any()


def test_bernoulli_sampling_moments(rng):
    spec = make_uniform(2, 0.5)
    T = 1_000_000
    out = np.zeros((2, 2), dtype=np.int64)
    draws = np.empty((T, 4), dtype=np.int8)
    for t in range(T // 100_000):
        block = _draw_block(spec, rng, 100_000)
        draws[t * 100_000:(t + 1) * 100_000] = block
    mean = draws.mean(0)
    se = np.sqrt(0.25 * 0.75 / T)
    assert (np.abs(mean - 0.25) <= 3 * se).all()
    var = draws.var(0)
    # SE of a Bernoulli sample variance ~ sqrt((mu4 - sigma^4) / T)
    p = 0.25
    mu4 = p * (1 - p) * (1 - 3 * p + 3 * p * p)
    se_var = np.sqrt((mu4 - (p * (1 - p)) ** 2) / T)
    assert (np.abs(var - spec.sigma2.ravel()) <= 4 * se_var).all()
    corr = np.corrcoef(draws.T.astype(float))
    off = corr[np.triu_indices(4, 1)]
    assert (np.abs(off) <= 4 / np.sqrt(T)).all()
    del out


def _draw_block(spec, rng, size):
    out = np.zeros((spec.n, spec.n), dtype=np.int64)
    block = np.empty((size, spec.n * spec.n), dtype=np.int8)
    for k in range(size):
        sample_into(spec.probs, spec.a_max, rng, out)
        block[k] = out.ravel()
    return block


def test_scaled_bernoulli_sampling(rng):
    # lam = 0.4 with a_max = 2: value 2 with probability 0.2
    spec = TrafficSpec(np.full((2, 2), 0.5), 0.2, family="scaled_bernoulli", a_max=2)
    assert np.allclose(spec.lam, 0.4)
    T = 200_000
    block = _draw_block(spec, rng, T)
    assert set(np.unique(block)) <= {0, 2}
    p = (block == 2).mean(0)
    assert (np.abs(p - 0.2) <= 3 * np.sqrt(0.2 * 0.8 / T)).all()
    assert np.allclose(spec.sigma2, 0.4 * 2 - 0.16)


def test_sample_arrivals_shape(rng):
    a = sample_arrivals(make_uniform(5, 0.3), rng)
    assert a.shape == (5, 5) and a.dtype == np.int64 and set(np.unique(a)) <= {0, 1}


def test_from_config_kinds():
    assert np.allclose(from_config(3, 0.1, {"kind": "uniform"}).nu, 1 / 3)
    assert np.allclose(from_config(3, 0.1, {"kind": "preset"}).nu, make_preset(3, 0.1).nu)
    nu = from_config(3, 0.1, {"kind": "diag_mixture", "diag": 0.4}).nu
    assert np.allclose(np.diag(nu), 0.4 + 0.2)
    spec = from_config(2, 0.1, {"kind": "birkhoff_mixture",
                                "weights": [{"coef": 0.5, "shift": 0}, {"coef": 0.5, "perm": [1, 0]}]})
    assert np.allclose(spec.nu, 0.5)
    with pytest.raises(ConfigurationError):
        from_config(2, 0.1, {"kind": "birkhoff_mixture", "weights": [{"coef": 1.0}]})


def test_with_epsilon_keeps_nu():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        spec = make_preset(4, 0.1).with_epsilon(0.3)
    assert spec.epsilon == 0.3
    assert np.allclose(spec.lam, 0.7 * make_preset(4, 0.1).nu)
