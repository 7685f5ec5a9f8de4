"""Arrival processes.

Every supported family puts a single value ``v`` on each entry with
probability ``p_ij = lambda_ij / v`` and zero otherwise (``v = 1`` for plain
Bernoulli, ``v = a_max`` for scaled Bernoulli), so one sampler covers both.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import ConfigurationError

FAMILIES = ("bernoulli", "scaled_bernoulli")
STOCHASTIC_TOL = 1e-12


class TrafficWarning(UserWarning):
    pass


def cyclic_shift(n: int, k: int) -> np.ndarray:
    """Permutation sending input ``i`` to output ``(i + k) mod n``."""
    return (np.arange(n) + k) % n


@dataclass(frozen=True, eq=False)
class TrafficSpec:
    nu: np.ndarray
    epsilon: float
    family: str = "bernoulli"
    a_max: int = 1
    lam: np.ndarray = field(init=False, repr=False)
    sigma2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nu = np.array(self.nu, dtype=float)
        if nu.ndim != 2 or nu.shape[0] != nu.shape[1] or nu.shape[0] < 2:
            raise ConfigurationError("nu must be a square matrix with n >= 2")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown arrival family {self.family!r}")
        if (nu < 0).any():
            raise ConfigurationError("nu must be nonnegative")
        if (np.abs(nu.sum(0) - 1) > STOCHASTIC_TOL).any() or (
            np.abs(nu.sum(1) - 1) > STOCHASTIC_TOL
        ).any():
            raise ConfigurationError("nu must be doubly stochastic")
        a_max = int(self.a_max)
        if self.family == "bernoulli" and a_max != 1:
            raise ConfigurationError("bernoulli arrivals have a_max = 1")
        if a_max < 1:
            raise ConfigurationError("a_max must be >= 1")
        if nu.min() <= 0:
            warnings.warn(
                "nu has a zero entry; the heavy-traffic results assume min nu > 0",
                TrafficWarning,
                stacklevel=3,
            )
        lam = (1.0 - self.epsilon) * nu
        if (lam / a_max >= 1.0).any():
            raise ConfigurationError("arrival probabilities must stay below 1")
        nu.setflags(write=False)
        lam.setflags(write=False)
        sigma2 = lam * a_max - lam**2
        sigma2.setflags(write=False)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "a_max", a_max)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def n(self) -> int:
        return self.nu.shape[0]

    @property
    def load(self) -> float:
        return 1.0 - self.epsilon

    @property
    def nu_min(self) -> float:
        return float(self.nu.min())

    @property
    def sigma_norm2(self) -> float:
        """Squared norm of the standard-deviation matrix, i.e. the sum of variances."""
        return float(self.sigma2.sum())

    @property
    def probs(self) -> np.ndarray:
        return self.lam / self.a_max

    def lower_bound(self) -> float:
        """Universal lower bound on ``epsilon * E[sum q]`` for any scheduler."""
        eps = self.epsilon
        return 0.5 * self.sigma_norm2 - eps * (1 - eps) / 2

    def with_epsilon(self, epsilon: float) -> "TrafficSpec":
        return TrafficSpec(self.nu, epsilon, self.family, self.a_max)


def make_uniform(n: int, epsilon: float, family: str = "bernoulli", a_max: int = 1) -> TrafficSpec:
    if n < 2:
        raise ConfigurationError("n must be >= 2")
    return TrafficSpec(np.full((n, n), 1.0 / n), epsilon, family, a_max)


def birkhoff_mixture(n: int, weights) -> np.ndarray:
    """``sum_k alpha_k P_k`` for ``weights = [(alpha_k, perm_k), ...]``."""
    alphas = np.array([float(c) for c, _ in weights])
    if (alphas < 0).any():
        raise ConfigurationError("mixture coefficients must be nonnegative")
    if abs(alphas.sum() - 1.0) > 1e-9:
        raise ConfigurationError(f"mixture coefficients sum to {alphas.sum()}, not 1")
    nu = np.zeros((n, n))
    rows = np.arange(n)
    for alpha, perm in weights:
        perm = np.asarray(perm, dtype=np.int64)
        if perm.shape != (n,) or not np.array_equal(np.sort(perm), rows):
            raise ConfigurationError(f"not a permutation of size {n}: {perm!r}")
        nu[rows, perm] += alpha
    # absorb the <=1e-9 coefficient slack so rows/columns sum to 1 exactly
    return nu / alphas.sum()


def make_nonuniform(
    n: int, epsilon: float, weights, family: str = "bernoulli", a_max: int = 1
) -> TrafficSpec:
    return TrafficSpec(birkhoff_mixture(n, weights), epsilon, family, a_max)


def preset_weights(n: int, uniform_share: float = 0.6) -> list:
    """Stand-in non-uniform rate matrix used for the load sweep.

    ``uniform_share`` of the load is spread evenly over all pairs (every cyclic
    shift with weight ``1/n``); the rest goes to cyclic shift ``k`` with weight
    proportional to ``2^-(k+1)``, which concentrates it on the diagonal.
    """
    geo = 0.5 ** np.arange(1, n + 1)
    geo /= geo.sum()
    alphas = uniform_share / n + (1 - uniform_share) * geo
    return [(float(a), cyclic_shift(n, k)) for k, a in enumerate(alphas)]


def diag_weights(n: int, diag: float) -> list:
    """``diag * I + (1 - diag) * uniform`` written as a mixture of cyclic shifts."""
    if not 0.0 <= diag <= 1.0:
        raise ConfigurationError("diag share must lie in [0, 1]")
    rest = (1.0 - diag) / n
    return [(diag + rest if k == 0 else rest, cyclic_shift(n, k)) for k in range(n)]


def make_preset(n: int, epsilon: float, family: str = "bernoulli", a_max: int = 1) -> TrafficSpec:
    return make_nonuniform(n, epsilon, preset_weights(n), family, a_max)


@njit(nogil=True, cache=True)
def sample_into(probs, value, rng, out):
    n = probs.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = value if rng.random() < probs[i, j] else 0


def sample_arrivals(spec: TrafficSpec, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros((spec.n, spec.n), dtype=np.int64)
    sample_into(spec.probs, spec.a_max, rng, out)
    return out


def from_config(n: int, epsilon: float, traffic: dict) -> TrafficSpec:
    """Build a ``TrafficSpec`` from the ``traffic`` block of an experiment config."""
    kind = traffic.get("kind", "uniform")
    family = traffic.get("family", "bernoulli")
    a_max = int(traffic.get("a_max", 1))
    if kind == "uniform":
        return make_uniform(n, epsilon, family, a_max)
    if kind == "preset":
        return make_preset(n, epsilon, family, a_max)
    if kind == "diag_mixture":
        return make_nonuniform(n, epsilon, diag_weights(n, float(traffic.get("diag", 0.5))), family, a_max)
    if kind in ("birkhoff_mixture", "mixture"):
        mix = traffic.get("weights")
        if not mix:
            raise ConfigurationError("birkhoff_mixture traffic needs 'weights'")
        weights = []
        for entry in mix:
            coef = entry["coef"]
            if "perm" in entry:
                perm = entry["perm"]
            elif "shift" in entry:
                perm = cyclic_shift(n, int(entry["shift"]))
            else:
                raise ConfigurationError("mixture entries need 'perm' or 'shift'")
            weights.append((coef, perm))
        return make_nonuniform(n, epsilon, weights, family, a_max)
    raise ConfigurationError(f"unknown traffic kind {kind!r}")
