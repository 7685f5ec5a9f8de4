"""Steady-state estimates and per-class audits over recorded runs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


class SeriesTooShort(ValueError):
    pass


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float
    batches: int
    samples: int

    def scaled(self, factor: float) -> "Estimate":
        return Estimate(self.mean * factor, self.half_width * abs(factor), self.batches, self.samples)

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width


def estimate_mean(series, warmup_fraction: float = 0.0, num_batches: int = 30, level: float = 0.95) -> Estimate:
    """Batch-means estimate with a Student-t confidence interval.

    Drops the first ``warmup_fraction`` of the series, trims the tail so the
    batches have equal length, and treats the batch means as i.i.d.
    """
    x = np.asarray(series, dtype=float)
    if num_batches < 2:
        raise ValueError("need at least two batches")
    x = x[int(warmup_fraction * x.size):]
    if x.size < 10 * num_batches:
        raise SeriesTooShort(
            f"{x.size} samples after warmup; need at least {10 * num_batches} for {num_batches} batches"
        )
    size = x.size // num_batches
    means = x[: size * num_batches].reshape(num_batches, size).mean(axis=1)
    mean = float(means.mean())
    sd = float(means.std(ddof=1))
    t = stats.t.ppf(0.5 + level / 2, num_batches - 1)
    return Estimate(mean, float(t * sd / np.sqrt(num_batches)), num_batches, size * num_batches)


def scaled_queue_length(estimate: Estimate, epsilon: float) -> Estimate:
    """``epsilon * E[sum q]`` with its interval."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return estimate.scaled(epsilon)


def maxweight_limit(n: int, sigma_tilde2: float) -> float:
    """Heavy-traffic limit of ``epsilon * E[sum q]`` for MaxWeight-like policies."""
    return (1 - 1 / (2 * n)) * sigma_tilde2


def random_limit_bernoulli(n: int) -> float:
    """Heavy-traffic limit of ``epsilon * E[sum q]`` for random scheduling, uniform Bernoulli."""
    return float(n * (n - 1))


def lower_bound_holds(estimate: Estimate, epsilon: float, sigma_norm2: float, k: float = 3.0) -> bool:
    """Universal lower bound check on the pessimistic end ``mean - k * half_width``."""
    bound = 0.5 * sigma_norm2 - epsilon * (1 - epsilon) / 2
    return epsilon * (estimate.mean - k * estimate.half_width) >= bound


def pi2_slack(m: int, n: int, a_max: int) -> int:
    return 2 * m * n * a_max


def audit_pi2(weight, mw_weight, m: int, n: int, a_max: int) -> int:
    """Slots where the MaxWeight weight exceeds the chosen weight by more than 2mn·a_max."""
    gap = np.asarray(mw_weight) - np.asarray(weight)
    return int((gap > pi2_slack(m, n, a_max)).sum())


@dataclass(frozen=True)
class TauRecord:
    taus: np.ndarray

    def ccdf(self, c) -> np.ndarray:
        """Empirical ``P(tau > c)`` for each ``c``."""
        c = np.atleast_1d(c)
        if self.taus.size == 0:
            return np.full(c.shape, np.nan)
        ts = np.sort(self.taus)
        return 1.0 - np.searchsorted(ts, c, side="right") / ts.size

    def ccdf_se(self, c) -> np.ndarray:
        p = self.ccdf(c)
        return np.sqrt(p * (1 - p) / max(self.taus.size, 1))

    def geometric_violations(self, delta: float, cs=range(1, 31), k: float = 4.0) -> list:
        """Values of ``c`` where ``P(tau > c) > (1 - delta)^c + k * SE``."""
        cs = np.asarray(list(cs))
        p = self.ccdf(cs)
        se = self.ccdf_se(cs)
        return [int(c) for c, pc, s in zip(cs, p, se) if pc > (1 - delta) ** c + k * s]


def taus_from_indicator(is_mw) -> TauRecord:
    hits = np.flatnonzero(np.asarray(is_mw, dtype=bool))
    return TauRecord(np.diff(hits))


@dataclass(frozen=True)
class Pi3Audit:
    monotonicity_violations: int
    taus: TauRecord
    empirical_delta: float


def audit_pi3(weight, prev_weight, is_mw) -> Pi3Audit:
    """Comparison-step check ``<q(t), s(t)> >= <q(t), s(t-1)>`` plus MaxWeight hitting gaps.

    Slot 0 has no previous schedule of its own (the bootstrap schedule is
    used) so it is checked like any other slot.
    """
    weight = np.asarray(weight)
    prev_weight = np.asarray(prev_weight)
    is_mw = np.asarray(is_mw, dtype=bool)
    violations = int((weight < prev_weight).sum())
    return Pi3Audit(violations, taus_from_indicator(is_mw), float(is_mw.mean()) if is_mw.size else float("nan"))


def large_scale_ratio(ns, epsilons, estimates) -> list:
    """``(n, epsilon, ratio, half_width)`` with ratio = ``epsilon / n * E[sum q]``."""
    rows = []
    for n, eps, est in zip(ns, epsilons, estimates):
        rows.append((n, eps, eps / n * est.mean, eps / n * est.half_width))
    return rows


def epsilon_schedule(ns, beta: float, eps_ref: float, n_ref: int) -> list:
    """``epsilon(n) = c * n^-beta`` with ``c`` chosen so that ``epsilon(n_ref) = eps_ref``."""
    c = eps_ref * n_ref**beta
    return [c * n ** (-beta) for n in ns]
