"""Sample-quality metrics, sample-size studies, plateau detection and solver-order estimation.

The Inception-style score is replaced by its Bayes-oracle analog: exact
component posteriors at the clean level play the role of classifier outputs.
The Frechet distance is computed between diagonal Gaussians fitted in data space.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .rng import as_generator
from .schedules import make_continuous
from .targets import CLEAN, GaussianMixture, class_posterior, sample_exact


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    cov_diag: np.ndarray
    n: int = 2

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        v = np.atleast_1d(np.asarray(self.cov_diag, dtype=np.float64))
        if m.shape != v.shape:
            raise ValueError("mean and cov_diag must have the same length")
        if np.any(v < 0):
            raise ValueError("cov_diag entries must be >= 0")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov_diag", v)

    @classmethod
    def of_mixture(cls, gmm: GaussianMixture) -> "GaussianStats":
        """Exact first two moments of a mixture (``n`` is nominal)."""
        return cls(gmm.mean(), gmm.marginal_variance(), n=2**62)


@dataclass
class MetricSeries:
    points: list = field(default_factory=list)

    def append(self, index, value, std=None):
        if self.points and index <= self.points[-1][0]:
            raise ValueError("indices must be strictly increasing")
        self.points.append((index, float(value), None if std is None else float(std)))

    @property
    def indices(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=np.float64)

    @property
    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=np.float64)

    @property
    def stds(self) -> np.ndarray:
        return np.array([np.nan if p[2] is None else p[2] for p in self.points], dtype=np.float64)

    def __len__(self):
        return len(self.points)


def surrogate_score(posteriors, atol: float = 1e-8) -> float:
    """``exp(mean_x KL(p(y|x) || p(y)))`` with ``p(y)`` the average posterior."""
    p = np.asarray(posteriors, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1:
        raise ValueError("posteriors must be an (n, K) matrix")
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > atol):
        raise ValueError("every posterior row must be a probability vector summing to 1")
    marginal = p.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(p) - np.log(marginal)), 0.0)
    return float(np.exp(terms.sum(axis=1).mean()))


def posterior_score(gmm: GaussianMixture, samples) -> float:
    """Surrogate score of samples classified by the clean-level Bayes posterior."""
    return surrogate_score(class_posterior(gmm, CLEAN, samples))


def fit_gaussian(samples) -> GaussianStats:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("fit_gaussian needs at least 2 samples")
    return GaussianStats(x.mean(axis=0), x.var(axis=0, ddof=1), x.shape[0])


def frechet_gaussian(a: GaussianStats, b: GaussianStats) -> float:
    """``||mu_a - mu_b||^2 + sum_i (sqrt(v_a,i) - sqrt(v_b,i))^2``."""
    if a.mean.shape != b.mean.shape:
        raise ValueError(f"dimension mismatch: {a.mean.shape[0]} vs {b.mean.shape[0]}")
    return float(np.sum((a.mean - b.mean) ** 2) + np.sum((np.sqrt(a.cov_diag) - np.sqrt(b.cov_diag)) ** 2))


@dataclass
class SizeStudy:
    sizes: list
    score: MetricSeries
    frechet: MetricSeries
    score_raw: np.ndarray
    frechet_raw: np.ndarray


def sample_size_study(
    draw: Callable[[int, np.random.Generator], np.ndarray],
    gmm: GaussianMixture,
    sizes: Sequence[int],
    repeats: int,
    rng,
) -> SizeStudy:
    """Mean and spread of both metrics over ``repeats`` independent sample sets per size.

    ``draw(n, generator)`` must return an ``(n, d)`` sample array. The Frechet
    distance is taken against the exact moments of ``gmm``.
    """
    sizes = [int(s) for s in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing")
    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    gen = as_generator(rng)
    truth = GaussianStats.of_mixture(gmm)
    sc = np.empty((len(sizes), repeats))
    fr = np.empty((len(sizes), repeats))
    for i, size in enumerate(sizes):
        for r in range(repeats):
            x = draw(size, gen)
            sc[i, r] = posterior_score(gmm, x)
            fr[i, r] = frechet_gaussian(fit_gaussian(x), truth)
    score, frechet = MetricSeries(), MetricSeries()
    for i, size in enumerate(sizes):
        score.append(size, sc[i].mean(), sc[i].std(ddof=1))
        frechet.append(size, fr[i].mean(), fr[i].std(ddof=1))
    return SizeStudy(sizes, score, frechet, sc, fr)


def exact_draw(gmm: GaussianMixture):
    def draw(n, gen):
        return sample_exact(gmm, n, gen)[0]

    return draw


def _window_slopes(y: np.ndarray, window: int) -> np.ndarray:
    """Least-squares slope per position over the trailing ``window`` points (position-indexed)."""
    u = np.arange(window, dtype=np.float64)
    u -= u.mean()
    w = u / (u @ u)
    return np.array([w @ y[j - window + 1 : j + 1] for j in range(window - 1, y.size)])


def detect_plateau(series: MetricSeries, window: int = 10, slope_tol: float | None = None):
    """First series index whose trailing-window slope stays within ``slope_tol`` for ``window`` positions.

    Slopes are per position. ``slope_tol`` defaults to 1% of the value range.
    Returns ``None`` when the series never settles.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    if len(series) < 2 * window:
        raise ValueError(f"series needs at least {2 * window} points for window={window}")
    y = series.values
    if slope_tol is None:
        slope_tol = 0.01 * float(y.max() - y.min())
    ok = np.abs(_window_slopes(y, window)) <= slope_tol
    for j in range(ok.size - window + 1):
        if ok[j : j + window].all():
            return series.points[j + window - 1][0]
    return None


# ---------------------------------------------------------------------
# solver order on the single-Gaussian VE oracle
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class OrderCase:
    """Single 1-D Gaussian target under a VE schedule, integrated from ``sigma_max`` to ``sigma_min``."""

    mean: float = 0.5
    var: float = 1.0
    sigma_min: float = 0.05
    sigma_max: float = 5.0
    starts: tuple = (-3.0, -1.0, 0.5, 2.0, 4.0)

    def exact(self, x_T) -> np.ndarray:
        x_T = np.asarray(x_T, dtype=np.float64)
        ratio = math.sqrt((self.var + self.sigma_min**2) / (self.var + self.sigma_max**2))
        return self.mean + (x_T - self.mean) * ratio


class ExactIntegration(UserWarning):
    """The solver reproduced the closed form exactly; no order can be fitted."""


def order_errors(solver: str, case: OrderCase, step_counts: Sequence[int]) -> np.ndarray:
    from .samplers import sample_ode
    from .targets import GaussianMixture

    gmm = GaussianMixture([1.0], [[case.mean]], [[case.var]])
    cs = make_continuous("ve", sigma_min=case.sigma_min, sigma_max=case.sigma_max)
    x_T = np.array(case.starts, dtype=np.float64)[:, None]
    want = case.exact(x_T)
    errs = []
    for N in step_counts:
        # geometric in sigma^2, stopping at sigma_min (no final jump to zero)
        ts = cs.time_steps(N + 1)[:-1]
        got = sample_ode(gmm, cs, ts, solver, x_T.shape[0], 0, x_init=x_T).final
        errs.append(float(np.max(np.abs(got - want))))
    return np.array(errs)


def estimate_order(solver: str, case: OrderCase | None = None, step_counts: Sequence[int] = (8, 16, 32, 64, 128)) -> float:
    """Empirical convergence order: minus the slope of log error against log step count."""
    case = case or OrderCase()
    counts = np.asarray(step_counts, dtype=np.float64)
    if counts.size < 3 or np.unique(counts).size < 3:
        raise ValueError("need at least 3 distinct step counts")
    errs = order_errors(solver, case, [int(c) for c in counts])
    if np.any(errs == 0):
        warnings.warn("zero endpoint error: exact integration, order undefined", ExactIntegration)
        return math.inf
    slope = np.polyfit(np.log(counts), np.log(errs), 1)[0]
    return float(-slope)
