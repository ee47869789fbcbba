"""Gaussian-mixture targets with exact scores, noise predictions and class posteriors.

Every quantity a trained network would approximate is available here in closed
form: a diagonal Gaussian mixture pushed through an isotropic Gaussian kernel
``x_t = scale * x_0 + sqrt(noise_var) * eps`` is again a diagonal mixture, so
scores and posteriors at any noise level are exact.

Points are passed as ``(n, d)`` arrays; a single ``(d,)`` vector is accepted and
the result is returned with the matching shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .rng import as_generator


class DegenerateKernelError(ValueError):
    """Raised when a kernel with zero added noise is used where noise is required."""


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Diagonal-covariance Gaussian mixture; component index is the class label."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        m = np.array(self.means, dtype=np.float64)
        v = np.array(self.variances, dtype=np.float64)
        if m.ndim == 1:
            m = m[:, None]
        if v.ndim == 1:
            v = v[:, None]
        K = w.shape[0]
        if K == 0:
            raise ValueError("weights: mixture needs at least one component")
        if m.shape[0] != K or v.shape[0] != K:
            raise ValueError(f"means/variances: expected {K} components, got {m.shape[0]} and {v.shape[0]}")
        if m.shape != v.shape:
            raise ValueError(f"means/variances: every component needs length-d vectors, got {m.shape} vs {v.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("means: entries must be finite")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights: all weights must be > 0")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights: must sum to 1 within 1e-12 (sum={w.sum()!r})")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("variances: all entries must be > 0")
        for name, arr in (("weights", w), ("means", m), ("variances", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def marginal_variance(self) -> np.ndarray:
        """Per-dimension variance of the mixture (law of total variance)."""
        mu = self.mean()
        return self.weights @ (self.variances + (self.means - mu) ** 2)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    def __eq__(self, other):
        if not isinstance(other, GaussianMixture):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.variances, other.variances)
        )

    __hash__ = None


@dataclass(frozen=True)
class KernelParams:
    """Isotropic Gaussian perturbation: mean multiplier and added variance."""

    scale: float
    noise_var: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if not self.noise_var >= 0:
            raise ValueError(f"noise_var must be >= 0, got {self.noise_var}")

    @classmethod
    def vp(cls, alpha_bar: float) -> "KernelParams":
        return cls(float(np.sqrt(alpha_bar)), float(1.0 - alpha_bar))

    @classmethod
    def ve(cls, sigma: float) -> "KernelParams":
        return cls(1.0, float(sigma) ** 2)

    def compose(self, then: "KernelParams") -> "KernelParams":
        """Kernel equivalent to applying ``self`` followed by ``then``."""
        return KernelParams(self.scale * then.scale, then.scale**2 * self.noise_var + then.noise_var)


CLEAN = KernelParams(1.0, 0.0)


def benchmark_mixture(dim: int = 2, offset: float = 2.0) -> GaussianMixture:
    """Equal-weight pair of unit-variance components at ``+offset`` and ``-offset`` in every dimension."""
    mu = np.full(dim, float(offset))
    return GaussianMixture([0.5, 0.5], np.stack([mu, -mu]), np.ones((2, dim)))


def standard_normal(dim: int = 1) -> GaussianMixture:
    return GaussianMixture([1.0], np.zeros((1, dim)), np.ones((1, dim)))


def standardize(gmm: GaussianMixture) -> GaussianMixture:
    """Affinely rescale so the mixture has zero mean and unit marginal variance per dimension."""
    mu = gmm.mean()
    sd = np.sqrt(gmm.marginal_variance())
    return GaussianMixture(gmm.weights, (gmm.means - mu) / sd, gmm.variances / sd**2)


def _rows(gmm, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != gmm.dim:
        raise ValueError(f"x: expected trailing dimension {gmm.dim}, got shape {x.shape}")
    return x2, single


def _eval(gmm, x):
    return kernels.mixture_eval(x, gmm.means, gmm.variances, gmm.weights)


def gmm_log_density(gmm: GaussianMixture, x) -> np.ndarray | float:
    x2, single = _rows(gmm, x)
    logp, _, _ = _eval(gmm, x2)
    return float(logp[0]) if single else logp


def gmm_score(gmm: GaussianMixture, x) -> np.ndarray:
    """Exact score: responsibility-weighted sum of ``(mu_k - x) / v_k``."""
    x2, single = _rows(gmm, x)
    _, _, score = _eval(gmm, x2)
    return score[0] if single else score


def perturb(gmm: GaussianMixture, k: KernelParams) -> GaussianMixture:
    """Exact marginal of ``k.scale * x + sqrt(k.noise_var) * eps`` for ``x ~ gmm``."""
    return GaussianMixture(gmm.weights, gmm.means * k.scale, gmm.variances * k.scale**2 + k.noise_var)


def perturbed_score(gmm: GaussianMixture, k: KernelParams, x_t) -> np.ndarray:
    return gmm_score(perturb(gmm, k), x_t)


def eps_oracle(gmm: GaussianMixture, k: KernelParams, x_t) -> np.ndarray:
    """Noise prediction ``-sqrt(noise_var) * grad log p_t(x_t)``."""
    if k.noise_var == 0:
        raise DegenerateKernelError("eps_oracle needs noise_var > 0")
    return -np.sqrt(k.noise_var) * perturbed_score(gmm, k, x_t)


def class_posterior(gmm: GaussianMixture, k: KernelParams, x_t) -> np.ndarray:
    """Posterior over components under the perturbed mixture, shape ``(n, K)`` or ``(K,)``."""
    g = perturb(gmm, k)
    x2, single = _rows(g, x_t)
    _, resp, _ = _eval(g, x2)
    return resp[0] if single else resp


def class_grad(gmm: GaussianMixture, k: KernelParams, x_t, label: int) -> np.ndarray:
    """Gradient of ``log p(label | x_t)`` under the perturbed mixture."""
    if not 0 <= int(label) < gmm.K:
        raise ValueError(f"label {label} out of range for K={gmm.K}")
    g = perturb(gmm, k)
    x2, single = _rows(g, x_t)
    _, _, score = _eval(g, x2)
    out = (g.means[label] - x2) / g.variances[label] - score
    return out[0] if single else out


def sample_exact(gmm: GaussianMixture, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Ancestral draws: component by weight, then the component Gaussian."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = as_generator(rng)
    labels = gen.choice(gmm.K, size=n, p=gmm.weights)
    z = gen.standard_normal((n, gmm.dim))
    x = gmm.means[labels] + np.sqrt(gmm.variances[labels]) * z
    return x, labels
