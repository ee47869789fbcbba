"""Classifier guidance and its untrained-classifier ablation.

Three classifier backends feed the same two update rules:

* ``exact`` - Bayes posterior over mixture components at the current noise level;
* ``untrained`` - fixed random affine logits ``W x + b`` keyed by a seed;
* ``null`` - zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .targets import GaussianMixture, KernelParams, class_grad

CLASSIFIERS = ("exact", "untrained", "null")


@dataclass(frozen=True, eq=False)
class GuidanceAttachment:
    classifier: str = "null"
    label: int = 0
    scale: float = 1.0
    seed: int = 0
    n_classes: int | None = None
    dim: int | None = None
    _W: np.ndarray | None = field(default=None, init=False, repr=False)
    _b: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if not self.scale >= 0:
            raise ValueError(f"scale must be >= 0, got {self.scale}")
        if self.label < 0:
            raise ValueError(f"label must be >= 0, got {self.label}")
        if self.classifier == "untrained":
            if self.n_classes is None or self.dim is None:
                raise ValueError("untrained classifier needs n_classes and dim")
            gen = np.random.default_rng(self.seed)
            scale = 1.0 / np.sqrt(self.dim)
            W = gen.standard_normal((self.n_classes, self.dim)) * scale
            b = gen.standard_normal(self.n_classes) * scale
            W.setflags(write=False)
            b.setflags(write=False)
            object.__setattr__(self, "_W", W)
            object.__setattr__(self, "_b", b)

    @classmethod
    def exact(cls, label: int, scale: float = 1.0) -> "GuidanceAttachment":
        return cls("exact", label, scale)

    @classmethod
    def untrained(cls, gmm: GaussianMixture, label: int, scale: float = 1.0, seed: int = 0) -> "GuidanceAttachment":
        return cls("untrained", label, scale, seed=seed, n_classes=gmm.K, dim=gmm.dim)

    @classmethod
    def null(cls) -> "GuidanceAttachment":
        return cls("null", 0, 0.0)

    def describe(self) -> dict:
        out = {"classifier": self.classifier, "label": self.label, "scale": self.scale}
        if self.classifier == "untrained":
            out["seed"] = self.seed
        return out


def guided_mean_shift(mu, sigma2, grad, scale: float):
    """Markovian branch: ``mu + scale * sigma2 * grad``."""
    return mu + scale * (sigma2 * grad)


def guided_eps(eps, alpha_bar: float, grad, scale: float):
    """DDIM branch: ``eps - scale * sqrt(1 - alpha_bar) * grad``."""
    return eps - scale * np.sqrt(1.0 - alpha_bar) * grad


def classifier_grad(att: GuidanceAttachment, gmm: GaussianMixture, kernel: KernelParams, x_t) -> np.ndarray:
    """Gradient of ``log p(label | x_t)`` under the attachment's classifier."""
    if att.label >= gmm.K:
        raise ValueError(f"label {att.label} out of range for K={gmm.K}")
    x = np.asarray(x_t, dtype=np.float64)
    if att.classifier == "exact":
        return class_grad(gmm, kernel, x, att.label)
    if att.classifier == "null":
        return np.zeros_like(x)
    if att._W.shape != (gmm.K, gmm.dim):
        raise ValueError(f"untrained classifier built for K={att._W.shape[0]}, d={att._W.shape[1]}")
    single = x.ndim == 1
    g = kernels.softmax_affine_grad(x[None] if single else x, att._W, att._b, att.label)
    return g[0] if single else g
