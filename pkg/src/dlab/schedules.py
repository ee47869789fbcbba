"""Noise schedules: discrete beta schedules, sigma ladders and continuous-time SDE schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .targets import KernelParams

LINEAR_BETA_1 = 1e-4
LINEAR_BETA_T = 0.02
COSINE_S = 0.008
COSINE_MAX_BETA = 0.999
SIGMOID_BETA_CLIP = (1e-9, 0.999)


def _freeze(a):
    a = np.asarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteSchedule:
    """DDPM-style schedule over steps ``t = 1..T``.

    ``alpha_bars[t-1]`` is the cumulative product up to step ``t``; step 0 is the
    clean data with ``alpha_bar = 1``.
    """

    betas: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("betas: need a 1-D array with at least 2 steps")
        if np.any(b <= 0) or np.any(b >= 1):
            raise ValueError("betas: every beta_t must lie in (0, 1)")
        object.__setattr__(self, "betas", _freeze(b))
        object.__setattr__(self, "alphas", _freeze(1.0 - b))
        object.__setattr__(self, "alpha_bars", _freeze(np.cumprod(1.0 - b)))

    @property
    def T(self) -> int:
        return self.betas.shape[0]

    def alpha_bar(self, t: int) -> float:
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])

    def kernel(self, t: int) -> KernelParams:
        return KernelParams.vp(self.alpha_bar(t))

    def sigma(self, t: int) -> float:
        """Equivalent unscaled noise level ``sqrt((1 - abar) / abar)``."""
        ab = self.alpha_bar(t)
        return math.sqrt((1.0 - ab) / ab)

    def describe(self) -> dict:
        return {"kind": self.kind, "T": self.T, **self.params}


def make_linear(factor: float = 1.0, T: int = 1000) -> DiscreteSchedule:
    """Betas linear from ``factor * 1e-4`` to ``factor * 0.02``."""
    if not 0 < factor <= 1:
        raise ValueError(f"factor must lie in (0, 1], got {factor}")
    if T < 2:
        raise ValueError("T must be >= 2")
    betas = factor * np.linspace(LINEAR_BETA_1, LINEAR_BETA_T, T)
    return DiscreteSchedule(betas, "linear", {"factor": float(factor)})


def make_cosine(T: int = 1000, s_offset: float = COSINE_S) -> DiscreteSchedule:
    if T < 2:
        raise ValueError("T must be >= 2")
    if not s_offset > 0:
        raise ValueError("s_offset must be > 0")
    t = np.arange(T + 1, dtype=np.float64)
    f = np.cos((t / T + s_offset) / (1 + s_offset) * (np.pi / 2)) ** 2
    abar = f / f[0]
    betas = np.minimum(1.0 - abar[1:] / abar[:-1], COSINE_MAX_BETA)
    return DiscreteSchedule(betas, "cosine", {"s_offset": float(s_offset)})


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def sigmoid_gamma(T: int, gamma_min: float, gamma_max: float) -> np.ndarray:
    """``gamma(t)`` for ``t = 1..T``, linear between the endpoints."""
    t = np.arange(1, T + 1, dtype=np.float64)
    return gamma_min + (t / T) * (gamma_max - gamma_min)


def make_sigmoid(T: int = 1000, gamma_min: float = -6.0, gamma_max: float = 6.0) -> DiscreteSchedule:
    """Schedule with marginal signal ``alpha_bar_t = sigmoid(-gamma(t))``.

    Betas are the step ratios of the target ``alpha_bar`` (starting from the
    clean ``alpha_bar_0 = 1``), clipped into ``(1e-9, 0.999)``.
    """
    if T < 2:
        raise ValueError("T must be >= 2")
    if not gamma_min < gamma_max:
        raise ValueError("gamma_min must be < gamma_max")
    abar = np.concatenate([[1.0], sigmoid(-sigmoid_gamma(T, gamma_min, gamma_max))])
    betas = np.clip(1.0 - abar[1:] / abar[:-1], *SIGMOID_BETA_CLIP)
    return DiscreteSchedule(betas, "sigmoid", {"gamma_min": float(gamma_min), "gamma_max": float(gamma_max)})


@dataclass(frozen=True, eq=False)
class SigmaLadder:
    sigmas: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigmas, dtype=np.float64)
        if s.ndim != 1 or s.size < 1 or np.any(s <= 0) or np.any(np.diff(s) >= 0):
            raise ValueError("sigmas: need a strictly decreasing sequence of positive reals")
        object.__setattr__(self, "sigmas", _freeze(s))

    @property
    def L(self) -> int:
        return self.sigmas.shape[0]

    @property
    def ratio(self) -> float:
        return float(self.sigmas[1] / self.sigmas[0]) if self.L > 1 else 1.0

    def describe(self) -> dict:
        return {"kind": "geometric", "sigma_1": float(self.sigmas[0]), "sigma_L": float(self.sigmas[-1]), "L": self.L}


def make_geometric_sigmas(sigma_1: float, sigma_L: float, L: int) -> SigmaLadder:
    if not sigma_1 > sigma_L > 0:
        raise ValueError(f"need sigma_1 > sigma_L > 0, got {sigma_1}, {sigma_L}")
    if L < 2:
        raise ValueError("L must be >= 2")
    i = np.arange(L, dtype=np.float64)
    sig = sigma_1 * (sigma_L / sigma_1) ** (i / (L - 1))
    sig[-1] = sigma_L
    return SigmaLadder(sig)


@dataclass(frozen=True, eq=False)
class KarrasSteps:
    sigma_min: float
    sigma_max: float
    rho: float
    N: int
    values: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 0 < self.sigma_min < self.sigma_max:
            raise ValueError("need 0 < sigma_min < sigma_max")
        if not self.rho > 0:
            raise ValueError("rho must be > 0")
        if self.N < 2:
            raise ValueError("N must be >= 2")
        i = np.arange(self.N, dtype=np.float64)
        lo, hi = self.sigma_min ** (1 / self.rho), self.sigma_max ** (1 / self.rho)
        sig = (hi + i / (self.N - 1) * (lo - hi)) ** self.rho
        # pin the endpoints; the power round-trip is off by an ulp or so
        sig[0], sig[-1] = self.sigma_max, self.sigma_min
        object.__setattr__(self, "values", _freeze(np.append(sig, 0.0)))


def karras_steps(sigma_min: float, sigma_max: float, rho: float = 7.0, N: int = 18) -> KarrasSteps:
    return KarrasSteps(float(sigma_min), float(sigma_max), float(rho), int(N))


VP_DEFAULTS = {"beta_min": 0.1, "beta_d": 19.9, "eps_s": 1e-3}
VE_DEFAULTS = {"sigma_min": 0.01, "sigma_max": 50.0}
KARRAS_DEFAULTS = {"sigma_min": 0.002, "sigma_max": 80.0, "rho": 7.0}


@dataclass(frozen=True)
class ContinuousSchedule:
    """Continuous-time schedule ``x_t = s(t) * (x_0 + sigma(t) * eps)``.

    Kinds: ``"vp"`` (``s = exp(-X/2)``, ``sigma = sqrt(exp(X) - 1)`` with
    ``X = beta_d t^2 / 2 + beta_min t``), ``"ve"`` (``sigma = sqrt(t)``) and
    ``"karras"`` (``sigma = t``); the latter two have ``s = 1``.
    """

    kind: str
    beta_min: float = 0.0
    beta_d: float = 0.0
    eps_s: float = 0.0
    sigma_min: float = 0.0
    sigma_max: float = 0.0
    rho: float = 7.0

    # -- VP helpers ----------------------------------------------------
    def _X(self, t):
        return 0.5 * self.beta_d * t * t + self.beta_min * t

    def beta(self, t):
        """VP instantaneous rate ``beta(t) = dX/dt``."""
        return self.beta_d * np.asarray(t, dtype=np.float64) + self.beta_min

    # -- schedule functions --------------------------------------------
    def sigma(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "vp":
            return np.sqrt(np.expm1(self._X(t)))
        if self.kind == "ve":
            return np.sqrt(t)
        return t * 1.0

    def sigma_dot(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "vp":
            X = self._X(t)
            return self.beta(t) * np.exp(X) / (2.0 * np.sqrt(np.expm1(X)))
        if self.kind == "ve":
            return 0.5 / np.sqrt(t)
        return np.ones_like(t)

    def s(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "vp":
            return np.exp(-0.5 * self._X(t))
        return np.ones_like(t)

    def s_dot(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "vp":
            return -0.5 * self.beta(t) * np.exp(-0.5 * self._X(t))
        return np.zeros_like(t)

    def sigma_inv(self, sigma):
        sigma = np.asarray(sigma, dtype=np.float64)
        if self.kind == "vp":
            X = np.log1p(sigma * sigma)
            if self.beta_d == 0:
                return X / self.beta_min
            return (np.sqrt(self.beta_min**2 + 2.0 * self.beta_d * X) - self.beta_min) / self.beta_d
        if self.kind == "ve":
            return sigma * sigma
        return sigma * 1.0

    @property
    def t_min(self) -> float:
        if self.kind == "vp":
            return self.eps_s
        if self.kind == "ve":
            return self.sigma_min**2
        return self.sigma_min

    @property
    def t_max(self) -> float:
        if self.kind == "vp":
            return 1.0
        if self.kind == "ve":
            return self.sigma_max**2
        return self.sigma_max

    def kernel(self, t: float) -> KernelParams:
        """Perturbation kernel of the marginal at time ``t``."""
        s = float(self.s(t))
        sig = float(self.sigma(t))
        return KernelParams(s, (s * sig) ** 2)

    def drift_coef(self, t):
        """Forward SDE drift is ``drift_coef(t) * x``."""
        if self.kind == "vp":
            return -0.5 * self.beta(t)
        return np.zeros_like(np.asarray(t, dtype=np.float64))

    def diffusion_sq(self, t):
        """Squared forward diffusion coefficient ``g(t)^2``."""
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "vp":
            return self.beta(t)
        if self.kind == "ve":
            return np.ones_like(t)
        return 2.0 * t

    def prior_std(self) -> float:
        t = self.t_max
        return float(self.s(t) * self.sigma(t))

    def time_steps(self, N: int) -> np.ndarray:
        """Default ODE time grid with ``N`` nodes, followed by ``t = 0``.

        VP: linear in time from 1 down to ``eps_s``; VE: geometric in ``sigma^2``;
        Karras: the rho-warped sigma steps.
        """
        if N < 2:
            raise ValueError("N must be >= 2")
        i = np.arange(N, dtype=np.float64)
        if self.kind == "vp":
            t = 1.0 + i / (N - 1) * (self.eps_s - 1.0)
        elif self.kind == "ve":
            t = self.sigma_max**2 * (self.sigma_min**2 / self.sigma_max**2) ** (i / (N - 1))
            t[-1] = self.sigma_min**2
        else:
            t = karras_steps(self.sigma_min, self.sigma_max, self.rho, N).values[:-1].copy()
        return np.append(t, 0.0)

    def describe(self) -> dict:
        if self.kind == "vp":
            return {"kind": "vp", "beta_min": self.beta_min, "beta_d": self.beta_d, "eps_s": self.eps_s}
        if self.kind == "ve":
            return {"kind": "ve", "sigma_min": self.sigma_min, "sigma_max": self.sigma_max}
        return {"kind": "karras", "sigma_min": self.sigma_min, "sigma_max": self.sigma_max, "rho": self.rho}


def make_continuous(kind: str, **params) -> ContinuousSchedule:
    kind = kind.lower()
    if kind == "vp":
        p = {**VP_DEFAULTS, **params}
        _only(kind, p, VP_DEFAULTS)
        if not p["beta_min"] > 0 or not p["beta_d"] >= 0 or not 0 < p["eps_s"] < 1:
            raise ValueError("vp: need beta_min > 0, beta_d >= 0, 0 < eps_s < 1")
        return ContinuousSchedule("vp", beta_min=float(p["beta_min"]), beta_d=float(p["beta_d"]), eps_s=float(p["eps_s"]))
    if kind in ("ve", "karras"):
        defaults = VE_DEFAULTS if kind == "ve" else KARRAS_DEFAULTS
        p = {**defaults, **params}
        _only(kind, p, defaults)
        if not 0 < p["sigma_min"] < p["sigma_max"]:
            raise ValueError(f"{kind}: need 0 < sigma_min < sigma_max")
        if kind == "karras" and not p["rho"] > 0:
            raise ValueError("karras: rho must be > 0")
        return ContinuousSchedule(
            kind,
            sigma_min=float(p["sigma_min"]),
            sigma_max=float(p["sigma_max"]),
            rho=float(p.get("rho", 7.0)),
        )
    raise ValueError(f"unknown continuous schedule kind {kind!r}")


def _only(kind, p, allowed):
    extra = sorted(set(p) - set(allowed))
    if extra:
        raise ValueError(f"{kind}: unknown parameter(s) {', '.join(extra)}")
