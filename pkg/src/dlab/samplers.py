"""Sampling algorithms driven by the exact oracles in :mod:`dlab.targets`.

Discrete-time: ancestral (Markovian) DDPM, deterministic DDIM, annealed Langevin.
Continuous-time: reverse-SDE Euler-Maruyama, probability-flow ODE with Euler or
Heun steps, and the churn sampler (noise re-injection before each Heun step).

Every sampler returns a :class:`Trajectory` and is a pure function of its
arguments and random stream. All ``n`` chains share one generator; draws are
always taken as whole ``(n, d)`` blocks in a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .guidance import GuidanceAttachment, classifier_grad, guided_eps, guided_mean_shift
from .rng import as_generator
from .schedules import ContinuousSchedule, DiscreteSchedule, KarrasSteps, SigmaLadder
from .targets import GaussianMixture, KernelParams, eps_oracle, perturb, perturbed_score, gmm_score

GAMMA_CAP = math.sqrt(2.0) - 1.0

Callback = Callable[[int, float, np.ndarray], None]


@dataclass(frozen=True)
class ChurnParams:
    s_churn: float = 0.0
    s_tmin: float = 0.0
    s_tmax: float = float("inf")
    s_noise: float = 1.0

    def __post_init__(self):
        if not self.s_churn >= 0:
            raise ValueError("s_churn must be >= 0")
        if not 0 <= self.s_tmin <= self.s_tmax:
            raise ValueError("need 0 <= s_tmin <= s_tmax")
        if not self.s_noise > 0:
            raise ValueError("s_noise must be > 0")


# Grid-searched churn settings (S_churn, S_tmin, S_tmax, S_noise).
CHURN_PRESETS = {
    "cifar10_vp": ChurnParams(30.0, 0.01, 1.0, 1.007),
    "cifar10_ve": ChurnParams(80.0, 0.05, 1.0, 1.007),
    "imagenet": ChurnParams(40.0, 0.05, 50.0, 1.003),
}


@dataclass
class Trajectory:
    """Sampler output. ``states`` holds ``(step, sigma, chain-0 state)`` rows when recorded."""

    final: np.ndarray
    nfe: int
    states: list | None = None


class _Observer:
    def __init__(self, record: bool, callback: Callback | None):
        self.states = [] if record else None
        self.callback = callback

    def __call__(self, step, sigma, x):
        if self.states is not None:
            self.states.append((step, float(sigma), x[0].copy()))
        if self.callback is not None:
            self.callback(step, float(sigma), x)


def _init(gen, n, d, std, x_init):
    if x_init is not None:
        x = np.array(x_init, dtype=np.float64)
        if x.shape != (n, d):
            raise ValueError(f"x_init must have shape {(n, d)}, got {x.shape}")
        return x
    return std * gen.standard_normal((n, d))


def _guided(guidance):
    return guidance is not None


# ---------------------------------------------------------------------
# discrete-time samplers
# ---------------------------------------------------------------------


def sample_ancestral(
    gmm: GaussianMixture,
    sched: DiscreteSchedule,
    n: int,
    rng,
    guidance: GuidanceAttachment | None = None,
    variance: str = "beta",
    x_init=None,
    callback: Callback | None = None,
    record: bool = False,
) -> Trajectory:
    """Markovian reverse chain ``t = T..1`` with reverse variance ``beta_t`` (or the posterior variance)."""
    if variance not in ("beta", "posterior"):
        raise ValueError("variance must be 'beta' or 'posterior'")
    gen = as_generator(rng)
    obs = _Observer(record, callback)
    x = _init(gen, n, gmm.dim, 1.0, x_init)
    obs(0, sched.sigma(sched.T), x)
    for step, t in enumerate(range(sched.T, 0, -1), start=1):
        k = sched.kernel(t)
        ab = sched.alpha_bar(t)
        beta = sched.betas[t - 1]
        eps = eps_oracle(gmm, k, x)
        mean = (x - beta / math.sqrt(1.0 - ab) * eps) / math.sqrt(sched.alphas[t - 1])
        var = beta if variance == "beta" else beta * (1.0 - sched.alpha_bar(t - 1)) / (1.0 - ab)
        if _guided(guidance):
            grad = classifier_grad(guidance, gmm, k, x)
            mean = guided_mean_shift(mean, var, grad, guidance.scale)
        if t > 1:
            x = mean + math.sqrt(var) * gen.standard_normal(x.shape)
        else:
            x = mean
        obs(step, sched.sigma(t - 1), x)
    return Trajectory(x, sched.T, obs.states)


def ddim_timesteps(T: int, stride: int) -> list[int]:
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if stride > T:
        raise ValueError(f"stride {stride} exceeds T={T}")
    return list(range(T, 0, -stride))


def sample_ddim(
    gmm: GaussianMixture,
    sched: DiscreteSchedule,
    n: int,
    rng,
    guidance: GuidanceAttachment | None = None,
    stride: int = 1,
    x_init=None,
    callback: Callback | None = None,
    record: bool = False,
) -> Trajectory:
    """Deterministic (eta = 0) DDIM over ``T, T - stride, ...``, finishing at the clean level."""
    ts = ddim_timesteps(sched.T, stride)
    gen = as_generator(rng)
    obs = _Observer(record, callback)
    x = _init(gen, n, gmm.dim, 1.0, x_init)
    obs(0, sched.sigma(ts[0]), x)
    for step, (t, tp) in enumerate(zip(ts, ts[1:] + [0]), start=1):
        k = sched.kernel(t)
        ab, abp = sched.alpha_bar(t), sched.alpha_bar(tp)
        eps = eps_oracle(gmm, k, x)
        if _guided(guidance):
            eps = guided_eps(eps, ab, classifier_grad(guidance, gmm, k, x), guidance.scale)
        x0 = (x - math.sqrt(1.0 - ab) * eps) / math.sqrt(ab)
        x = math.sqrt(abp) * x0 + math.sqrt(1.0 - abp) * eps
        obs(step, sched.sigma(tp), x)
    return Trajectory(x, len(ts), obs.states)


def sample_langevin_annealed(
    gmm: GaussianMixture,
    ladder: SigmaLadder,
    eps_scale: float,
    inner_T: int,
    n: int,
    rng,
    x_init=None,
    callback: Callback | None = None,
    record: bool = False,
) -> Trajectory:
    """Annealed Langevin dynamics with step ``eps_scale * sigma_i^2 / sigma_L^2`` at level ``i``.

    Levels run from the largest sigma to the smallest; chains start at
    ``N(0, sigma_1^2 I)``.
    """
    if not eps_scale > 0:
        raise ValueError("eps_scale must be > 0")
    if inner_T < 1:
        raise ValueError("inner_T must be >= 1")
    gen = as_generator(rng)
    obs = _Observer(record, callback)
    sig_L = ladder.sigmas[-1]
    x = _init(gen, n, gmm.dim, ladder.sigmas[0], x_init)
    obs(0, ladder.sigmas[0], x)
    step = 0
    for sig in ladder.sigmas:
        alpha = eps_scale * sig**2 / sig_L**2
        g = perturb(gmm, KernelParams.ve(sig))
        half, root = 0.5 * alpha, math.sqrt(alpha)
        for _ in range(inner_T):
            z = gen.standard_normal(x.shape)
            x = x + half * gmm_score(g, x) + root * z
            step += 1
        obs(step, sig, x)
    return Trajectory(x, ladder.L * inner_T, obs.states)


def langevin_step_sizes(ladder: SigmaLadder, eps_scale: float) -> np.ndarray:
    return eps_scale * ladder.sigmas**2 / ladder.sigmas[-1] ** 2


# ---------------------------------------------------------------------
# continuous-time samplers
# ---------------------------------------------------------------------


def sample_euler_maruyama(
    gmm: GaussianMixture,
    cs: ContinuousSchedule,
    steps: int,
    n: int,
    rng,
    x_init=None,
    callback: Callback | None = None,
    record: bool = False,
) -> Trajectory:
    """Reverse-time SDE ``dx = [f - g^2 score] dt + g dw`` on a uniform grid from ``t_max`` to ``t_min``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    gen = as_generator(rng)
    obs = _Observer(record, callback)
    ts = np.linspace(cs.t_max, cs.t_min, steps + 1)
    x = _init(gen, n, gmm.dim, cs.prior_std(), x_init)
    obs(0, cs.sigma(ts[0]), x)
    for i in range(steps):
        t, dt = ts[i], ts[i] - ts[i + 1]
        score = perturbed_score(gmm, cs.kernel(t), x)
        g2 = float(cs.diffusion_sq(t))
        drift = float(cs.drift_coef(t)) * x - g2 * score
        x = x - drift * dt + math.sqrt(g2 * dt) * gen.standard_normal(x.shape)
        obs(i + 1, cs.sigma(ts[i + 1]), x)
    return Trajectory(x, steps, obs.states)


def simulate_forward(cs: ContinuousSchedule, x0, ts, rng) -> np.ndarray:
    """Forward SDE by Euler-Maruyama along increasing times ``ts``; diagnostic use."""
    gen = as_generator(rng)
    x = np.array(x0, dtype=np.float64)
    for t, tn in zip(ts[:-1], ts[1:]):
        dt = tn - t
        x = x + float(cs.drift_coef(t)) * x * dt + math.sqrt(float(cs.diffusion_sq(t)) * dt) * gen.standard_normal(x.shape)
    return x


def ode_drift(gmm: GaussianMixture, cs: ContinuousSchedule, x, t: float) -> np.ndarray:
    """Probability-flow derivative ``(s'/s) x - s^2 sigma' sigma grad log p_t(x)``."""
    s = float(cs.s(t))
    sig = float(cs.sigma(t))
    score = perturbed_score(gmm, KernelParams(s, (s * sig) ** 2), x)
    return (float(cs.s_dot(t)) / s) * x - (s * s * float(cs.sigma_dot(t)) * sig) * score


def grid_times(cs: ContinuousSchedule, grid) -> np.ndarray:
    """Times for a step grid: KarrasSteps sigmas are mapped through the schedule's inverse."""
    if isinstance(grid, KarrasSteps):
        t = cs.sigma_inv(grid.values)
        t[-1] = 0.0
        return t
    t = np.asarray(grid, dtype=np.float64)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) >= 0):
        raise ValueError("time grid must be a strictly decreasing 1-D array with >= 2 entries")
    return t


def _heun_step(gmm, cs, x, t, tn, second_order):
    """One step from ``t`` to ``tn``; returns the new state and the oracle calls used."""
    d1 = ode_drift(gmm, cs, x, t)
    x_e = x + (tn - t) * d1
    if not second_order or float(cs.sigma(tn)) == 0.0:
        return x_e, 1
    d2 = ode_drift(gmm, cs, x_e, tn)
    return x + (tn - t) * (0.5 * (d1 + d2)), 2


def sample_ode(
    gmm: GaussianMixture,
    cs: ContinuousSchedule,
    grid,
    solver: str,
    n: int,
    rng,
    x_init=None,
    callback: Callback | None = None,
    record: bool = False,
) -> Trajectory:
    """Integrate the probability-flow ODE along ``grid`` (KarrasSteps or a decreasing time array).

    Heun applies its corrector except on a step that lands on ``sigma = 0``.
    """
    if solver not in ("euler", "heun"):
        raise ValueError("solver must be 'euler' or 'heun'")
    ts = grid_times(cs, grid)
    gen = as_generator(rng)
    obs = _Observer(record, callback)
    x = _init(gen, n, gmm.dim, float(cs.s(ts[0]) * cs.sigma(ts[0])), x_init)
    obs(0, cs.sigma(ts[0]), x)
    nfe = 0
    for i in range(ts.size - 1):
        x, used = _heun_step(gmm, cs, x, ts[i], ts[i + 1], solver == "heun")
        nfe += used
        obs(i + 1, cs.sigma(ts[i + 1]), x)
    return Trajectory(x, nfe, obs.states)


def churn_gamma(cp: ChurnParams, sigma: float, n_steps: int) -> float:
    if cp.s_tmin <= sigma <= cp.s_tmax:
        return min(cp.s_churn / n_steps, GAMMA_CAP)
    return 0.0


def sample_stochastic_churn(
    gmm: GaussianMixture,
    cs: ContinuousSchedule,
    grid,
    cp: ChurnParams,
    n: int,
    rng,
    x_init=None,
    callback: Callback | None = None,
    record: bool = False,
) -> Trajectory:
    """Heun sampler that first raises the noise level ``sigma -> sigma (1 + gamma)`` inside the churn band.

    The extra noise is added to the unscaled state ``x / s(t)``, so the scheme
    is valid for scaled (VP) schedules too. With ``gamma = 0`` the step is
    exactly the deterministic Heun step.
    """
    ts = grid_times(cs, grid)
    n_steps = ts.size - 1
    gen = as_generator(rng)
    obs = _Observer(record, callback)
    x = _init(gen, n, gmm.dim, float(cs.s(ts[0]) * cs.sigma(ts[0])), x_init)
    obs(0, cs.sigma(ts[0]), x)
    nfe = 0
    for i in range(n_steps):
        t = ts[i]
        sig = float(cs.sigma(t))
        gamma = churn_gamma(cp, sig, n_steps)
        if gamma > 0:
            sig_hat = sig * (1.0 + gamma)
            t_hat = float(cs.sigma_inv(sig_hat))
            z = gen.standard_normal(x.shape)
            y = x / float(cs.s(t)) + math.sqrt(sig_hat**2 - sig**2) * cp.s_noise * z
            x = float(cs.s(t_hat)) * y
            t = t_hat
        x, used = _heun_step(gmm, cs, x, t, ts[i + 1], True)
        nfe += used
        obs(i + 1, cs.sigma(ts[i + 1]), x)
    return Trajectory(x, nfe, obs.states)
