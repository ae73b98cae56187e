"""Analytic Gaussian-mixture rectified flow with classifier-free guidance.

The generative backbone is a rectified flow over a Gaussian mixture with
diagonal covariances: x_t = (1-t) x0 + t eps with x0 ~ mixture and
eps ~ N(0, I). Everything is closed-form:

* marginal at time t: mixture with means (1-t) mu_k and diagonal
  covariances (1-t)^2 S_k + t^2 I;
* velocity field v(x, t) = E[eps - x0 | x_t = x], a responsibility-
  weighted sum of per-component Gaussian conditional expectations;
* score: grad log q_t(x) = -((1-t) v(x, t) + x) / t, the affine relation
  tested against finite differences of the closed-form log-density.

Because no training is involved, every sampler/verifier behavior is
exactly reproducible. The Euler sampler is deterministic: the output is a
pure function of the initial noise, which is the premise of searching over
that noise. One Euler step counts as one NFE.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, TimeDomainError

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MixtureModel:
    """Gaussian mixture data distribution with one class label per component."""

    means: np.ndarray       # (K, d)
    variances: np.ndarray   # (K, d) diagonal covariances, strictly positive
    weights: np.ndarray     # (K,), sums to 1
    labels: tuple[str, ...]

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        weights = np.asarray(self.weights, dtype=np.float64)
        if variances.shape != means.shape:
            raise ValueError("variances must match means shape (K, d)")
        if weights.shape != (means.shape[0],):
            raise ValueError("weights must have one entry per component")
        if np.any(variances <= 0):
            raise ValueError("diagonal covariances must be strictly positive")
        if not math.isclose(weights.sum(), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"weights sum to {weights.sum()}, expected 1")
        if len(self.labels) != means.shape[0]:
            raise ValueError("need one label per component")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def dimension(self) -> int:
        return self.means.shape[1]

    def component_mask(self, condition: str | None) -> np.ndarray:
        if condition is None:
            return np.ones(len(self.labels), dtype=bool)
        mask = np.array([lab == condition for lab in self.labels])
        if not mask.any():
            raise ValueError(f"unknown label {condition!r}")
        return mask

    def analytic_mean(self) -> np.ndarray:
        return self.weights @ self.means

    def analytic_variance(self) -> np.ndarray:
        # law of total variance, per coordinate
        m = self.analytic_mean()
        return self.weights @ (self.variances + (self.means - m) ** 2)


@dataclass(frozen=True)
class FlowSchedule:
    """Uniform time grid from t=1 down to t=0 for Euler integration."""

    steps: int = 20
    sigma_floor: float = 1e-3

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(1.0, 0.0, self.steps + 1)


@dataclass(frozen=True)
class GuidanceConfig:
    """CFG interpolation: v_guided = (1 - beta) v_uncond + beta v_cond."""

    beta: float = 0.7
    condition: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")


class NfeCounter:
    """Increment-only tally of denoising steps, safe to share across threads."""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    def add(self, n: int) -> None:
        with self._lock:
            self._count += n

    @property
    def count(self) -> int:
        return self._count


def _posterior_stats(model: MixtureModel, x: np.ndarray, t: float,
                     condition: str | None):
    """Responsibilities and per-component moments of the time-t marginal."""
    mask = model.component_mask(condition)
    mu = model.means[mask]
    s2 = model.variances[mask]
    w = model.weights[mask]
    a = 1.0 - t
    m = a * mu                      # (K, d) component means at time t
    var = a * a * s2 + t * t        # (K, d) diagonal marginal variances
    diff = x[None, :] - m
    log_n = -0.5 * np.sum(diff * diff / var + np.log(var) + _LOG_2PI, axis=1)
    log_r = np.log(w) + log_n
    log_r -= log_r.max()
    r = np.exp(log_r)
    r /= r.sum()
    return r, mu, s2, m, var, diff


def velocity(model: MixtureModel, x: np.ndarray, t: float,
             condition: str | None = None) -> np.ndarray:
    """Closed-form rectified-flow velocity E[eps - x0 | x_t = x].

    Conditional velocity restricts the mixture to components matching the
    label (weights renormalized); unconditional uses the full mixture.
    """
    x = np.asarray(x, dtype=np.float64)
    if t <= 0:
        raise TimeDomainError(f"velocity requires t > 0, got {t}")
    if not np.all(np.isfinite(x)):
        raise NumericError("velocity input is non-finite")
    a = 1.0 - t
    r, mu, s2, m, var, diff = _posterior_stats(model, x, t, condition)
    # E[eps - x0 | x_t, k] = -mu_k + (t - (1-t) s_k^2) / var_k * (x - m_k)
    per_comp = -mu + (t - a * s2) / var * diff
    return r @ per_comp


def log_density(model: MixtureModel, x: np.ndarray, t: float,
                condition: str | None = None) -> float:
    """log q_t(x) of the closed-form mixture marginal."""
    x = np.asarray(x, dtype=np.float64)
    if t <= 0:
        raise TimeDomainError(f"log_density requires t > 0, got {t}")
    mask = model.component_mask(condition)
    mu = model.means[mask]
    s2 = model.variances[mask]
    w = model.weights[mask] / model.weights[mask].sum()
    a = 1.0 - t
    m = a * mu
    var = a * a * s2 + t * t
    diff = x[None, :] - m
    log_n = -0.5 * np.sum(diff * diff / var + np.log(var) + _LOG_2PI, axis=1)
    terms = np.log(w) + log_n
    hi = terms.max()
    return float(hi + np.log(np.exp(terms - hi).sum()))


def score(model: MixtureModel, x: np.ndarray, t: float,
          condition: str | None = None) -> np.ndarray:
    """grad_x log q_t(x), closed form."""
    x = np.asarray(x, dtype=np.float64)
    if t <= 0:
        raise TimeDomainError(f"score requires t > 0, got {t}")
    r, _, _, m, var, diff = _posterior_stats(model, x, t, condition)
    return r @ (-diff / var)


def cfg_velocity(model: MixtureModel, x: np.ndarray, t: float,
                 g: GuidanceConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unconditional, conditional, and guided velocity fields at (x, t)."""
    if g.condition is None:
        raise ValueError("cfg_velocity requires a condition label")
    v_uncond = velocity(model, x, t, condition=None)
    v_cond = velocity(model, x, t, condition=g.condition)
    v_guided = (1.0 - g.beta) * v_uncond + g.beta * v_cond
    return v_uncond, v_cond, v_guided


def _integrate(model: MixtureModel, schedule: FlowSchedule, g: GuidanceConfig,
               x_init: np.ndarray, nfe_counter: NfeCounter | None,
               accumulate_fk: bool) -> tuple[np.ndarray, float]:
    x = np.array(x_init, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.dimension:
        raise ValueError(
            f"x_init must be a flat vector of length {model.dimension}"
        )
    grid = schedule.grid
    coeff = g.beta * (1.0 - g.beta)
    w = 0.0
    for k in range(schedule.steps):
        t = grid[k]
        dt = grid[k + 1] - grid[k]  # negative: integrating from t=1 to 0
        if g.condition is None:
            v_guided = velocity(model, x, t, condition=None)
        else:
            v_uncond, v_cond, v_guided = cfg_velocity(model, x, t, g)
            if accumulate_fk and coeff > 0.0:
                sigma_t = max(t, schedule.sigma_floor)
                dv = v_uncond - v_cond
                w += coeff / (2.0 * sigma_t * sigma_t) * float(dv @ dv) * abs(dt)
        x = x + v_guided * dt
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite state at integration step {k}")
        if nfe_counter is not None:
            nfe_counter.add(1)
    return x, w


def sample(model: MixtureModel, schedule: FlowSchedule, g: GuidanceConfig,
           x_init: np.ndarray, nfe_counter: NfeCounter | None = None) -> np.ndarray:
    """Deterministic Euler integration from t=1 to t=0.

    Increments ``nfe_counter`` by exactly ``schedule.steps``.
    """
    out, _ = _integrate(model, schedule, g, x_init, nfe_counter, accumulate_fk=False)
    return out


def sample_with_fk(model: MixtureModel, schedule: FlowSchedule, g: GuidanceConfig,
                   x_init: np.ndarray,
                   nfe_counter: NfeCounter | None = None) -> tuple[np.ndarray, float]:
    """One Euler pass returning both the sample and the FK log-weight."""
    return _integrate(model, schedule, g, x_init, nfe_counter, accumulate_fk=True)


def fk_log_weight(model: MixtureModel, schedule: FlowSchedule, g: GuidanceConfig,
                  x_init: np.ndarray,
                  nfe_counter: NfeCounter | None = None) -> float:
    """Accumulated CFG-divergence log-weight along the guided trajectory.

    w = sum_k beta (1 - beta) / (2 max(t_k, floor)^2) * ||v1 - v2||^2 * dt,
    evaluated on the same Euler path as :func:`sample`. Always >= 0; the
    noise scale sigma_t is taken to be t itself (the interpolant's noise
    scale), floored to avoid blow-up near t=0.
    """
    if g.condition is None:
        raise ValueError("fk_log_weight requires a condition label")
    _, w = _integrate(model, schedule, g, x_init, nfe_counter, accumulate_fk=True)
    return w


def fk_increment(v_uncond: np.ndarray, v_cond: np.ndarray, beta: float,
                 sigma_t: float, dt: float) -> float:
    """Single-step FK increment at a fixed state; exposed for testing."""
    dv = np.asarray(v_uncond) - np.asarray(v_cond)
    return beta * (1.0 - beta) / (2.0 * sigma_t * sigma_t) * float(dv @ dv) * abs(dt)
