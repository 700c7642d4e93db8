"""Per-class Gaussian emission model and the streaming EM pieces: E-step
responsibilities, one-sample stochastic gradient M-step, per-class adaptive
learning-rate decay, and candidate spawning."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ContractViolation

LOG_2PI = math.log(2.0 * math.pi)

DEFAULT_VAR_FLOOR = 1e-6


@dataclass(frozen=True)
class EmissionParams:
    """Gaussian parameters of one class plus its two adaptive learning rates."""

    mu: float
    var: float
    eta_mu: float
    eta_var: float
    born_at: int = 0

    def __post_init__(self):
        if not (self.var > 0.0):
            raise ContractViolation(f"variance must be positive, got {self.var!r}")
        if not (self.eta_mu > 0.0 and self.eta_var > 0.0):
            raise ContractViolation("learning rates must be positive")


@dataclass(frozen=True)
class CandidatePolicy:
    """How a freshly spawned class is initialized: mean at the triggering
    observation (``mu0=None``) or at a fixed value, variance ``var_init``."""

    mu0: float | None = None
    var_init: float = 1.0

    def __post_init__(self):
        if not (self.var_init > 0.0):
            raise ConfigError(f"candidate var_init must be positive, got {self.var_init!r}")


def emission_loglik(x: float, p: EmissionParams) -> float:
    """log N(x; mu, var)."""
    return -0.5 * (LOG_2PI + math.log(p.var)) - (x - p.mu) ** 2 / (2.0 * p.var)


def e_step(x: float, class_prior, params) -> np.ndarray:
    """Responsibilities: prior times Gaussian likelihood, normalized.

    Computed in log domain, so arbitrarily small likelihoods cannot zero
    out the whole vector.
    """
    prior = np.asarray(class_prior, dtype=float)
    if prior.size != len(params):
        raise ContractViolation(
            f"{prior.size} prior entries for {len(params)} classes"
        )
    loglik = np.array([emission_loglik(x, p) for p in params])
    with np.errstate(divide="ignore"):
        score = loglik + np.log(prior)
    m = float(np.max(score))
    if not math.isfinite(m):
        raise ContractViolation("class prior has no positive entry")
    w = np.exp(score - m)
    return w / w.sum()


def gaussian_gradients(x: float, mu: float, var: float, gamma: float) -> tuple[float, float]:
    """Gradient of gamma * log N(x; mu, var) w.r.t. (mu, var)."""
    d = x - mu
    g_mu = gamma * d / var
    g_var = gamma * (d * d / (2.0 * var * var) - 1.0 / (2.0 * var))
    return g_mu, g_var


def m_step(
    p: EmissionParams,
    x: float,
    gamma: float,
    var_floor: float = DEFAULT_VAR_FLOOR,
    log_space: bool = False,
) -> EmissionParams:
    """One stochastic gradient ascent step on this observation's term of the
    expected complete-data log likelihood.

    The variance moves in its natural parameterization by default, clamped
    at ``var_floor``; with ``log_space=True`` it moves in log variance
    instead (the chain-rule gradient is the natural one times var).
    Learning rates are untouched; decay is a separate operation.
    """
    g_mu, g_var = gaussian_gradients(x, p.mu, p.var, gamma)
    mu = p.mu + p.eta_mu * g_mu
    if log_space:
        # clamp keeps a wildly mis-scaled step finite instead of overflowing
        logv = min(math.log(p.var) + p.eta_var * g_var * p.var, 700.0)
        var = math.exp(logv)
    else:
        var = p.var + p.eta_var * g_var
    return replace(p, mu=mu, var=max(var_floor, var))


def decay_rates(params, k_star: int, decay: float):
    """Shrink both learning rates of the winning class by ``decay``;
    every other class keeps its rates."""
    if not (0.0 < decay < 1.0):
        raise ContractViolation(f"decay must lie in (0, 1), got {decay!r}")
    if not (1 <= k_star <= len(params)):
        raise ContractViolation(f"winning class {k_star} out of range 1..{len(params)}")
    out = list(params)
    p = out[k_star - 1]
    out[k_star - 1] = replace(
        p, eta_mu=(1.0 - decay) * p.eta_mu, eta_var=(1.0 - decay) * p.eta_var
    )
    return out


def spawn_candidate(
    x: float,
    policy: CandidatePolicy,
    eta_init: tuple[float, float],
    born_at: int = 0,
    var_floor: float = DEFAULT_VAR_FLOOR,
) -> EmissionParams:
    """Fresh candidate class with policy-controlled mean and fresh rates."""
    mu = x if policy.mu0 is None else policy.mu0
    return EmissionParams(
        mu=float(mu),
        var=max(var_floor, policy.var_init),
        eta_mu=eta_init[0],
        eta_var=eta_init[1],
        born_at=born_at,
    )


def map_assignment(responsibilities) -> int:
    """1-based argmax; ties break toward the lowest class id, so an existing
    class beats the candidate on an exact tie."""
    r = np.asarray(responsibilities, dtype=float)
    if r.size == 0:
        raise ContractViolation("empty responsibility vector")
    return int(np.argmax(r)) + 1
