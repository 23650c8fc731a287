"""Acquisition functions over the forest surrogate.

Three criteria are supported, all reduced to a single "higher is more
promising" score:

* lcb(mu, sigma, beta) = mu - beta * sigma, to be minimized; `score` negates
  it so one maximizer serves every criterion.
* ei(mu, sigma, y_plus) = (y_plus - mu) * cdf(Z) + sigma * pdf(Z) with
  Z = (y_plus - mu) / sigma for sigma > 0, and exactly 0 at sigma = 0.
* aei(mu, sigma, y_plus, sigma_eps) = ei * (1 - sigma_eps /
  sqrt(sigma_eps^2 + sigma^2)), again 0 at sigma = 0. The damping factor
  multiplies the whole expected improvement.

y_plus is the incumbent: the lowest feasible objective observed so far
(minimization). When a feasibility model is supplied and weighting is on,
scores are multiplied by the predicted feasibility probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc as _erfc_vec

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

ACQUISITION_KINDS = ("ei", "aei", "lcb")


@dataclass(frozen=True)
class AcqConfig:
    kind: str = "ei"
    beta: float = 1.0
    sigma_eps: float = 0.0
    feasibility_weighting: bool = True

    def __post_init__(self):
        if self.kind not in ACQUISITION_KINDS:
            raise ValueError(f"unknown acquisition {self.kind!r}; use one of {ACQUISITION_KINDS}")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be >= 0")


@dataclass(frozen=True)
class IncumbentState:
    """Best feasible objective observed so far (None before the first one)."""

    y_plus: float | None


def std_normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) * _INV_SQRT_2PI


def std_normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / _SQRT2)


def lcb(mu: float, sigma: float, beta: float) -> float:
    """Lower confidence bound; smaller is more promising."""
    return mu - beta * sigma


def ei(mu: float, sigma: float, y_plus: float) -> float:
    if sigma <= 0.0:
        return 0.0
    z = (y_plus - mu) / sigma
    return (y_plus - mu) * std_normal_cdf(z) + sigma * std_normal_pdf(z)


def aei(mu: float, sigma: float, y_plus: float, sigma_eps: float) -> float:
    if sigma <= 0.0:
        return 0.0
    damp = 1.0 - sigma_eps / math.sqrt(sigma_eps * sigma_eps + sigma * sigma)
    return ei(mu, sigma, y_plus) * damp


def _ei_batch(mu: np.ndarray, sigma: np.ndarray, y_plus: float) -> np.ndarray:
    out = np.zeros_like(mu)
    pos = sigma > 0.0
    if np.any(pos):
        s = sigma[pos]
        gap = y_plus - mu[pos]
        z = gap / s
        cdf = 0.5 * _erfc_vec(-z / _SQRT2)
        pdf = np.exp(-0.5 * z * z) * _INV_SQRT_2PI
        out[pos] = gap * cdf + s * pdf
    return out


def score_batch(model, feas_model, X: np.ndarray, config: AcqConfig,
                incumbent: IncumbentState) -> np.ndarray:
    """Promise score for each row of X; higher is better.

    EI/AEI are used as-is and LCB is negated, so one maximizer serves all
    three. With feasibility weighting on and a feasibility model present,
    EI/AEI are multiplied by the predicted feasibility probability. The
    weighted LCB score is p(x) * max(y_plus - lcb(x), 0): multiplying the
    plain negated LCB by p would reward low-probability regions whenever the
    score is negative (which it always is for positive costs), so the score
    is referenced to the incumbent first.
    """
    X = np.atleast_2d(X)
    mu, sigma = model.predict_batch(X)
    weighting = config.feasibility_weighting and feas_model is not None
    if config.kind == "lcb":
        bound = mu - config.beta * sigma
        if weighting and incumbent.y_plus is not None:
            return feas_model.prob_batch(X) * np.maximum(incumbent.y_plus - bound, 0.0)
        return -bound
    if incumbent.y_plus is None:
        raise ValueError("EI/AEI need an incumbent value")
    vals = _ei_batch(mu, sigma, incumbent.y_plus)
    if config.kind == "aei":
        damp = np.ones_like(sigma)
        pos = sigma > 0.0
        se = config.sigma_eps
        damp[pos] = 1.0 - se / np.sqrt(se * se + sigma[pos] ** 2)
        vals = vals * damp
    if weighting:
        vals = vals * feas_model.prob_batch(X)
    return vals


def score(model, feas_model, x: np.ndarray, config: AcqConfig,
          incumbent: IncumbentState) -> float:
    return float(score_batch(model, feas_model, np.atleast_2d(x), config, incumbent)[0])
