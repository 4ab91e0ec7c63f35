"""Per-agent numeric primitives shared by every protocol.

Belief vectors are float arrays summing to one; candidate vectors are
boolean arrays. Bayesian updates run in the log domain so that long horizons
do not underflow.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np
from scipy.special import logsumexp

DEFAULT_ALPHA = 1e-3


def log_normalize(log_w: np.ndarray) -> np.ndarray:
    """Shift log-weights along the last axis so they exponentiate to a distribution."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lse = logsumexp(log_w, axis=-1, keepdims=True)
    if np.any(~np.isfinite(lse)):
        raise ValueError("belief has no mass left to normalize")
    return log_w - lse


def bayes_update_log(log_prior: np.ndarray, log_column: np.ndarray) -> np.ndarray:
    """Log-domain Bayes rule. Works row-wise on stacked beliefs."""
    return log_normalize(log_prior + log_column)


def bayes_update(prior, likelihood_column) -> np.ndarray:
    """Posterior proportional to ``likelihood_column * prior``."""
    prior = np.asarray(prior, dtype=float)
    column = np.asarray(likelihood_column, dtype=float)
    if prior.shape != column.shape:
        raise ValueError("prior and likelihood column differ in length")
    if np.any(column <= 0):
        raise ValueError("likelihood entries must be strictly positive")
    if np.any(prior < 0) or not np.any(prior > 0):
        raise ValueError("prior must be nonnegative with positive mass")
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior)
    return np.exp(bayes_update_log(log_prior, np.log(column)))


def check_alpha(alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(alpha)


def round_beliefs(pi, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Keep state j iff pi[j] > alpha / m (strict)."""
    alpha = check_alpha(alpha)
    pi = np.asarray(pi, dtype=float)
    return pi > alpha / pi.shape[-1]


def intersect(vectors: Iterable) -> np.ndarray:
    """Elementwise minimum of binary vectors."""
    stack = [np.asarray(v, dtype=bool) for v in vectors]
    if not stack:
        raise ValueError("intersect needs at least one vector")
    m = stack[0].shape
    if any(v.shape != m for v in stack):
        raise ValueError("candidate vectors differ in length")
    return np.logical_and.reduce(stack)


def normalize_candidates(psi) -> np.ndarray:
    """Uniform over the support of ``psi``; uniform over all states when empty."""
    psi = np.asarray(psi, dtype=bool)
    support = psi.sum(axis=-1, keepdims=True)
    empty = support == 0
    return np.where(empty, 1.0 / psi.shape[-1], psi / np.where(empty, 1, support))


def argmax_indicator(mu) -> np.ndarray:
    """One-hot of the largest entry; ties go to the lowest index."""
    mu = np.asarray(mu, dtype=float)
    out = np.zeros(mu.shape, dtype=bool)
    np.put_along_axis(out, np.argmax(mu, axis=-1)[..., None], True, axis=-1)
    return out
