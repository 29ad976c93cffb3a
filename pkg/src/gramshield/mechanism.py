"""Exponential mechanism over enumerable candidate sets."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True)
class EmDistribution:
    candidates: np.ndarray
    log_weights: np.ndarray
    probabilities: np.ndarray

    def __len__(self) -> int:
        return len(self.probabilities)


def em_distribution(distances: Sequence[float], epsilon: float, sensitivity: float,
                    candidates: Sequence | None = None) -> EmDistribution:
    """Sampling law ``p_i ∝ exp(-ε d_i / 2Δ)`` computed in log space."""
    if epsilon <= 0 or sensitivity <= 0:
        raise ValueError(f"epsilon and sensitivity must be positive (got {epsilon}, {sensitivity})")
    dist = np.asarray(distances, dtype=float)
    if dist.size == 0:
        raise ValueError("empty candidate set")
    if not np.all(np.isfinite(dist)):
        raise ValueError("non-finite distance")
    logw = -epsilon * dist / (2.0 * sensitivity)
    probs = np.exp(logw - logsumexp(logw))
    cands = np.arange(dist.size) if candidates is None else np.asarray(candidates)
    return EmDistribution(cands, logw, probs)


def em_sample(dist: EmDistribution, rng: np.random.Generator):
    """Inverse-CDF draw; candidate i owns the half-open mass interval [cdf[i-1], cdf[i])."""
    cdf = np.cumsum(dist.probabilities)
    u = rng.random() * cdf[-1]
    i = int(np.searchsorted(cdf, u, side="right"))
    return dist.candidates[min(i, len(cdf) - 1)]


def em_sample_index(dist: EmDistribution, rng: np.random.Generator) -> int:
    cdf = np.cumsum(dist.probabilities)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(i, len(cdf) - 1)


def max_log_ratio(p: np.ndarray, q: np.ndarray) -> float:
    """``max_i |ln p_i - ln q_i|``; the privacy loss between two output laws."""
    return float(np.max(np.abs(np.log(p) - np.log(q))))


def tail_threshold(distances: np.ndarray, epsilon: float, sensitivity: float, zeta: float) -> float:
    """Distance above which an output counts as a utility failure (quality = -distance)."""
    distances = np.asarray(distances, dtype=float)
    best = distances.min()
    n_opt = int(np.count_nonzero(distances == best))
    return best + (2.0 * sensitivity / epsilon) * (math.log(len(distances) / n_opt) + zeta)


def exact_utility_tail(distances, epsilon: float, sensitivity: float, zeta: float) -> float:
    dist = em_distribution(distances, epsilon, sensitivity)
    thr = tail_threshold(np.asarray(distances, float), epsilon, sensitivity, zeta)
    return float(dist.probabilities[np.asarray(distances, float) >= thr].sum())


def utility_tail(distances, epsilon: float, sensitivity: float, zeta: float, trials: int,
                 rng: np.random.Generator) -> float:
    """Empirical probability that an EM draw is ``zeta``-bad.

    The utility bound says this is at most ``exp(-zeta)``.
    """
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    distances = np.asarray(distances, dtype=float)
    dist = em_distribution(distances, epsilon, sensitivity)
    thr = tail_threshold(distances, epsilon, sensitivity, zeta)
    cdf = np.cumsum(dist.probabilities)
    draws = np.minimum(np.searchsorted(cdf, rng.random(trials) * cdf[-1], side="right"), len(cdf) - 1)
    return float(np.mean(distances[draws] >= thr))


def substream(seed: int, key) -> np.random.Generator:
    """Independent generator for ``key`` (e.g. a trajectory id) under a master seed."""
    digest = hashlib.sha256(repr(key).encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *words]))
