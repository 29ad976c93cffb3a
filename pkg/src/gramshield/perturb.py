"""Overlapping n-gram perturbation of region trajectories."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distance import gram_distances
from .mechanism import em_distribution, em_sample_index
from .model import RegionModel


def split_budget(epsilon: float, length: int, n: int, separate_time: bool = False) -> float:
    """Per-call budget; ``separate_time`` adds one extra call per point (POI and time perturbed apart)."""
    if epsilon <= 0 or length < 1 or n < 1:
        raise ValueError("epsilon, length and n must be positive")
    calls = (2 * length if separate_time else length) + n - 1
    return epsilon / calls


def gram_spans(length: int, n: int) -> list[tuple[int, int]]:
    """Inclusive 0-based ``(a, b)`` spans perturbed for a length-``length`` sequence.

    Main pass first, then prefix/suffix grams of length 1..n-1 so that every
    index is covered exactly ``n`` times. ``n`` is clamped to ``length``.
    """
    n = min(n, length)
    spans = [(a, a + n - 1) for a in range(length - n + 1)]
    for k in range(1, n):
        spans.append((0, k - 1))
        spans.append((length - k, length - 1))
    return spans


@dataclass(frozen=True)
class PerturbRecord:
    """The multiset Z of perturbed grams; ``entries`` hold inclusive 0-based spans."""

    entries: tuple[tuple[int, int, tuple[int, ...]], ...]
    trajectory_len: int
    n: int
    epsilon: float
    epsilon_prime: float

    @property
    def calls(self) -> int:
        return len(self.entries)

    def covering(self, i: int):
        """``(entry, region at index i)`` for every entry whose span covers ``i``."""
        return [(e, e[2][i - e[0]]) for e in self.entries if e[0] <= i <= e[1]]

    def regions(self) -> set[int]:
        return {r for _, _, g in self.entries for r in g}


def coverage_histogram(record: PerturbRecord) -> list[int]:
    counts = [0] * record.trajectory_len
    for a, b, _ in record.entries:
        for i in range(a, b + 1):
            counts[i] += 1
    return counts


def perturb_grams(path: Sequence[int], grams_by_len, dist: np.ndarray, epsilon: float, n: int,
                  sensitivity, rng: np.random.Generator, separate_time: bool = False) -> PerturbRecord:
    """Generic overlapping-gram perturbation over any enumerated domain.

    ``grams_by_len(k)`` returns the (N, k) candidate array for length ``k`` and
    ``sensitivity(k)`` its distance bound; ``dist`` is the element distance matrix.
    """
    length = len(path)
    if length < 1:
        raise ValueError("empty trajectory")
    n_eff = min(n, length)
    eps_prime = split_budget(epsilon, length, n_eff, separate_time)
    entries = []
    for a, b in gram_spans(length, n_eff):
        k = b - a + 1
        cands = grams_by_len(k)
        if len(cands) == 0:
            raise ValueError(f"empty gram set for length {k}")
        true = path[a:b + 1]
        em = em_distribution(gram_distances(true, cands, dist), eps_prime, sensitivity(k))
        entries.append((a, b, tuple(int(r) for r in cands[em_sample_index(em, rng)])))
    return PerturbRecord(tuple(entries), length, n_eff, epsilon, eps_prime)


def perturb_trajectory(region_path: Sequence[int], model: RegionModel, epsilon: float,
                       rng: np.random.Generator, metric: str = "semantic", n: int | None = None) -> PerturbRecord:
    """Perturb a region trajectory with overlapping n-grams drawn by the exponential mechanism."""
    n = model.n if n is None else n
    return perturb_grams(region_path, lambda k: model.grams(k).grams, model.distance(metric), epsilon, n,
                         lambda k: model.sensitivity(k, metric), rng)
