"""Multi-attribute distances between regions, n-grams and POIs, plus EM sensitivity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import MINUTES_PER_DAY, CategoryHierarchy, haversine
from .regions import RegionSet, StcRegion


@dataclass(frozen=True)
class DistanceParams:
    time_cap: float = 12.0  # hours
    unrelated_cost: float = 10.0
    hierarchy_depth: int = 3
    level_costs: tuple[float, ...] | None = None  # cost by common-ancestor level 0..depth-1
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)  # space, time, category

    def __post_init__(self):
        if self.time_cap <= 0 or self.unrelated_cost <= 0:
            raise ValueError("time_cap and unrelated_cost must be positive")

    @property
    def max_category_cost(self) -> float:
        if self.level_costs is not None:
            return float(max(self.level_costs))
        return self.unrelated_cost

    def category_cost(self, common_level: int) -> float:
        if self.level_costs is not None:
            return float(self.level_costs[common_level])
        depth = self.hierarchy_depth
        return self.unrelated_cost * (depth - common_level) / depth


def d_s(r_a: StcRegion, r_b: StcRegion) -> float:
    """Haversine distance between region centroids (km)."""
    return haversine(r_a.centroid[0], r_a.centroid[1], r_b.centroid[0], r_b.centroid[1])


def time_gap_hours(minute_a: float, minute_b: float, time_cap: float = 12.0) -> float:
    diff = abs(minute_a - minute_b) % MINUTES_PER_DAY
    return min(min(diff, MINUTES_PER_DAY - diff) / 60.0, time_cap)


def d_t(r_a: StcRegion, r_b: StcRegion, params: DistanceParams = DistanceParams()) -> float:
    return time_gap_hours(r_a.time_centroid, r_b.time_centroid, params.time_cap)


def d_c(a: str, b: str, hierarchy: CategoryHierarchy, params: DistanceParams = DistanceParams()) -> float:
    if a == b:
        hierarchy.path(a)  # raises on unknown nodes
        return 0.0
    return params.category_cost(hierarchy.common_level(a, b))


def d(r_a: StcRegion, r_b: StcRegion, hierarchy: CategoryHierarchy,
      params: DistanceParams = DistanceParams()) -> float:
    ws, wt, wc = params.weights
    return math.sqrt((ws * d_s(r_a, r_b)) ** 2 + (wt * d_t(r_a, r_b, params)) ** 2
                     + (wc * d_c(r_a.category, r_b.category, hierarchy, params)) ** 2)


def d_w(w_1: Sequence[int], w_2: Sequence[int], dist: np.ndarray) -> float:
    """Elementwise-summed distance between two equal-length grams given a region distance matrix."""
    if len(w_1) != len(w_2):
        raise ValueError(f"gram lengths differ ({len(w_1)} vs {len(w_2)})")
    return float(sum(dist[a, b] for a, b in zip(w_1, w_2)))


def gram_distances(gram: Sequence[int], grams: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """``d_w(gram, g)`` for every row ``g`` of ``grams``."""
    out = np.zeros(len(grams))
    for j, r in enumerate(gram):
        out += dist[r, grams[:, j]]
    return out


def _category_matrix(categories: Sequence[str], hierarchy: CategoryHierarchy, params: DistanceParams) -> np.ndarray:
    uniq = sorted(set(categories))
    pos = {c: i for i, c in enumerate(uniq)}
    small = np.array([[d_c(a, b, hierarchy, params) for b in uniq] for a in uniq]).reshape(len(uniq), len(uniq))
    idx = np.array([pos[c] for c in categories], dtype=int)
    return small[np.ix_(idx, idx)]


def component_matrices(regions: RegionSet, params: DistanceParams = DistanceParams()):
    """Pairwise (d_s, d_t, d_c) matrices over a region set."""
    lat = np.array([r.centroid[0] for r in regions])
    lon = np.array([r.centroid[1] for r in regions])
    ds = np.asarray(haversine(lat[:, None], lon[:, None], lat[None, :], lon[None, :])).reshape(len(lat), len(lat))
    tc = np.array([r.time_centroid for r in regions])
    diff = np.abs(tc[:, None] - tc[None, :]) % MINUTES_PER_DAY
    dt = np.minimum(np.minimum(diff, MINUTES_PER_DAY - diff) / 60.0, params.time_cap)
    dc = _category_matrix([r.category for r in regions], regions.catalog.hierarchy, params)
    return ds, dt, dc


def distance_matrix(regions: RegionSet, params: DistanceParams = DistanceParams(), metric: str = "semantic"):
    """Region distance matrix: ``semantic`` = combined d, ``physical`` = d_s only."""
    ds, dt, dc = component_matrices(regions, params)
    if metric == "physical":
        return ds
    ws, wt, wc = params.weights
    return np.sqrt((ws * ds) ** 2 + (wt * dt) ** 2 + (wc * dc) ** 2)


def unit_bound(ds_max: float, params: DistanceParams = DistanceParams(), metric: str = "semantic") -> float:
    """Analytic upper bound on a single-element distance."""
    ws, wt, wc = params.weights
    if metric == "physical":
        return ws * ds_max
    if metric == "poi":
        return math.hypot(ws * ds_max, wc * params.max_category_cost)
    return math.sqrt((ws * ds_max) ** 2 + (wt * params.time_cap) ** 2 + (wc * params.max_category_cost) ** 2)


def sensitivity(regions: RegionSet, n: int, params: DistanceParams = DistanceParams(),
                metric: str = "semantic") -> float:
    """``n`` times the largest possible element distance, with d_s bounded by the catalog bbox."""
    if len(regions) == 0:
        raise ValueError("empty region set")
    return n * unit_bound(regions.catalog.bbox.diagonal_km(), params, metric)
