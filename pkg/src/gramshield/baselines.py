"""Comparison mechanisms sharing the perturbation interface."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import PoiCatalog, TimeAxis, speed_at
from .distance import DistanceParams, unit_bound
from .mechanism import em_distribution, em_sample_index
from .model import RegionModel
from .perturb import PerturbRecord, perturb_grams, perturb_trajectory, split_budget
from .reconstruct import make_instance, solve_region_path, time_smooth
from .regions import NGramMemoryError


class MechanismKind(enum.Enum):
    NGRAM = "ngram"
    NGRAM_NOH = "ngram-noh"
    PHYS_DIST = "phys-dist"
    IND_REACH = "ind-reach"
    IND_NOREACH = "ind-noreach"

    def calls(self, length: int, n: int) -> int:
        """Number of EM invocations for a trajectory of ``length`` points."""
        n = min(n, length)
        if self in (MechanismKind.NGRAM, MechanismKind.PHYS_DIST):
            return length + n - 1
        if self is MechanismKind.NGRAM_NOH:
            return 2 * length + n - 1
        return length

    def epsilon_prime(self, epsilon: float, length: int, n: int) -> float:
        return epsilon / self.calls(length, n)


def perturb_phys_dist(region_path: Sequence[int], model: RegionModel, epsilon: float,
                      rng: np.random.Generator) -> PerturbRecord:
    """N-gram perturbation scored by centroid distance alone."""
    return perturb_trajectory(region_path, model, epsilon, rng, metric="physical")


# --- POI-level helpers -----------------------------------------------------


def poi_component_matrices(catalog: PoiCatalog, params: DistanceParams):
    """(d_s, d_c) between POIs; d_c compares leaf categories."""
    leaves = [p.leaf for p in catalog.pois]
    uniq = sorted(set(leaves))
    pos = {c: i for i, c in enumerate(uniq)}
    h = catalog.hierarchy
    small = np.array([[0.0 if a == b else params.category_cost(h.common_level(a, b)) for b in uniq] for a in uniq])
    idx = np.array([pos[c] for c in leaves], dtype=int)
    dc = small.reshape(len(uniq), len(uniq))[np.ix_(idx, idx)] if len(idx) else np.zeros((0, 0))
    return np.asarray(catalog.distances), dc


def timestep_distance(axis: TimeAxis, time_cap: float) -> np.ndarray:
    t = np.arange(axis.size) * axis.g_t
    diff = np.abs(t[:, None] - t[None, :]) % 1440
    return np.minimum(np.minimum(diff, 1440 - diff) / 60.0, time_cap)


@dataclass
class PoiDomain:
    """POI-level distances and candidate sets derived from public data."""

    ds: np.ndarray
    dc: np.ndarray
    dt: np.ndarray
    poi_dist: np.ndarray  # combined space + category distance
    cand_p: np.ndarray  # every open (POI, timestep) pair
    cand_t: np.ndarray
    grams: dict

    @classmethod
    def build(cls, model: RegionModel) -> "PoiDomain":
        params = model.config.distance_params
        ws, wt, wc = params.weights
        ds, dc = poi_component_matrices(model.catalog, params)
        dt = timestep_distance(model.axis, params.time_cap)
        poi_dist = np.sqrt((ws * ds) ** 2 + (wc * dc) ** 2)
        cp, ct = [], []
        for t in range(model.axis.size):
            idx = np.nonzero(model.catalog.open_mask(model.axis.minute(t)))[0]
            cp.append(idx)
            ct.append(np.full(len(idx), t))
        return cls(ds, dc, dt, poi_dist, np.concatenate(cp), np.concatenate(ct), {})


def poi_domain(model: RegionModel) -> PoiDomain:
    if "poi" not in model.cache:
        model.cache["poi"] = PoiDomain.build(model)
    return model.cache["poi"]


def poi_grams(model: RegionModel, k: int) -> np.ndarray:
    """POI sequences of length ``k`` whose consecutive POIs are reachable in one timestep."""
    dom = poi_domain(model)
    if k in dom.grams:
        return dom.grams[k]
    size = len(model.catalog)
    if k >= 3 and float(size) ** k > model.config.ngram_cap:
        raise NGramMemoryError(f"|P|^n = {float(size) ** k:.3g} exceeds cap {model.config.ngram_cap:.3g}")
    reach = dom.ds <= model.region_speed * model.axis.g_t / 60.0
    grams = np.arange(size).reshape(-1, 1)
    for _ in range(k - 1):
        rows, cols = np.nonzero(reach[grams[:, -1]])
        grams = np.column_stack([grams[rows], cols])
    grams = grams[np.lexsort(grams.T[::-1])] if len(grams) else grams.reshape(0, k)
    dom.grams[k] = grams
    return grams


# --- NGramNoH --------------------------------------------------------------


@dataclass(frozen=True)
class NoHRecord:
    pois: PerturbRecord
    times: tuple[int, ...]
    epsilon_prime: float

    @property
    def calls(self) -> int:
        return self.pois.calls + len(self.times)


def perturb_ngram_noh(traj, model: RegionModel, epsilon: float, rng: np.random.Generator) -> NoHRecord:
    """POI n-grams and per-point timesteps perturbed in separate EM calls."""
    catalog = model.catalog
    dom = poi_domain(model)
    params = model.config.distance_params
    ws, wt, wc = params.weights
    path = [catalog.index_of(p) for p, _ in traj.points]
    poi_unit = unit_bound(model.ds_max, params, "poi")
    record = perturb_grams(path, lambda k: poi_grams(model, k), dom.poi_dist, epsilon, model.n,
                           lambda k: k * poi_unit if poi_unit > 0 else 1.0, rng, separate_time=True)
    eps_prime = record.epsilon_prime
    times = []
    for _, t in traj.points:
        em = em_distribution(wt * dom.dt[t], eps_prime, wt * params.time_cap or 1.0)
        times.append(em_sample_index(em, rng))
    return NoHRecord(record, tuple(times), eps_prime)


def reconstruct_ngram_noh(record: NoHRecord, model: RegionModel) -> list[tuple[str, int]]:
    """Best POI sequence over POI bigrams, then sorted perturbed times made feasible."""
    catalog = model.catalog
    dom = poi_domain(model)
    length = record.pois.trajectory_len
    pairs = poi_grams(model, 2) if length > 1 else np.zeros((0, 2), dtype=int)
    instance = make_instance(record.pois, range(len(catalog)), pairs, dom.poi_dist)
    path = solve_region_path(instance).regions
    draft = [(catalog.pois[p].id, t) for p, t in zip(path, sorted(record.times))]
    return time_smooth(draft, catalog, model.axis, model.speed)


# --- independent per-point mechanisms --------------------------------------


@dataclass
class IndependentResult:
    points: list[tuple[str, int]]
    fallbacks: int
    epsilon_prime: float
    smoothed: bool


def perturb_independent(traj, model: RegionModel, epsilon: float, rng: np.random.Generator,
                        enforce_reach: bool) -> IndependentResult:
    """Each point drawn by its own EM call over all open (POI, timestep) pairs.

    With ``enforce_reach`` the candidates for a point are those reachable from
    the previous perturbed output; an empty set falls back to all pairs.
    Otherwise the times are sorted and smoothed afterwards.
    """
    catalog, axis = model.catalog, model.axis
    dom = poi_domain(model)
    params = model.config.distance_params
    ws, wt, wc = params.weights
    eps_prime = split_budget(epsilon, len(traj), 1)
    delta = unit_bound(model.ds_max, params, "semantic") or 1.0
    cp, ct = dom.cand_p, dom.cand_t
    out: list[tuple[int, int]] = []
    fallbacks = 0
    for p_id, t in traj.points:
        p = catalog.index_of(p_id)
        keep = slice(None)
        if enforce_reach and out:
            pp, pt = out[-1]
            theta = speed_at(model.speed, axis.minute(pt)) * (ct - pt) * axis.g_t / 60.0
            mask = (ct > pt) & (dom.ds[pp, cp] <= theta)
            if mask.any():
                keep = np.nonzero(mask)[0]
            else:
                fallbacks += 1
        cand_p, cand_t = cp[keep], ct[keep]
        dist = np.sqrt((ws * dom.ds[p, cand_p]) ** 2 + (wt * dom.dt[t, cand_t]) ** 2
                       + (wc * dom.dc[p, cand_p]) ** 2)
        x = em_sample_index(em_distribution(dist, eps_prime, delta), rng)
        out.append((int(cand_p[x]), int(cand_t[x])))
    points = [(catalog.pois[p].id, t) for p, t in out]
    smoothed = False
    if not enforce_reach or fallbacks:
        times = sorted(t for _, t in points)
        draft = [(p, t) for (p, _), t in zip(points, times)]
        smoothed_points = time_smooth(draft, catalog, axis, model.speed)
        smoothed = smoothed_points != points
        points = smoothed_points
    return IndependentResult(points, fallbacks, eps_prime, smoothed)
