"""Rebuild one output trajectory from the perturbed grams.

Region level: the bigram-selection integer program (minimise total bigram error
subject to continuity, one bigram per link) is a shortest path through a layered
graph with one layer per trajectory index, so it is solved exactly by dynamic
programming. POI level: uniform sampling of feasible POI/timestep combinations,
falling back to time smoothing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import PoiCatalog, TimeAxis, open_at, speed_at, threshold_theta
from .model import RegionModel
from .perturb import PerturbRecord

TIE_RTOL = 1e-9
SMOOTH_DRAFTS = 20  # fresh random drafts tried before a trajectory is dropped


class SmoothingError(RuntimeError):
    """Times cannot be shifted into a feasible schedule within one day."""


@dataclass
class ReconstructionInstance:
    """Layered-graph view of the reconstruction problem.

    ``candidates`` are domain ids in ascending order; ``allowed[x, y]`` says the
    bigram ``(candidates[x], candidates[y])`` is feasible; ``errors[i, x]`` is the
    region error of ``candidates[x]`` at index ``i``.
    """

    record: PerturbRecord
    candidates: np.ndarray
    allowed: np.ndarray
    errors: np.ndarray

    @property
    def length(self) -> int:
        return self.record.trajectory_len

    def bigrams(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.allowed)
        return [(int(self.candidates[x]), int(self.candidates[y])) for x, y in zip(xs, ys)]

    def position(self, ids: Sequence[int]) -> list[int]:
        pos = {int(c): x for x, c in enumerate(self.candidates)}
        return [pos[int(r)] for r in ids]


@dataclass
class RegionPath:
    regions: tuple[int, ...]
    objective: float
    fallback: bool = False


def region_error(r: int, i: int, record: PerturbRecord, dist: np.ndarray) -> float:
    """Summed distance from region ``r`` to every perturbed region placed at index ``i``."""
    return float(sum(dist[r, y] for _, y in record.covering(i)))


def bigram_error(i: int, w: Sequence[int], record: PerturbRecord, dist: np.ndarray) -> float:
    return region_error(w[0], i, record, dist) + region_error(w[1], i + 1, record, dist)


def error_matrix(record: PerturbRecord, candidates: np.ndarray, dist: np.ndarray) -> np.ndarray:
    errors = np.zeros((record.trajectory_len, len(candidates)))
    for a, _, gram in record.entries:
        for j, y in enumerate(gram):
            errors[a + j] += dist[candidates, y]
    return errors


def _allowed_from_pairs(pairs: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    pos = np.full(int(max(candidates.max(initial=0), pairs.max(initial=0))) + 1, -1)
    pos[candidates] = np.arange(len(candidates))
    allowed = np.zeros((len(candidates), len(candidates)), dtype=bool)
    if len(pairs):
        x, y = pos[pairs[:, 0]], pos[pairs[:, 1]]
        keep = (x >= 0) & (y >= 0)
        allowed[x[keep], y[keep]] = True
    return allowed


def make_instance(record: PerturbRecord, candidates, pairs: np.ndarray, dist: np.ndarray) -> ReconstructionInstance:
    candidates = np.array(sorted(set(int(c) for c in candidates)), dtype=int)
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    return ReconstructionInstance(record, candidates, _allowed_from_pairs(pairs, candidates),
                                  error_matrix(record, candidates, dist))


def full_instance(record: PerturbRecord, model: RegionModel, metric: str = "semantic") -> ReconstructionInstance:
    """Unpruned instance over every region and every feasible bigram."""
    return make_instance(record, range(len(model.regions)), model.grams(2).grams, model.distance(metric))


def default_slack(record: PerturbRecord, model: RegionModel) -> float:
    """Distance reachable in the widest gap the perturbed windows permit between neighbours."""
    width = model.regions.time_interval
    lo = [math.inf] * record.trajectory_len
    hi = [-math.inf] * record.trajectory_len
    for a, _, gram in record.entries:
        for j, r in enumerate(gram):
            ks = model.regions[r].intervals
            lo[a + j] = min(lo[a + j], min(ks) * width)
            hi[a + j] = max(hi[a + j], (max(ks) + 1) * width)
    gap = model.axis.g_t
    for i in range(record.trajectory_len - 1):
        gap = max(gap, hi[i + 1] - lo[i])
    return threshold_theta(model.region_speed, min(gap, 1440))


def mbr_prune(record: PerturbRecord, model: RegionModel, slack: float | None = None,
              metric: str = "semantic") -> ReconstructionInstance:
    """Restrict candidates to regions near the spatial box and time envelope of Z."""
    regions, catalog = model.regions, model.catalog
    z_regions = sorted(record.regions())
    if slack is None:
        slack = default_slack(record, model)
    if math.isinf(slack):
        return full_instance(record, model, metric)
    z_members = sorted({catalog.index_of(p) for r in z_regions for p in regions[r].members})
    lat, lon = catalog.lat[z_members], catalog.lon[z_members]
    dlat = slack / 111.195
    coslat = max(math.cos(math.radians(max(abs(lat.min()), abs(lat.max())))), 1e-6)
    dlon = slack / (111.195 * coslat)
    inside = ((catalog.lat >= lat.min() - dlat) & (catalog.lat <= lat.max() + dlat)
              & (catalog.lon >= lon.min() - dlon) & (catalog.lon <= lon.max() + dlon))
    inside_ids = {catalog.pois[i].id for i in np.nonzero(inside)[0]}
    pad = math.ceil(60 / regions.time_interval)
    z_ks = [k for r in z_regions for k in regions[r].intervals]
    k_lo, k_hi = min(z_ks) - pad, max(z_ks) + pad
    keep = set(z_regions)
    for r in regions:
        if any(k_lo <= k <= k_hi for k in r.intervals) and not inside_ids.isdisjoint(r.members):
            keep.add(r.id)
    return make_instance(record, keep, model.grams(2).grams, model.distance(metric))


def path_objective(instance: ReconstructionInstance, path: Sequence[int]) -> float:
    """Total bigram error of a region sequence (region error alone when length is 1)."""
    xs = instance.position(path)
    e = instance.errors
    if len(xs) == 1:
        return float(e[0, xs[0]])
    total = 0.0
    for i in range(len(xs) - 1):
        total += e[i, xs[i]] + e[i + 1, xs[i + 1]]
    return float(total)


def _near(value, best) -> bool:
    return value <= best + TIE_RTOL * max(1.0, abs(best))


def solve_region_path(instance: ReconstructionInstance) -> RegionPath:
    """Exact minimum-error region sequence; ties go to the lexicographically smallest ids."""
    e, allowed, cands = instance.errors, instance.allowed, instance.candidates
    length = instance.length
    if length == 1:
        best = e[0].min()
        x = int(np.flatnonzero([_near(v, best) for v in e[0]])[0])
        return RegionPath((int(cands[x]),), float(e[0, x]))
    # cost-to-go: to_go[i][x] = cheapest completion of indices i..L-1 starting at candidate x
    to_go = [None] * length
    to_go[-1] = np.zeros(len(cands))
    for i in range(length - 2, -1, -1):
        step = e[i][:, None] + (e[i + 1] + to_go[i + 1])[None, :]
        step = np.where(allowed, step, np.inf)
        to_go[i] = step.min(axis=1) if len(cands) else np.zeros(0)
    if len(cands) == 0 or not np.isfinite(to_go[0]).any():
        warnings.warn("no feasible region path; using per-index best regions", RuntimeWarning, stacklevel=2)
        xs = [int(np.argmin(e[i])) for i in range(length)]
        path = tuple(int(cands[x]) for x in xs)
        return RegionPath(path, path_objective(instance, path), fallback=True)
    best = to_go[0].min()
    x = int(np.flatnonzero(to_go[0] <= best + TIE_RTOL * max(1.0, abs(best)))[0])
    xs = [x]
    for i in range(length - 1):
        cost = e[i, x] + e[i + 1] + to_go[i + 1]
        cost = np.where(allowed[x], cost, np.inf)
        target = to_go[i][x]
        x = int(np.flatnonzero(cost <= target + TIE_RTOL * max(1.0, abs(target)))[0])
        xs.append(x)
    path = tuple(int(cands[x]) for x in xs)
    return RegionPath(path, path_objective(instance, path))


# --- POI level -------------------------------------------------------------


@dataclass
class SampleInfo:
    smoothed: bool = False
    region_changed: bool = False
    attempts: int = 0


def _region_states(region, model: RegionModel) -> list[tuple[int, int]]:
    """(POI index, timestep) pairs a region can emit."""
    catalog, axis = model.catalog, model.axis
    per = region.interval_minutes // axis.g_t
    slots = region.slots
    out = []
    for k in region.intervals:
        members = sorted(p for p, kk in slots if kk == k)
        for t in range(k * per, (k + 1) * per):
            minute = axis.minute(t)
            for p in members:
                if open_at(catalog[p], minute):
                    out.append((catalog.index_of(p), t))
    out.sort(key=lambda s: (s[1], s[0]))
    return out


def _compat(sa, sb, catalog: PoiCatalog, axis: TimeAxis, speed) -> np.ndarray:
    pa = np.array([p for p, _ in sa]); ta = np.array([t for _, t in sa])
    pb = np.array([p for p, _ in sb]); tb = np.array([t for _, t in sb])
    gap = (tb[None, :] - ta[:, None]) * axis.g_t
    speeds = np.array([speed_at(speed, axis.minute(t)) for t in ta])
    theta = speeds[:, None] * gap / 60.0
    return (gap > 0) & (catalog.distances[np.ix_(pa, pb)] <= theta)


def _uniform_feasible(states, model: RegionModel, rng: np.random.Generator):
    """Uniform draw over all feasible state sequences, or None when none exist."""
    length = len(states)
    compat = [_compat(states[i], states[i + 1], model.catalog, model.axis, model.speed) for i in range(length - 1)]
    counts = [None] * length
    counts[-1] = np.ones(len(states[-1]))
    for i in range(length - 2, -1, -1):
        counts[i] = compat[i].astype(float) @ counts[i + 1]
    if counts[0].sum() <= 0:
        return None
    x = int(rng.choice(len(states[0]), p=counts[0] / counts[0].sum()))
    xs = [x]
    for i in range(length - 1):
        w = compat[i][x] * counts[i + 1]
        x = int(rng.choice(len(w), p=w / w.sum()))
        xs.append(x)
    return [states[i][x] for i, x in enumerate(xs)]


def _rejection(states, model: RegionModel, rng: np.random.Generator, gamma: int):
    catalog, axis, speed = model.catalog, model.axis, model.speed
    by_time = []
    for st in states:
        d: dict[int, list[int]] = {}
        for p, t in st:
            d.setdefault(t, []).append(p)
        by_time.append((sorted(d), d))
    for attempt in range(1, gamma + 1):
        prev_t, prev_p, ok, draw = -1, None, True, []
        for times, pois in by_time:
            later = [t for t in times if t > prev_t]
            if not later:
                ok = False
                break
            t = later[int(rng.integers(len(later)))]
            p = pois[t][int(rng.integers(len(pois[t])))]
            if prev_p is not None:
                gap = (t - prev_t) * axis.g_t
                if catalog.distances[prev_p, p] > threshold_theta(speed_at(speed, axis.minute(prev_t)), gap):
                    ok = False
                    break
            draw.append((p, t))
            prev_t, prev_p = t, p
        if ok:
            return draw, attempt
    return None, gamma


def sample_poi_trajectory(region_path: Sequence[int], model: RegionModel, rng: np.random.Generator,
                          gamma: int | None = None, method: str | None = None):
    """POI/timestep sequence realising ``region_path``.

    ``method="exact"`` draws uniformly from every feasible combination by
    counting completions; ``"rejection"`` redraws up to ``gamma`` times (small
    domains of at most 10,000 combinations are enumerated exactly). Infeasible
    paths are smoothed. Returns ``(points, SampleInfo)``.
    """
    gamma = model.config.gamma if gamma is None else gamma
    method = model.config.sampler if method is None else method
    catalog = model.catalog
    states = [_region_states(model.regions[r], model) for r in region_path]
    if any(not s for s in states):
        raise SmoothingError("a region has no open member at any of its timesteps")
    info = SampleInfo()
    if method == "exact" or math.prod(len(s) for s in states) <= 10_000:
        draw = _uniform_feasible(states, model, rng)
        info.attempts = 1
    elif method == "rejection":
        draw, info.attempts = _rejection(states, model, rng, gamma)
    else:
        raise ValueError(f"unknown sampler {method!r}")
    if draw is not None:
        return [(catalog.pois[p].id, int(t)) for p, t in draw], info
    points = None
    for _ in range(SMOOTH_DRAFTS):
        draft = []
        for st in states:
            p, t = st[int(rng.integers(len(st)))]
            draft.append((catalog.pois[p].id, int(t)))
        try:
            points = time_smooth(draft, catalog, model.axis, model.speed)
            break
        except SmoothingError:
            continue
    if points is None:
        raise SmoothingError(f"no smoothable draft in {SMOOTH_DRAFTS} attempts")
    info.smoothed = True
    info.region_changed = any(model.regions.region_of(p, model.axis.minute(t)) != r
                              for (p, t), r in zip(points, region_path))
    return points, info


def time_smooth(draft: Sequence[tuple[str, int]], catalog: PoiCatalog, axis: TimeAxis, speed) -> list[tuple[str, int]]:
    """Shift timesteps (POIs fixed) until every link is reachable and every POI open.

    A forward pass delays later points; if that runs past midnight, a backward
    pass pulls earlier points earlier instead.
    """
    pois = [p for p, _ in draft]
    times = [int(t) for _, t in draft]
    size = axis.size

    def is_open(i, t):
        return open_at(catalog[pois[i]], axis.minute(t))

    def link_ok(i, ti, tj):
        # link from point i at ti to point i+1 at tj
        if tj <= ti:
            return False
        theta = threshold_theta(speed_at(speed, axis.minute(ti)), (tj - ti) * axis.g_t)
        return catalog.distance(pois[i], pois[i + 1]) <= theta

    overflow = False
    t = max(times[0], 0)
    while t < size and not is_open(0, t):
        t += 1
    times[0] = t
    overflow = t >= size
    for i in range(1, len(times)):
        if overflow:
            times[i] = size  # unreached points start the backward pass at the end of the day
            continue
        t = max(times[i], times[i - 1] + 1)
        while t < size and not (is_open(i, t) and link_ok(i - 1, times[i - 1], t)):
            t += 1
        times[i] = t
        overflow = t >= size
    if overflow:
        last = len(times) - 1
        t = min(times[last], size - 1)
        while t >= 0 and not is_open(last, t):
            t -= 1
        times[last] = t
        for i in range(last - 1, -1, -1):
            t = min(times[i], times[i + 1] - 1)
            while t >= 0 and not (is_open(i, t) and link_ok(i, t, times[i + 1])):
                t -= 1
            times[i] = t
        if min(times) < 0:
            raise SmoothingError("required travel does not fit in one day")
    return list(zip(pois, times))
