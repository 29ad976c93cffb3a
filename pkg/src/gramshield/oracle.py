"""Test-scale global mechanism over every feasible trajectory, and brute-force oracles."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .catalog import PoiCatalog, TimeAxis, open_at, speed_at
from .distance import DistanceParams, unit_bound
from .mechanism import em_distribution, em_sample_index
from .reconstruct import RegionPath, ReconstructionInstance, path_objective, TIE_RTOL

GUARD = 1_000_000


class GuardExceeded(RuntimeError):
    def __init__(self, size: float, limit: float):
        super().__init__(f"|S| = {size:.4g} exceeds the enumeration guard {limit:.4g}")
        self.size = size
        self.limit = limit


def cardinality_S(num_pois: int, length: int, g_t: int, mu: float) -> float:
    """Size of the feasible trajectory space: |P|^L * C(|T|, L) * mu^(L-1), in log space."""
    size = 1440 // g_t
    if length > size:
        raise ValueError(f"|tau|={length} exceeds |T|={size}")
    if length < 1 or num_pois < 1:
        return 0.0
    if mu <= 0:
        return 1.0 * num_pois * size if length == 1 else 0.0
    log_s = length * math.log(num_pois) + math.log(math.comb(size, length)) + (length - 1) * math.log(mu)
    return math.exp(log_s)


def _states(catalog: PoiCatalog, axis: TimeAxis):
    return [(i, t) for t in range(axis.size) for i, p in enumerate(catalog.pois) if open_at(p, axis.minute(t))]


def _link_ok(catalog: PoiCatalog, axis: TimeAxis, speed, theta, a, b) -> bool:
    (pa, ta), (pb, tb) = a, b
    if tb <= ta:
        return False
    limit = theta if theta is not None else speed_at(speed, axis.minute(ta)) * (tb - ta) * axis.g_t / 60.0
    return catalog.distances[pa, pb] <= limit


def count_S(catalog: PoiCatalog, length: int, axis: TimeAxis, speed=4.0, theta: float | None = None) -> int:
    """Exact number of feasible trajectories by dynamic programming over (POI, timestep) states."""
    states = _states(catalog, axis)
    if not states or length < 1:
        return 0
    counts = [1] * len(states)
    for _ in range(length - 1):
        counts = [sum(c for b, c in zip(states, counts) if c and _link_ok(catalog, axis, speed, theta, a, b))
                  for a in states]
    return sum(counts)


def enumerate_S(catalog: PoiCatalog, length: int, axis: TimeAxis, speed=4.0, theta: float | None = None,
                limit: int = GUARD) -> list[tuple[tuple[str, int], ...]]:
    """Every monotone, open, reachable POI/timestep sequence of ``length`` points.

    ``theta`` fixes the reach threshold (km) regardless of the gap.
    Refuses with ``GuardExceeded`` when the space is larger than ``limit``.
    """
    if len(catalog) == 0:
        return []
    bound = cardinality_S(len(catalog), length, axis.g_t, 1.0)
    if bound > limit:
        if len(catalog) * axis.size > 2000:
            raise GuardExceeded(bound, limit)
        exact = count_S(catalog, length, axis, speed, theta)
        if exact > limit:
            raise GuardExceeded(exact, limit)
    states = _states(catalog, axis)
    out: list[tuple[tuple[str, int], ...]] = []

    def extend(prefix):
        if len(prefix) == length:
            out.append(tuple((catalog.pois[p].id, t) for p, t in prefix))
            return
        for s in states:
            if prefix and not _link_ok(catalog, axis, speed, theta, prefix[-1], s):
                continue
            extend(prefix + [s])
            if len(out) > limit:
                raise GuardExceeded(len(out), limit)

    extend([])
    return out


def trajectory_distance(a, b, catalog: PoiCatalog, axis: TimeAxis, params: DistanceParams = DistanceParams()) -> float:
    """Elementwise d_tau: sum over points of the combined POI/time/category distance."""
    if len(a) != len(b):
        raise ValueError("trajectories differ in length")
    ws, wt, wc = params.weights
    h = catalog.hierarchy
    total = 0.0
    for (pa, ta), (pb, tb) in zip(a, b):
        ds = catalog.distance(pa, pb)
        diff = abs(ta - tb) * axis.g_t % 1440
        dt = min(min(diff, 1440 - diff) / 60.0, params.time_cap)
        la, lb = catalog[pa].leaf, catalog[pb].leaf
        dc = 0.0 if la == lb else params.category_cost(h.common_level(la, lb))
        total += math.sqrt((ws * ds) ** 2 + (wt * dt) ** 2 + (wc * dc) ** 2)
    return total


def global_distribution(traj, S, catalog: PoiCatalog, axis: TimeAxis, epsilon: float,
                        params: DistanceParams = DistanceParams()):
    points = tuple(traj.points if hasattr(traj, "points") else traj)
    dist = np.array([trajectory_distance(points, s, catalog, axis, params) for s in S])
    delta = len(points) * unit_bound(catalog.bbox.diagonal_km(), params)
    return em_distribution(dist, epsilon, delta), dist


def global_perturb(traj, S, catalog: PoiCatalog, axis: TimeAxis, epsilon: float, rng: np.random.Generator,
                   params: DistanceParams = DistanceParams()):
    """One EM draw over the whole feasible set ``S``."""
    if len(S) > GUARD:
        raise GuardExceeded(len(S), GUARD)
    points = tuple(traj.points if hasattr(traj, "points") else traj)
    if points not in set(S):
        raise ValueError("input trajectory is not in S")
    em, _ = global_distribution(points, S, catalog, axis, epsilon, params)
    return S[em_sample_index(em, rng)]


def brute_force_reconstruct(instance: ReconstructionInstance, limit: int = GUARD) -> RegionPath:
    """Exhaustive minimisation of total bigram error over continuity-respecting sequences."""
    c, length = len(instance.candidates), instance.length
    if float(c) ** length > limit:
        raise GuardExceeded(float(c) ** length, limit)
    cands = [int(x) for x in instance.candidates]
    allowed = instance.allowed
    feasible = []

    def extend(prefix):
        if len(prefix) == length:
            feasible.append(tuple(prefix))
            return
        for x in range(c):
            if prefix and not allowed[prefix[-1], x]:
                continue
            extend(prefix + [x])

    extend([])
    if not feasible:
        warnings.warn("no feasible region path; using per-index best regions", RuntimeWarning, stacklevel=2)
        path = tuple(cands[int(np.argmin(instance.errors[i]))] for i in range(length))
        return RegionPath(path, path_objective(instance, path), fallback=True)
    scored = [(path_objective(instance, [cands[x] for x in xs]), xs) for xs in feasible]
    best = min(v for v, _ in scored)
    for v, xs in scored:  # already in lexicographic order
        if v <= best + TIE_RTOL * max(1.0, abs(best)):
            return RegionPath(tuple(cands[x] for x in xs), v)
    raise AssertionError("unreachable")
