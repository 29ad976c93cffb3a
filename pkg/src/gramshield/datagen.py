"""Synthetic campus POIs and trajectories with injected crowd events."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import CategoryHierarchy, Poi, PoiCatalog, TimeAxis, speed_at
from .mechanism import substream
from .trajectory import Trajectory, violation

# level-1 / level-2 / leaf, POI count, opening hours, sub-area (fractions of the campus box)
CAMPUS_LAYOUT = [
    ("academic", "instruction", "academic_building", 80, (420, 1320), (0.30, 0.75, 0.25, 0.80)),
    ("academic", "instruction", "lecture_hall", 30, (480, 1260), (0.35, 0.70, 0.30, 0.75)),
    ("academic", "study", "library", 12, (480, 1380), (0.40, 0.65, 0.35, 0.70)),
    ("academic", "study", "laboratory", 40, (420, 1380), (0.25, 0.80, 0.20, 0.85)),
    ("living", "housing", "student_residence", 45, (0, 1440), (0.00, 0.35, 0.00, 1.00)),
    ("living", "dining", "dining_hall", 10, (420, 1260), (0.10, 0.60, 0.10, 0.90)),
    ("living", "dining", "cafe", 25, (420, 1200), (0.20, 0.80, 0.10, 0.90)),
    ("activity", "sport", "stadium", 5, (480, 1380), (0.75, 1.00, 0.00, 0.40)),
    ("activity", "commerce", "retail", 15, (540, 1260), (0.60, 0.95, 0.40, 1.00)),
]
CAMPUS_BOX = (49.248, 49.272, -123.262, -123.232)  # lat_min, lat_max, lon_min, lon_max
ID_PREFIX = {"academic_building": "acad", "lecture_hall": "lect", "library": "lib", "laboratory": "lab",
             "student_residence": "res", "dining_hall": "dine", "cafe": "cafe", "stadium": "stad",
             "retail": "shop"}


def campus_catalog(seed: int = 0) -> PoiCatalog:
    """262 campus buildings in nine leaf categories under a three-level hierarchy."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 262]))
    nodes: dict[str, tuple[int, str | None]] = {}
    lat0, lat1, lon0, lon1 = CAMPUS_BOX
    pois = []
    for l1, l2, leaf, count, (o, c), (a0, a1, b0, b1) in CAMPUS_LAYOUT:
        nodes.setdefault(l1, (1, None))
        nodes.setdefault(l2, (2, l1))
        nodes.setdefault(leaf, (3, l2))
        for k in range(count):
            lat = lat0 + (lat1 - lat0) * rng.uniform(a0, a1)
            lon = lon0 + (lon1 - lon0) * rng.uniform(b0, b1)
            pop = float(rng.gamma(2.0, 1.0))
            pois.append(Poi(f"{ID_PREFIX[leaf]}-{k:03d}", round(lat, 6), round(lon, 6), (l1, l2, leaf), o, c,
                            round(pop, 4)))
    return PoiCatalog(tuple(pois), CategoryHierarchy(nodes))


@dataclass(frozen=True)
class Event:
    """``users`` trajectories each get one point at ``target`` inside [start_min, end_min)."""

    name: str
    kind: str  # "poi" or "category"
    target: str
    start_min: int
    end_min: int
    users: int

    def candidates(self, catalog: PoiCatalog) -> list[int]:
        if self.kind == "poi":
            return [catalog.index_of(self.target)]
        return [i for i, p in enumerate(catalog.pois) if self.target in p.category_path]


EVENT_SHARE = 0.7  # largest fraction of a generated set the default events may occupy


def default_events(count: int | None = None) -> list[Event]:
    """Residence at night, stadium in the afternoon, and a morning lecture crowd.

    Full size (500 / 1000 / 2000 users) needs 5000 trajectories; smaller
    ``count`` values shrink every event by the same factor.
    """
    base = [
        Event("residence", "poi", "res-000", 20 * 60, 22 * 60, 500),
        Event("stadium", "poi", "stad-000", 14 * 60, 16 * 60, 1000),
        Event("lecture", "poi", "acad-000", 9 * 60, 11 * 60, 2000),
    ]
    if count is None:
        return base
    scale = min(1.0, EVENT_SHARE * count / sum(e.users for e in base))
    return [Event(e.name, e.kind, e.target, e.start_min, e.end_min, int(e.users * scale)) for e in base]


def events_from_config(specs: Sequence[tuple]) -> list[Event]:
    return [Event(*spec) for spec in specs]


class _Walker:
    def __init__(self, catalog: PoiCatalog, axis: TimeAxis, speed, length, max_gap: int):
        self.catalog, self.axis, self.speed = catalog, axis, speed
        self.length = length
        self.max_steps = max(1, max_gap // axis.g_t)
        self.dist = catalog.distances
        self.open = np.array([catalog.open_mask(axis.minute(t)) for t in range(axis.size)])
        leaves = sorted({p.leaf for p in catalog.pois})
        self.by_leaf = {c: np.array([i for i, p in enumerate(catalog.pois) if p.leaf == c]) for c in leaves}

    def _theta(self, t_from: int, steps: int) -> float:
        return speed_at(self.speed, self.axis.minute(t_from)) * steps * self.axis.g_t / 60.0

    def first(self, rng, t: int):
        cats = [c for c, idx in self.by_leaf.items() if self.open[t, idx].any()]
        if not cats:
            return None
        idx = self.by_leaf[cats[int(rng.integers(len(cats)))]]
        idx = idx[self.open[t, idx]]
        return int(idx[int(rng.integers(len(idx)))])

    def forward(self, rng, p: int, t: int, count: int):
        out = []
        for _ in range(count):
            steps = int(rng.integers(1, self.max_steps + 1))
            nt = t + steps
            if nt >= self.axis.size:
                return out, False
            ok = np.nonzero(self.open[nt] & (self.dist[p] <= self._theta(t, steps)))[0]
            if not len(ok):
                return out, False
            p, t = int(ok[int(rng.integers(len(ok)))]), nt
            out.append((p, t))
        return out, True

    def backward(self, rng, p: int, t: int, count: int):
        out = []
        for _ in range(count):
            steps = int(rng.integers(1, self.max_steps + 1))
            pt = t - steps
            if pt < 0:
                return out, False
            ok = np.nonzero(self.open[pt] & (self.dist[:, p] <= self._theta(pt, steps)))[0]
            if not len(ok):
                return out, False
            p, t = int(ok[int(rng.integers(len(ok)))]), pt
            out.append((p, t))
        return out[::-1], True

    def free(self, rng, tries: int = 1000):
        lo, hi = self.length
        for _ in range(tries):
            length = int(rng.integers(lo, hi + 1))
            t0 = self.axis.timestep(int(rng.integers(6 * 60, 22 * 60 + 1)))
            p0 = self.first(rng, t0)
            if p0 is None:
                continue
            rest, ok = self.forward(rng, p0, t0, length - 1)
            if ok:
                return [(p0, t0), *rest]
        raise RuntimeError("could not generate a feasible trajectory")

    def pinned(self, rng, event: Event, tries: int = 1000):
        lo, hi = self.length
        cands = event.candidates(self.catalog)
        first, last = self.axis.timestep(event.start_min), self.axis.timestep(event.end_min - 1)
        for _ in range(tries):
            length = int(rng.integers(lo, hi + 1))
            j = int(rng.integers(length))
            t = int(rng.integers(first, last + 1))
            open_c = [c for c in cands if self.open[t, c]]
            if not open_c:
                continue
            p = open_c[int(rng.integers(len(open_c)))]
            before, ok_b = self.backward(rng, p, t, j)
            after, ok_a = self.forward(rng, p, t, length - j - 1)
            if ok_b and ok_a:
                return [*before, (p, t), *after]
        raise RuntimeError(f"could not place event {event.name!r}")


def generate_campus(catalog: PoiCatalog, count: int, events: Sequence[Event] = (), seed: int = 0,
                    axis: TimeAxis = TimeAxis(10), speed=4.0, length: tuple[int, int] = (3, 8),
                    max_gap: int = 120) -> list[Trajectory]:
    """``count`` feasible trajectories; event trajectories are spread over random user slots."""
    demand = sum(e.users for e in events)
    if demand > count:
        raise ValueError(f"events need {demand} trajectories but only {count} requested")
    for e in events:
        if not e.candidates(catalog):
            raise ValueError(f"event {e.name!r} has no matching POI")
    order = np.random.default_rng(np.random.SeedSequence([seed, 7])).permutation(count)
    assignment: dict[int, Event] = {}
    pos = 0
    for e in events:
        for slot in order[pos:pos + e.users]:
            assignment[int(slot)] = e
        pos += e.users
    walker = _Walker(catalog, axis, speed, length, max_gap)
    out = []
    for i in range(count):
        rng = substream(seed, ("campus", i))
        ev = assignment.get(i)
        pts = walker.pinned(rng, ev) if ev else walker.free(rng)
        traj = Trajectory(f"u{i:05d}", tuple((catalog.pois[p].id, t) for p, t in pts))
        reason = violation(traj, catalog, axis, speed)
        if reason is not None:
            raise AssertionError(f"generated trajectory {i} infeasible: {reason}")
        out.append(traj)
    return out


def filter_trajectories(trajs: Sequence[Trajectory], catalog: PoiCatalog, axis: TimeAxis, speed):
    """Split into feasible trajectories and ``(trajectory, reason)`` drops."""
    kept, dropped = [], []
    for t in trajs:
        reason = violation(t, catalog, axis, speed)
        if reason is None:
            kept.append(t)
        else:
            dropped.append((t, reason))
    return kept, dropped
