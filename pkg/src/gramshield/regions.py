"""Space-time-category (STC) regions and reachability-filtered n-gram domains."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .catalog import MINUTES_PER_DAY, PoiCatalog, TimeAxis, haversine, open_at, threshold_theta

DIMENSIONS = ("space", "time", "category")


class UnmappableError(ValueError):
    """A trajectory point does not fall inside any region (e.g. POI closed)."""


class NGramMemoryError(MemoryError):
    """Materialising the requested n-gram set would exceed the configured cap."""


@dataclass(frozen=True)
class StcRegion:
    id: int
    space_cells: frozenset[int]
    intervals: tuple[int, ...]  # circular-contiguous interval indices, in time order
    category_nodes: frozenset[str]
    slots: frozenset[tuple[str, int]]  # (poi id, interval) pairs owned by this region
    category: str  # deepest common ancestor of category_nodes
    centroid: tuple[float, float]
    time_centroid: float  # minutes of day
    interval_minutes: int = 60

    @property
    def members(self) -> frozenset[str]:
        return frozenset(p for p, _ in self.slots)

    @property
    def window(self) -> list[tuple[int, int]]:
        """Merged time window as ``(start_min, end_min)`` pieces."""
        w = self.interval_minutes
        return [(k * w, (k + 1) * w) for k in self.intervals]

    def timesteps(self, axis: TimeAxis) -> list[int]:
        per = self.interval_minutes // axis.g_t
        return sorted(t for k in self.intervals for t in range(k * per, (k + 1) * per))


def _open_during(poi, start: int, end: int) -> bool:
    if poi.open_min < poi.close_min:
        spans = [(poi.open_min, poi.close_min)]
    else:
        spans = [(poi.open_min, MINUTES_PER_DAY), (0, poi.close_min)]
    return any(o < end and start < c for o, c in spans)


def _contiguous_order(intervals: Iterable[int], count: int) -> tuple[int, ...]:
    """Order a circular-contiguous interval set starting from its first element after a gap."""
    ks = sorted(set(intervals))
    if len(ks) == count:
        return tuple(ks)
    present = set(ks)
    start = next(k for k in ks if (k - 1) % count not in present)
    out, k = [], start
    while k in present:
        out.append(k)
        k = (k + 1) % count
    if len(out) != len(ks):
        raise ValueError(f"intervals {ks} are not contiguous")
    return tuple(out)


def _time_centroid(order: tuple[int, ...], width: int) -> float:
    start = order[0] * width
    return (start + len(order) * width / 2.0) % MINUTES_PER_DAY


class RegionSet:
    """Dense, immutable collection of STC regions over one catalog."""

    def __init__(self, regions: Sequence[StcRegion], catalog: PoiCatalog, g_s: int, time_interval: int):
        self.regions = tuple(regions)
        self.catalog = catalog
        self.g_s = g_s
        self.time_interval = time_interval
        for i, r in enumerate(self.regions):
            if r.id != i:
                raise ValueError("region ids must be dense and ordered")
        self.slot_map = {slot: r.id for r in self.regions for slot in r.slots}
        self._reach_cache: dict = {}

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    def __getitem__(self, i: int) -> StcRegion:
        return self.regions[i]

    @property
    def interval_count(self) -> int:
        return MINUTES_PER_DAY // self.time_interval

    def region_of(self, poi_id: str, minute: int) -> int | None:
        return self.slot_map.get((poi_id, int(minute) % MINUTES_PER_DAY // self.time_interval))

    def member_indices(self, r: int) -> np.ndarray:
        return np.array(sorted(self.catalog.index_of(p) for p in self.regions[r].members), dtype=int)

    def min_distance_matrix(self) -> np.ndarray:
        """Closest member-pair distance between every pair of regions (km)."""
        if "mind" not in self._reach_cache:
            d = self.catalog.distances
            members = [self.member_indices(r) for r in range(len(self))]
            poi_to_region = np.empty((len(self.catalog), len(self)))
            for r, m in enumerate(members):
                poi_to_region[:, r] = d[:, m].min(axis=1)
            mind = np.empty((len(self), len(self)))
            for r, m in enumerate(members):
                mind[r] = poi_to_region[m].min(axis=0)
            self._reach_cache["mind"] = mind
        return self._reach_cache["mind"]

    def reach_matrix(self, speed: float, min_gap: float) -> np.ndarray:
        return self.min_distance_matrix() <= threshold_theta(speed, min_gap)

    def next_interval_table(self) -> np.ndarray:
        """``tab[r, e]``: earliest interval of region r at or after interval e, else -1."""
        count = self.interval_count
        tab = np.full((len(self), count), -1, dtype=int)
        for r in self.regions:
            ks = sorted(r.intervals)
            for e in range(count):
                later = [k for k in ks if k >= e]
                if later:
                    tab[r.id, e] = later[0]
        return tab


def _make_region(rid, cells, intervals, cats, slots, catalog: PoiCatalog, width: int) -> StcRegion:
    members = sorted({p for p, _ in slots})
    idx = [catalog.index_of(p) for p in members]
    order = _contiguous_order(intervals, MINUTES_PER_DAY // width)
    return StcRegion(
        id=rid,
        space_cells=frozenset(cells),
        intervals=order,
        category_nodes=frozenset(cats),
        slots=frozenset(slots),
        category=catalog.hierarchy.lca(cats),
        centroid=(float(catalog.lat[idx].mean()), float(catalog.lon[idx].mean())),
        time_centroid=_time_centroid(order, width),
        interval_minutes=width,
    )


@dataclass
class _Proto:
    id: int
    cells: frozenset
    intervals: frozenset
    cats: frozenset
    slots: frozenset
    centroid: tuple[float, float] = field(default=(0.0, 0.0))

    @property
    def size(self) -> int:
        return len({p for p, _ in self.slots})


def _sort_key(p) -> tuple:
    return (tuple(sorted(p.cells)), tuple(sorted(p.intervals)), tuple(sorted(p.cats)))


def _finalise(protos: list[_Proto], catalog: PoiCatalog, g_s: int, width: int) -> RegionSet:
    protos = sorted(protos, key=_sort_key)
    regions = [_make_region(i, p.cells, p.intervals, p.cats, p.slots, catalog, width) for i, p in enumerate(protos)]
    return RegionSet(regions, catalog, g_s, width)


def build_regions(catalog: PoiCatalog, g_s: int = 4, time_interval: int = 60) -> RegionSet:
    """One region per (grid cell, time interval, leaf category) holding at least one open POI."""
    if g_s < 1:
        raise ValueError("g_s must be >= 1")
    if time_interval <= 0 or MINUTES_PER_DAY % time_interval:
        raise ValueError("time_interval must divide 1440")
    bbox = catalog.bbox
    buckets: dict[tuple, set] = {}
    for poi in catalog:
        cell = bbox.cell(poi.lat, poi.lon, g_s)
        for k in range(MINUTES_PER_DAY // time_interval):
            if _open_during(poi, k * time_interval, (k + 1) * time_interval):
                buckets.setdefault((cell, k, poi.leaf), set()).add((poi.id, k))
    protos = [
        _Proto(0, frozenset([cell]), frozenset([k]), frozenset([leaf]), frozenset(slots))
        for (cell, k, leaf), slots in buckets.items()
    ]
    return _finalise(protos, catalog, g_s, time_interval)


def _centroid(slots, catalog: PoiCatalog) -> tuple[float, float]:
    idx = [catalog.index_of(p) for p in sorted({p for p, _ in slots})]
    return float(catalog.lat[idx].mean()), float(catalog.lon[idx].mean())


def _union(a: _Proto, b: _Proto, catalog: PoiCatalog) -> _Proto:
    slots = a.slots | b.slots
    return _Proto(min(a.id, b.id), a.cells | b.cells, a.intervals | b.intervals, a.cats | b.cats, slots,
                  _centroid(slots, catalog))


def _merge_groups(protos, group_key, candidates, distance, kappa, catalog):
    """Greedy merging of under-populated regions within groups sharing ``group_key``."""
    groups: dict = {}
    for p in protos:
        groups.setdefault(group_key(p), []).append(p)
    out = []
    for key in sorted(groups, key=repr):
        group = groups[key]
        while True:
            group.sort(key=lambda p: p.id)
            merged = False
            for small in (p for p in group if p.size < kappa):
                cands = [c for c in candidates(small, group) if c is not small]
                if not cands:
                    continue
                best = min(cands, key=lambda c: (distance(small, c), c.id))
                group.remove(small)
                group.remove(best)
                group.append(_union(small, best, catalog))
                merged = True
                break
            if not merged:
                break
        out.extend(group)
    return out


def merge_regions(regions: RegionSet, kappa: int = 10, order: Sequence[str] = DIMENSIONS) -> RegionSet:
    """Merge regions with fewer than ``kappa`` POIs, one greedy pass per dimension in ``order``.

    Space merges stay inside coarser grid cells (g_s = 2, then 1); time merges join
    adjacent intervals; category merges join siblings under the nearest shared ancestor.
    """
    if sorted(order) != sorted(DIMENSIONS):
        raise ValueError(f"order must be a permutation of {DIMENSIONS}")
    catalog, g_s, width = regions.catalog, regions.g_s, regions.time_interval
    count = MINUTES_PER_DAY // width
    hierarchy = catalog.hierarchy
    protos = [
        _Proto(r.id, r.space_cells, frozenset(r.intervals), r.category_nodes, r.slots, r.centroid)
        for r in regions
    ]

    def coarse(cells, g):
        return frozenset((c // g_s) * g // g_s * g + (c % g_s) * g // g_s for c in cells)

    def space_dist(a, b):
        return haversine(a.centroid[0], a.centroid[1], b.centroid[0], b.centroid[1])

    def time_dist(a, b):
        ta = _time_centroid(_contiguous_order(a.intervals, count), width)
        tb = _time_centroid(_contiguous_order(b.intervals, count), width)
        diff = abs(ta - tb)
        return min(diff, MINUTES_PER_DAY - diff)

    def time_adjacent(small, group):
        ks = small.intervals
        return [c for c in group
                if any((k + 1) % count in c.intervals or (k - 1) % count in c.intervals for k in ks)]

    def rep(p):
        return hierarchy.lca(p.cats)

    def category_candidates(small, group):
        c = rep(small)
        if c is None:
            return []
        for level in range(hierarchy.level(c) - 1, 0, -1):
            anc = hierarchy.ancestor(c, level)
            cands = [o for o in group if o is not small and rep(o) is not None
                     and hierarchy.ancestor(rep(o), level) == anc]
            if cands:
                return cands
        return []

    def category_dist(a, b):
        return hierarchy.depth - hierarchy.common_level(rep(a), rep(b))

    for dim in order:
        if dim == "space":
            for g in (2, 1):
                if g >= g_s:
                    continue
                protos = _merge_groups(
                    protos, lambda p, g=g: (p.intervals, p.cats, coarse(p.cells, g)),
                    lambda s, grp: grp, space_dist, kappa, catalog)
        elif dim == "time":
            protos = _merge_groups(protos, lambda p: (p.cells, p.cats), time_adjacent, time_dist, kappa, catalog)
        else:
            protos = _merge_groups(protos, lambda p: (p.cells, p.intervals), category_candidates,
                                   category_dist, kappa, catalog)
    return _finalise(protos, catalog, g_s, width)


def region_reachable(r_a: StcRegion, r_b: StcRegion, catalog: PoiCatalog, speed: float, min_gap: float) -> bool:
    """True when some member of ``r_b`` is reachable from some member of ``r_a`` in ``min_gap`` minutes."""
    theta = threshold_theta(speed, min_gap)
    d = catalog.distances
    ia = [catalog.index_of(p) for p in r_a.members]
    ib = [catalog.index_of(p) for p in r_b.members]
    return bool(d[np.ix_(ia, ib)].min() <= theta)


def time_feasible(windows: Sequence[Iterable[int]]) -> bool:
    """Whether some non-decreasing choice of one interval per window exists (day-linear)."""
    cur = -1
    for w in windows:
        later = [k for k in w if k >= cur]
        if not later:
            return False
        cur = min(later)
    return True


@dataclass
class NGramSet:
    n: int
    grams: np.ndarray  # (N, n) region ids, lexicographically sorted

    def __len__(self) -> int:
        return len(self.grams)

    def __contains__(self, gram) -> bool:
        return tuple(gram) in self.as_set()

    def as_set(self) -> set[tuple[int, ...]]:
        if not hasattr(self, "_set"):
            self._set = set(map(tuple, self.grams.tolist()))
        return self._set

    @property
    def index(self) -> dict[int, np.ndarray]:
        """Region id -> rows of ``grams`` containing it."""
        if not hasattr(self, "_index"):
            idx: dict[int, list] = {}
            for row, gram in enumerate(self.grams.tolist()):
                for r in set(gram):
                    idx.setdefault(r, []).append(row)
            self._index = {r: np.array(rows) for r, rows in idx.items()}
        return self._index


def build_ngram_set(regions: RegionSet, n: int, speed: float, min_gap: float,
                    cap: float = 5e7, reach: np.ndarray | None = None) -> NGramSet:
    """All length-n region sequences with reachable links and a feasible time ordering."""
    if n < 1:
        raise ValueError("n must be >= 1")
    size = len(regions)
    if n >= 3 and float(size) ** n > cap:
        raise NGramMemoryError(
            f"|R|^n = {float(size) ** n:.3g} exceeds cap {cap:.3g}; use iter_ngrams for on-the-fly generation")
    if reach is None:
        reach = regions.reach_matrix(speed, min_gap)
    nxt = regions.next_interval_table()
    grams = np.arange(size, dtype=np.int32).reshape(-1, 1)
    earliest = np.array([min(r.intervals) for r in regions], dtype=int) if size else np.zeros(0, dtype=int)
    for _ in range(n - 1):
        rows, cols, new_e = [], [], []
        last = grams[:, -1]
        for c in range(size):
            k = nxt[c, earliest] if len(earliest) else np.zeros(0, dtype=int)
            ok = reach[last, c] & (k >= 0)
            sel = np.nonzero(ok)[0]
            rows.append(sel)
            cols.append(np.full(len(sel), c, dtype=np.int32))
            new_e.append(k[sel])
        rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
        grams = np.column_stack([grams[rows], np.concatenate(cols) if cols else np.zeros(0, np.int32)])
        earliest = np.concatenate(new_e) if new_e else np.zeros(0, dtype=int)
    if len(grams):
        order = np.lexsort(grams.T[::-1])
        grams = grams[order]
    return NGramSet(n, grams.astype(np.int32).reshape(-1, n))


def iter_ngrams(regions: RegionSet, n: int, speed: float, min_gap: float):
    """Lazily yield feasible n-grams in lexicographic order without materialising the set."""
    reach = regions.reach_matrix(speed, min_gap)
    windows = [r.intervals for r in regions]

    def extend(prefix):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for c in range(len(regions)):
            if prefix and not reach[prefix[-1], c]:
                continue
            if not time_feasible([windows[r] for r in prefix] + [windows[c]]):
                continue
            yield from extend(prefix + [c])

    yield from extend([])


def brute_force_ngrams(regions: RegionSet, n: int, speed: float, min_gap: float) -> set[tuple[int, ...]]:
    """Reference filter over the full product (test oracle; exponential)."""
    out = set()
    for gram in itertools.product(range(len(regions)), repeat=n):
        if not all(region_reachable(regions[a], regions[b], regions.catalog, speed, min_gap)
                   for a, b in zip(gram, gram[1:])):
            continue
        if time_feasible([regions[r].intervals for r in gram]):
            out.add(gram)
    return out


def project_trajectory(traj, regions: RegionSet, axis: TimeAxis) -> list[int]:
    """Map each ``(poi, timestep)`` to the region owning that POI at that time."""
    out = []
    for i, (poi_id, t) in enumerate(traj.points if hasattr(traj, "points") else traj):
        minute = axis.minute(t)
        if poi_id not in regions.catalog or not open_at(regions.catalog[poi_id], minute):
            raise UnmappableError(f"point {i} ({poi_id!r}, t={t}) is not open / unknown")
        rid = regions.region_of(poi_id, minute)
        if rid is None:
            raise UnmappableError(f"point {i} ({poi_id!r}, t={t}) has no region")
        out.append(rid)
    return out
