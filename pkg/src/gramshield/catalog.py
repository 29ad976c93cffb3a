"""POI universe: places, category hierarchy, time axis and reachability."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0
MINUTES_PER_DAY = 24 * 60


class CatalogError(ValueError):
    """Raised when POI or hierarchy input fails validation."""


@dataclass(frozen=True)
class Poi:
    id: str
    lat: float
    lon: float
    category_path: tuple[str, ...]
    open_min: int
    close_min: int
    popularity: float = 0.0

    @property
    def leaf(self) -> str:
        return self.category_path[-1]

    def is_open(self, minute: int) -> bool:
        return open_at(self, minute)


@dataclass(frozen=True)
class TimeAxis:
    """Quantised day: ``g_t`` minutes per timestep, timesteps ``0..size-1``."""

    g_t: int = 10

    def __post_init__(self):
        if self.g_t <= 0 or MINUTES_PER_DAY % self.g_t:
            raise ValueError(f"g_t={self.g_t} must be a positive divisor of 1440")

    @property
    def size(self) -> int:
        return MINUTES_PER_DAY // self.g_t

    def minute(self, t: int) -> int:
        return int(t) * self.g_t

    def timestep(self, minute: int) -> int:
        return int(minute) // self.g_t


class CategoryHierarchy:
    """Rooted forest of category nodes (levels 1..depth)."""

    def __init__(self, nodes: Mapping[str, tuple[int, str | None]], depth: int = 3):
        self.depth = depth
        self._level: dict[str, int] = {}
        self._parent: dict[str, str | None] = {}
        for node, (level, parent) in nodes.items():
            if not 1 <= level <= depth:
                raise CatalogError(f"category {node!r}: level {level} outside 1..{depth}")
            if level == 1 and parent:
                raise CatalogError(f"category {node!r}: level-1 node cannot have a parent")
            if level > 1 and not parent:
                raise CatalogError(f"category {node!r}: level-{level} node needs a parent")
            self._level[node] = level
            self._parent[node] = parent or None
        for node, parent in self._parent.items():
            if parent is None:
                continue
            if parent not in self._level:
                raise CatalogError(f"category {node!r}: unknown parent {parent!r}")
            if self._level[parent] != self._level[node] - 1:
                raise CatalogError(f"category {node!r}: parent {parent!r} is not one level up")
        self._paths = {node: self._build_path(node) for node in self._level}

    def _build_path(self, node: str) -> tuple[str, ...]:
        path = [node]
        while self._parent[path[-1]] is not None:
            path.append(self._parent[path[-1]])
        return tuple(reversed(path))

    def __contains__(self, node: object) -> bool:
        return node in self._level

    def __iter__(self):
        return iter(self._level)

    def __len__(self) -> int:
        return len(self._level)

    def level(self, node: str) -> int:
        return self._level[node]

    def parent(self, node: str) -> str | None:
        return self._parent[node]

    def path(self, node: str) -> tuple[str, ...]:
        """Root-to-node path."""
        try:
            return self._paths[node]
        except KeyError:
            raise CatalogError(f"unknown category {node!r}") from None

    def ancestor(self, node: str, level: int) -> str | None:
        path = self.path(node)
        return path[level - 1] if level <= len(path) else None

    def common_level(self, a: str, b: str) -> int:
        """Level of the deepest common ancestor, 0 when the roots differ."""
        level = 0
        for x, y in zip(self.path(a), self.path(b)):
            if x != y:
                break
            level += 1
        return level

    def lca(self, nodes: Iterable[str]) -> str | None:
        paths = [self.path(n) for n in nodes]
        if not paths:
            return None
        common = None
        for column in zip(*paths):
            if len(set(column)) != 1:
                break
            common = column[0]
        return common

    def items(self):
        """(node, level, parent) rows in a stable order."""
        return [(n, self._level[n], self._parent[n]) for n in sorted(self._level, key=lambda n: (self._level[n], n))]


def haversine(lat1, lon1, lat2, lon2):
    """Great-circle distance in km; broadcasts over numpy arrays."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(x, dtype=float)) for x in (lat1, lon1, lat2, lon2))
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    d = 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    return float(d) if d.ndim == 0 else d


def physical_distance(p_a: Poi, p_b: Poi) -> float:
    return haversine(p_a.lat, p_a.lon, p_b.lat, p_b.lon)


def speed_at(speed: float | Sequence[float], minute: int) -> float:
    """Travel speed in km/h; a 24-entry sequence is read as a per-hour table."""
    if isinstance(speed, (int, float)):
        return float(speed)
    return float(speed[(int(minute) % MINUTES_PER_DAY) // 60])


def threshold_theta(speed: float, gap: float) -> float:
    """Maximum distance (km) coverable in ``gap`` minutes at ``speed`` km/h."""
    if speed <= 0 or gap <= 0:
        raise ValueError(f"speed and gap must be positive (got speed={speed}, gap={gap})")
    return speed * gap / 60.0


def reachable(p_a: Poi, p_b: Poi, gap: float, speed: float) -> bool:
    return physical_distance(p_a, p_b) <= threshold_theta(speed, gap)


def open_at(p: Poi, minute: int) -> bool:
    """Whether ``p`` is open at minute-of-day ``minute``; spans with close < open wrap midnight."""
    m = int(minute) % MINUTES_PER_DAY
    if p.open_min < p.close_min:
        return p.open_min <= m < p.close_min
    return m >= p.open_min or m < p.close_min


@dataclass(frozen=True)
class BoundingBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def diagonal_km(self) -> float:
        """Largest corner-to-corner distance; equals the diagonal at city scale."""
        corners = [(la, lo) for la in (self.lat_min, self.lat_max) for lo in (self.lon_min, self.lon_max)]
        best = 0.0
        for i, (la1, lo1) in enumerate(corners):
            for la2, lo2 in corners[i + 1:]:
                best = max(best, haversine(la1, lo1, la2, lo2))
        return best

    def cell(self, lat: float, lon: float, g_s: int) -> int:
        """Row-major cell id in a g_s x g_s equal-degree grid; boundary ties go to the lower cell."""
        return self.row(lat, g_s) * g_s + self.col(lon, g_s)

    def row(self, lat: float, g_s: int) -> int:
        return _bin(lat, self.lat_min, self.lat_max, g_s)

    def col(self, lon: float, g_s: int) -> int:
        return _bin(lon, self.lon_min, self.lon_max, g_s)


def _bin(x: float, lo: float, hi: float, k: int) -> int:
    if hi <= lo:
        return 0
    pos = (x - lo) / (hi - lo) * k
    idx = math.ceil(pos) - 1
    return min(max(idx, 0), k - 1)


@dataclass
class PoiCatalog:
    """Immutable POI set with hierarchy, id index and a cached distance matrix.

    ``distance_override`` maps ordered ``(id_a, id_b)`` pairs to km and replaces
    Haversine for those pairs (e.g. one-way roads).
    """

    pois: tuple[Poi, ...]
    hierarchy: CategoryHierarchy
    distance_override: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        self.pois = tuple(self.pois)
        self._index: dict[str, int] = {}
        for i, p in enumerate(self.pois):
            if p.id in self._index:
                raise CatalogError(f"duplicate POI id {p.id!r}")
            self._index[p.id] = i
        self.lat = np.array([p.lat for p in self.pois], dtype=float)
        self.lon = np.array([p.lon for p in self.pois], dtype=float)
        self._dist: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.pois)

    def __iter__(self):
        return iter(self.pois)

    def __getitem__(self, poi_id: str) -> Poi:
        return self.pois[self._index[poi_id]]

    def __contains__(self, poi_id: object) -> bool:
        return poi_id in self._index

    def index_of(self, poi_id: str) -> int:
        return self._index[poi_id]

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.pois]

    @property
    def bbox(self) -> BoundingBox:
        if not self.pois:
            return BoundingBox(0.0, 0.0, 0.0, 0.0)
        return BoundingBox(float(self.lat.min()), float(self.lat.max()), float(self.lon.min()), float(self.lon.max()))

    @property
    def distances(self) -> np.ndarray:
        """Pairwise POI distance matrix in km (row = from, column = to)."""
        if self._dist is None:
            d = haversine(self.lat[:, None], self.lon[:, None], self.lat[None, :], self.lon[None, :])
            d = np.atleast_2d(np.asarray(d, dtype=float)).reshape(len(self), len(self))
            for (a, b), km in self.distance_override.items():
                d[self._index[a], self._index[b]] = km
            d.setflags(write=False)
            self._dist = d
        return self._dist

    def distance(self, a: str, b: str) -> float:
        # read from the matrix so scalar and vectorised checks agree to the last bit
        return float(self.distances[self._index[a], self._index[b]])

    def reachable(self, a: str, b: str, gap: float, speed: float | Sequence[float], minute: int = 0) -> bool:
        return self.distance(a, b) <= threshold_theta(speed_at(speed, minute), gap)

    def open_mask(self, minute: int) -> np.ndarray:
        return np.array([open_at(p, minute) for p in self.pois], dtype=bool)


def _strip_comments(lines: Iterable[str]):
    for line in lines:
        if line.lstrip().startswith("#") or not line.strip():
            continue
        yield line


def load_hierarchy(path: str | Path) -> CategoryHierarchy:
    nodes: dict[str, tuple[int, str | None]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_strip_comments(fh))
        for lineno, row in enumerate(reader, start=2):
            try:
                node = row["node_id"].strip()
                level = int(row["level"])
                parent = (row.get("parent_id") or "").strip() or None
            except (KeyError, TypeError, ValueError) as exc:
                raise CatalogError(f"{path}: malformed hierarchy row {lineno}: {exc}") from None
            if node in nodes:
                raise CatalogError(f"{path}: duplicate category {node!r} on row {lineno}")
            nodes[node] = (level, parent)
    return CategoryHierarchy(nodes)


def load_catalog(
    poi_file: str | Path,
    hierarchy_file: str | Path,
    hours_templates: Mapping[str, tuple[int, int]] | None = None,
) -> PoiCatalog:
    """Load POI and hierarchy CSVs.

    Missing opening hours fall back to ``hours_templates`` keyed by any node on the
    POI's category path (deepest match wins), then to always-open.
    """
    hierarchy = load_hierarchy(hierarchy_file)
    templates = dict(hours_templates or {})
    pois = []
    seen = set()
    with open(poi_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_strip_comments(fh))
        for lineno, row in enumerate(reader, start=2):
            try:
                poi = _parse_poi_row(row, hierarchy, templates)
            except (CatalogError, KeyError, TypeError, ValueError) as exc:
                raise CatalogError(f"{poi_file}: row {lineno}: {exc}") from None
            if poi.id in seen:
                raise CatalogError(f"{poi_file}: row {lineno}: duplicate POI id {poi.id!r}")
            seen.add(poi.id)
            pois.append(poi)
    return PoiCatalog(tuple(pois), hierarchy)


def _parse_poi_row(row, hierarchy: CategoryHierarchy, templates) -> Poi:
    poi_id = row["id"].strip()
    if not poi_id:
        raise CatalogError("empty id")
    lat, lon = float(row["lat"]), float(row["lon"])
    if not -90 <= lat <= 90 or not -180 <= lon <= 180:
        raise CatalogError(f"coordinates out of range ({lat}, {lon})")
    cats = [(row.get(k) or "").strip() for k in ("cat_l1", "cat_l2", "cat_l3")]
    cats = [c for c in cats if c]
    if not cats:
        raise CatalogError("no category")
    for c in cats:
        if c not in hierarchy:
            raise CatalogError(f"unknown category id {c!r}")
    path = hierarchy.path(cats[-1])
    if list(path) != cats:
        raise CatalogError(f"category columns {cats} are not a root-to-node path")
    open_s, close_s = (row.get("open_min") or "").strip(), (row.get("close_min") or "").strip()
    if open_s and close_s:
        open_min, close_min = int(open_s), int(close_s)
    else:
        open_min, close_min = _template_hours(path, templates)
    check_hours(open_min, close_min)
    popularity = float(row.get("popularity") or 0.0)
    if popularity < 0:
        raise CatalogError("negative popularity")
    return Poi(poi_id, lat, lon, path, open_min, close_min, popularity)


def _template_hours(path, templates) -> tuple[int, int]:
    for node in reversed(path):
        if node in templates:
            return tuple(templates[node])
    return 0, MINUTES_PER_DAY


def check_hours(open_min: int, close_min: int) -> None:
    # close_min == 1440 encodes "open until midnight"; 0..1440 is all-day
    if not 0 <= open_min < MINUTES_PER_DAY or not 0 <= close_min <= MINUTES_PER_DAY:
        raise CatalogError(f"opening hours ({open_min}, {close_min}) outside the day")
    if open_min == close_min % MINUTES_PER_DAY and close_min != MINUTES_PER_DAY:
        raise CatalogError("POI open for zero minutes")


def write_catalog(catalog: PoiCatalog, poi_file: str | Path, hierarchy_file: str | Path) -> None:
    with open(hierarchy_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "level", "parent_id"])
        for node, level, parent in catalog.hierarchy.items():
            w.writerow([node, level, parent or ""])
    with open(poi_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "lat", "lon", "cat_l1", "cat_l2", "cat_l3", "open_min", "close_min", "popularity"])
        for p in catalog.pois:
            cats = list(p.category_path) + [""] * (3 - len(p.category_path))
            w.writerow([p.id, repr(p.lat), repr(p.lon), *cats, p.open_min, p.close_min, repr(p.popularity)])
