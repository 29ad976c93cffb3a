"""Utility metrics: per-point error, range-query preservation and hotspots."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import PoiCatalog, TimeAxis
from .distance import DistanceParams
from .trajectory import Trajectory

DIMENSIONS = ("s", "t", "c")
GRANULARITIES = ("poi", "grid4", "grid2", "cat1", "cat2", "cat3")
DEFAULT_ETA = {"poi": 20, "grid4": 20, "grid2": 50, "cat1": 50, "cat2": 30, "cat3": 20}


def point_distances(real: Trajectory, pert: Trajectory, catalog: PoiCatalog, axis: TimeAxis,
                    params: DistanceParams = DistanceParams()) -> dict[str, np.ndarray]:
    """Per-point d_s (km), d_t (hours) and d_c between a real and a perturbed trajectory."""
    if len(real) != len(pert):
        raise ValueError(f"length mismatch for user {real.user!r}: {len(real)} vs {len(pert)}")
    h = catalog.hierarchy
    out = {k: np.zeros(len(real)) for k in DIMENSIONS}
    for i, ((pa, ta), (pb, tb)) in enumerate(zip(real.points, pert.points)):
        out["s"][i] = catalog.distance(pa, pb)
        diff = abs(ta - tb) * axis.g_t % 1440
        out["t"][i] = min(min(diff, 1440 - diff) / 60.0, params.time_cap)
        la, lb = catalog[pa].leaf, catalog[pb].leaf
        out["c"][i] = 0.0 if la == lb else params.category_cost(h.common_level(la, lb))
    ws, wt, wc = params.weights
    out["combined"] = np.sqrt((ws * out["s"]) ** 2 + (wt * out["t"]) ** 2 + (wc * out["c"]) ** 2)
    return out


def _per_trajectory(real, pert, catalog, axis, params, fn) -> float:
    if len(real) != len(pert):
        raise ValueError("trajectory sets differ in size")
    if not real:
        return math.nan
    return float(np.mean([fn(point_distances(a, b, catalog, axis, params)) for a, b in zip(real, pert)]))


def normalized_error(real: Sequence[Trajectory], pert: Sequence[Trajectory], catalog: PoiCatalog, axis: TimeAxis,
                     dimension: str = "combined", params: DistanceParams = DistanceParams()) -> float:
    """Mean over trajectories of the per-point mean distance in one dimension."""
    return _per_trajectory(real, pert, catalog, axis, params, lambda d: d[dimension].mean())


def prq(real: Sequence[Trajectory], pert: Sequence[Trajectory], catalog: PoiCatalog, axis: TimeAxis,
        dimension: str, delta: float, params: DistanceParams = DistanceParams()) -> float:
    """Percentage of points whose perturbed value is within ``delta`` of the real one."""
    return 100.0 * _per_trajectory(real, pert, catalog, axis, params, lambda d: (d[dimension] <= delta).mean())


@dataclass(frozen=True)
class Hotspot:
    entity: str
    t_s: int
    t_e: int  # inclusive
    c: int
    granularity: str = "poi"


def entity_of(poi_id: str, catalog: PoiCatalog, granularity: str) -> str | None:
    p = catalog[poi_id]
    if granularity == "poi":
        return poi_id
    if granularity in ("grid4", "grid2"):
        return f"cell{catalog.bbox.cell(p.lat, p.lon, int(granularity[-1]))}"
    if granularity in ("cat1", "cat2", "cat3"):
        level = int(granularity[-1])
        return p.category_path[level - 1] if len(p.category_path) >= level else None
    raise ValueError(f"unknown granularity {granularity!r}")


def visitor_counts(trajs: Sequence[Trajectory], catalog: PoiCatalog, axis: TimeAxis, granularity: str,
                   window: int = 1) -> dict[str, np.ndarray]:
    """Unique visitors per entity per timestep; a visit at t counts for every start in (t - window, t]."""
    users: dict[str, list[set]] = defaultdict(lambda: [set() for _ in range(axis.size)])
    for u, traj in enumerate(trajs):
        for p, t in traj.points:
            e = entity_of(p, catalog, granularity)
            if e is None:
                continue
            for s in range(max(0, t - window + 1), t + 1):
                users[e][s].add(u)
    return {e: np.array([len(x) for x in sets]) for e, sets in sorted(users.items())}


def hotspots_from_counts(counts: dict[str, np.ndarray], eta: float, granularity: str = "poi") -> list[Hotspot]:
    """Maximal runs with count >= eta, one hotspot each, peak count as ``c``."""
    out = []
    for e, row in counts.items():
        hot = row >= eta
        t = 0
        while t < len(row):
            if not hot[t]:
                t += 1
                continue
            start = t
            while t < len(row) and hot[t]:
                t += 1
            out.append(Hotspot(e, start, t - 1, int(row[start:t].max()), granularity))
    return out


def detect_hotspots(trajs: Sequence[Trajectory], catalog: PoiCatalog, axis: TimeAxis, granularity: str = "poi",
                    eta: float | None = None, window: int = 1) -> list[Hotspot]:
    eta = DEFAULT_ETA[granularity] if eta is None else eta
    return hotspots_from_counts(visitor_counts(trajs, catalog, axis, granularity, window), eta, granularity)


def _pairs(real: Sequence[Hotspot], pert: Sequence[Hotspot]):
    by_key = defaultdict(list)
    for h in real:
        by_key[(h.granularity, h.entity)].append(h)
    pairs = []
    for hh in pert:
        cands = by_key.get((hh.granularity, hh.entity))
        if not cands:
            continue
        best = min(cands, key=lambda h: (abs(h.t_s - hh.t_s) + abs(h.t_e - hh.t_e), h.t_s))
        pairs.append((best, hh))
    return pairs


def ahd(real: Sequence[Hotspot], pert: Sequence[Hotspot], g_t: int = 10) -> float | None:
    """Mean hours between each perturbed hotspot and its nearest real hotspot at the same entity.

    Perturbed hotspots with no real counterpart are skipped; None when nothing is left.
    """
    pairs = _pairs(real, pert)
    if not pairs:
        return None
    return float(np.mean([(abs(h.t_s - hh.t_s) + abs(h.t_e - hh.t_e)) * g_t / 60.0 for h, hh in pairs]))


def acd(real: Sequence[Hotspot], pert: Sequence[Hotspot]) -> float | None:
    pairs = _pairs(real, pert)
    if not pairs:
        return None
    return float(np.mean([abs(h.c - hh.c) for h, hh in pairs]))


# --- reports ---------------------------------------------------------------

PRQ_DELTAS = {"s": 0.5, "t": 1.0, "c": 10.0 / 3.0}


def pair_by_user(real: Sequence[Trajectory], pert: Sequence[Trajectory]):
    """Match perturbed trajectories to real ones by user id.

    Returns ``(real_pairs, pert_pairs, missing)`` where ``missing`` counts real
    users without a perturbed counterpart (dropped during perturbation).
    """
    index = {}
    for t in real:
        if t.user in index:
            raise ValueError(f"duplicate user {t.user!r} in real set")
        index[t.user] = t
    seen = set()
    out_r, out_p = [], []
    for t in pert:
        if t.user not in index:
            raise ValueError(f"perturbed user {t.user!r} has no real trajectory")
        if t.user in seen:
            raise ValueError(f"duplicate user {t.user!r} in perturbed set")
        seen.add(t.user)
        out_r.append(index[t.user])
        out_p.append(t)
    return out_r, out_p, len(index) - len(seen)


def evaluate(real: Sequence[Trajectory], pert: Sequence[Trajectory], catalog: PoiCatalog, axis: TimeAxis,
             params: DistanceParams = DistanceParams()) -> list[tuple[str, str, float | None]]:
    """Metric rows ``(metric, granularity, value)`` for a real/perturbed pair of sets."""
    r, p, missing = pair_by_user(real, pert)
    rows: list[tuple[str, str, float | None]] = [("pairs", "all", float(len(r))), ("missing", "all", float(missing))]
    dists = [point_distances(a, b, catalog, axis, params) for a, b in zip(r, p)]
    for dim in (*DIMENSIONS, "combined"):
        rows.append(("NE", dim, float(np.mean([d[dim].mean() for d in dists])) if dists else None))
    for dim, delta in PRQ_DELTAS.items():
        val = 100.0 * float(np.mean([(d[dim] <= delta).mean() for d in dists])) if dists else None
        rows.append(("PRQ", f"{dim}<={delta:g}", val))
    for g in GRANULARITIES:
        h_real = detect_hotspots(r, catalog, axis, g)
        h_pert = detect_hotspots(p, catalog, axis, g)
        rows.append(("AHD", g, ahd(h_real, h_pert, axis.g_t)))
        rows.append(("ACD", g, acd(h_real, h_pert)))
    return rows


def _fmt(v: float | None) -> str:
    return "absent" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6f}"


def format_table(rows) -> str:
    lines = [f"{'metric':<8} {'granularity':<12} {'value':>14}"]
    lines += [f"{m:<8} {g:<12} {_fmt(v):>14}" for m, g, v in rows]
    return "\n".join(lines) + "\n"


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "granularity", "value"])
    for m, g, v in rows:
        w.writerow([m, g, _fmt(v)])
    return buf.getvalue()
