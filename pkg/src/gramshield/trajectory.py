"""POI-level trajectories, JSON Lines I/O and the feasibility validator."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .catalog import PoiCatalog, TimeAxis, open_at, speed_at, threshold_theta


@dataclass(frozen=True)
class Trajectory:
    """Sequence of ``(poi_id, timestep)`` points belonging to one user."""

    user: str
    points: tuple[tuple[str, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((str(p), int(t)) for p, t in self.points))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def pois(self) -> list[str]:
        return [p for p, _ in self.points]

    @property
    def times(self) -> list[int]:
        return [t for _, t in self.points]

    def to_json(self) -> dict:
        return {"user": self.user, "points": [{"poi": p, "t": t} for p, t in self.points]}

    @classmethod
    def from_json(cls, obj: dict) -> "Trajectory":
        return cls(str(obj["user"]), tuple((pt["poi"], pt["t"]) for pt in obj["points"]))


def read_jsonl(path: str | Path) -> list[Trajectory]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(Trajectory.from_json(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return out


def write_jsonl(trajectories: Iterable[Trajectory], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(json.dumps(traj.to_json(), separators=(",", ":")) + "\n")


def link_feasible(catalog: PoiCatalog, axis: TimeAxis, speed, a: tuple[str, int], b: tuple[str, int]) -> bool:
    (pa, ta), (pb, tb) = a, b
    if tb <= ta:
        return False
    gap = (tb - ta) * axis.g_t
    theta = threshold_theta(speed_at(speed, axis.minute(ta)), gap)
    return catalog.distance(pa, pb) <= theta


def violation(traj: Trajectory | Sequence[tuple[str, int]], catalog: PoiCatalog, axis: TimeAxis, speed) -> str | None:
    """First reason ``traj`` is infeasible, or None.

    Reasons: ``"empty"``, ``"unknown-poi"``, ``"time-range"``, ``"non-monotone"``,
    ``"closed"``, ``"unreachable"``.
    """
    points = traj.points if isinstance(traj, Trajectory) else tuple(traj)
    if not points:
        return "empty"
    for p, t in points:
        if p not in catalog:
            return "unknown-poi"
        if not 0 <= t < axis.size:
            return "time-range"
    for (_, t1), (_, t2) in zip(points, points[1:]):
        if t2 <= t1:
            return "non-monotone"
    for p, t in points:
        if not open_at(catalog[p], axis.minute(t)):
            return "closed"
    for a, b in zip(points, points[1:]):
        if not link_feasible(catalog, axis, speed, a, b):
            return "unreachable"
    return None


def is_feasible(traj, catalog: PoiCatalog, axis: TimeAxis, speed) -> bool:
    return violation(traj, catalog, axis, speed) is None
