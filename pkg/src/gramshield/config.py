"""Run configuration: defaults and a flat ``key = value`` file format."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .distance import DistanceParams


@dataclass(frozen=True)
class Config:
    g_t: int = 10
    n: int = 2
    epsilon: float = 5.0
    g_s: int = 4
    kappa: int = 10
    time_interval: int = 60
    merge_order: tuple[str, ...] = ("space", "time", "category")
    speed: float = 4.0
    speed_table: tuple[float, ...] | None = None
    gamma: int = 50_000
    seed: int = 0
    time_cap: float = 12.0
    unrelated_cost: float = 10.0
    level_costs: tuple[float, ...] | None = None
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    ngram_cap: float = 5e7
    mbr_slack: float | None = None  # km; None = reach at the widest gap Z allows
    sampler: str = "exact"
    hours_templates: dict = field(default_factory=dict)
    count: int = 1000  # synthetic trajectories per datagen run
    events: tuple = ()  # (name, "poi"|"category", target, start_min, end_min, users)

    def __post_init__(self):
        if self.speed_table is not None and len(self.speed_table) != 24:
            raise ValueError(f"speed_table needs 24 hourly values, got {len(self.speed_table)}")
        if self.sampler not in ("exact", "rejection"):
            raise ValueError(f"sampler must be exact or rejection, got {self.sampler!r}")

    @property
    def distance_params(self) -> DistanceParams:
        return DistanceParams(time_cap=self.time_cap, unrelated_cost=self.unrelated_cost,
                              level_costs=self.level_costs, weights=self.weights)

    @property
    def travel_speed(self):
        """Per-hour table when configured, else the constant speed."""
        return self.speed_table if self.speed_table else self.speed

    def with_(self, **kw) -> "Config":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out


_TUPLE_FLOAT = {"speed_table", "level_costs", "weights"}


def _parse_value(key: str, raw: str):
    kinds = {f.name: f.type for f in fields(Config)}
    raw = raw.strip()
    if key == "merge_order":
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if key in _TUPLE_FLOAT:
        return tuple(float(x) for x in raw.split(",") if x.strip()) or None
    if key == "mbr_slack":
        return None if raw.lower() in ("", "none", "auto") else float(raw)
    if key == "sampler":
        return raw
    t = kinds[key]
    if "int" in str(t) and "float" not in str(t):
        return int(raw)
    return float(raw)


def parse_config(text: str, base: Config | None = None) -> Config:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    ``hours.<category> = open,close`` lines set opening-hour templates and
    ``event.<name> = poi:<id>|category:<id>, start_min, end_min, users`` lines
    add synthetic events.
    """
    base = base or Config()
    known = {f.name for f in fields(Config)}
    updates: dict = {}
    templates = dict(base.hours_templates)
    events = list(base.events)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, raw = (x.strip() for x in line.split("=", 1))
        if key.startswith("hours."):
            o, c = (int(x) for x in raw.split(","))
            templates[key[len("hours."):]] = (o, c)
            continue
        if key.startswith("event."):
            try:
                events.append(parse_event(key[len("event."):], raw))
            except ValueError as exc:
                raise ValueError(f"config line {lineno}: {exc}") from None
            continue
        if key not in known or key in ("hours_templates", "events"):
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        try:
            updates[key] = _parse_value(key, raw)
            replace(base, **{key: updates[key]})
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: bad value for {key}: {exc}") from None
    return replace(base, hours_templates=templates, events=tuple(events), **updates)


def parse_event(name: str, raw: str) -> tuple:
    parts = [x.strip() for x in raw.split(",")]
    if len(parts) != 4 or ":" not in parts[0]:
        raise ValueError(f"event {name!r}: expected kind:target, start_min, end_min, users")
    kind, target = (x.strip() for x in parts[0].split(":", 1))
    if kind not in ("poi", "category"):
        raise ValueError(f"event {name!r}: kind must be poi or category")
    start, end, users = int(parts[1]), int(parts[2]), int(parts[3])
    if not 0 <= start < end <= 1440 or users < 0:
        raise ValueError(f"event {name!r}: bad window or size")
    return (name, kind, target, start, end, users)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    return parse_config(Path(path).read_text(encoding="utf-8"))
