"""Pre-built public structures shared by every perturbation run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .catalog import PoiCatalog, TimeAxis, load_catalog, write_catalog
from .config import Config
from .distance import distance_matrix, unit_bound
from .regions import NGramSet, RegionSet, StcRegion, build_ngram_set, build_regions, merge_regions

INDEX_FORMAT = "gramshield-region-index"
INDEX_VERSION = 1


@dataclass
class RegionModel:
    catalog: PoiCatalog
    axis: TimeAxis
    regions: RegionSet
    config: Config
    ngrams: dict[int, NGramSet] = field(default_factory=dict)
    _dist: dict = field(default_factory=dict, repr=False)
    cache: dict = field(default_factory=dict, repr=False)  # POI-level structures built on demand

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def speed(self):
        return self.config.travel_speed

    @property
    def region_speed(self) -> float:
        """Slowest configured speed; keeps every region-level link feasible at any hour."""
        table = self.config.speed_table
        return float(min(table)) if table else float(self.config.speed)

    @property
    def ds_max(self) -> float:
        return self.catalog.bbox.diagonal_km()

    def distance(self, metric: str = "semantic") -> np.ndarray:
        if metric not in self._dist:
            self._dist[metric] = distance_matrix(self.regions, self.config.distance_params, metric)
        return self._dist[metric]

    def sensitivity(self, k: int, metric: str = "semantic") -> float:
        delta = k * unit_bound(self.ds_max, self.config.distance_params, metric)
        # all candidate distances are zero when the bound is; any positive scale is equivalent
        return delta if delta > 0 else 1.0

    def grams(self, k: int) -> NGramSet:
        if k not in self.ngrams:
            self.ngrams[k] = build_ngram_set(self.regions, k, self.region_speed, self.axis.g_t,
                                             cap=self.config.ngram_cap)
        return self.ngrams[k]


def build_model(catalog: PoiCatalog, config: Config = Config(), grams: bool = True) -> RegionModel:
    axis = TimeAxis(config.g_t)
    regions = build_regions(catalog, config.g_s, config.time_interval)
    regions = merge_regions(regions, config.kappa, config.merge_order)
    model = RegionModel(catalog, axis, regions, config)
    if grams:
        for k in range(1, config.n + 1):
            model.grams(k)
    return model


def _region_to_json(r: StcRegion) -> dict:
    return {
        "id": r.id,
        "space_cells": sorted(r.space_cells),
        "intervals": list(r.intervals),
        "category_nodes": sorted(r.category_nodes),
        "slots": sorted([p, k] for p, k in r.slots),
        "category": r.category,
        "centroid": list(r.centroid),
        "time_centroid": r.time_centroid,
    }


def _region_from_json(obj: dict, width: int) -> StcRegion:
    return StcRegion(
        id=obj["id"],
        space_cells=frozenset(obj["space_cells"]),
        intervals=tuple(obj["intervals"]),
        category_nodes=frozenset(obj["category_nodes"]),
        slots=frozenset((p, k) for p, k in obj["slots"]),
        category=obj["category"],
        centroid=tuple(obj["centroid"]),
        time_centroid=obj["time_centroid"],
        interval_minutes=width,
    )


def save_model(model: RegionModel, out_dir: str | Path) -> None:
    """Write a self-describing, re-loadable index directory (byte-identical for identical inputs)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_catalog(model.catalog, out / "pois.csv", out / "hierarchy.csv")
    cfg = model.config.to_dict()
    cfg["hours_templates"] = {k: list(v) for k, v in sorted(cfg["hours_templates"].items())}
    doc = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "config": cfg,
        "g_s": model.regions.g_s,
        "time_interval": model.regions.time_interval,
        "regions": [_region_to_json(r) for r in model.regions],
        "ngrams": {str(k): model.ngrams[k].grams.tolist() for k in sorted(model.ngrams)},
    }
    with open(out / "index.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(index_dir: str | Path) -> RegionModel:
    from .config import Config as _Config

    src = Path(index_dir)
    with open(src / "index.json", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != INDEX_FORMAT:
        raise ValueError(f"{src}: not a region index")
    if doc.get("version") != INDEX_VERSION:
        raise ValueError(f"{src}: unsupported index version {doc.get('version')}")
    raw = dict(doc["config"])
    for k in ("merge_order", "speed_table", "level_costs", "weights"):
        if raw.get(k) is not None:
            raw[k] = tuple(raw[k])
    raw["hours_templates"] = {k: tuple(v) for k, v in raw.get("hours_templates", {}).items()}
    raw["events"] = tuple(tuple(e) for e in raw.get("events", ()))
    config = _Config(**raw)
    catalog = load_catalog(src / "pois.csv", src / "hierarchy.csv")
    width = doc["time_interval"]
    regions = RegionSet([_region_from_json(r, width) for r in doc["regions"]], catalog, doc["g_s"], width)
    ngrams = {int(k): NGramSet(int(k), np.array(v, dtype=np.int32).reshape(-1, int(k)))
              for k, v in doc["ngrams"].items()}
    return RegionModel(catalog, TimeAxis(config.g_t), regions, config, ngrams)
