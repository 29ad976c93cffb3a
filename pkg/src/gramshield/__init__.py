"""Locally private release of semantic trajectories via overlapping n-gram perturbation."""

from .catalog import CategoryHierarchy, Poi, PoiCatalog, TimeAxis, load_catalog
from .config import Config, load_config, parse_config
from .datagen import Event, campus_catalog, default_events, generate_campus
from .model import RegionModel, build_model, load_model, save_model
from .perturb import PerturbRecord, perturb_trajectory
from .pipeline import perturb_one, perturb_set
from .trajectory import Trajectory, read_jsonl, write_jsonl

__all__ = [
    "CategoryHierarchy", "Config", "Event", "Poi", "PoiCatalog", "PerturbRecord", "RegionModel", "TimeAxis",
    "Trajectory", "build_model", "campus_catalog", "default_events", "generate_campus", "load_catalog", "load_config", "load_model", "parse_config",
    "perturb_one", "perturb_set", "perturb_trajectory", "read_jsonl", "save_model", "write_jsonl",
]
__version__ = "0.1.0"
