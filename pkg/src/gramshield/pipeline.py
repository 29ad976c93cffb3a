"""End-to-end perturbation of trajectory sets under any mechanism."""

from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .baselines import (MechanismKind, perturb_independent, perturb_ngram_noh, perturb_phys_dist,
                        reconstruct_ngram_noh)
from .mechanism import substream
from .model import RegionModel
from .perturb import perturb_trajectory
from .reconstruct import SmoothingError, mbr_prune, sample_poi_trajectory, solve_region_path
from .regions import UnmappableError, project_trajectory
from .trajectory import Trajectory, violation


@dataclass
class RunResult:
    user: str
    trajectory: Trajectory | None
    calls: int = 0
    epsilon_prime: float = 0.0
    smoothed: bool = False
    region_changed: bool = False
    fallback: bool = False
    reach_fallbacks: int = 0
    dropped: str | None = None


def perturb_one(traj: Trajectory, model: RegionModel, kind: MechanismKind | str, epsilon: float, rng) -> RunResult:
    """Filter, perturb and rebuild a single trajectory; never reads beyond its own input."""
    kind = MechanismKind(kind)
    catalog, axis, speed = model.catalog, model.axis, model.speed
    res = RunResult(traj.user, None)
    reason = violation(traj, catalog, axis, speed)
    if reason is not None:
        res.dropped = f"input-{reason}"
        return res
    res.calls = kind.calls(len(traj), model.n)
    res.epsilon_prime = kind.epsilon_prime(epsilon, len(traj), model.n)
    try:
        if kind in (MechanismKind.NGRAM, MechanismKind.PHYS_DIST):
            path = project_trajectory(traj, model.regions, axis)
            metric = "semantic" if kind is MechanismKind.NGRAM else "physical"
            if kind is MechanismKind.NGRAM:
                record = perturb_trajectory(path, model, epsilon, rng)
            else:
                record = perturb_phys_dist(path, model, epsilon, rng)
            instance = mbr_prune(record, model, model.config.mbr_slack, metric)
            solved = solve_region_path(instance)
            res.fallback = solved.fallback
            points, info = sample_poi_trajectory(solved.regions, model, rng)
            res.smoothed, res.region_changed = info.smoothed, info.region_changed
        elif kind is MechanismKind.NGRAM_NOH:
            record = perturb_ngram_noh(traj, model, epsilon, rng)
            points = reconstruct_ngram_noh(record, model)
        else:
            out = perturb_independent(traj, model, epsilon, rng, kind is MechanismKind.IND_REACH)
            points, res.smoothed, res.reach_fallbacks = out.points, out.smoothed, out.fallbacks
    except UnmappableError:
        res.dropped = "unmappable"
        return res
    except SmoothingError:
        res.dropped = "unsmoothable"
        return res
    result = Trajectory(traj.user, tuple(points))
    if violation(result, catalog, axis, speed) is not None:
        res.dropped = "invalid-output"
        return res
    res.trajectory = result
    return res


_WORKER: dict = {}


def _init_worker(model, kind, epsilon, seed):
    _WORKER.update(model=model, kind=kind, epsilon=epsilon, seed=seed)


def _run_indexed(item):
    i, traj = item
    w = _WORKER
    return perturb_one(traj, w["model"], w["kind"], w["epsilon"], substream(w["seed"], (i, traj.user)))


def perturb_set(trajs: Sequence[Trajectory], model: RegionModel, kind: MechanismKind | str, epsilon: float,
                seed: int, jobs: int = 1) -> list[RunResult]:
    """Results in input order; each trajectory draws from its own seeded stream."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    kind = MechanismKind(kind)
    items = list(enumerate(trajs))
    if jobs <= 1:
        _init_worker(model, kind, epsilon, seed)
        return [_run_indexed(it) for it in items]
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(model, kind, epsilon, seed)) as pool:
        return list(pool.map(_run_indexed, items, chunksize=16))


def manifest(results: Sequence[RunResult], model: RegionModel, kind: MechanismKind | str, epsilon: float,
             seed: int) -> dict:
    kind = MechanismKind(kind)
    kept = [r for r in results if r.trajectory is not None]
    drops = Counter(r.dropped for r in results if r.dropped)
    return {
        "mechanism": kind.value,
        "epsilon": epsilon,
        "seed": seed,
        "n": model.n,
        "config": model.config.to_dict(),
        "input_trajectories": len(results),
        "output_trajectories": len(kept),
        "dropped": dict(sorted(drops.items())),
        "smoothing_rate": (sum(r.smoothed for r in kept) / len(kept)) if kept else 0.0,
        "region_changed": sum(r.region_changed for r in kept),
        "reconstruction_fallbacks": sum(r.fallback for r in kept),
        "reach_fallbacks": sum(r.reach_fallbacks for r in results),
        "per_trajectory": [{"user": r.user, "calls": r.calls, "epsilon_prime": r.epsilon_prime,
                            "smoothed": r.smoothed, "dropped": r.dropped} for r in results],
    }


def manifest_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"
