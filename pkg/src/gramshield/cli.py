"""Command-line entry point: build, perturb, evaluate, datagen, oracle."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .baselines import MechanismKind

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _need_file(path: str | None, what: str) -> Path:
    if path is None or not Path(path).is_file():
        raise UsageError(f"{what}: no such file {path!r}")
    return Path(path)


def _need_dir(path: str | None, what: str) -> Path:
    if path is None or not Path(path).is_dir():
        raise UsageError(f"{what}: no such directory {path!r}")
    return Path(path)


def resolve_seed(arg: int | None, default: int) -> int:
    """``--seed`` beats ``GRAMSHIELD_SEED`` beats the config file."""
    if arg is not None:
        return arg
    env = os.environ.get("GRAMSHIELD_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"GRAMSHIELD_SEED={env!r} is not an integer") from None
    return default


def cmd_build(args) -> int:
    from .catalog import load_catalog
    from .config import load_config
    from .model import build_model, save_model

    config = load_config(_need_file(args.config, "--config") if args.config else None)
    pois = _need_file(args.pois, "--pois")
    hier = _need_file(args.hierarchy, "--hierarchy")
    start = time.perf_counter()
    catalog = load_catalog(pois, hier, config.hours_templates)
    model = build_model(catalog, config)
    save_model(model, args.out)
    elapsed = time.perf_counter() - start
    meta = {"wall_seconds": round(elapsed, 3), "regions": len(model.regions),
            "ngrams": {str(k): len(v) for k, v in sorted(model.ngrams.items())}}
    # wall time lives outside index.json so identical inputs give an identical index
    (Path(args.out) / "build_meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
    print(f"built {len(model.regions)} regions, {meta['ngrams']} grams in {elapsed:.2f}s -> {args.out}")
    return EXIT_OK


def cmd_perturb(args) -> int:
    from .model import load_model
    from .pipeline import manifest, manifest_json, perturb_set
    from .trajectory import read_jsonl, write_jsonl

    index = _need_dir(args.index, "--index")
    trajs_path = _need_file(args.trajectories, "--trajectories")
    if args.epsilon is not None and args.epsilon <= 0:
        raise UsageError("--epsilon must be positive")
    model = load_model(index)
    epsilon = args.epsilon if args.epsilon is not None else model.config.epsilon
    seed = resolve_seed(args.seed, model.config.seed)
    trajs = read_jsonl(trajs_path)
    results = perturb_set(trajs, model, args.mechanism, epsilon, seed, jobs=args.jobs)
    write_jsonl([r.trajectory for r in results if r.trajectory is not None], args.out)
    man = manifest(results, model, args.mechanism, epsilon, seed)
    man_path = Path(args.manifest) if args.manifest else Path(str(args.out) + ".manifest.json")
    man_path.write_text(manifest_json(man), encoding="utf-8")
    print(f"{man['output_trajectories']}/{man['input_trajectories']} trajectories perturbed "
          f"({args.mechanism}, eps={epsilon:g}); dropped {man['dropped']}; manifest {man_path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .metrics import evaluate, format_csv, format_table
    from .model import load_model
    from .trajectory import read_jsonl

    model = load_model(_need_dir(args.index, "--index"))
    real = read_jsonl(_need_file(args.real, "--real"))
    pert = read_jsonl(_need_file(args.perturbed, "--perturbed"))
    rows = evaluate(real, pert, model.catalog, model.axis, model.config.distance_params)
    sys.stdout.write(format_table(rows))
    if args.csv:
        Path(args.csv).write_text(format_csv(rows), encoding="utf-8")
    return EXIT_OK


def cmd_datagen(args) -> int:
    from .catalog import TimeAxis, load_catalog, write_catalog
    from .config import load_config
    from .datagen import campus_catalog, default_events, events_from_config, generate_campus
    from .trajectory import write_jsonl

    config = load_config(_need_file(args.config, "--config") if args.config else None)
    seed = resolve_seed(args.seed, config.seed)
    count = args.count if args.count is not None else config.count
    if args.pois or args.hierarchy:
        catalog = load_catalog(_need_file(args.pois, "--pois"), _need_file(args.hierarchy, "--hierarchy"),
                               config.hours_templates)
        events = events_from_config(config.events)
    else:
        catalog = campus_catalog()
        events = events_from_config(config.events) if config.events else default_events(count)
    if args.no_events:
        events = []
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trajs = generate_campus(catalog, count, events, seed, TimeAxis(config.g_t), config.travel_speed)
    write_catalog(catalog, out / "pois.csv", out / "hierarchy.csv")
    write_jsonl(trajs, out / "trajectories.jsonl")
    print(f"{len(trajs)} trajectories over {len(catalog)} POIs -> {out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .catalog import TimeAxis
    from .mechanism import substream
    from .model import load_model
    from .oracle import GuardExceeded, cardinality_S, enumerate_S, global_perturb
    from .trajectory import Trajectory, read_jsonl, write_jsonl

    if args.action == "cardinality":
        print(f"{cardinality_S(args.num_pois, args.length, args.g_t, args.mu):.6e}")
        return EXIT_OK
    model = load_model(_need_dir(args.index, "--index"))
    axis = TimeAxis(model.config.g_t)
    try:
        space = enumerate_S(model.catalog, args.length, axis, model.speed)
    except GuardExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.action == "enumerate":
        print(len(space))
        if args.out:
            write_jsonl([Trajectory(f"s{i}", s) for i, s in enumerate(space)], args.out)
        return EXIT_OK
    trajs = read_jsonl(_need_file(args.trajectories, "--trajectories"))
    seed = resolve_seed(args.seed, model.config.seed)
    epsilon = args.epsilon if args.epsilon is not None else model.config.epsilon
    out = []
    for i, t in enumerate(trajs):
        if len(t) != args.length:
            raise UsageError(f"trajectory {t.user!r} has length {len(t)}, expected {args.length}")
        pick = global_perturb(t, space, model.catalog, axis, epsilon, substream(seed, (i, t.user)),
                              model.config.distance_params)
        out.append(Trajectory(t.user, pick))
    write_jsonl(out, args.out or "/dev/stdout")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gramshield", description="Semantic n-gram trajectory perturbation under LDP.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build regions and gram sets")
    b.add_argument("--pois", required=True)
    b.add_argument("--hierarchy", required=True)
    b.add_argument("--config")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("perturb", help="perturb a trajectory file")
    q.add_argument("--index", required=True)
    q.add_argument("--trajectories", required=True)
    q.add_argument("--mechanism", choices=[k.value for k in MechanismKind], default="ngram")
    q.add_argument("--epsilon", type=float)
    q.add_argument("--seed", type=int)
    q.add_argument("--out", required=True)
    q.add_argument("--manifest")
    q.add_argument("--jobs", type=int, default=1)
    q.set_defaults(func=cmd_perturb)

    e = sub.add_parser("evaluate", help="compare real and perturbed sets")
    e.add_argument("--index", required=True)
    e.add_argument("--real", required=True)
    e.add_argument("--perturbed", required=True)
    e.add_argument("--csv")
    e.set_defaults(func=cmd_evaluate)

    d = sub.add_parser("datagen", help="synthetic campus trajectories")
    d.add_argument("--config")
    d.add_argument("--pois")
    d.add_argument("--hierarchy")
    d.add_argument("--count", type=int)
    d.add_argument("--seed", type=int)
    d.add_argument("--no-events", action="store_true")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_datagen)

    o = sub.add_parser("oracle", help="toy-scale global mechanism")
    o.add_argument("action", choices=["cardinality", "enumerate", "perturb"])
    o.add_argument("--index")
    o.add_argument("--length", type=int, required=True)
    o.add_argument("--num-pois", type=int, default=1000)
    o.add_argument("--g-t", type=int, default=15)
    o.add_argument("--mu", type=float, default=0.2)
    o.add_argument("--trajectories")
    o.add_argument("--epsilon", type=float)
    o.add_argument("--seed", type=int)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report and exit non-zero
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
