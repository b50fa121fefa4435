"""Command-line entry point: ``maneuver-net <subcommand> ...``.

Every subcommand writes ``run_manifest.json`` (resolved configuration, seed,
versions) into its output directory before doing any work, so a run can be
repeated from the manifest alone. Failures print one line
``maneuver-net: error: <category>: <message>`` to stderr and exit 1; usage
errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import FORMAT_VERSION, __version__
from .errors import ConfigError, FormatError, ManeuverNetError, ValidationError

log = logging.getLogger("maneuver_net")

MANIFEST_NAME = "run_manifest.json"


# --------------------------------------------------------------------------
# helpers


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_run_manifest(out: Path, command: str, resolved: dict, seed: int) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": command,
        "seed": seed,
        "resolved": resolved,
        "toolkit_version": __version__,
        "format_version": FORMAT_VERSION,
    }
    path = out / MANIFEST_NAME
    path.write_text(_dump(doc))
    return path


def _read_json(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise FormatError(f"missing file {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return doc


def _resolve(base: Path, p) -> str:
    p = Path(p)
    return str(p if p.is_absolute() else (base / p).resolve())


def _cache_map(items) -> dict[str, str]:
    """``name=dir`` strings (or a mapping) -> {recording name: cache dir}."""
    if isinstance(items, dict):
        return {str(k): str(v) for k, v in items.items()}
    out = {}
    for item in items or ():
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise ConfigError(f"cache entries look like NAME=DIR, got {item!r}")
        out[name] = path
    return out


def _load_data(paths):
    from .ingest import load_recordings, recording_index

    return recording_index(load_recordings(paths))


def _store(data_dirs, cache) -> "ClipStore":
    from .harness import ClipStore

    recs = _load_data(data_dirs) if data_dirs else {}
    return ClipStore(recs, cache_dirs=_cache_map(cache))


def _set_threads(n):
    import torch

    if n is not None:
        if n < 1:
            raise ConfigError("--threads must be >= 1")
        torch.set_num_threads(n)
    return torch.get_num_threads()


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    from .ingest import write_recording
    from .synth import SynthConfig, generate_synthetic

    cfg = SynthConfig.from_file(args.config) if args.config else SynthConfig()
    if args.name:
        cfg = SynthConfig.from_dict({**cfg.to_dict(), "name": args.name})
    write_run_manifest(args.out, "synth", {"synth": cfg.to_dict()}, args.seed)
    rec = generate_synthetic(cfg, args.seed)
    write_recording(rec, args.out)
    print(f"wrote {rec.frame_count} frames, {len(rec.tracks)} tracks, {len(rec.events)} events to {args.out}")
    return 0


def cmd_stats(args) -> int:
    from .ingest import load_recordings
    from .stats import dataset_stats
    from .windowing import WindowSpec

    spec = WindowSpec(obs_horizon=args.horizon)
    resolved = {"data": [str(Path(d).resolve()) for d in args.data], "window": spec.to_dict(),
                "exclusion_margin": args.margin}
    if args.out:
        write_run_manifest(args.out, "stats", resolved, args.seed)
    stats = dataset_stats(load_recordings(args.data), spec, args.margin)
    print(stats.render())
    if args.out:
        (args.out / "stats.json").write_text(_dump(stats.to_dict()))
    return 0


def cmd_extract(args) -> int:
    from .harness import extract_to_cache
    from .ingest import parse_recording

    resolved = {"data": str(Path(args.data).resolve()), "scale": args.scale, "size": args.size}
    write_run_manifest(args.out, "extract", resolved, args.seed)
    rec = parse_recording(args.data)
    n = extract_to_cache(rec, args.scale, args.out, size=args.size)
    print(f"wrote {n} cache entries for {rec.name} to {args.out}")
    return 0


def cmd_windows(args) -> int:
    from .ingest import load_recordings
    from .windowing import WindowSpec, enumerate_samples, stratified_split, write_manifest

    spec = WindowSpec(args.horizon, args.tte, args.scale)
    resolved = {
        "data": [str(Path(d).resolve()) for d in args.data],
        "window": spec.to_dict(),
        "stride": args.stride,
        "exclusion_margin": args.margin,
        "val_fraction": args.val_fraction,
    }
    write_run_manifest(args.out, "windows", resolved, args.seed)
    samples = []
    for rec in load_recordings(args.data):
        samples.extend(enumerate_samples(rec, spec, args.stride, args.margin))
    if not samples:
        raise ValidationError("no windows could be enumerated")
    split = stratified_split(samples, args.val_fraction, args.seed)
    write_manifest(args.out / "train.csv", split.train, spec.roi_scale)
    write_manifest(args.out / "val.csv", split.val, spec.roi_scale)
    print(f"{len(split.train)} train / {len(split.val)} val windows in {args.out}")
    return 0


TRAIN_DATA_KEYS = ("data", "cache", "train_manifest", "val_manifest")


def _load_manifest_data(store, path, spec):
    from .windowing import read_manifest

    windows, scale = read_manifest(path)
    if not windows:
        raise ValidationError(f"manifest {path} is empty")
    if scale != spec.roi_scale:
        raise ValidationError(f"manifest {path} is at ROI scale {scale}, config expects {spec.roi_scale}")
    lengths = {w.length for w in windows}
    if lengths != {spec.obs_horizon}:
        raise ValidationError(
            f"manifest {path} windows have lengths {sorted(lengths)}, config horizon is {spec.obs_horizon}"
        )
    return store.dataset(windows, scale)


def cmd_train(args) -> int:
    from .harness import RunConfig, evaluate, save_checkpoint, train

    doc = _read_json(args.config) if args.config else {}
    base = Path(args.config).parent if args.config else Path.cwd()
    data_doc = {k: doc.pop(k) for k in TRAIN_DATA_KEYS if k in doc}
    overrides = {
        "model": args.model,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.lr,
        "width_multiplier": args.width,
        "seed": args.seed_given,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    doc.setdefault("seed", args.seed)
    config = RunConfig.from_dict(doc)
    data_dirs = args.data or [_resolve(base, d) for d in data_doc.get("data", [])]
    cache = _cache_map(args.cache) if args.cache else {
        k: _resolve(base, v) for k, v in _cache_map(data_doc.get("cache", {})).items()
    }
    train_m = args.train_manifest or (data_doc.get("train_manifest") and _resolve(base, data_doc["train_manifest"]))
    val_m = args.val_manifest or (data_doc.get("val_manifest") and _resolve(base, data_doc["val_manifest"]))
    if not train_m:
        raise ConfigError("train needs a train_manifest (config key or --train-manifest)")
    threads = _set_threads(args.threads)
    resolved = {
        "run": config.to_dict(),
        "data": [str(Path(d).resolve()) for d in data_dirs],
        "cache": {k: str(Path(v).resolve()) for k, v in cache.items()},
        "train_manifest": str(Path(train_m).resolve()),
        "val_manifest": str(Path(val_m).resolve()) if val_m else None,
        "threads": threads,
    }
    write_run_manifest(args.out, "train", resolved, config.seed)
    store = _store(data_dirs, cache)
    tr = _load_manifest_data(store, train_m, config.window)
    va = _load_manifest_data(store, val_m, config.window) if val_m else None
    result = train(config, tr, va)
    ckpt = save_checkpoint(args.out / "checkpoint.pt", result, tr.flow_fields)
    history = [
        {"epoch": h.epoch, "train_loss": h.train_loss, "val_accuracy": h.val_accuracy, "learning_rate": h.learning_rate}
        for h in result.history
    ]
    (args.out / "history.json").write_text(_dump({"history": history, "losses": result.losses}))
    if va is not None:
        report = evaluate(result.model, va, config)
        (args.out / "metrics.json").write_text(_dump(report.to_dict()))
        print(report.render(f"{config.model} on {val_m}"))
    print(f"checkpoint: {ckpt}")
    return 0


def cmd_eval(args) -> int:
    from .harness import evaluate, load_checkpoint

    model, config, blob = load_checkpoint(args.ckpt)
    resolved = {
        "checkpoint": str(Path(args.ckpt).resolve()),
        "manifest": str(Path(args.manifest).resolve()),
        "data": [str(Path(d).resolve()) for d in args.data or []],
        "cache": {k: str(Path(v).resolve()) for k, v in _cache_map(args.cache).items()},
        "run": config.to_dict(),
    }
    write_run_manifest(args.out, "eval", resolved, config.seed)
    store = _store(args.data, args.cache)
    data = _load_manifest_data(store, args.manifest, config.window)
    if data.flow_fields != blob["flow_fields"]:
        raise ValidationError("manifest window length does not match the checkpoint")
    report = evaluate(model, data, config)
    (args.out / "metrics.json").write_text(_dump(report.to_dict()))
    text = report.render(f"{config.model} on {args.manifest}")
    (args.out / "confusion.txt").write_text(text + "\n")
    print(text)
    return 0


def cmd_sweep(args) -> int:
    from .harness import expand_grid, render_table, run_sweep
    from .windowing import enumerate_samples, stratified_split

    doc = _read_json(args.grid)
    base = Path(args.grid).parent
    if args.seed_given is not None:
        doc.setdefault("base", {})["seed"] = args.seed_given
    doc.setdefault("base", {}).setdefault("seed", args.seed)
    grid = expand_grid(doc)
    data_dirs = [_resolve(base, d) for d in doc.get("data", [])]
    if not data_dirs:
        raise ConfigError("sweep grid needs a 'data' list of recording directories")
    cache = {k: _resolve(base, v) for k, v in _cache_map(doc.get("cache", {})).items()}
    stride, margin = doc.get("stride"), doc.get("margin")
    val_fraction = float(doc.get("val_fraction", 0.15))
    layout = doc.get("layout", "classification")
    threads = _set_threads(args.threads)
    resolved = {
        "cells": [c.to_dict() for c in grid],
        "data": data_dirs,
        "cache": cache,
        "stride": stride,
        "margin": margin,
        "val_fraction": val_fraction,
        "layout": layout,
        "threads": threads,
    }
    write_run_manifest(args.out, "sweep", resolved, doc["base"]["seed"])
    store = _store(data_dirs, cache)
    memo = {}

    def data_fn(cfg):
        key = (cfg.window, cfg.seed)
        if key not in memo:
            samples = []
            for rec in store.recordings.values():
                samples.extend(enumerate_samples(rec, cfg.window, stride, margin))
            split = stratified_split(samples, val_fraction, cfg.seed)
            s = cfg.window.roi_scale
            memo[key] = (store.dataset(split.train, s), store.dataset(split.val, s))
        return memo[key]

    result = run_sweep(grid, data_fn)
    result.write(args.out / "sweep.json")
    row_key = "tte" if layout == "prediction" else "obs_horizon"
    title = "Lane-change prediction accuracy" if layout == "prediction" else "Lane-change classification accuracy"
    text = render_table(result, row_key, title)
    (args.out / "table.txt").write_text(text + "\n")
    print(text)
    return 0 if all(c.report for c in result.cells) else 1


def cmd_report(args) -> int:
    from .harness import EvalReport, SweepResult, render_table

    parts = []
    for path in args.metrics:
        doc = _read_json(path)
        if "cells" in doc:
            parts.append(render_table(SweepResult.from_dict(doc), args.rows, str(path)))
        elif "confusion" in doc:
            parts.append(EvalReport.from_dict(doc).render(str(path)))
        else:
            raise FormatError(f"{path}: neither a metrics nor a sweep file")
    text = "\n\n".join(parts)
    if args.out:
        write_run_manifest(args.out, "report", {"metrics": [str(Path(p).resolve()) for p in args.metrics],
                                                "rows": args.rows}, args.seed)
        (args.out / "report.txt").write_text(text + "\n")
    print(text)
    return 0


# --------------------------------------------------------------------------
# parser


def _scale(text: str) -> int:
    v = int(text)
    if v not in (1, 2, 3, 4):
        raise argparse.ArgumentTypeError("scale must be one of 1, 2, 3, 4")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--threads", type=int, default=None, help="torch intra-op threads")

    p = argparse.ArgumentParser(prog="maneuver-net", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version",
                   version=f"maneuver-net {__version__} (format {FORMAT_VERSION})")
    sub = p.add_subparsers(dest="command", metavar="SUBCOMMAND", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic recording")
    s.add_argument("--config", help="JSON synth config")
    s.add_argument("--name", help="recording name (overrides the config)")
    s.set_defaults(func=cmd_synth, needs_out=True)

    s = sub.add_parser("stats", parents=[common], help="per-class sequence statistics")
    s.add_argument("--data", nargs="+", required=True)
    s.add_argument("--horizon", type=int, default=20)
    s.add_argument("--margin", type=int, default=None)
    s.set_defaults(func=cmd_stats, needs_out=False)

    s = sub.add_parser("extract", parents=[common], help="cache ROI patches and flow")
    s.add_argument("--data", required=True)
    s.add_argument("--scale", type=_scale, required=True)
    s.add_argument("--size", type=int, default=112)
    s.set_defaults(func=cmd_extract, needs_out=True)

    s = sub.add_parser("windows", parents=[common], help="enumerate and split sample windows")
    s.add_argument("--data", nargs="+", required=True)
    s.add_argument("--horizon", type=int, default=20)
    s.add_argument("--tte", type=int, default=0)
    s.add_argument("--scale", type=_scale, default=3)
    s.add_argument("--stride", type=int, default=None)
    s.add_argument("--margin", type=int, default=None)
    s.add_argument("--val-fraction", type=float, default=0.15)
    s.set_defaults(func=cmd_windows, needs_out=True)

    s = sub.add_parser("train", parents=[common], help="train a model")
    s.add_argument("--config", help="JSON run config")
    s.add_argument("--model")
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--width", type=float)
    s.add_argument("--data", nargs="+")
    s.add_argument("--cache", nargs="+", metavar="NAME=DIR")
    s.add_argument("--train-manifest")
    s.add_argument("--val-manifest")
    s.set_defaults(func=cmd_train, needs_out=True)

    s = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--data", nargs="+")
    s.add_argument("--cache", nargs="+", metavar="NAME=DIR")
    s.set_defaults(func=cmd_eval, needs_out=True)

    s = sub.add_parser("sweep", parents=[common], help="train and evaluate a grid of runs")
    s.add_argument("--grid", required=True)
    s.set_defaults(func=cmd_sweep, needs_out=True)

    s = sub.add_parser("report", parents=[common], help="render metrics or sweep files")
    s.add_argument("--metrics", nargs="+", required=True)
    s.add_argument("--rows", choices=["obs_horizon", "tte"], default="obs_horizon")
    s.set_defaults(func=cmd_report, needs_out=False)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    args.seed_given = args.seed
    if args.seed is None:
        args.seed = 0
    if args.needs_out and args.out is None:
        parser.error(f"{args.command} needs --out")
    try:
        return args.func(args)
    except ManeuverNetError as exc:
        msg = " ".join(str(exc).split())
        print(f"maneuver-net: error: {exc.category}: {msg}", file=sys.stderr)
        return 1
    except OSError as exc:
        msg = " ".join(str(exc).split())
        print(f"maneuver-net: error: io: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
