"""Command-line surface: simulate, add-noise, train, filter, sample, evaluate, render.

Every command writes a JSON run manifest next to its primary output so a
run can be reproduced bit-exactly from the recorded command line and
seeds. Exit codes: 0 success, 2 usage/config error, 3 data/format error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import glob as globmod
import json
import os
import sys
import time
from pathlib import Path

from . import __version__, geninsar, metrics
from .errors import ConfigError, FormatError, InvalidValue, IoError, PhasekitError, TrainingDiverged
from .filters import BoxcarConfig, GoldsteinConfig, boxcar_filter, goldstein_filter
from .grid import CoherenceMap, ComplexField, PhaseImage, UnwrappedImage, phase_to_phasor
from .mdn import load_weights, save_weights
from .raster import read_raster, render_png, write_raster
from .simulate import NoiseSpec, add_noise, generate_truth, noise_gamma_map, parse_scene_config

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def resolve_threads(value: int | None) -> int:
    """--threads flag, then PHASEKIT_THREADS, then all cores."""
    if value is not None:
        return max(1, value)
    env = os.environ.get("PHASEKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise InvalidValue(f"PHASEKIT_THREADS={env!r} is not an integer") from exc
    return os.cpu_count() or 1


def write_manifest(primary_output, *, command, config, seeds, inputs, outputs, wall_time):
    manifest = {
        "tool": "phasekit",
        "version": __version__,
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "wall_time_s": round(wall_time, 6),
    }
    path = str(primary_output) + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def _read_field(path) -> ComplexField:
    """Load a phase (1ch) or complex (2ch) raster as a phasor field."""
    obj = read_raster(path)
    if isinstance(obj, ComplexField):
        return obj
    if isinstance(obj, PhaseImage):
        return phase_to_phasor(obj)
    raise FormatError(f"{path}: expected a wrapped-phase or complex raster")


def cmd_simulate(args, argv) -> int:
    t0 = time.perf_counter()
    text = Path(args.scene).read_text()
    spec = parse_scene_config(text)
    unwrapped, wrapped, coherence = generate_truth(spec)
    write_raster(args.out_truth, unwrapped)
    write_raster(args.out_wrapped, wrapped)
    write_raster(args.out_coh, coherence)
    write_manifest(
        args.out_truth, command=argv,
        config={"scene": args.scene, "width": spec.width, "height": spec.height,
                "bubbles": len(spec.bubbles), "roads": len(spec.roads),
                "buildings": len(spec.buildings)},
        seeds={"scene": spec.seed}, inputs=[args.scene],
        outputs=[args.out_truth, args.out_wrapped, args.out_coh],
        wall_time=time.perf_counter() - t0,
    )
    return EXIT_OK


def cmd_add_noise(args, argv) -> int:
    t0 = time.perf_counter()
    truth = read_raster(args.input, expect="phase")
    if args.gamma_map is not None:
        spec = NoiseSpec(mode="map", gamma_map=read_raster(args.gamma_map, expect="coherence"),
                         seed=args.seed)
    else:
        spec = NoiseSpec(mode="uniform", gamma=args.gamma, seed=args.seed)
    noisy = add_noise(truth, spec)
    write_raster(args.out, noisy)
    outputs = [args.out]
    if args.out_coh:
        write_raster(args.out_coh, noise_gamma_map(truth, spec))
        outputs.append(args.out_coh)
    write_manifest(
        args.out, command=argv,
        config={"gamma": args.gamma, "gamma_map": args.gamma_map},
        seeds={"noise": args.seed},
        inputs=[p for p in (args.input, args.gamma_map) if p], outputs=outputs,
        wall_time=time.perf_counter() - t0,
    )
    return EXIT_OK


def _load_training_images(data_dir) -> list[ComplexField]:
    d = Path(data_dir)
    if not d.is_dir():
        raise InvalidValue(f"data directory {data_dir} does not exist")
    paths = sorted(d.glob("*.igrd"))
    if not paths:
        raise InvalidValue(f"no .igrd files in {data_dir}")
    return [_read_field(p) for p in paths]


_TRAIN_KEYS = {"preset": str, "epochs": int, "patches": int, "batch": int,
               "lr": float, "seed": int, "patch_size": int}


def _train_params(args):
    """Hyperparameters from the optional key=value config file; CLI flags win."""
    params = {"preset": args.preset, "epochs": args.epochs, "patches": args.patches,
              "batch": args.batch, "lr": args.lr, "seed": args.seed,
              "patch_size": args.patch_size}
    if args.config:
        for lineno, raw in enumerate(Path(args.config).read_text().splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in _TRAIN_KEYS:
                raise ConfigError(f"unknown or malformed entry {line!r}", line=lineno)
            try:
                parsed = _TRAIN_KEYS[key](value.strip())
            except ValueError as exc:
                raise ConfigError(str(exc), line=lineno) from exc
            if params[key] is None:
                params[key] = parsed
    for key in ("epochs", "patches"):
        if params[key] is None:
            raise InvalidValue(f"--{key} is required (flag or config file)")
    defaults = {"preset": "desk", "batch": 64, "lr": 1e-3, "seed": 0, "patch_size": 21}
    for key, value in defaults.items():
        if params[key] is None:
            params[key] = value
    return params


def cmd_train(args, argv) -> int:
    t0 = time.perf_counter()
    images = _load_training_images(args.data)
    params = _train_params(args)
    cfg = geninsar.TrainConfig(
        epochs=params["epochs"], patches_per_epoch=params["patches"],
        patch_size=params["patch_size"], batch=params["batch"], lr=params["lr"],
        seed=params["seed"], arch=params["preset"],
    )
    state_path = str(args.out) + ".trainstate.npz"

    resume = None
    if args.resume:
        resume = (load_weights(args.out), geninsar.load_train_state(state_path))

    def epoch_hook(epoch, weights, state):
        save_weights(args.out, weights)
        geninsar.save_train_state(state_path, state)

    try:
        result = geninsar.train(images, cfg, epoch_hook=epoch_hook, resume=resume)
    except TrainingDiverged as exc:
        if exc.last_good is not None:
            save_weights(args.out, exc.last_good)
        print(f"error: {exc} (last good weights saved to {args.out})", file=sys.stderr)
        return EXIT_NUMERIC

    save_weights(args.out, result.weights)
    if result.state is not None:
        geninsar.save_train_state(state_path, result.state)
    loss_csv = args.loss_csv or str(args.out) + ".loss.csv"
    with open(loss_csv, "w") as fh:
        fh.write("step,raw_loss,ema_loss\n")
        for step, raw, ema in result.history:
            fh.write(f"{step},{raw:.6f},{ema:.6f}\n")
    write_manifest(
        args.out, command=argv,
        config=dict(params, data=str(args.data)),
        seeds={"train": params["seed"]}, inputs=[str(args.data)],
        outputs=[args.out, loss_csv, state_path],
        wall_time=time.perf_counter() - t0,
    )
    return EXIT_OK


def cmd_filter(args, argv) -> int:
    t0 = time.perf_counter()
    field = _read_field(args.input)
    est_coh = None

    if args.method == "boxcar":
        phase, est_coh = boxcar_filter(field, BoxcarConfig(window=args.window))
    elif args.method == "goldstein":
        if args.out_coh:
            raise InvalidValue("goldstein outputs only phase; drop --out-coh")
        phase = goldstein_filter(field, GoldsteinConfig(
            patch=args.patch, overlap=args.overlap, alpha=args.alpha, smoothing=args.smoothing))
    else:  # geninsar
        if not args.weights:
            raise InvalidValue("--method geninsar requires --weights")
        weights = load_weights(args.weights)
        threads = resolve_threads(args.threads)
        if args.strict_center:
            gfield = geninsar.predict_patchwise_grid(weights, field)
        else:
            gfield = geninsar.predict_full(weights, field, chunk=args.chunk, threads=threads)
        phase = geninsar.filtered_phase(gfield)
        est_coh = geninsar.coherence_from_sigma(gfield)

    wall = time.perf_counter() - t0
    write_raster(args.out_phase, phase)
    outputs = [args.out_phase]
    if args.out_coh:
        write_raster(args.out_coh, est_coh)
        outputs.append(args.out_coh)
    write_manifest(
        args.out_phase, command=argv,
        config={"method": args.method, "window": args.window, "patch": args.patch,
                "overlap": args.overlap, "alpha": args.alpha, "smoothing": args.smoothing,
                "weights": args.weights, "strict_center": args.strict_center},
        seeds={}, inputs=[p for p in (args.input, args.weights) if p], outputs=outputs,
        wall_time=wall,
    )
    return EXIT_OK


def cmd_sample(args, argv) -> int:
    t0 = time.perf_counter()
    field = _read_field(args.input)
    weights = load_weights(args.weights)
    threads = resolve_threads(args.threads)
    gfield = geninsar.predict_full(weights, field, threads=threads)
    outputs = []
    for k in range(args.count):
        sample = geninsar.sample_interferogram(gfield, args.alpha, seed=(args.seed << 32) + k)
        path = f"{args.out_prefix}{k}.igrd"
        write_raster(path, sample)
        outputs.append(path)
    write_manifest(
        f"{args.out_prefix}samples", command=argv,
        config={"alpha": args.alpha, "count": args.count, "weights": args.weights},
        seeds={"sample": args.seed}, inputs=[args.input, args.weights], outputs=outputs,
        wall_time=time.perf_counter() - t0,
    )
    return EXIT_OK


def _wall_time_from_manifest(filtered_path) -> float:
    path = str(filtered_path) + ".manifest.json"
    if os.path.exists(path):
        try:
            with open(path) as fh:
                return float(json.load(fh).get("wall_time_s", 0.0))
        except (OSError, ValueError):
            return 0.0
    return 0.0


def _evaluate_one(truth, truth_coh, noisy, filtered, est_coh, wall_time, label):
    return metrics.evaluate(
        read_raster(truth, expect="phase"),
        read_raster(truth_coh, expect="coherence"),
        read_raster(noisy, expect="phase"),
        read_raster(filtered, expect="phase"),
        None if est_coh is None else read_raster(est_coh, expect="coherence"),
        wall_time=wall_time, label=label,
    )


def cmd_evaluate(args, argv) -> int:
    t0 = time.perf_counter()
    reports = []
    if args.glob:
        dirs = sorted(d for d in globmod.glob(args.glob) if os.path.isdir(d))
        if not dirs:
            raise InvalidValue(f"--glob {args.glob!r} matched no scene directories")
        for d in dirs:
            est = os.path.join(d, "est_coh.igrd")
            filtered = os.path.join(d, "filtered.igrd")
            reports.append(_evaluate_one(
                os.path.join(d, "truth.igrd"), os.path.join(d, "truth_coh.igrd"),
                os.path.join(d, "noisy.igrd"), filtered,
                est if os.path.exists(est) else None,
                _wall_time_from_manifest(filtered), label=os.path.basename(d.rstrip("/")),
            ))
    else:
        for flag, value in (("--truth", args.truth), ("--truth-coh", args.truth_coh),
                            ("--noisy", args.noisy), ("--filtered", args.filtered)):
            if value is None:
                raise InvalidValue(f"{flag} is required without --glob")
        wall = args.wall_time if args.wall_time is not None else _wall_time_from_manifest(args.filtered)
        reports.append(_evaluate_one(args.truth, args.truth_coh, args.noisy, args.filtered,
                                     args.est_coh, wall, label=os.path.basename(args.filtered)))

    for r in reports:
        print(r.pretty())
    if len(reports) > 1:
        print(metrics.summarize(reports))
    if args.csv:
        with open(args.csv, "w") as fh:
            metrics.write_csv(reports, fh)
        write_manifest(
            args.csv, command=argv,
            config={"glob": args.glob},
            seeds={}, inputs=[p for p in (args.truth, args.truth_coh, args.noisy,
                                          args.filtered, args.est_coh, args.glob) if p],
            outputs=[args.csv], wall_time=time.perf_counter() - t0,
        )
    return EXIT_OK


def cmd_render(args, argv) -> int:
    t0 = time.perf_counter()
    obj = read_raster(args.input)
    if isinstance(obj, ComplexField):
        raise InvalidValue(f"{args.input} has 2 channels; --type {args.type} needs 1")
    if args.type == "phase":
        if isinstance(obj, UnwrappedImage):
            raise InvalidValue(f"{args.input} holds values outside (-pi, pi]; not a wrapped phase")
        render_png(obj, args.out)
    else:
        data = obj.data
        coh = CoherenceMap(data)  # raises InvalidValue if values leave [0, 1]
        render_png(coh, args.out)
    write_manifest(
        args.out, command=argv, config={"type": args.type}, seeds={},
        inputs=[args.input], outputs=[args.out], wall_time=time.perf_counter() - t0,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasekit",
        description="Simulate, filter, and evaluate noisy interferograms.",
    )
    parser.add_argument("--version", action="version", version=f"phasekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a clean scene from a config file")
    p.add_argument("--scene", required=True, help="key=value scene config")
    p.add_argument("--out-truth", required=True, help="unwrapped truth .igrd")
    p.add_argument("--out-wrapped", required=True, help="wrapped truth .igrd")
    p.add_argument("--out-coh", required=True, help="clean-scene coherence .igrd")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("add-noise", help="inject coherence-calibrated Gaussian phase noise")
    p.add_argument("--in", dest="input", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--gamma", type=float, help="uniform coherence in (0, 1]")
    g.add_argument("--gamma-map", help="per-pixel coherence .igrd")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--out-coh", help="also write the applied coherence map (evaluation truth)")
    p.set_defaults(func=cmd_add_noise)

    p = sub.add_parser("train", help="train the generative filter on noisy rasters")
    p.add_argument("--data", required=True, help="directory of .igrd training images")
    p.add_argument("--config", help="key=value hyperparameter file; CLI flags win")
    p.add_argument("--preset", choices=("desk", "paper"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--patches", type=int, help="patches per epoch")
    p.add_argument("--batch", type=int, help="default 64")
    p.add_argument("--lr", type=float, help="default 1e-3")
    p.add_argument("--seed", type=int, help="default 0")
    p.add_argument("--patch-size", type=int, help="default 21")
    p.add_argument("--out", required=True, help="output weights (.imdn)")
    p.add_argument("--loss-csv", help="loss log path (default: <out>.loss.csv)")
    p.add_argument("--resume", action="store_true",
                   help="continue from <out> and its .trainstate.npz")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("filter", help="run one filtering method")
    p.add_argument("--method", choices=("boxcar", "goldstein", "geninsar"), required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-phase", required=True)
    p.add_argument("--out-coh")
    p.add_argument("--window", type=int, default=7, help="boxcar window")
    p.add_argument("--patch", type=int, default=32, help="goldstein FFT patch")
    p.add_argument("--overlap", type=int, default=16)
    p.add_argument("--alpha", type=float, default=0.5, help="goldstein exponent")
    p.add_argument("--smoothing", type=int, default=3)
    p.add_argument("--weights", help="geninsar .imdn checkpoint")
    p.add_argument("--strict-center", action="store_true",
                   help="exact per-pixel center zeroing (slow)")
    p.add_argument("--chunk", type=int, default=4096, help="combiner pixel chunk")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("sample", help="draw interferogram variants from a prediction field")
    p.add_argument("--weights", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="compute the metric suite against ground truth")
    p.add_argument("--truth")
    p.add_argument("--truth-coh")
    p.add_argument("--noisy")
    p.add_argument("--filtered")
    p.add_argument("--est-coh")
    p.add_argument("--wall-time", type=float, help="filter wall time for the report")
    p.add_argument("--glob", help="scene directories with truth/truth_coh/noisy/filtered rasters")
    p.add_argument("--csv", help="write rows to this CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("render", help="write a PNG visualization of a raster")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--type", choices=("phase", "coherence"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, ["phasekit"] + argv)
    except (FormatError, IoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PhasekitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
