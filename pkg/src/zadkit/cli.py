"""Command-line entry point.

Subcommands: ``detect`` (training-free pipeline over a corpus), ``adapt``
(per-video test-time adaptation), ``eval`` (mAP over a tIoU grid),
``diagnose`` (false-positive breakdown), ``synth`` (synthetic corpus
generator). Config precedence is defaults < TOML config file < flags.
Exit codes: 0 success, 2 usage/missing input, 3 validation, 4 runtime.
"""

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import os
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import __version__, evaluation, kernels, synth, tta
from .errors import ConfigError, DataError, ZadError
from .evaluation import ACTIVITYNET_GRID, THUMOS_GRID, EvalConfig
from .feature_store import (load_annotations, load_features,
                            load_predictions, load_prompts,
                            write_predictions)
from .pipeline import PipelineConfig, detect
from .tta import TtaConfig, adapt_and_detect

JOBS_ENV = "ZADKIT_JOBS"

PIPELINE_KEYS = ("window", "gamma1", "gamma2", "eta", "dc_exclude",
                 "threshold", "score_kind", "calibration")
TTA_KEYS = ("steps", "k", "beta", "lr", "wd", "pos", "neg", "seed")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _threshold_spec(text):
    if text == "mean":
        return "mean"
    if text.startswith("fixed:"):
        try:
            float(text.split(":", 1)[1])
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"bad fixed threshold in {text!r}")
        return text
    raise argparse.ArgumentTypeError(
        f"threshold must be 'mean' or 'fixed:VALUE', got {text!r}")


def _grid_spec(text):
    if text in ("thumos", "anet"):
        return text
    try:
        grid = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"grid must be 'thumos', 'anet' or comma-separated floats, "
            f"got {text!r}")
    if not grid:
        raise argparse.ArgumentTypeError("empty grid")
    return grid


def _load_config_file(path):
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML: {exc}") from exc


def _effective(args, section, keys):
    """Merge one config section: defaults (None here) < file < flags."""
    merged = {}
    file_cfg = {}
    if getattr(args, "config", None):
        doc = _load_config_file(args.config)
        file_cfg = doc.get(section, {})
        unknown = set(file_cfg) - set(keys)
        if unknown:
            raise ConfigError(f"unknown [{section}] config keys: "
                              f"{', '.join(sorted(unknown))}")
    for key in keys:
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key)
        merged[key] = value
    return merged


def _pipeline_config(opts):
    cfg = {}
    if opts["window"] is not None:
        cfg["smoothing_window"] = int(opts["window"])
    for key in ("gamma1", "gamma2", "eta"):
        if opts[key] is not None:
            cfg[key] = float(opts[key])
    if opts["dc_exclude"] is not None:
        cfg["dc_exclude"] = bool(opts["dc_exclude"])
    if opts["threshold"] is not None:
        spec = opts["threshold"]
        if spec == "mean":
            cfg["threshold_policy"] = "mean"
        else:
            cfg["threshold_policy"] = "fixed"
            cfg["fixed_threshold"] = float(str(spec).split(":", 1)[1])
    if opts["score_kind"] is not None:
        cfg["score_kind"] = opts["score_kind"]
    if opts["calibration"] is not None:
        cfg["calibration"] = bool(opts["calibration"])
    return PipelineConfig(**cfg)


def _tta_config(opts, oracle_samples):
    cfg = {}
    if opts["steps"] is not None:
        cfg["steps"] = int(opts["steps"])
    if opts["k"] is not None:
        cfg["k"] = int(opts["k"])
    for key, field in (("beta", "beta"), ("lr", "learning_rate"),
                       ("wd", "weight_decay")):
        if opts[key] is not None:
            cfg[field] = float(opts[key])
    if opts["seed"] is not None:
        cfg["rng_seed"] = int(opts["seed"])
    if oracle_samples:
        cfg["positive_strategy"] = "perfect"
        cfg["negative_strategy"] = "perfect"
    else:
        if opts["pos"] is not None:
            cfg["positive_strategy"] = opts["pos"]
        if opts["neg"] is not None:
            cfg["negative_strategy"] = opts["neg"]
    return TtaConfig(**cfg)


def _feature_paths(root):
    if os.path.isfile(root):
        return [root]
    if not os.path.isdir(root):
        raise FileNotFoundError(f"no such file or directory: {root}")
    found = sorted(
        os.path.join(root, name) for name in os.listdir(root)
        if name.endswith(".vfeat"))
    if not found:
        raise FileNotFoundError(f"no .vfeat files under {root}")
    return found


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve_oracle_label(annot_path, video_id):
    label = load_annotations(annot_path).dominant_label(video_id)
    if label is None:
        raise DataError(f"oracle labels requested but video {video_id!r} "
                        "has no ground-truth instances")
    return label


def _detect_task(task):
    path, prompts_path, pipe_kwargs, oracle_label_path = task
    features = load_features(path)
    prompts = load_prompts(prompts_path)
    cfg = PipelineConfig(**pipe_kwargs)
    true_label = None
    if oracle_label_path:
        true_label = _resolve_oracle_label(oracle_label_path,
                                           features.video_id)
    dets = detect(features, prompts, cfg, true_label=true_label)
    return features.video_id, features.num_frames, dets, []


def _adapt_task(task):
    (path, prompts_path, pipe_kwargs, tta_kwargs, oracle_label_path,
     sample_annot_path) = task
    features = load_features(path)
    prompts = load_prompts(prompts_path)
    pipe_cfg = PipelineConfig(**pipe_kwargs)
    tta_cfg = TtaConfig(**tta_kwargs)
    true_label = None
    if oracle_label_path:
        true_label = _resolve_oracle_label(oracle_label_path,
                                           features.video_id)
    annots = (load_annotations(sample_annot_path)
              if sample_annot_path else None)
    dets, records = adapt_and_detect(features, prompts, pipe_cfg, tta_cfg,
                                     true_label=true_label,
                                     annotations=annots)
    return features.video_id, features.num_frames, dets, records


def _run_tasks(worker, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


def _write_manifest(path, command, config, inputs, outputs, stats):
    manifest = {
        "tool": "zadkit",
        "version": __version__,
        "backend": kernels.BACKEND,
        "command": command,
        "config": config,
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": {p: _sha256(p) for p in outputs},
    }
    manifest.update(stats)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _default_jobs(args):
    if args.jobs is not None:
        return args.jobs
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}")
    return 1


def _collect(results):
    results.sort(key=lambda r: r[0])
    detections = [d for _, _, dets, _ in results for d in dets]
    total_frames = sum(n for _, n, _, _ in results)
    return detections, total_frames


def cmd_detect(args):
    opts = _effective(args, "detect", PIPELINE_KEYS)
    pipe_cfg = _pipeline_config(opts)
    jobs = _default_jobs(args)
    paths = _feature_paths(args.features)
    pipe_kwargs = dataclasses.asdict(pipe_cfg)
    tasks = [(path, args.prompts, pipe_kwargs, args.oracle_label)
             for path in paths]
    start = time.perf_counter()
    results = _run_tasks(_detect_task, tasks, jobs)
    elapsed = time.perf_counter() - start
    detections, total_frames = _collect(results)
    write_predictions(detections, args.out)
    fps = total_frames / elapsed if elapsed > 0 else 0.0
    manifest_path = args.manifest or args.out + ".manifest.json"
    _write_manifest(
        manifest_path, "detect",
        {"detect": pipe_kwargs, "jobs": jobs, "seed": args.seed},
        paths + [args.prompts], [args.out],
        {"num_videos": len(paths), "total_frames": total_frames,
         "elapsed_sec": elapsed, "frames_per_sec": fps})
    print(f"wrote {args.out} ({len(detections)} detections from "
          f"{len(paths)} videos, {fps:.0f} frames/s)")
    return 0


def cmd_adapt(args):
    pipe_opts = _effective(args, "adapt", PIPELINE_KEYS + TTA_KEYS)
    pipe_cfg = _pipeline_config(pipe_opts)
    tta_cfg = _tta_config(pipe_opts, bool(args.oracle_samples))
    jobs = _default_jobs(args)
    paths = _feature_paths(args.features)
    pipe_kwargs = dataclasses.asdict(pipe_cfg)
    tta_kwargs = dataclasses.asdict(tta_cfg)
    tasks = [(path, args.prompts, pipe_kwargs, tta_kwargs,
              args.oracle_label, args.oracle_samples)
             for path in paths]
    start = time.perf_counter()
    results = _run_tasks(_adapt_task, tasks, jobs)
    elapsed = time.perf_counter() - start
    detections, total_frames = _collect(results)
    write_predictions(detections, args.out)
    fps = total_frames / elapsed if elapsed > 0 else 0.0
    outputs = [args.out]
    if args.loss_log:
        with open(args.loss_log, "w", encoding="utf-8") as fh:
            for _, _, _, records in results:
                for rec in records:
                    fh.write(json.dumps(rec) + "\n")
        outputs.append(args.loss_log)
    manifest_path = args.manifest or args.out + ".manifest.json"
    _write_manifest(
        manifest_path, "adapt",
        {"detect": pipe_kwargs, "adapt": tta_kwargs, "jobs": jobs,
         "seed": args.seed},
        paths + [args.prompts], outputs,
        {"num_videos": len(paths), "total_frames": total_frames,
         "elapsed_sec": elapsed, "frames_per_sec": fps})
    print(f"wrote {args.out} ({len(detections)} detections, "
          f"steps={tta_cfg.steps}, {fps:.0f} frames/s)")
    return 0


def _eval_config(args):
    grid = args.grid
    if grid is None or grid == "thumos":
        grid = THUMOS_GRID
    elif grid == "anet":
        grid = ACTIVITYNET_GRID
    return EvalConfig(tiou_grid=tuple(grid))


def cmd_eval(args):
    preds = load_predictions(args.pred)
    annots = load_annotations(args.gt)
    cfg = _eval_config(args)
    report = evaluation.evaluate(preds, annots, cfg)
    sys.stdout.write(report.table())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


def cmd_diagnose(args):
    preds = load_predictions(args.pred)
    annots = load_annotations(args.gt)
    cfg = EvalConfig(error_tiou=args.tiou,
                     error_budgets=tuple(args.budgets))
    profile = evaluation.error_profile(preds, annots, cfg)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(profile, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written = [args.out]
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("budget,category,count,fraction\n")
            for budget in sorted(profile, key=int):
                entry = profile[budget]
                for cat in evaluation.ERROR_CATEGORIES:
                    fh.write(f"{budget},{cat},{entry['counts'][cat]},"
                             f"{entry['fractions'][cat]:.6f}\n")
        written.append(args.csv)
    print("wrote " + ", ".join(written))
    return 0


def cmd_synth(args):
    opts = _effective(args, "synth", tuple(
        f.name for f in dataclasses.fields(synth.SynthConfig)))
    kwargs = {k: v for k, v in opts.items() if v is not None}
    cfg = synth.SynthConfig(**kwargs)
    os.makedirs(args.out, exist_ok=True)
    synth.generate(cfg, args.out)
    print(os.path.join(args.out, "manifest.json"))
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="TOML config file (defaults < file "
                     "< flags)")


def _add_pipeline_flags(sub):
    sub.add_argument("--features", required=True,
                     help=".vfeat file or directory of them")
    sub.add_argument("--prompts", required=True, help=".tfeat prompt bank")
    sub.add_argument("--out", required=True, help="prediction JSON path")
    sub.add_argument("--manifest", help="run manifest path (default: "
                     "<out>.manifest.json)")
    sub.add_argument("--window", type=_positive_int,
                     help="moving-average window in frames")
    sub.add_argument("--gamma1", type=float, help="outer penalty weight")
    sub.add_argument("--gamma2", type=float, help="peak bonus weight")
    sub.add_argument("--eta", type=float, help="log shift of outer decay")
    sub.add_argument("--dc-exclude", dest="dc_exclude", action="store_const",
                     const=True, help="drop the DC bin from spectral energy")
    sub.add_argument("--threshold", type=_threshold_spec,
                     help="'mean' or 'fixed:VALUE'")
    sub.add_argument("--score-kind", dest="score_kind",
                     choices=("logoic", "oic", "similarity"),
                     help="segment confidence variant")
    sub.add_argument("--no-calibration", dest="calibration",
                     action="store_const", const=False,
                     help="skip spectral actionness calibration")
    sub.add_argument("--oracle-label", metavar="ANNOT",
                     help="annotation JSON; replaces pseudo-labels with "
                     "each video's dominant ground-truth label")
    sub.add_argument("--jobs", type=_positive_int,
                     help=f"worker processes (default ${JOBS_ENV} or 1)")
    sub.add_argument("--seed", type=int, help="global RNG seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="zadkit",
        description="zero-shot temporal action detection toolkit")
    parser.add_argument("--version", action="version",
                        version=f"zadkit {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("detect", help="training-free detection over a "
                        "corpus")
    _add_common(p)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_detect)

    p = subs.add_parser("adapt", help="test-time adaptation + detection")
    _add_common(p)
    _add_pipeline_flags(p)
    p.add_argument("--steps", type=int, help="optimizer steps per video")
    p.add_argument("--k", type=_positive_int,
                   help="positives/negatives per step")
    p.add_argument("--beta", type=float, help="alignment loss weight")
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--wd", type=float, help="decoupled weight decay")
    p.add_argument("--pos", choices=("pcs", "random"),
                   help="positive sampling strategy")
    p.add_argument("--neg", choices=("random", "farthest"),
                   help="negative sampling strategy")
    p.add_argument("--oracle-samples", metavar="ANNOT",
                   help="annotation JSON; draw samples from ground-truth "
                   "foreground/background frames")
    p.add_argument("--loss-log", dest="loss_log",
                   help="JSONL per-step loss output")
    p.set_defaults(func=cmd_adapt)

    p = subs.add_parser("eval", help="mAP over a tIoU grid")
    _add_common(p)
    p.add_argument("--pred", required=True, help="prediction JSON")
    p.add_argument("--gt", required=True, help="annotation JSON")
    p.add_argument("--grid", type=_grid_spec,
                   help="'thumos', 'anet' or comma-separated thresholds")
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("diagnose", help="false-positive breakdown per "
                        "ranking budget")
    _add_common(p)
    p.add_argument("--pred", required=True, help="prediction JSON")
    p.add_argument("--gt", required=True, help="annotation JSON")
    p.add_argument("--out", required=True, help="profile JSON path")
    p.add_argument("--csv", help="plottable CSV path")
    p.add_argument("--tiou", type=float, default=0.5,
                   help="matching threshold (default 0.5)")
    p.add_argument("--budgets", type=_positive_int, nargs="+",
                   default=(1, 2, 3), help="per-class ranking budgets in "
                   "multiples of that class's ground-truth count")
    p.set_defaults(func=cmd_diagnose)

    p = subs.add_parser("synth", help="generate a synthetic corpus")
    _add_common(p)
    p.add_argument("--out", required=True, help="corpus directory")
    for f in dataclasses.fields(synth.SynthConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type is bool or isinstance(f.default, bool):
            p.add_argument(flag, dest=f.name, action="store_const",
                           const=True)
        elif f.name == "background":
            p.add_argument(flag, dest=f.name,
                           choices=synth.BACKGROUND_MODES)
        elif isinstance(f.default, int):
            p.add_argument(flag, dest=f.name, type=int)
        elif isinstance(f.default, float):
            p.add_argument(flag, dest=f.name, type=float)
        else:
            p.add_argument(flag, dest=f.name)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"zadkit: missing input: {exc}", file=sys.stderr)
        return 2
    except ZadError as exc:
        print(f"zadkit: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"zadkit: runtime failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
