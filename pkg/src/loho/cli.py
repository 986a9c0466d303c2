"""Command line entry point: run, batch, eval, curate, render-trace.

Exit codes: 0 ok, 1 usage error, 2 data error. Diagnostics go to stderr;
verbosity follows ``LOHO_LOG`` (debug|info|warning).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import random
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .core import LohoError, Trace
from .curator import curate, read_samples, write_samples
from .metrics import aggregate, intention_score, normalize_px, progress_score, score_pair
from .orchestrator import (
    DEFAULT_BUDGET,
    DEFAULT_INTERVAL,
    EpisodeConfig,
    EpisodeFailure,
    EpisodeLog,
    Mode,
    Outcome,
    log_filename,
    run_batch,
)
from .render import Canvas, TraceStyle, render_observation, render_trace, write_ppm
from .sim import FailureConfig, load_scene

log = logging.getLogger("loho")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

DEFAULTS = {
    "seed": None,  # falls back to the scene's seed
    "mode": "closed",
    "manager_interval": DEFAULT_INTERVAL,
    "step_budget": DEFAULT_BUDGET,
    "p_slip": None,
    "drop_radius": None,
    "manager": "scripted",
    "executor": "pure_pursuit",
    "out_dir": "runs",
    "jobs": 1,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def parse_seeds(text: str) -> list[int]:
    """``"0..500"`` (end exclusive), ``"3"`` or ``"1,4,9"``."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            return list(range(int(a), int(b)))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed range {text!r}") from None


def _episode_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scene", help="scene JSON file")
    p.add_argument("--config", help="JSON run config; flags override it")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--interval", dest="manager_interval", type=int, help="executor steps between manager calls")
    p.add_argument("--budget", dest="step_budget", type=int, help="max steps per episode")
    p.add_argument("--p-slip", dest="p_slip", type=float)
    p.add_argument("--drop-radius", dest="drop_radius", type=float)
    p.add_argument("--manager")
    p.add_argument("--executor")
    p.add_argument("--out-dir", dest="out_dir", help="directory for episode logs")
    p.add_argument("--gzip", action="store_true", default=None, help="write .jsonl.gz logs")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="loho", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", help="run one episode and write its log")
    _episode_args(p)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("batch", help="run a seed range, write logs and summary.csv")
    _episode_args(p)
    p.add_argument("--seeds", type=parse_seeds, required=True, help="e.g. 0..500")
    p.add_argument("--jobs", type=int, help="worker processes")

    p = sub.add_parser("eval", help="DFD/HD/RMSE over trajectory pairs")
    p.add_argument("pairs", help="JSONL of {predicted, reference} in [0,1000] pixels")
    p.add_argument("--points", type=int, default=64, help="RMSE resampling points")
    p.add_argument("-o", "--out", help="CSV path (default stdout)")

    p = sub.add_parser("curate", help="episode logs to supervision JSONL")
    p.add_argument("logs", nargs="+")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--k-wp", dest="k_wp", type=int, default=8)
    p.add_argument("--failure-samples", type=int, default=0, help="recovery samples per log")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("render-trace", help="draw a sample's trace into a PPM")
    p.add_argument("samples", help="supervision JSONL")
    p.add_argument("--index", type=int, default=0, help="line number of the sample")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--background", choices=["observation", "blank"], default="observation")
    p.add_argument("--gradient", action="store_true")
    p.add_argument("-o", "--out", required=True)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the config file and flags, in that order."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config) as f:
            settings.update(json.load(f))
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command"):
            settings[k] = v
    if not settings.get("scene"):
        raise UsageError("a scene is required (--scene or 'scene' in --config)")
    return settings


def _jobs(settings: dict, seeds: Sequence[int]):
    scene = load_scene(settings["scene"])
    failure = FailureConfig(
        scene.failure.p_slip if settings["p_slip"] is None else settings["p_slip"],
        scene.failure.drop_radius if settings["drop_radius"] is None else settings["drop_radius"],
    )
    scene = replace(scene, failure=failure)
    jobs = []
    for s in seeds:
        cfg = EpisodeConfig.from_scene(
            scene,
            seed=s,
            mode=Mode(settings["mode"]),
            manager_interval=settings["manager_interval"],
            step_budget=settings["step_budget"],
        )
        jobs.append((cfg, replace(scene, seed=s)))
    return jobs


def _log_path(out_dir: Path, seed: int, gz: bool) -> Path:
    return out_dir / (log_filename(seed) + (".gz" if gz else ""))


def cmd_run(args) -> int:
    settings = resolve(args)
    seed = settings["seed"] if settings["seed"] is not None else load_scene(settings["scene"]).seed
    [result] = run_batch(_jobs(settings, [seed]), 1, settings["manager"], settings["executor"])
    if isinstance(result, EpisodeFailure):
        log.error("episode %d failed: %s", result.seed, result.error)
        return EXIT_DATA
    out_dir = Path(settings["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    path = _log_path(out_dir, seed, settings.get("gzip", False))
    result.write(path)
    log.info("seed %d: %s after %d steps -> %s", seed, result.outcome.value, result.n_steps, path)
    return EXIT_OK


SUMMARY_FIELDS = ["seed", "outcome", "success", "steps", "invocations", "progress_score", "intention_score", "grasp_attempts", "error"]


def cmd_batch(args) -> int:
    settings = resolve(args)
    jobs = _jobs(settings, args.seeds)
    results = run_batch(jobs, settings["jobs"], settings["manager"], settings["executor"])
    out_dir = Path(settings["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for (cfg, _), res in zip(jobs, results):
        if isinstance(res, EpisodeFailure):
            log.warning("seed %d failed: %s", res.seed, res.error)
            rows.append({"seed": res.seed, "outcome": "error", "error": res.error})
            continue
        res.write(_log_path(out_dir, cfg.seed, settings.get("gzip", False)))
        iscore = intention_score(res)
        rows.append({
            "seed": cfg.seed,
            "outcome": res.outcome.value,
            "success": int(res.outcome is Outcome.SUCCESS),
            "steps": res.n_steps,
            "invocations": len(res.invocations),
            "progress_score": f"{progress_score(res):.6f}",
            "intention_score": f"{iscore.value:.6f}" if not iscore.no_attempts else "",
            "grasp_attempts": iscore.attempts,
            "error": "",
        })
    ok = [r for r in rows if r["outcome"] != "error"]
    n = len(ok)
    success = sum(r["success"] for r in ok) / n if n else 0.0
    ps = sum(float(r["progress_score"]) for r in ok) / n if n else 0.0
    with_is = [float(r["intention_score"]) for r in ok if r["intention_score"] != ""]
    is_mean = sum(with_is) / len(with_is) if with_is else 0.0
    rows.append({
        "seed": "all", "outcome": "", "success": f"{success:.6f}", "steps": sum(r["steps"] for r in ok),
        "invocations": sum(r["invocations"] for r in ok), "progress_score": f"{ps:.6f}",
        "intention_score": f"{is_mean:.6f}", "grasp_attempts": sum(r["grasp_attempts"] for r in ok),
        "error": len(rows) - n,
    })
    with open(out_dir / "summary.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        w.writerows(rows)
    sys.stdout.write(f"episodes={n} success_rate={success:.6f} progress_score={ps:.6f} intention_score={is_mean:.6f}\n")
    return EXIT_OK if n == len(jobs) else EXIT_DATA


def cmd_eval(args) -> int:
    rows = []
    with open(args.pairs) as f:
        for lineno, line in enumerate(f):
            if not line.strip():
                continue
            rec = json.loads(line)
            scores = score_pair(normalize_px(rec["predicted"]), normalize_px(rec["reference"]), args.points)
            rows.append({"id": rec.get("id", lineno), **scores})
    agg = aggregate(rows)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["id", "dfd", "hd", "rmse"])
        for r in rows:
            w.writerow([r["id"], repr(r["dfd"]), repr(r["hd"]), repr(r["rmse"])])
        w.writerow(["mean", repr(agg["dfd"]), repr(agg["hd"]), repr(agg["rmse"])])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_curate(args) -> int:
    rng = random.Random(args.seed)
    samples = []
    for path in args.logs:
        lg = EpisodeLog.read(path)
        got = curate(lg, args.stride, args.k_wp, args.failure_samples, rng)
        log.info("%s: %d samples", path, len(got))
        samples.extend(got)
    n = write_samples(samples, args.out)
    log.info("wrote %d samples to %s", n, args.out)
    return EXIT_OK


def cmd_render_trace(args) -> int:
    samples = read_samples(args.samples)
    if not 0 <= args.index < len(samples):
        raise UsageError(f"--index {args.index} out of range (file has {len(samples)} samples)")
    s = samples[args.index]
    trace = s.target_trace or Trace((s.observation.gripper_px, s.observation.gripper_px))
    if args.background == "observation":
        canvas = render_observation(s.observation, args.width, args.height)
    else:
        canvas = Canvas.blank(args.width, args.height)
    write_ppm(render_trace(canvas, trace, TraceStyle(gradient=args.gradient)), args.out)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "batch": cmd_batch,
    "eval": cmd_eval,
    "curate": cmd_curate,
    "render-trace": cmd_render_trace,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("LOHO_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (LohoError, ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"loho: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
