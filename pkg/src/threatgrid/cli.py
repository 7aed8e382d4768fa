"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 scenario construction error,
4 input parse error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, build_config, parse_config_text
from .grid import FrameParseError, iter_frames as parse_frame_stream, serialize_frame
from .pipeline import CLUSTER_STAGES, STAGES, THREAT_STAGES, identify_clusters, process_frame
from .prediction import PlanCoverageError, PlanParseError, parse_plan, serialize_plan
from .sim import (
    ScenarioError, build_scenario, frame_times, iter_frames, run_scenario, synthesize_frame,
)
from .threat import attention_raster

EXIT_OK, EXIT_CONFIG, EXIT_SCENARIO, EXIT_PARSE = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file; flags override it")
    common.add_argument("--scenario", help="turning-in | turning-over | straight-crossing")
    common.add_argument("--horizon", type=float, help="prediction horizon T [s]")
    common.add_argument("--phi-u", type=float, dest="phi_u", help="heading uncertainty [deg]")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--emit-frames", action="store_const", const=True, dest="emit_frames",
                        help="also write the synthesized frames and the ego plan")
    common.add_argument("--emit-svg", action="store_const", const=True, dest="emit_svg",
                        help="also render SVG figures")
    common.add_argument("--frames", help="grid frame file (detect)")
    common.add_argument("--plan", help="ego plan file (detect)")
    common.add_argument("--n-frames", type=int, dest="n_frames", help="frames to replay (bench)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key; repeatable")

    p = argparse.ArgumentParser(prog="threatgrid", description="Grid-based collision threat detection.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate a scenario and measure reaction times")
    sub.add_parser("detect", parents=[common], help="evaluate threats on a frame file")
    sub.add_parser("bench", parents=[common], help="time the pipeline stages")
    sub.add_parser("export-scenario", parents=[common], help="write a scenario's frames and plan")
    return p


_FLAG_KEYS = ("scenario", "horizon", "phi_u", "seed", "out", "emit_frames", "emit_svg", "frames", "plan", "n_frames")


def _load_config(args) -> tuple[RunConfig, set[str]]:
    """Effective config and the set of keys given explicitly (file or flags)."""
    file_values = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc.strerror}") from None
        file_values = parse_config_text(text)
    overrides = {k: getattr(args, k) for k in _FLAG_KEYS if getattr(args, k) is not None}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(item, "expected KEY=VALUE")
        key, value = item.split("=", 1)
        overrides[key.strip().replace("-", "_")] = value.strip()
    cfg = build_config(file_values, overrides)
    return cfg, set(file_values) | set(overrides)


def _hull_text(hull) -> str:
    return ";".join(f"{x!r} {y!r}" for x, y in hull.points)


def _write_timeline(path: Path, reports):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "n_clusters", "threat", "on_trajectory", "no_threat", "ego_hull", "cluster_hulls"])
        for r in reports:
            c = r.status_counts()
            hulls = "|".join(f"{e.cluster_id}:{e.status.value}:{_hull_text(e.hull)}" for e in r.entries)
            w.writerow([repr(r.timestamp), len(r.entries), c["threat"], c["on_trajectory"], c["no_threat"],
                        _hull_text(r.ego_hull), hulls])


def _write_frames(path: Path, scenario, noise):
    with path.open("w") as fh:
        for frame in iter_frames(scenario, noise):
            fh.write(serialize_frame(frame))


def cmd_run(cfg: RunConfig) -> int:
    try:
        scenario = build_scenario(cfg.scenario_kind(), cfg.scenario_params())
    except ScenarioError as exc:
        print(f"error: scenario: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    noise, pipe = cfg.noise_config(), cfg.pipeline_config()
    out = run_scenario(scenario, noise, pipe)
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.txt").write_text(cfg.to_text())
    (d / "result.json").write_text(out.result.to_json())
    (d / "reports.jsonl").write_text("".join(r.to_json() + "\n" for r in out.reports))
    _write_timeline(d / "timeline.csv", out.reports)
    if cfg.emit_frames:
        _write_frames(d / "frames.dogm", scenario, noise)
        (d / "plan.txt").write_text(serialize_plan(scenario.ego))
    if cfg.emit_svg:
        from .plotting import plot_scene

        # show the first threat frame, or the last frame before the collision
        t = out.result.tod_ours
        if t is None:
            t = max(float(ts) for ts in frame_times(scenario) if ts <= scenario.toc)
        report = next(r for r in out.reports if r.timestamp == t)
        frame = synthesize_frame(scenario, t, noise)
        raster = attention_raster(report, frame, cfg.margin)
        plot_scene(d / "scene.svg", frame, report, raster, scenario.corridor, cfg.p_occ_min, cfg.v_min,
                   title=f"{cfg.scenario}, t = {t:.1f} s, ToC = {scenario.toc:.2f} s")
    r = out.result
    fmt = lambda v: "none" if v is None else f"{v:.3f}"  # noqa: E731
    print(f"{r.scenario}: toc={fmt(r.toc)} tod_prior={fmt(r.tod_prior)} tod_ours={fmt(r.tod_ours)} "
          f"rittr={fmt(r.rittr)} -> {d}")
    return EXIT_OK


def cmd_detect(cfg: RunConfig, explicit: set[str]) -> int:
    if not cfg.frames or not cfg.plan:
        print("error: detect needs --frames and --plan", file=sys.stderr)
        return EXIT_CONFIG
    try:
        plan = parse_plan(Path(cfg.plan).read_text())
    except OSError as exc:
        print(f"error: {cfg.plan}: {exc.strerror}", file=sys.stderr)
        return EXIT_PARSE
    except PlanParseError as exc:
        print(f"error: {cfg.plan}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        text = Path(cfg.frames).read_text()
    except OSError as exc:
        print(f"error: {cfg.frames}: {exc.strerror}", file=sys.stderr)
        return EXIT_PARSE

    to_dir = "out" in explicit
    if to_dir:
        d = Path(cfg.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "config.txt").write_text(cfg.to_text())
        sink = (d / "reports.jsonl").open("w")
    else:
        sink = sys.stdout
    pipe = cfg.pipeline_config()
    try:
        for frame in parse_frame_stream(text):
            sink.write(process_frame(frame, plan, pipe).to_json() + "\n")
            sink.flush()
    except FrameParseError as exc:
        print(f"error: {cfg.frames}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PlanCoverageError as exc:
        print(f"error: {cfg.plan}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    finally:
        if to_dir:
            sink.close()
    return EXIT_OK


def _bench_frames(cfg: RunConfig, scenario, noise):
    """Distinct scenario frames, replayed cyclically up to ``n_frames``."""
    distinct = list(iter_frames(scenario, noise))
    return [distinct[k % len(distinct)] for k in range(cfg.n_frames)]


def cmd_bench(cfg: RunConfig) -> int:
    try:
        scenario = build_scenario(cfg.scenario_kind(), cfg.scenario_params())
    except ScenarioError as exc:
        print(f"error: scenario: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    pipe = cfg.pipeline_config()
    frames = _bench_frames(cfg, scenario, cfg.noise_config())
    for frame in frames[:5]:  # warm-up
        process_frame(frame, scenario.ego, pipe)

    per_stage = {s: [] for s in STAGES}
    baseline, full = [], []
    for frame in frames:
        tb: dict = {}
        identify_clusters(frame, pipe, tb)
        baseline.append(sum(tb.values()))
        tf: dict = {}
        t0 = time.perf_counter()
        process_frame(frame, scenario.ego, pipe, tf)
        full.append(time.perf_counter() - t0)
        for s in STAGES:
            per_stage[s].append(tf.get(s, 0.0))
    threat = [sum(per_stage[s][k] for s in THREAT_STAGES) for k in range(len(frames))]

    def stats(xs):
        a = np.asarray(xs) * 1e3
        return {"median_ms": float(np.median(a)), "p95_ms": float(np.percentile(a, 95))}

    summary = {
        "scenario": cfg.scenario,
        "n_frames": len(frames),
        "grid": [scenario.grid.height, scenario.grid.width],
        "stages": {s: stats(per_stage[s]) for s in STAGES},
        "cluster_stages": list(CLUSTER_STAGES),
        "threat_stages": list(THREAT_STAGES),
        "cluster_baseline": stats(baseline),
        "threat": stats(threat),
        "full_pipeline": stats(full),
        "overhead": float(np.median(threat) / np.median(baseline)),
    }
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.txt").write_text(cfg.to_text())
    (d / "bench.json").write_text(json.dumps(summary, indent=2) + "\n")
    with (d / "bench.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "t", *STAGES, "cluster_baseline", "full_pipeline"])
        for k, frame in enumerate(frames):
            w.writerow([k, repr(frame.timestamp), *(f"{per_stage[s][k]:.9f}" for s in STAGES),
                        f"{baseline[k]:.9f}", f"{full[k]:.9f}"])
    if cfg.emit_svg:
        from .plotting import plot_stage_times

        plot_stage_times(d / "bench.svg", {**per_stage, "cluster_baseline": baseline, "full": full})
    print(f"bench: {len(frames)} frames, full median {summary['full_pipeline']['median_ms']:.3f} ms, "
          f"threat overhead {100 * summary['overhead']:.2f}% of clustering -> {d}")
    return EXIT_OK


def cmd_export(cfg: RunConfig) -> int:
    try:
        scenario = build_scenario(cfg.scenario_kind(), cfg.scenario_params())
    except ScenarioError as exc:
        print(f"error: scenario: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.txt").write_text(cfg.to_text())
    _write_frames(d / "frames.dogm", scenario, cfg.noise_config())
    (d / "plan.txt").write_text(serialize_plan(scenario.ego))
    print(f"exported {len(frame_times(scenario))} frames of {cfg.scenario} (ToC {scenario.toc:.3f} s) -> {d}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg, explicit = _load_config(args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        return cmd_run(cfg)
    if args.command == "detect":
        return cmd_detect(cfg, explicit)
    if args.command == "bench":
        return cmd_bench(cfg)
    return cmd_export(cfg)


if __name__ == "__main__":
    sys.exit(main())
