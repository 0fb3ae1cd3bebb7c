"""Command-line entry points: run, synth, and eval subcommands."""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import bench, report
from .fusion import SimilarityScores
from .imaging import ImagingError, load_image
from .keypoints import KeypointError
from .tracker import TrackerConfig, TrackerError, TrackResult, init, step


class CliError(Exception):
    pass


def load_config(path: str | None, overrides: dict | None = None) -> TrackerConfig:
    """Flat `key = value` config file; keys mirror TrackerConfig fields exactly.

    Unknown keys are a hard error so experiment typos surface immediately.
    """
    values: dict = {}
    known = {f.name: f.type for f in dataclasses.fields(TrackerConfig)}
    defaults = TrackerConfig()
    if path is not None:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#")[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliError(f"{path}:{lineno}: expected key = value, got {line!r}")
                key, _, val = (s.strip() for s in line.partition("="))
                if key not in known:
                    raise CliError(f"{path}:{lineno}: unknown config key {key!r}")
                current = getattr(defaults, key)
                if isinstance(current, bool):
                    if val.lower() not in ("true", "false", "1", "0"):
                        raise CliError(f"{path}:{lineno}: boolean expected for {key}")
                    values[key] = val.lower() in ("true", "1")
                elif isinstance(current, int):
                    values[key] = int(val)
                else:
                    values[key] = float(val)
    if overrides:
        values.update(overrides)
    try:
        return TrackerConfig(**values)
    except TrackerError as exc:
        raise CliError(str(exc)) from exc


def run_sequence(
    seq: bench.SequenceSpec,
    cfg: TrackerConfig,
    init_mode: str,
    detections: dict | None,
) -> list[TrackResult]:
    """Track one sequence end to end, returning one result per frame."""
    first = load_image(seq.frame_paths[0])
    if init_mode == "gt":
        init_box = seq.gt_boxes[0]
    elif init_mode == "detections":
        first_dets = (detections or {}).get(1, [])
        if not first_dets:
            raise CliError("init mode 'detections' needs a detection on frame 1")
        init_box = first_dets[0][0]
    else:
        raise CliError(f"unknown init mode {init_mode!r}")

    state = init(first, init_box, cfg)
    results = [
        TrackResult(
            frame_index=1,
            box=init_box,
            fusion_score=0.0,
            occluded=False,
            n_matches=0,
            scores=SimilarityScores(0.0, 0.0, 0.0),
            origin="init",
        )
    ]
    for idx in range(1, len(seq)):
        frame = load_image(seq.frame_paths[idx])
        frame_dets = [b for b, _ in (detections or {}).get(idx + 1, [])]
        state, res = step(state, frame, frame_dets)
        results.append(res)
    return results


def _run_one(seq_dir: str, out_dir: str, args: argparse.Namespace, cfg: TrackerConfig) -> tuple[str, bench.EvalCurves, float]:
    seq = bench.load_sequence(seq_dir)
    detections = None
    if args.detections:
        detections = bench.load_detections(args.detections)
    else:
        default_det = os.path.join(seq_dir, "detections.csv")
        if os.path.exists(default_det) and not cfg.disable_detector:
            detections = bench.load_detections(default_det)

    started = time.perf_counter()
    results = run_sequence(seq, cfg, args.init, detections)
    elapsed = time.perf_counter() - started
    fps = len(seq) / elapsed if elapsed > 0 else 0.0

    curves = bench.evaluate([r.box for r in results], seq.gt_boxes)
    os.makedirs(out_dir, exist_ok=True)
    bench.write_results(results, os.path.join(out_dir, "results.csv"))
    bench.write_curves(curves, os.path.join(out_dir, "curves.csv"))
    report.render_precision_figure(curves, os.path.join(out_dir, "precision.png"))
    report.render_success_figure(curves, os.path.join(out_dir, "success.png"))
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(f"precision_at_20 {curves.precision_at_20:.4f}\n")
        fh.write(f"success_auc {curves.success_auc:.4f}\n")
        fh.write(f"fps {fps:.2f}\n")
    if args.overlays:
        frames = [load_image(p) for p in seq.frame_paths]
        bench.write_overlays(frames, results, seq.gt_boxes, os.path.join(out_dir, "overlays"))
    return seq_dir, curves, fps


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {}
    if args.no_detector:
        overrides["disable_detector"] = True
    if args.no_candidates:
        overrides["disable_candidates"] = True
    if args.no_updates:
        overrides["disable_template_updates"] = True
    if args.no_grm_edit:
        overrides["disable_grm_add_delete"] = True
    cfg = load_config(args.config, overrides)

    jobs = []
    if len(args.sequences) == 1:
        jobs.append((args.sequences[0], args.output))
    else:
        for seq_dir in args.sequences:
            name = os.path.basename(os.path.normpath(seq_dir))
            jobs.append((seq_dir, os.path.join(args.output, name)))

    if args.jobs > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(lambda j: _run_one(j[0], j[1], args, cfg), jobs))
    else:
        outcomes = [_run_one(seq_dir, out_dir, args, cfg) for seq_dir, out_dir in jobs]

    for seq_dir, curves, fps in outcomes:
        print(
            f"{seq_dir}: precision@20 {curves.precision_at_20:.3f}  "
            f"success AUC {curves.success_auc:.3f}  {fps:.1f} fps"
        )
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = bench.default_spec(args.scenario, seed=args.seed)
    if args.frames is not None:
        spec.n_frames = args.frames
    if args.velocity is not None:
        vx, vy = (float(v) for v in args.velocity.split(","))
        spec.velocity = (vx, vy)
    if args.scale_end is not None:
        spec.end_scale = args.scale_end
    if args.occ_window is not None:
        a, b = (int(v) for v in args.occ_window.split(","))
        if not 1 <= a <= b:
            raise CliError(f"invalid occlusion window {args.occ_window}")
        spec.occ_start, spec.occ_end = a, b
    bench.write_synth_sequence(spec, args.out)
    print(f"wrote {spec.n_frames}-frame {args.scenario} sequence to {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    boxes, _ = bench.read_results(args.results)
    gt = bench.load_ground_truth(args.gt)
    curves = bench.evaluate(boxes, gt)
    out_dir = args.output or os.path.dirname(os.path.abspath(args.results))
    os.makedirs(out_dir, exist_ok=True)
    bench.write_curves(curves, os.path.join(out_dir, "curves.csv"))
    report.render_precision_figure(curves, os.path.join(out_dir, "precision.png"))
    report.render_success_figure(curves, os.path.join(out_dir, "success.png"))
    print(f"precision@20 {curves.precision_at_20:.3f}")
    print(f"success AUC {curves.success_auc:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facetrack", description="Face tracking benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="track sequences and write results, curves, and figures")
    p_run.add_argument("sequences", nargs="+", help="OTB-style sequence directories")
    p_run.add_argument("--init", choices=("gt", "detections"), default="gt")
    p_run.add_argument("--detections", help="detections CSV (frame,x,y,w,h,score)")
    p_run.add_argument("--config", help="flat key = value tracker config file")
    p_run.add_argument("--output", required=True, help="output directory")
    p_run.add_argument("--jobs", type=int, default=1, help="concurrent sequences")
    p_run.add_argument("--overlays", action="store_true", help="write per-frame overlay PNGs")
    p_run.add_argument("--no-detector", action="store_true")
    p_run.add_argument("--no-candidates", action="store_true")
    p_run.add_argument("--no-updates", action="store_true")
    p_run.add_argument("--no-grm-edit", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_synth = sub.add_parser("synth", help="generate a synthetic sequence")
    p_synth.add_argument("--scenario", required=True, choices=("translation", "scale_ramp", "occlusion", "clutter"))
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=7)
    p_synth.add_argument("--frames", type=int)
    p_synth.add_argument("--velocity", help="vx,vy in px/frame")
    p_synth.add_argument("--scale-end", type=float, dest="scale_end")
    p_synth.add_argument("--occ-window", dest="occ_window", help="start,end frames")
    p_synth.set_defaults(func=cmd_synth)

    p_eval = sub.add_parser("eval", help="score a results CSV against ground truth")
    p_eval.add_argument("results", help="results CSV from `run`")
    p_eval.add_argument("gt", help="groundtruth_rect.txt")
    p_eval.add_argument("--output", help="directory for curves and figures")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, bench.BenchError, TrackerError, ImagingError, KeypointError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
