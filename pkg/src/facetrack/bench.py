"""Benchmark harness: sequence I/O, one-pass metrics, synthetic scenarios, result files."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage

from .imaging import BoundingBox, Image, load_image
from .tracker import TrackResult


class BenchError(Exception):
    pass


@dataclass
class SequenceSpec:
    frame_paths: list[str]
    gt_boxes: list[BoundingBox]
    detections: dict[int, list[tuple[BoundingBox, float]]] | None = None

    def __len__(self) -> int:
        return len(self.frame_paths)


@dataclass
class EvalCurves:
    precision: np.ndarray  # thresholds 0..50 px, step 1
    success: np.ndarray  # overlap thresholds 0, 0.05, ..., 1.0
    precision_at_20: float
    success_auc: float


PRECISION_THRESHOLDS = np.arange(51)
SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 21)


def _frame_number(name: str) -> int:
    digits = re.findall(r"\d+", os.path.splitext(name)[0])
    return int(digits[-1]) if digits else -1


def load_ground_truth(gt_path: str) -> list[BoundingBox]:
    """Parse a groundtruth_rect.txt file (1-based x,y,w,h per line) into 0-based boxes."""
    if not os.path.exists(gt_path):
        raise BenchError(f"missing ground truth file {gt_path}")
    gt_boxes = []
    with open(gt_path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = re.split(r"[,\t\s]+", line)
            if len(parts) != 4:
                raise BenchError(f"{gt_path}:{lineno}: expected x,y,w,h, got {line!r}")
            try:
                x, y, w, h = (float(v) for v in parts)
            except ValueError as exc:
                raise BenchError(f"{gt_path}:{lineno}: unparsable value ({exc})") from exc
            if not all(np.isfinite(v) for v in (x, y, w, h)):
                raise BenchError(f"{gt_path}:{lineno}: non-finite box")
            gt_boxes.append(BoundingBox(x - 1.0, y - 1.0, w, h))
    return gt_boxes


def load_sequence(seq_dir: str) -> SequenceSpec:
    """Read an OTB-style directory: img/ frames plus groundtruth_rect.txt.

    Ground-truth lines are `x,y,w,h` (comma or tab separated) with a
    1-based pixel origin; boxes are converted to the 0-based in-memory
    convention here.
    """
    img_dir = os.path.join(seq_dir, "img")
    if not os.path.isdir(img_dir):
        raise BenchError(f"missing frame directory {img_dir}")

    names = [n for n in os.listdir(img_dir) if n.lower().endswith((".png", ".jpg", ".jpeg"))]
    names.sort(key=lambda n: (_frame_number(n), n))
    frame_paths = [os.path.join(img_dir, n) for n in names]

    gt_boxes = load_ground_truth(os.path.join(seq_dir, "groundtruth_rect.txt"))

    if len(gt_boxes) != len(frame_paths):
        raise BenchError(
            f"{seq_dir}: {len(frame_paths)} frames but {len(gt_boxes)} ground-truth boxes"
        )
    if not frame_paths:
        raise BenchError(f"{seq_dir}: no frames found")
    return SequenceSpec(frame_paths=frame_paths, gt_boxes=gt_boxes)


def load_detections(path: str) -> dict[int, list[tuple[BoundingBox, float]]]:
    """Parse `frame,x,y,w,h,score` rows into per-frame lists, best score first."""
    per_frame: dict[int, list[tuple[BoundingBox, float]]] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("frame"):
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise BenchError(f"{path}:{lineno}: expected frame,x,y,w,h,score")
            try:
                frame = int(parts[0])
                x, y, w, h, score = (float(v) for v in parts[1:])
            except ValueError as exc:
                raise BenchError(f"{path}:{lineno}: unparsable value ({exc})") from exc
            if w <= 0 or h <= 0:
                raise BenchError(f"{path}:{lineno}: non-positive detection size {w}x{h}")
            per_frame.setdefault(frame, []).append((BoundingBox(x - 1.0, y - 1.0, w, h), score))
    for frame in per_frame:
        per_frame[frame].sort(key=lambda t: -t[1])
    return per_frame


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 for disjoint or zero-area inputs."""
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def evaluate(results: list[BoundingBox], gt: list[BoundingBox]) -> EvalCurves:
    """One-pass precision and success curves over per-frame box pairs.

    precision(t) is the fraction of frames whose center error is <= t px;
    success(t) the fraction whose overlap is >= t. The success AUC is the
    mean over the 21 overlap thresholds.
    """
    if len(results) != len(gt):
        raise BenchError(f"result/ground-truth length mismatch: {len(results)} vs {len(gt)}")
    if not results:
        raise BenchError("nothing to evaluate")
    errors = np.array(
        [
            np.hypot(r.center[0] - g.center[0], r.center[1] - g.center[1])
            for r, g in zip(results, gt)
        ]
    )
    overlaps = np.array([iou(r, g) for r, g in zip(results, gt)])
    precision = np.array([(errors <= t).mean() for t in PRECISION_THRESHOLDS])
    success = np.array([(overlaps >= t).mean() for t in SUCCESS_THRESHOLDS])
    return EvalCurves(
        precision=precision,
        success=success,
        precision_at_20=float(precision[20]),
        success_auc=float(success.mean()),
    )


# --- synthetic sequences -------------------------------------------------


@dataclass
class SynthSpec:
    """Parameters shared by all synthetic scenarios."""

    scenario: str  # translation | scale_ramp | occlusion | clutter
    n_frames: int = 100
    frame_w: int = 320
    frame_h: int = 240
    target_w: int = 48
    target_h: int = 48
    seed: int = 7
    velocity: tuple[float, float] = (2.0, 0.0)
    start: tuple[float, float] = (30.0, 96.0)
    # scale_ramp
    start_scale: float = 1.0
    end_scale: float = 1.5
    # occlusion
    occ_start: int = 40
    occ_end: int = 60
    coverage: float = 1.0
    # detector simulation
    det_jitter: float = 1.5
    det_false_from: int = 0  # frame from which detections hit the distractor; 0 = never
    distractor_count: int = 0
    distractor_pos: tuple[int, int] = (230, 24)


def _blob_texture(rng: np.random.Generator, w: int, h: int) -> np.ndarray:
    """High-contrast seeded blob pattern; reliable fodder for the keypoint detector."""
    tex = np.full((h, w, 3), 128.0)
    yy, xx = np.mgrid[0:h, 0:w]
    n_blobs = max(12, (w * h) // 192)
    for _ in range(n_blobs):
        cx = rng.uniform(3, w - 3)
        cy = rng.uniform(3, h - 3)
        sig = rng.uniform(1.5, 3.0)
        amp = rng.uniform(90, 140) * (1 if rng.uniform() < 0.5 else -1)
        tint = rng.uniform(0.55, 1.0, size=3)
        blob = amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sig * sig))
        tex += blob[:, :, None] * tint[None, None, :]
    return np.clip(tex, 5, 250).astype(np.uint8)


def _smooth_background(rng: np.random.Generator, w: int, h: int) -> np.ndarray:
    coarse = rng.uniform(55, 135, size=(h // 16 + 2, w // 16 + 2, 3))
    base = Image(np.clip(coarse, 0, 255).astype(np.uint8))
    big = np.asarray(
        PILImage.fromarray(base.data).resize((w, h), PILImage.BILINEAR), dtype=np.uint8
    )
    return big


def _resample_texture(tex: np.ndarray, w: int, h: int) -> np.ndarray:
    return np.asarray(PILImage.fromarray(tex).resize((w, h), PILImage.BILINEAR), dtype=np.uint8)


def _paste(canvas: np.ndarray, patch: np.ndarray, x: int, y: int) -> None:
    hh, ww = patch.shape[:2]
    x0, y0 = max(0, x), max(0, y)
    x1, y1 = min(canvas.shape[1], x + ww), min(canvas.shape[0], y + hh)
    if x1 <= x0 or y1 <= y0:
        return
    canvas[y0:y1, x0:x1] = patch[y0 - y : y1 - y, x0 - x : x1 - x]


def synth_sequence(
    spec: SynthSpec,
) -> tuple[list[Image], list[BoundingBox], dict[int, list[tuple[BoundingBox, float]]]]:
    """Deterministic desk-scale sequence with exact ground truth.

    The target is a seeded high-contrast texture patch on a smooth
    textured background. Scenarios add linear motion (with wall bounces),
    a linear scale ramp, an opaque occluder block over the target during
    [occ_start, occ_end], or static distractor patches. Synthetic
    detections are jittered ground truth, dropped while the occluder is
    active; from det_false_from onward they sit on the first distractor,
    modeling a detector latched onto a look-alike.
    """
    known = {"translation", "scale_ramp", "occlusion", "clutter"}
    if spec.scenario not in known:
        raise BenchError(f"unknown scenario {spec.scenario!r} (expected one of {sorted(known)})")
    if spec.n_frames < 2:
        raise BenchError("need at least 2 frames")
    if not (0.0 < spec.coverage <= 1.0):
        raise BenchError(f"coverage must be in (0, 1], got {spec.coverage}")
    if spec.scenario == "scale_ramp" and (spec.start_scale <= 0 or spec.end_scale <= 0):
        raise BenchError("scale ramp endpoints must be positive")

    rng = np.random.default_rng(spec.seed)
    bg = _smooth_background(rng, spec.frame_w, spec.frame_h)
    # the base texture is rendered 1:1 at scale 1; scale ramps resample it
    master = _blob_texture(rng, spec.target_w, spec.target_h)
    base_patch = master
    distractors = []
    n_distractors = spec.distractor_count
    if spec.det_false_from and n_distractors == 0:
        n_distractors = 1
    for d in range(n_distractors):
        d_rng = np.random.default_rng(spec.seed + 1000 + d)
        distractors.append(_blob_texture(d_rng, spec.target_w, spec.target_h))

    jitters = rng.normal(0.0, spec.det_jitter, size=(spec.n_frames + 1, 2))
    dim_jitters = rng.integers(-1, 2, size=(spec.n_frames + 1, 2))

    frames: list[Image] = []
    gt: list[BoundingBox] = []
    detections: dict[int, list[tuple[BoundingBox, float]]] = {}

    x, y = spec.start
    vx, vy = spec.velocity
    for t in range(1, spec.n_frames + 1):
        if spec.scenario == "scale_ramp":
            s = spec.start_scale + (spec.end_scale - spec.start_scale) * (t - 1) / (spec.n_frames - 1)
            w = spec.target_w * s
            h = spec.target_h * s
            cx = spec.frame_w / 2.0
            cy = spec.frame_h / 2.0
            box = BoundingBox.from_center(cx, cy, w, h)
            patch = _resample_texture(master, int(round(w)), int(round(h)))
            px, py = int(round(box.x)), int(round(box.y))
        else:
            box = BoundingBox(x, y, float(spec.target_w), float(spec.target_h))
            patch = base_patch
            px, py = int(round(x)), int(round(y))

        canvas = bg.copy()
        for d, tex in enumerate(distractors):
            _paste(canvas, tex, spec.distractor_pos[0] + d * (spec.target_w + 12), spec.distractor_pos[1])
        _paste(canvas, patch, px, py)

        occluded_now = spec.scenario == "occlusion" and spec.occ_start <= t <= spec.occ_end
        if occluded_now:
            margin = 2
            ow = int(np.ceil(box.w * spec.coverage)) + 2 * margin
            oh = int(np.ceil(box.h * spec.coverage)) + 2 * margin
            block = np.zeros((oh, ow, 3), dtype=np.uint8)
            block[:, :] = (22, 26, 30)
            bx, by = box.center
            _paste(canvas, block, int(round(bx - ow / 2.0)), int(round(by - oh / 2.0)))

        frames.append(Image(canvas))
        gt.append(box)

        fp_now = spec.det_false_from and t >= spec.det_false_from and distractors
        if fp_now:
            dbox = BoundingBox(
                float(spec.distractor_pos[0]),
                float(spec.distractor_pos[1]),
                float(spec.target_w),
                float(spec.target_h),
            )
            detections[t] = [(dbox, 0.8)]
        elif not occluded_now:
            jx, jy = jitters[t]
            dw = float(box.w + dim_jitters[t][0])
            dh = float(box.h + dim_jitters[t][1])
            dbox = BoundingBox.from_center(box.center[0] + jx, box.center[1] + jy, dw, dh)
            detections[t] = [(dbox, 0.95)]

        if spec.scenario != "scale_ramp":
            x += vx
            y += vy
            # elastic bounce keeps the target inside the frame
            if x < 4 or x + spec.target_w > spec.frame_w - 4:
                vx = -vx
                x += 2 * vx
            if y < 4 or y + spec.target_h > spec.frame_h - 4:
                vy = -vy
                y += 2 * vy

    return frames, gt, detections


def default_spec(scenario: str, seed: int = 7) -> SynthSpec:
    """Scenario presets used by the benchmark suite and the CLI."""
    if scenario == "translation":
        return SynthSpec(scenario="translation", velocity=(2.0, 0.0), start=(30.0, 96.0), seed=seed)
    if scenario == "scale_ramp":
        return SynthSpec(scenario="scale_ramp", velocity=(0.0, 0.0), seed=seed)
    if scenario == "occlusion":
        return SynthSpec(
            scenario="occlusion",
            velocity=(7.0, 0.0),
            start=(200.0, 126.0),
            occ_start=40,
            occ_end=60,
            det_false_from=76,
            distractor_pos=(230, 24),
            seed=seed,
        )
    if scenario == "clutter":
        return SynthSpec(
            scenario="clutter",
            velocity=(1.0, 0.0),
            start=(40.0, 96.0),
            distractor_count=1,
            det_false_from=1,
            distractor_pos=(230, 24),
            seed=seed,
        )
    raise BenchError(f"unknown scenario {scenario!r}")


def write_synth_sequence(spec: SynthSpec, out_dir: str) -> None:
    """Materialize a scenario in the on-disk layout load_sequence expects."""
    frames, gt, detections = synth_sequence(spec)
    img_dir = os.path.join(out_dir, "img")
    os.makedirs(img_dir, exist_ok=True)
    for i, frame in enumerate(frames, start=1):
        PILImage.fromarray(frame.data).save(os.path.join(img_dir, f"{i:04d}.png"))
    with open(os.path.join(out_dir, "groundtruth_rect.txt"), "w") as fh:
        for box in gt:
            fh.write(f"{float(box.x) + 1.0!r},{float(box.y) + 1.0!r},{float(box.w)!r},{float(box.h)!r}\n")
    with open(os.path.join(out_dir, "detections.csv"), "w") as fh:
        fh.write("frame,x,y,w,h,score\n")
        for t in sorted(detections):
            for box, score in detections[t]:
                fh.write(
                    f"{t},{float(box.x) + 1.0!r},{float(box.y) + 1.0!r},"
                    f"{float(box.w)!r},{float(box.h)!r},{float(score)!r}\n"
                )


# --- result files ---------------------------------------------------------


def write_results(results: list[TrackResult], path: str) -> None:
    """Result CSV: frame,x,y,w,h,score,occluded.

    Frame indices are 1-based; box coordinates are written 0-based with
    full float precision so that a write/parse cycle is lossless.
    """
    if not results:
        raise BenchError("no results to write")
    with open(path, "w") as fh:
        fh.write("frame,x,y,w,h,score,occluded\n")
        for r in results:
            fh.write(
                f"{r.frame_index},{float(r.box.x)!r},{float(r.box.y)!r},"
                f"{float(r.box.w)!r},{float(r.box.h)!r},{float(r.fusion_score)!r},{int(r.occluded)}\n"
            )


def read_results(path: str) -> tuple[list[BoundingBox], list[bool]]:
    """Parse a result CSV back into boxes and occlusion flags."""
    boxes, flags = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("frame"):
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise BenchError(f"{path}:{lineno}: expected 7 columns")
            x, y, w, h = (float(v) for v in parts[1:5])
            boxes.append(BoundingBox(x, y, w, h))
            flags.append(parts[6] == "1")
    return boxes, flags


def write_curves(curves: EvalCurves, path: str) -> None:
    """Delimited curve dump: 51 precision rows then 21 success rows."""
    with open(path, "w") as fh:
        fh.write("curve,threshold,value\n")
        for t, v in zip(PRECISION_THRESHOLDS, curves.precision):
            fh.write(f"precision,{int(t)},{v!r}\n")
        for t, v in zip(SUCCESS_THRESHOLDS, curves.success):
            fh.write(f"success,{t:.2f},{v!r}\n")


def _draw_rect(canvas: np.ndarray, box: BoundingBox, color: tuple[int, int, int]) -> None:
    h, w = canvas.shape[:2]
    x0 = int(np.clip(round(box.x), 0, w - 1))
    y0 = int(np.clip(round(box.y), 0, h - 1))
    x1 = int(np.clip(round(box.x + box.w), 0, w - 1))
    y1 = int(np.clip(round(box.y + box.h), 0, h - 1))
    canvas[y0, x0 : x1 + 1] = color
    canvas[y1, x0 : x1 + 1] = color
    canvas[y0 : y1 + 1, x0] = color
    canvas[y0 : y1 + 1, x1] = color


def write_overlays(
    frames: list[Image], results: list[TrackResult], gt: list[BoundingBox], out_dir: str
) -> None:
    """One PNG per frame with the tracked box (green) and ground truth (red)."""
    os.makedirs(out_dir, exist_ok=True)
    for frame, res, gt_box in zip(frames, results, gt):
        canvas = frame.data.copy()
        _draw_rect(canvas, gt_box, (220, 40, 40))
        _draw_rect(canvas, res.box, (40, 220, 40))
        PILImage.fromarray(canvas).save(os.path.join(out_dir, f"{res.frame_index:04d}.png"))
