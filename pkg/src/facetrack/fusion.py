"""Candidate generation and variance-ranked score-level fusion."""

from __future__ import annotations

from dataclasses import dataclass

from .bdm import BdmGrid, binary_score, compute_lbsp
from .icm import IcmHistogram, build_icm, color_score
from .imaging import BoundingBox, Image, WeightMask, crop_resize
from .keypoints import Match


class FusionError(Exception):
    pass


@dataclass(frozen=True)
class Candidate:
    box: BoundingBox
    origin: str  # "grm_grid" or "detector"


@dataclass(frozen=True)
class SimilarityScores:
    k: float  # fraction of matched keypoints inside the candidate box
    c: float  # color histogram similarity
    b: float  # binary descriptor similarity


# Previous frame's winning scores; None on the first tracked frame.
ScoreHistory = SimilarityScores | None


@dataclass(frozen=True)
class FusionWeights:
    p: float = 0.15
    q: float = 0.10
    r: float = 0.10


def generate_candidates(
    center: tuple[float, float],
    box_dims: tuple[float, float],
    scale: float,
    detector_box: BoundingBox | None = None,
    frame_dims: tuple[int, int] | None = None,
    offset_frac: float = 0.15,
    grid: bool = True,
) -> list[Candidate]:
    """Boxes to score this frame: a 3x3 offset grid plus the detector box.

    Grid boxes share dims scale * box_dims and are centered at
    center + (dx, dy) with dx, dy in {-s, 0, +s}, s = offset_frac * min(dims).
    The centered box comes first (it wins exact fusion ties); the detector
    box, when present, is appended last. Boxes that miss the frame
    entirely are dropped.
    """
    w = scale * box_dims[0]
    h = scale * box_dims[1]
    if w <= 0 or h <= 0:
        raise FusionError(f"candidate dims must be positive, got {w}x{h}")
    s = offset_frac * min(w, h)
    offsets = [(0.0, 0.0)]
    if grid:
        offsets += [
            (dx, dy)
            for dy in (-s, 0.0, s)
            for dx in (-s, 0.0, s)
            if not (dx == 0.0 and dy == 0.0)
        ]
    out = []
    for dx, dy in offsets:
        box = BoundingBox.from_center(center[0] + dx, center[1] + dy, w, h)
        if frame_dims is None or box.intersects_frame(*frame_dims):
            out.append(Candidate(box=box, origin="grm_grid"))
    if detector_box is not None and (
        frame_dims is None or detector_box.intersects_frame(*frame_dims)
    ):
        out.append(Candidate(box=detector_box, origin="detector"))
    return out


def score_candidate(
    cand: Candidate,
    frame: Image,
    gray: Image,
    matches: list[Match],
    n_total: int,
    icm_model: IcmHistogram,
    bdm_model: BdmGrid,
    mask: WeightMask,
) -> SimilarityScores:
    """Keypoint, color, and binary similarities of one candidate box.

    k counts this frame's accepted matches whose keypoint lies inside the
    box, as a fraction of all matches (0 when there are none). c and b
    compare freshly built templates against the stored models.
    """
    if cand.box.w < 1 or cand.box.h < 1:
        raise FusionError(f"degenerate candidate box {cand.box}")
    if n_total > 0:
        inside = sum(
            1 for m in matches if cand.box.contains(m.frame_keypoint.x, m.frame_keypoint.y)
        )
        k = inside / n_total
    else:
        k = 0.0
    c = color_score(icm_model, build_icm(frame, cand.box, icm_model.bins_per_channel, mask))
    patch = crop_resize(gray, cand.box, bdm_model.width, bdm_model.height)
    b = binary_score(bdm_model, compute_lbsp(patch, bdm_model.threshold))
    return SimilarityScores(k=k, c=c, b=b)


def rank_weights(
    current: SimilarityScores, history: ScoreHistory, weights: FusionWeights | None = None
) -> dict[str, float]:
    """Assign (p, q, r) to (k, c, b) by two-frame score variance, largest first.

    Variance per score over the window {previous winner, current} is
    ((a - b) / 2)^2. With no history, or on any variance tie, the fixed
    fallback k->p, c->q, b->r applies.
    """
    weights = weights or FusionWeights()
    if history is None:
        return {"k": weights.p, "c": weights.q, "b": weights.r}
    variances = {
        "k": ((history.k - current.k) / 2.0) ** 2,
        "c": ((history.c - current.c) / 2.0) ** 2,
        "b": ((history.b - current.b) / 2.0) ** 2,
    }
    vals = list(variances.values())
    if len(set(vals)) < 3:
        return {"k": weights.p, "c": weights.q, "b": weights.r}
    ranked = sorted(variances, key=lambda s: -variances[s])
    return dict(zip(ranked, (weights.p, weights.q, weights.r)))


def fusion_score(scores: SimilarityScores, assignment: dict[str, float]) -> float:
    """Weighted sum of the three similarities under a rank assignment."""
    return assignment["k"] * scores.k + assignment["c"] * scores.c + assignment["b"] * scores.b


def select_best(
    candidates: list[Candidate],
    scores: list[SimilarityScores],
    history: ScoreHistory,
    weights: FusionWeights | None = None,
) -> tuple[Candidate, float, SimilarityScores]:
    """Candidate with the maximum fusion score; list order breaks exact ties.

    Each candidate's weight assignment is ranked against the shared score
    history, mirroring a per-candidate variance computation over one
    retained trajectory.
    """
    if not candidates:
        raise FusionError("no candidates to select from")
    if len(candidates) != len(scores):
        raise FusionError("candidate/score length mismatch")
    best_idx = 0
    best_fs = -1.0
    for i, (cand, sc) in enumerate(zip(candidates, scores)):
        fs = fusion_score(sc, rank_weights(sc, history, weights))
        if fs > best_fs:
            best_idx, best_fs = i, fs
    return candidates[best_idx], best_fs, scores[best_idx]
