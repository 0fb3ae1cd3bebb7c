"""Per-frame tracking loop: match, vote, localize, fuse, select, control/update."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .bdm import BdmGrid, compute_lbsp, update_bdm
from .fusion import (
    Candidate,
    FusionWeights,
    ScoreHistory,
    SimilarityScores,
    generate_candidates,
    score_candidate,
    select_best,
)
from .grm import (
    GraphRelationalModel,
    KernelConfig,
    NoCenterError,
    accumulate_responses,
    add_keypoints,
    build_grm,
    localize_center,
    update_weights,
)
from .icm import IcmHistogram, build_icm, update_icm
from .imaging import BoundingBox, Image, WeightMask, crop_resize, gaussian_weight_mask, to_grayscale
from .keypoints import DetectorConfig, Keypoint, detect_and_describe, estimate_scale, match_descriptors


class TrackerError(Exception):
    """Raised when tracking cannot start (e.g. a textureless init region)."""


@dataclass
class TrackerConfig:
    eta: float = 0.005
    tau: float = 0.9
    gamma: float = 0.1
    alpha: float = 0.23
    beta: float = 0.1
    p: float = 0.15
    q: float = 0.10
    r: float = 0.10
    ratio: float = 0.75
    sigma: float = 6.0
    window: int = 5
    theta_denom: float = 8000.0
    rho_icm: float = 0.125
    rho_bdm: float = 0.10
    bins: int = 16
    lbsp_T: int = 30
    max_nodes: int = 400
    candidate_offset_frac: float = 0.15
    unmatched_decay: float = 0.9
    max_keypoints: int = 500
    icm_sigma_frac: float = 0.5
    dims_tolerance: int = 2
    use_all_detections: bool = False
    disable_detector: bool = False
    disable_candidates: bool = False
    disable_template_updates: bool = False
    disable_grm_add_delete: bool = False

    def __post_init__(self) -> None:
        for name in ("tau", "gamma", "alpha", "beta", "ratio"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise TrackerError(f"config {name} must be in (0, 1), got {v}")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                continue
            if v <= 0 and f.name != "dims_tolerance":
                raise TrackerError(f"config {f.name} must be positive, got {v}")


@dataclass
class TrackerState:
    box: BoundingBox
    prev_center: tuple[float, float]
    scale: float
    occluded: bool
    grm: GraphRelationalModel
    icm: IcmHistogram
    bdm: BdmGrid
    score_history: ScoreHistory
    frame_index: int
    base_dims: tuple[float, float]  # init box dims; candidate grid dims = scale * base_dims
    cfg: TrackerConfig
    mask: WeightMask


@dataclass
class TrackResult:
    frame_index: int
    box: BoundingBox
    fusion_score: float
    occluded: bool
    n_matches: int
    scores: SimilarityScores
    origin: str  # "init", "grm_grid", "detector", or "frozen"


def init(frame: Image, init_box: BoundingBox, cfg: TrackerConfig | None = None) -> TrackerState:
    """Build all three appearance models from the initialization box."""
    cfg = cfg or TrackerConfig()
    if not init_box.intersects_frame(frame.width, frame.height):
        raise TrackerError("initialization box lies outside the frame")
    gray = to_grayscale(frame)
    kps = detect_and_describe(gray, DetectorConfig(max_keypoints=cfg.max_keypoints))
    inside = [kp for kp in kps if init_box.contains(kp.x, kp.y)]
    if not inside:
        raise TrackerError("no keypoints detected inside the initialization box")
    mask = gaussian_weight_mask(32, 32, cfg.icm_sigma_frac)
    return TrackerState(
        box=init_box,
        prev_center=init_box.center,
        scale=1.0,
        occluded=False,
        grm=build_grm(inside, init_box, cfg.eta),
        icm=build_icm(frame, init_box, cfg.bins, mask),
        bdm=compute_lbsp(crop_resize(gray, init_box, 32, 32), cfg.lbsp_T),
        score_history=None,
        frame_index=1,
        base_dims=(init_box.w, init_box.h),
        cfg=cfg,
        mask=mask,
    )


def step(
    state: TrackerState, frame: Image, detections: list[BoundingBox] | None = None
) -> tuple[TrackerState, TrackResult]:
    """Advance the tracker by one frame.

    Matches frame keypoints against the graph model, votes for the center,
    fuses candidate scores, and runs the control/update pass. When nothing
    matches and no detection is available the face location is not
    updated: the box, templates, and score history are carried over
    unchanged (graph weights still decay), until appearance matching can
    be established again.
    """
    cfg = state.cfg
    frame_index = state.frame_index + 1
    gray = to_grayscale(frame)
    kps = detect_and_describe(gray, DetectorConfig(max_keypoints=cfg.max_keypoints))

    matches = match_descriptors(kps, state.grm.descriptors(), cfg.ratio)
    n_matches = len(matches)

    scale = state.scale
    if n_matches >= 2:
        refs = np.array([state.grm.nodes[m.model_index].ref_position for m in matches])
        scale = state.scale * estimate_scale(matches, refs * state.scale)

    occluded = n_matches == 0
    if n_matches >= 1:
        resp = accumulate_responses(
            matches,
            state.grm,
            state.prev_center,
            scale,
            KernelConfig(sigma=cfg.sigma, window=cfg.window, theta=cfg.theta_denom),
            frame_dims=(frame.width, frame.height),
        )
        try:
            cx, cy = localize_center(resp, state.prev_center)
            center = (float(cx), float(cy))
        except NoCenterError:
            center = state.prev_center
    else:
        center = state.prev_center

    det_boxes: list[BoundingBox] = []
    if detections and not cfg.disable_detector:
        det_boxes = list(detections) if cfg.use_all_detections else [detections[0]]

    # Graph weights adapt every frame; removal is skipped in ablation mode.
    gamma = 0.0 if cfg.disable_grm_add_delete else cfg.gamma
    new_grm = update_weights(
        state.grm,
        matches,
        center,
        scale,
        tau=cfg.tau,
        eta=cfg.eta,
        gamma=gamma,
        unmatched_decay=cfg.unmatched_decay,
    )

    if n_matches == 0 and not det_boxes:
        # Appearance matching cannot be established: freeze the location
        # and the short-term templates until it resumes.
        new_state = replace(state, grm=new_grm, scale=scale, occluded=True, frame_index=frame_index)
        result = TrackResult(
            frame_index=frame_index,
            box=state.box,
            fusion_score=0.0,
            occluded=True,
            n_matches=0,
            scores=SimilarityScores(0.0, 0.0, 0.0),
            origin="frozen",
        )
        return new_state, result

    candidates = generate_candidates(
        center,
        state.base_dims,
        scale,
        detector_box=det_boxes[0] if det_boxes else None,
        frame_dims=(frame.width, frame.height),
        offset_frac=cfg.candidate_offset_frac,
        grid=not cfg.disable_candidates,
    )
    for extra in det_boxes[1:]:
        if extra.intersects_frame(frame.width, frame.height):
            candidates.append(Candidate(box=extra, origin="detector"))

    cand_scores = [
        score_candidate(c, frame, gray, matches, n_matches, state.icm, state.bdm, state.mask)
        for c in candidates
    ]
    weights = FusionWeights(p=cfg.p, q=cfg.q, r=cfg.r)
    best, best_fs, best_scores = select_best(candidates, cand_scores, state.score_history, weights)

    new_icm, new_bdm = state.icm, state.bdm
    if n_matches == 0:
        dims_differ = (
            abs(state.icm.template_dims[0] - round(best.box.w)) > cfg.dims_tolerance
            or abs(state.icm.template_dims[1] - round(best.box.h)) > cfg.dims_tolerance
        )
        mode = "partial" if dims_differ else "full"
        if not cfg.disable_template_updates:
            new_icm = update_icm(
                state.icm, build_icm(frame, best.box, cfg.bins, state.mask), mode, cfg.rho_icm
            )
            fresh_bdm = compute_lbsp(crop_resize(gray, best.box, 32, 32), cfg.lbsp_T)
            new_bdm = update_bdm(state.bdm, fresh_bdm, mode, cfg.rho_bdm)

    if best_scores.k > cfg.alpha and best_scores.b > cfg.beta:
        if not cfg.disable_grm_add_delete:
            in_best = [kp for kp in kps if best.box.contains(kp.x, kp.y)]
            new_grm = add_keypoints(
                new_grm, in_best, best.box, scale, cfg.eta, cfg.max_nodes
            )
        if not cfg.disable_template_updates:
            new_icm = build_icm(frame, best.box, cfg.bins, state.mask)
            new_bdm = update_bdm(
                state.bdm, compute_lbsp(crop_resize(gray, best.box, 32, 32), cfg.lbsp_T), "full"
            )

    new_state = replace(
        state,
        box=best.box,
        prev_center=best.box.center,
        scale=scale,
        occluded=occluded,
        grm=new_grm,
        icm=new_icm,
        bdm=new_bdm,
        score_history=best_scores,
        frame_index=frame_index,
    )
    result = TrackResult(
        frame_index=frame_index,
        box=best.box,
        fusion_score=best_fs,
        occluded=occluded,
        n_matches=n_matches,
        scores=best_scores,
        origin=best.origin,
    )
    return new_state, result
