"""Graph relational model: center-offset nodes, kernel-map voting, weight dynamics.

Each node stores an offset from the tracked box center (at reference
scale), its descriptor, and an importance weight. Matched nodes vote for
the current center in a frame-sized response map; the peak is the
localized center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .imaging import BoundingBox
from .keypoints import Keypoint, Match


class GrmError(Exception):
    """Raised when the model cannot be built or no center can be localized."""


class NoCenterError(GrmError):
    """Signals an all-zero response map; callers fall back to the occlusion path."""


@dataclass
class GraphNode:
    fdl: np.ndarray  # (dx, dy) offset to the box center, reference scale
    descriptor: np.ndarray
    weight: float
    ref_position: np.ndarray  # keypoint position at insertion, reference scale


@dataclass
class GraphRelationalModel:
    nodes: list[GraphNode] = field(default_factory=list)
    ref_scale: float = 1.0

    def descriptors(self) -> list[np.ndarray]:
        return [n.descriptor for n in self.nodes]


@dataclass
class KernelResponseMap:
    width: int
    height: int
    values: np.ndarray  # (height, width), non-negative

    def is_zero(self) -> bool:
        return not np.any(self.values)


@dataclass
class KernelConfig:
    sigma: float = 6.0
    window: int = 5
    theta: float = 8000.0


def isotropic_weight(fdl: np.ndarray, eta: float) -> float:
    """Importance of a node from its center distance: max(1 - eta*|fdl|, 0.5)."""
    if eta <= 0:
        raise GrmError(f"eta must be positive, got {eta}")
    return max(1.0 - eta * float(np.linalg.norm(fdl)), 0.5)


def build_grm(kps: list[Keypoint], box: BoundingBox, eta: float = 0.005) -> GraphRelationalModel:
    """One node per keypoint, offset-to-center stored at reference scale 1."""
    if not kps:
        raise GrmError("cannot build a graph model from an empty keypoint list")
    cx, cy = box.center
    nodes = []
    for kp in kps:
        fdl = np.array([cx - kp.x, cy - kp.y])
        nodes.append(
            GraphNode(
                fdl=fdl,
                descriptor=kp.descriptor,
                weight=isotropic_weight(fdl, eta),
                ref_position=np.array([kp.x, kp.y]),
            )
        )
    return GraphRelationalModel(nodes=nodes, ref_scale=1.0)


def predict_center(node: GraphNode, matched_pos: tuple[float, float], scale: float) -> tuple[float, float]:
    """Center predicted by a matched node: position + scale * stored offset."""
    return (matched_pos[0] + scale * float(node.fdl[0]), matched_pos[1] + scale * float(node.fdl[1]))


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def accumulate_responses(
    matches: list[Match],
    grm: GraphRelationalModel,
    prev_center: tuple[float, float],
    scale: float,
    cfg: KernelConfig | None = None,
    frame_dims: tuple[int, int] | None = None,
) -> KernelResponseMap:
    """Stamp one weighted Gaussian vote per match into a frame-sized map.

    Each matched node predicts a center; a window-by-window Gaussian patch
    (peak 1 at the rounded center) is scaled by the node weight and by an
    exponential proximity factor exp(-|c - prev_center| / theta), then
    added into the map. Votes whose rounded center falls outside the frame
    are skipped. Accumulation follows match-list order.
    """
    cfg = cfg or KernelConfig()
    if frame_dims is None:
        raise GrmError("frame_dims (width, height) is required")
    width, height = frame_dims
    values = np.zeros((height, width))
    half = cfg.window // 2
    offs = np.arange(-half, half + 1)
    stamp = np.exp(-(offs[:, None] ** 2 + offs[None, :] ** 2) / (2.0 * cfg.sigma**2))

    for m in matches:
        node = grm.nodes[m.model_index]
        cx, cy = predict_center(node, (m.frame_keypoint.x, m.frame_keypoint.y), scale)
        rx, ry = _round_half_up(cx), _round_half_up(cy)
        if not (0 <= rx < width and 0 <= ry < height):
            continue
        prox = math.exp(-math.hypot(cx - prev_center[0], cy - prev_center[1]) / cfg.theta)
        y0, y1 = max(0, ry - half), min(height, ry + half + 1)
        x0, x1 = max(0, rx - half), min(width, rx + half + 1)
        values[y0:y1, x0:x1] += (
            stamp[y0 - ry + half : y1 - ry + half, x0 - rx + half : x1 - rx + half]
            * prox
            * node.weight
        )
    return KernelResponseMap(width=width, height=height, values=values)


def localize_center(resp: KernelResponseMap, prev_center: tuple[float, float]) -> tuple[int, int]:
    """Cell with the maximum accumulated response.

    Exact-value ties are broken by least distance to prev_center, then by
    least row-major index, so localization is deterministic.
    """
    if resp.is_zero():
        raise NoCenterError("response map is all-zero")
    peak = resp.values.max()
    ys, xs = np.nonzero(resp.values == peak)
    best = min(
        range(len(ys)),
        key=lambda i: (
            (xs[i] - prev_center[0]) ** 2 + (ys[i] - prev_center[1]) ** 2,
            ys[i] * resp.width + xs[i],
        ),
    )
    return (int(xs[best]), int(ys[best]))


def prediction_quality(distance: float, eta: float) -> float:
    """Closeness score of a center prediction: max(1 - eta*l, 0), non-increasing in l."""
    return max(1.0 - eta * distance, 0.0)


def update_weights(
    grm: GraphRelationalModel,
    matches: list[Match],
    center: tuple[float, float],
    scale: float,
    tau: float = 0.9,
    eta: float = 0.005,
    gamma: float = 0.1,
    unmatched_decay: float | None = None,
) -> GraphRelationalModel:
    """Long-term weight adaptation followed by low-weight node removal.

    A matched node blends toward the quality of its center prediction:
    w <- (1-tau)*w + tau*max(1 - eta*l, 0) with l the distance between its
    predicted center and the localized one. An unmatched node decays by
    (1 - unmatched_decay); unmatched_decay defaults to tau. Nodes ending
    below gamma are dropped.
    """
    if unmatched_decay is None:
        unmatched_decay = tau
    matched = {m.model_index: m for m in matches}
    survivors = []
    for idx, node in enumerate(grm.nodes):
        if idx in matched:
            m = matched[idx]
            pred = predict_center(node, (m.frame_keypoint.x, m.frame_keypoint.y), scale)
            l = math.hypot(pred[0] - center[0], pred[1] - center[1])
            w = (1.0 - tau) * node.weight + tau * prediction_quality(l, eta)
        else:
            w = (1.0 - unmatched_decay) * node.weight
        if w >= gamma:
            survivors.append(GraphNode(node.fdl, node.descriptor, w, node.ref_position))
    return GraphRelationalModel(nodes=survivors, ref_scale=grm.ref_scale)


def add_keypoints(
    grm: GraphRelationalModel,
    kps: list[Keypoint],
    box: BoundingBox,
    scale: float = 1.0,
    eta: float = 0.005,
    max_nodes: int = 400,
) -> GraphRelationalModel:
    """Insert fresh nodes, storing offsets and positions at reference scale.

    Duplicates are retained. When the cap is exceeded the lowest-weight
    nodes are evicted first (stable on ties).
    """
    cx, cy = box.center
    nodes = list(grm.nodes)
    for kp in kps:
        fdl = np.array([(cx - kp.x) / scale, (cy - kp.y) / scale])
        nodes.append(
            GraphNode(
                fdl=fdl,
                descriptor=kp.descriptor,
                weight=isotropic_weight(fdl, eta),
                ref_position=np.array([kp.x / scale, kp.y / scale]),
            )
        )
    if len(nodes) > max_nodes:
        order = sorted(range(len(nodes)), key=lambda i: nodes[i].weight)
        drop = set(order[: len(nodes) - max_nodes])
        nodes = [n for i, n in enumerate(nodes) if i not in drop]
    return GraphRelationalModel(nodes=nodes, ref_scale=grm.ref_scale)
