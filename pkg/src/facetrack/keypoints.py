"""Scale-covariant keypoint detection, description, matching, and scale estimation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .imaging import Image

DESCRIPTOR_SIZE = 128  # 4x4 spatial cells x 8 orientation bins


class KeypointError(Exception):
    """Raised for undersized images and malformed keypoint files."""


@dataclass
class Keypoint:
    x: float
    y: float
    scale: float
    descriptor: np.ndarray  # unit L2 norm
    response: float = 0.0


@dataclass
class Match:
    """One accepted model-to-frame descriptor correspondence."""

    model_index: int
    frame_keypoint: Keypoint
    distance: float


@dataclass
class DetectorConfig:
    max_keypoints: int = 500
    num_octaves: int = 3
    num_intervals: int = 3
    base_sigma: float = 1.6
    contrast_threshold: float = 0.01
    edge_ratio: float = 10.0


def _build_pyramid(gray: np.ndarray, cfg: DetectorConfig) -> list[list[np.ndarray]]:
    """Gaussian pyramid: per octave, num_intervals + 3 progressively blurred images."""
    k = 2.0 ** (1.0 / cfg.num_intervals)
    n_images = cfg.num_intervals + 3
    octaves = []
    base = gaussian_filter(gray, cfg.base_sigma, mode="nearest")
    for _ in range(cfg.num_octaves):
        if min(base.shape) < 16:
            break
        images = [base]
        for i in range(1, n_images):
            # incremental blur from the previous level up to sigma0 * k^i
            prev_s = cfg.base_sigma * k ** (i - 1)
            next_s = cfg.base_sigma * k**i
            delta = np.sqrt(next_s * next_s - prev_s * prev_s)
            images.append(gaussian_filter(images[-1], delta, mode="nearest"))
        octaves.append(images)
        base = images[cfg.num_intervals][::2, ::2]
    return octaves


def _local_extrema(dog: np.ndarray, prev: np.ndarray, nxt: np.ndarray, thr: float) -> np.ndarray:
    """Rows (y, x) of interior cells exceeding all 26 scale-space neighbors."""
    c = dog[1:-1, 1:-1]
    strong = np.abs(c) > thr
    if not strong.any():
        return np.empty((0, 2), dtype=np.intp)
    is_max = strong & (c > 0)
    is_min = strong & (c < 0)
    for layer in (dog, prev, nxt):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if layer is dog and dy == 0 and dx == 0:
                    continue
                nb = layer[1 + dy : layer.shape[0] - 1 + dy, 1 + dx : layer.shape[1] - 1 + dx]
                is_max &= c > nb
                is_min &= c < nb
                if not (is_max.any() or is_min.any()):
                    return np.empty((0, 2), dtype=np.intp)
    ys, xs = np.nonzero(is_max | is_min)
    return np.stack([ys + 1, xs + 1], axis=1)


def _edge_like(dog: np.ndarray, ys: np.ndarray, xs: np.ndarray, ratio: float) -> np.ndarray:
    """True where the 2x2 Hessian flags an edge-dominated response."""
    dxx = dog[ys, xs + 1] + dog[ys, xs - 1] - 2 * dog[ys, xs]
    dyy = dog[ys + 1, xs] + dog[ys - 1, xs] - 2 * dog[ys, xs]
    dxy = 0.25 * (dog[ys + 1, xs + 1] - dog[ys + 1, xs - 1] - dog[ys - 1, xs + 1] + dog[ys - 1, xs - 1])
    tr = dxx + dyy
    det = dxx * dyy - dxy * dxy
    lim = (ratio + 1.0) ** 2 / ratio
    return (det <= 0) | (tr * tr >= lim * det)


def _subpixel_offset(dog: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis quadratic interpolation of the extremum, clamped to +-0.5."""

    def axis_offset(minus: np.ndarray, center: np.ndarray, plus: np.ndarray) -> np.ndarray:
        denom = minus - 2 * center + plus
        off = np.where(np.abs(denom) > 1e-12, 0.5 * (minus - plus) / np.where(denom == 0, 1, denom), 0.0)
        return np.clip(off, -0.5, 0.5)

    ox = axis_offset(dog[ys, xs - 1], dog[ys, xs], dog[ys, xs + 1])
    oy = axis_offset(dog[ys - 1, xs], dog[ys, xs], dog[ys + 1, xs])
    return ox, oy


def _sample_bilinear(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h, w = img.shape
    xs = np.clip(xs, 0, w - 1)
    ys = np.clip(ys, 0, h - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _describe(gx: np.ndarray, gy: np.ndarray, xs: np.ndarray, ys: np.ndarray, spacings: np.ndarray) -> np.ndarray:
    """4x4x8 gradient-orientation histograms on a 16x16 sample grid per keypoint.

    Gradients are sampled bilinearly around each keypoint with spacing
    proportional to its scale; no dominant-orientation normalization.
    """
    n = len(xs)
    grid = np.arange(16) - 7.5  # sample offsets in units of spacing
    shape = (n, 16, 16)
    sx = np.broadcast_to(
        xs[:, None, None] + grid[None, None, :] * spacings[:, None, None], shape
    )
    sy = np.broadcast_to(
        ys[:, None, None] + grid[None, :, None] * spacings[:, None, None], shape
    )
    sgx = _sample_bilinear(gx, sx.ravel(), sy.ravel()).reshape(shape)
    sgy = _sample_bilinear(gy, sx.ravel(), sy.ravel()).reshape(shape)
    mag = np.hypot(sgx, sgy)
    ang = np.arctan2(sgy, sgx) % (2 * np.pi)
    obin = np.minimum((ang / (2 * np.pi) * 8).astype(np.intp), 7)

    rr = np.hypot(grid[None, :, None], grid[None, None, :])
    spatial_w = np.exp(-(rr**2) / (2 * 8.0**2))
    wmag = mag * spatial_w

    cell_y = (np.arange(16) // 4)[None, :, None]
    cell_x = (np.arange(16) // 4)[None, None, :]
    flat_bin = ((cell_y * 4 + cell_x) * 8 + obin).reshape(n, -1)

    desc = np.zeros((n, DESCRIPTOR_SIZE))
    rows = np.repeat(np.arange(n), 256)
    np.add.at(desc, (rows, flat_bin.ravel()), wmag.reshape(n, -1).ravel())

    norms = np.linalg.norm(desc, axis=1, keepdims=True)
    desc = np.divide(desc, norms, out=np.zeros_like(desc), where=norms > 1e-12)
    desc = np.minimum(desc, 0.2)
    norms = np.linalg.norm(desc, axis=1, keepdims=True)
    desc = np.divide(desc, norms, out=np.zeros_like(desc), where=norms > 1e-12)
    return desc


def detect_and_describe(gray: Image, cfg: DetectorConfig | None = None) -> list[Keypoint]:
    """Difference-of-Gaussians extrema with 128-dim orientation-histogram descriptors.

    Output is sorted by detection response (descending, position as the
    tie-break) and capped at cfg.max_keypoints; identical input yields
    identical output.
    """
    cfg = cfg or DetectorConfig()
    if gray.channels != 1:
        raise KeypointError("detector expects a 1-channel image")
    if min(gray.width, gray.height) < 16:
        raise KeypointError(f"image too small for detection: {gray.width}x{gray.height}")

    img = gray.data[:, :, 0].astype(np.float64) / 255.0
    pyramid = _build_pyramid(img, cfg)
    k = 2.0 ** (1.0 / cfg.num_intervals)

    found: list[tuple[float, float, float, float, np.ndarray]] = []
    for octave_idx, images in enumerate(pyramid):
        dogs = [b - a for a, b in zip(images[:-1], images[1:])]
        step = float(2**octave_idx)
        grads = {}
        for s in range(1, cfg.num_intervals + 1):
            cells = _local_extrema(dogs[s], dogs[s - 1], dogs[s + 1], cfg.contrast_threshold)
            if len(cells) == 0:
                continue
            ys, xs = cells[:, 0], cells[:, 1]
            keep = ~_edge_like(dogs[s], ys, xs, cfg.edge_ratio)
            ys, xs = ys[keep], xs[keep]
            if len(ys) == 0:
                continue
            ox, oy = _subpixel_offset(dogs[s], ys, xs)
            if s not in grads:
                gy, gx = np.gradient(images[s])
                grads[s] = (gx, gy)
            gx, gy = grads[s]
            sigma = cfg.base_sigma * k**s
            spacings = np.full(len(ys), 0.75 * sigma)
            descs = _describe(gx, gy, xs + ox, ys + oy, spacings)
            resp = np.abs(dogs[s][ys, xs])
            valid = np.linalg.norm(descs, axis=1) > 0.5
            for i in np.nonzero(valid)[0]:
                found.append(
                    (
                        float(resp[i]),
                        (xs[i] + ox[i]) * step,
                        (ys[i] + oy[i]) * step,
                        sigma * step,
                        descs[i],
                    )
                )

    found.sort(key=lambda t: (-t[0], t[2], t[1], t[3]))
    return [
        Keypoint(x=x, y=y, scale=s, descriptor=d, response=r)
        for r, x, y, s, d in found[: cfg.max_keypoints]
    ]


def load_keypoints(path: str) -> dict[int, list[Keypoint]]:
    """Parse a keypoint CSV (`frame,x,y,scale,d0,...`) into per-frame lists.

    Frames are 1-based in the file. Descriptor arity is fixed by the first
    data row; descriptors are renormalized to unit length on load.
    """
    frames: dict[int, list[Keypoint]] = {}
    arity = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) < 5:
                raise KeypointError(f"{path}:{lineno}: expected frame,x,y,scale,d0,... row")
            try:
                frame = int(parts[0])
                x, y, scale = (float(v) for v in parts[1:4])
                desc = np.array([float(v) for v in parts[4:]])
            except ValueError as exc:
                raise KeypointError(f"{path}:{lineno}: unparsable value ({exc})") from exc
            if arity is None:
                arity = len(desc)
            elif len(desc) != arity:
                raise KeypointError(
                    f"{path}:{lineno}: descriptor arity {len(desc)} differs from {arity}"
                )
            norm = np.linalg.norm(desc)
            if norm <= 1e-12:
                raise KeypointError(f"{path}:{lineno}: zero descriptor")
            frames.setdefault(frame, []).append(
                Keypoint(x=x, y=y, scale=scale, descriptor=desc / norm)
            )
    return frames


def match_descriptors(
    frame_kps: list[Keypoint], model_descs: list[np.ndarray], ratio: float = 0.75
) -> list[Match]:
    """Ratio-tested nearest-neighbor matching, one-to-one on both sides.

    For each model descriptor the nearest and second-nearest frame
    descriptors are found by L2 distance; the pair is kept iff
    nearest < ratio * second-nearest (a lone frame keypoint always passes).
    Frame-keypoint collisions are resolved greedily by ascending distance,
    yielding a bijection between model indices and frame keypoints.
    """
    if not frame_kps or not len(model_descs):
        return []
    fd = np.stack([kp.descriptor for kp in frame_kps])
    md = np.stack(model_descs)
    d2 = np.maximum(
        (md * md).sum(axis=1)[:, None] + (fd * fd).sum(axis=1)[None, :] - 2.0 * (md @ fd.T),
        0.0,
    )
    dist = np.sqrt(d2)

    candidates = []
    for mi in range(len(md)):
        row = dist[mi]
        order = np.argsort(row, kind="stable")
        best = order[0]
        if len(order) > 1:
            if not row[best] < ratio * row[order[1]]:
                continue
        candidates.append((float(row[best]), mi, int(best)))

    candidates.sort(key=lambda t: (t[0], t[1], t[2]))
    used_frame: set[int] = set()
    matches = []
    for d, mi, fi in candidates:
        if fi in used_frame:
            continue
        used_frame.add(fi)
        matches.append(Match(model_index=mi, frame_keypoint=frame_kps[fi], distance=d))
    matches.sort(key=lambda m: m.model_index)
    return matches


def estimate_scale(matches: list[Match], reference_positions: np.ndarray) -> float:
    """Median ratio of current to reference pairwise keypoint distances.

    reference_positions[i] is the stored position for matches[i]'s model
    node, expressed in the same units the ratio should be measured against
    (callers pass reference-scale positions multiplied by the current
    cumulative scale to obtain a relative per-frame factor). Pairs whose
    reference distance is under 1 px are skipped; fewer than 2 usable
    matches yields 1.0.
    """
    if len(matches) < 2:
        return 1.0
    cur = np.array([[m.frame_keypoint.x, m.frame_keypoint.y] for m in matches])
    ref = np.asarray(reference_positions, dtype=np.float64)
    ratios = []
    for i in range(len(matches)):
        for j in range(i + 1, len(matches)):
            ref_d = float(np.hypot(*(ref[i] - ref[j])))
            if ref_d < 1.0:
                continue
            cur_d = float(np.hypot(*(cur[i] - cur[j])))
            ratios.append(cur_d / ref_d)
    if not ratios:
        return 1.0
    return float(np.median(ratios))
