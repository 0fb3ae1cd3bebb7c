"""Face tracking with multiple appearance models and a graph of center-offset keypoints."""

from .bdm import BdmGrid, binary_score, compute_lbsp, update_bdm
from .bench import (
    EvalCurves,
    SequenceSpec,
    SynthSpec,
    evaluate,
    iou,
    load_detections,
    load_sequence,
    synth_sequence,
    write_results,
)
from .fusion import Candidate, FusionWeights, SimilarityScores
from .grm import (
    GraphRelationalModel,
    KernelResponseMap,
    accumulate_responses,
    build_grm,
    isotropic_weight,
    localize_center,
)
from .icm import IcmHistogram, build_icm, color_score, update_icm
from .imaging import BoundingBox, Image, WeightMask, crop_resize, gaussian_weight_mask, load_image, to_grayscale
from .keypoints import Keypoint, Match, detect_and_describe, estimate_scale, load_keypoints, match_descriptors
from .tracker import TrackerConfig, TrackerState, TrackResult, init, step

__version__ = "0.1.0"
