"""p2rkit: deterministic building blocks for point-supervised oriented
object detection — synthetic pattern overlays with known boxes, rotated
box geometry, transform-consistency losses with analytic gradients,
score-based label assignment, dataset tooling, and rotated-mAP
evaluation."""

from .geometry import (
    HBox,
    RBox,
    TransformSpec,
    hbox_giou,
    normalize_angle,
    raster_iou_oracle,
    rbox_to_hbox,
    rotated_iou,
    rotated_nms,
    transform_rbox,
)
from .losses import (
    BranchPrediction,
    LossWeights,
    grad_check,
    loss_box,
    loss_flip,
    loss_point,
    loss_rotate,
    loss_scale,
    loss_ss,
    smooth_l1,
    total_loss,
)
from .assignment import AnchorGrid, AssignResult, AssignTarget, assign, matching_score
from .synthesis import (
    BasicPattern,
    ColorSample,
    CurveSpec,
    PlacedPattern,
    SynthesisConfig,
    alpha_mask,
    generate_setrc_library,
    load_sketch_library,
    random_resize,
    recolor,
    sample_colors,
    synthesize,
)
from .transforms import (
    FitProblem,
    FitResult,
    apply_transform,
    fit_demo,
    make_demo_problem,
    sample_transform,
)
from .dataset import (
    GtRecord,
    PointAnnotation,
    derive_points,
    merge_detections,
    parse_dota,
    split_image,
)
from .evaluation import DetectionRecord, EvalResult, GtBox, evaluate_map

__version__ = "0.1.0"
