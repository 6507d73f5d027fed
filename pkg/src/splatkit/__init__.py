"""splatkit: depth-weighted softmax pixel splatting, aligned training-pair
synthesis, sparse-view/stereo view composition, and pixel-level metrics."""

from .errors import (
    DegenerateInputError,
    ParameterError,
    ParseError,
    ShapeError,
    SplatkitError,
    ValidationError,
)
from .geometry import (
    CameraFrame,
    FlowField,
    disparity_to_flow,
    flow_from_depth,
    reproject_point,
)
from .imaging import as_image, as_mask, blend, gaussian_blur, sobel_magnitude
from .metrics import MetricReport, diff_map, psnr, report, ssim
from .refine import Refiner, fill_pushpull
from .splatting import (
    DEFAULT_BETA,
    DEFAULT_TAU,
    SplatResult,
    importance_from_depth,
    importance_from_disparity,
    softmax_splat,
    splat_ones_mask,
    splat_oracle,
)
from .storage import (
    EvalPairSpec,
    TrajectoryFile,
    load_trajectory,
    make_eval_pairs,
    parse_trajectory,
    read_flo,
    read_image,
    read_pfm,
    read_png,
    write_flo,
    write_image,
    write_pfm,
    write_png,
)
from .trainpair import (
    SesParams,
    TrainingPair,
    compose_sparse,
    degrade_texture,
    edge_mask_from_flow,
    gen_error_mask,
    ses_inject,
    ses_pair,
    splat_edges,
    tpa_pair,
)

__version__ = "0.1.0"
