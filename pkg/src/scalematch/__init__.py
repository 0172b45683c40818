"""scalematch: rewrite an instance-segmentation dataset so its object-size
distribution matches a target dataset's.

Instance-level methods separate each object, rescale it toward a size drawn
from (or mapped through) the target distribution, and recombine it over an
inpainted or swapped background.  Image-level baselines resize whole images
by a single factor.  Alignment is verified with KL/JS divergence on shared
histograms.
"""

from ._kernels import BACKEND
from .errors import (
    ConfigError,
    DegenerateWarp,
    EmptyDatasetError,
    EmptyMaskError,
    InpaintError,
    IntegrityError,
    ParseError,
    PipelineError,
    ScaleMatchError,
)
from .imageops import (
    Background,
    InpaintParams,
    Matte,
    MattingParams,
    background_fit_transform,
    composite,
    extract_matte,
    guided_filter,
    inpaint,
    prepare_new_background,
    warp_matte,
)
from .match import (
    AffineTransform,
    CdfMapSampler,
    HistogramSampler,
    IdentitySampler,
    MatchMethod,
    RngStream,
    compute_affine,
    image_level_scale_factor,
    msm_map_size,
    rsm_sample_target_size,
)
from .model import (
    ROLE_SOURCE,
    ROLE_TARGET,
    BBox,
    DatasetIndex,
    ImageRecord,
    InstanceRecord,
    decode_rle,
    encode_rle,
    index_to_json_dict,
    load_image,
    load_index,
    object_size,
    rasterize_mask,
    save_image,
    write_index,
)
from .pipeline import (
    PipelineConfig,
    TransformOutcome,
    TransformReport,
    TransformResult,
    psi_select_background,
    transform_dataset,
    transform_image_image_level,
    transform_image_instance_level,
)
from .stats import (
    LAYOUT_EQUAL_FREQUENCY,
    LAYOUT_EQUAL_WIDTH,
    DivergenceReport,
    EmpiricalCdf,
    ScaleHistogram,
    build_histogram,
    collect_sizes,
    compare_indices,
    compare_sizes,
    empirical_cdf,
    js_divergence,
    kl_divergence,
    pmf_on_bins,
    rectify_sizes,
)
from .svg import render_divergence_svg

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    # errors
    "ScaleMatchError",
    "ParseError",
    "IntegrityError",
    "ConfigError",
    "EmptyMaskError",
    "DegenerateWarp",
    "InpaintError",
    "EmptyDatasetError",
    "PipelineError",
    # data model
    "ROLE_SOURCE",
    "ROLE_TARGET",
    "BBox",
    "ImageRecord",
    "InstanceRecord",
    "DatasetIndex",
    "object_size",
    "load_index",
    "index_to_json_dict",
    "write_index",
    "load_image",
    "save_image",
    "decode_rle",
    "encode_rle",
    "rasterize_mask",
    # statistics
    "LAYOUT_EQUAL_WIDTH",
    "LAYOUT_EQUAL_FREQUENCY",
    "ScaleHistogram",
    "EmpiricalCdf",
    "DivergenceReport",
    "collect_sizes",
    "rectify_sizes",
    "build_histogram",
    "pmf_on_bins",
    "kl_divergence",
    "js_divergence",
    "empirical_cdf",
    "compare_sizes",
    "compare_indices",
    # matchers
    "MatchMethod",
    "AffineTransform",
    "RngStream",
    "rsm_sample_target_size",
    "msm_map_size",
    "compute_affine",
    "HistogramSampler",
    "CdfMapSampler",
    "IdentitySampler",
    "image_level_scale_factor",
    # image operations
    "MattingParams",
    "InpaintParams",
    "Matte",
    "Background",
    "extract_matte",
    "warp_matte",
    "guided_filter",
    "inpaint",
    "prepare_new_background",
    "background_fit_transform",
    "composite",
    # pipeline
    "PipelineConfig",
    "TransformOutcome",
    "TransformReport",
    "TransformResult",
    "psi_select_background",
    "transform_image_instance_level",
    "transform_image_image_level",
    "transform_dataset",
    # rendering
    "render_divergence_svg",
]
