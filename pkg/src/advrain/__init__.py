"""Inconspicuous raindrop-blur adversarial perturbations for image
classifiers: rendering, saliency-guided random search, and evaluation."""

from .imagecore import ImageBuffer, load_image, resize_bilinear, sample_bilinear, save_image
from .metrics import EvalReport, evaluate, ssim
from .optimizer import (
    AttackResult,
    SearchConfig,
    critical_mask,
    evaluate_pattern,
    random_baseline,
    random_search,
    sample_candidate,
)
from .oracle import ClassScores, Heatmap, HttpOracle, OracleConfig, SyntheticOracle
from .render import (
    DropMask,
    GaussianKernel,
    Raindrop,
    RaindropPattern,
    blur_region,
    drop_footprint,
    fisheye_warp,
    gaussian_kernel,
    merge_collisions,
    render,
)

__version__ = "0.1.0"
