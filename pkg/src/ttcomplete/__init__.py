"""Low-rank tensor-train completion with element-wise weighted factorization.

The package augments an image-like tensor to a higher order (ket
augmentation, overlapping ket augmentation or a plain reshape), completes it
by block coordinate descent over the tensor-train mode matrices, and maps
the estimate back.
"""

from .augment import (AugmentationPlan, ReshapePlan, apply_ka, apply_oka, invert_ka, invert_oka,
                      make_plan, plan_ka, plan_oka)
from .completion import (CompletionConfig, CompletionResult, aggregate_fold, balance_weights,
                         complete_pipeline, run_pipeline, tmac_tt, twmac_tt)
from .errors import DegenerateWeights, InvalidArgument, MalformedInput, TTCError, UnsupportedShape
from .metrics import MetricsReport, SyntheticSpec, gen_synthetic, psnr, rse, ssim
from .tensor import ModeMatrix, fold_matricize, matricize, sample_mask
from .wlrf import ridge_wls, update_u, update_v, update_weights

__version__ = "0.1.0"

__all__ = [
    "AugmentationPlan", "ReshapePlan", "apply_ka", "apply_oka", "invert_ka", "invert_oka",
    "make_plan", "plan_ka", "plan_oka",
    "CompletionConfig", "CompletionResult", "aggregate_fold", "balance_weights",
    "complete_pipeline", "run_pipeline", "tmac_tt", "twmac_tt",
    "DegenerateWeights", "InvalidArgument", "MalformedInput", "TTCError", "UnsupportedShape",
    "MetricsReport", "SyntheticSpec", "gen_synthetic", "psnr", "rse", "ssim",
    "ModeMatrix", "fold_matricize", "matricize", "sample_mask",
    "ridge_wls", "update_u", "update_v", "update_weights",
]
