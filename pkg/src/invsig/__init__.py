"""Invariant signatures from group-averaged template projections."""
from .errors import *  # noqa: F401,F403
from .groups import (
    GroupSpec, PoolingWindow, SmoothWarp, act, box_window, cyclic1d, dihedral8, full_window,
    make_group, make_smooth_warp, orbit, rot4, rot_interp, scale_set, torus2d, warp, window_shift,
)
from .hw import (
    PoolingSpec, Signature, invariance_error, pool, signature, signature_distance,
    simple_responses, smooth_invariance_profile, stability_check,
)
from .hierarchy import (
    FeatureBank, FeatureMap, ForwardResult, LayerConfig, covariance_check, forward, layer_complex,
    layer_simple, make_feature_bank, parts_profile,
)
from .image import Image, dot, load_pgm, normalize, save_pgm
from .templates import (
    GaborParams, TemplateBank, localization_profile, localization_support, make_gabor_bank,
    make_patch_bank, make_random_bank,
)

__version__ = "0.1.0"
