"""Classification with spatial depth and localized spatial depth features."""

__version__ = "0.1.0"

from .dataset import LabeledDataset
from .depth import (
    DepthFeatures,
    DepthGeometry,
    HdlssParams,
    KernelSpec,
    depth_features,
    depth_features_loo,
    hdlss_lspd_limits,
    hdlss_spd_limits,
    lspd,
    sign_vector,
    spd,
)
from .gam import GamModel, build_basis, classify, fit_gam, predict_posterior
from .multiscale import (
    MultiscaleConfig,
    MultiscaleModel,
    classify_multiscale,
    compute_weights,
    cv_risk,
    fit_multiscale,
    fit_single_scale,
    fit_spd,
    sample_bandwidths,
)
from .numerics import ScatterMode, Whitener, estimate_scatter, whiten
