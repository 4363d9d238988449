"""Double-precision attention and loss kernels with exact gradients."""

from tldet.nn.cbam import (
    CbamCache,
    CbamGrads,
    CbamParams,
    as_tensor4,
    cbam_backward,
    cbam_forward,
    cbam_grad_report,
    channel_attention,
    sigmoid,
    spatial_attention,
)
from tldet.nn.focal import (
    FocalBatch,
    FocalClampWarning,
    FocalParams,
    focal_loss,
    focal_loss_batch,
    focal_loss_grad,
)
from tldet.nn.gradcheck import GradReport, grad_check

__all__ = [
    "CbamCache",
    "CbamGrads",
    "CbamParams",
    "FocalBatch",
    "FocalClampWarning",
    "FocalParams",
    "GradReport",
    "as_tensor4",
    "cbam_backward",
    "cbam_forward",
    "cbam_grad_report",
    "channel_attention",
    "focal_loss",
    "focal_loss_batch",
    "focal_loss_grad",
    "grad_check",
    "sigmoid",
    "spatial_attention",
]
