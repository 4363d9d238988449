"""Toolkit for transmission-line detector components: IoU-based anchor
clustering, CBAM attention with exact gradients, focal loss, bbox-aware
augmentation and mAP evaluation."""

from tldet.backends import ACTIVE_BACKEND

__version__ = "0.1.0"
__all__ = ["ACTIVE_BACKEND", "__version__"]
