"""Inference glue around a hierarchical segmentation model.

Runs a four-stage downsampling backbone with a UPerNet-style decoder,
captures the third-stage feature map through a forward hook and the raw
pre-softmax logits from the classifier head, and serializes both
channel-last as NPY v1.0 float32 for the scoring engine.
"""

from .inference import (
    CheckpointLoadError,
    ExtractorConfig,
    UnreadableImage,
    extract,
    load_model,
    make_checkpoint,
)
from .model import VARIANTS, SegModel, build_model

__version__ = "0.1.0"
