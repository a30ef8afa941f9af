"""Training-free out-of-distribution segmentation.

Consumes pre-extracted backbone feature maps and decoder logits, clusters
the features per image, flags clusters dominated by low max-logit
confidence, and evaluates the resulting anomaly scores with pixel-level
AP and FPR@95.
"""

from .confidence import ConfidenceMap, Tau, below_threshold, max_logits
from .errors import OodsegError
from .kmeans import ClusterAssignment, ClusterModel, assign, fit
from .metrics import (
    EvalAccumulator,
    EvalReport,
    average_precision,
    evaluate_dataset,
    fpr_at_tpr,
)
from .ood_classifier import (
    ClusterStats,
    OodResult,
    RatioThreshold,
    apply_ratio_threshold,
    cluster_stats,
    score_and_mask,
)
from .pipeline import (
    PROFILES,
    PipelineConfig,
    SweepGrid,
    run_baseline,
    run_dataset,
    run_sample,
    sweep,
)
from .tensor_io import (
    FeatureMap,
    GroundTruthMask,
    LogitMap,
    load_features,
    load_logits,
    load_mask,
    load_tensor,
    save_mask,
    save_tensor,
)
from .upsample import UpsampledAssignment, upsample_labels

__version__ = "0.1.0"

__all__ = [
    "ConfidenceMap", "Tau", "below_threshold", "max_logits",
    "OodsegError",
    "ClusterAssignment", "ClusterModel", "assign", "fit",
    "EvalAccumulator", "EvalReport", "average_precision", "evaluate_dataset", "fpr_at_tpr",
    "ClusterStats", "OodResult", "RatioThreshold", "apply_ratio_threshold",
    "cluster_stats", "score_and_mask",
    "PROFILES", "PipelineConfig", "SweepGrid",
    "run_baseline", "run_dataset", "run_sample", "sweep",
    "FeatureMap", "GroundTruthMask", "LogitMap",
    "load_features", "load_logits", "load_mask", "load_tensor",
    "save_mask", "save_tensor",
    "UpsampledAssignment", "upsample_labels",
    "__version__",
]
