"""Micro-expression analysis from onset/apex frame pairs.

The pipeline: dense TV-L1 optical flow between the onset and apex frames,
magnitude / orientation / optical-strain fields, block-wise weighted
orientation histograms (Bi-WOOF) for classification with linear SVMs under
leave-one-subject-out or leave-one-video-out protocols, plus binary-pattern
baselines (difference-image LBP, LBP-TOP) and divide-and-conquer apex
spotting.  Hot kernels run on a compiled extension when available, with a
pure-numpy fallback (see biwoof._kernels).
"""

from . import _kernels
from .core import (BiwoofConfig, ConfigError, ConfusionMatrix, DataError,
                   FlowField, FormatError, ManifestError, ProtocolError,
                   ShapeError, VideoSample, WEIGHT_MODES, feature_index,
                   frame_from_bytes, to_gray, validate_frame)
from .dataio import (Manifest, ManifestEntry, export_features, load_manifest,
                     load_video, read_flo, write_flo)
from .descriptors import (BlockGrid, LbpParams, bin_index, biwoof,
                          block_partition, lbp_bin_count,
                          lbp_difference_baseline, lbp_histogram, lbp_top)
from .evaluation import (EvalReport, PipelineConfig, REPORT_SCHEMA, SvmModel,
                         ablate, accuracy, apex_pair_feature, f_measure,
                         make_folds, predict, run_protocol, sequence_feature,
                         train_linear_svm)
from .flow import TvL1Params, estimate_tvl1, resize_bilinear, warp_bilinear
from .kinematics import polar_decompose, strain_magnitude
from .spotting import (DifferenceCurve, detect_peaks, divide_and_conquer,
                       frame_difference_curve, spot_apex)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
    "BiwoofConfig", "ConfigError", "ConfusionMatrix", "DataError",
    "FlowField", "FormatError", "ManifestError", "ProtocolError",
    "ShapeError", "VideoSample", "WEIGHT_MODES", "feature_index",
    "frame_from_bytes", "to_gray", "validate_frame",
    # dataio
    "Manifest", "ManifestEntry", "export_features", "load_manifest",
    "load_video", "read_flo", "write_flo",
    # descriptors
    "BlockGrid", "LbpParams", "bin_index", "biwoof", "block_partition",
    "lbp_bin_count", "lbp_difference_baseline", "lbp_histogram", "lbp_top",
    # evaluation
    "EvalReport", "PipelineConfig", "REPORT_SCHEMA", "SvmModel", "ablate",
    "accuracy", "apex_pair_feature", "f_measure", "make_folds", "predict",
    "run_protocol", "sequence_feature", "train_linear_svm",
    # flow
    "TvL1Params", "estimate_tvl1", "resize_bilinear", "warp_bilinear",
    # kinematics
    "polar_decompose", "strain_magnitude",
    # spotting
    "DifferenceCurve", "detect_peaks", "divide_and_conquer",
    "frame_difference_curve", "spot_apex",
    # kernels
    "_kernels",
]
