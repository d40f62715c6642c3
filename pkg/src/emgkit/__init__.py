"""emgkit: offline sEMG movement recognition.

Filtering, activity-segment detection, feature extraction, SVM-RFE feature
ranking, BPNN/LDA/SVM classifiers and confusion-matrix evaluation, plus a
synthetic trial generator with known ground truth.
"""

__version__ = "0.1.0"

from .core import (ALL_LABELS, ClassLabel, DatasetManifest, FeatureMatrix, Recording,
                   load_feature_matrix, load_manifest, load_recording, save_feature_matrix,
                   save_recording)
from .errors import (ConfigError, ConvergenceError, DivergenceError, EmgkitError, FormatError,
                     InvariantError, LengthError, ParameterError, ParseError)

__all__ = [
    "ALL_LABELS", "ClassLabel", "DatasetManifest", "FeatureMatrix", "Recording",
    "load_feature_matrix", "load_manifest", "load_recording", "save_feature_matrix",
    "save_recording", "ConfigError", "ConvergenceError", "DivergenceError", "EmgkitError",
    "FormatError", "InvariantError", "LengthError", "ParameterError", "ParseError",
]
