"""zadkit: zero-shot temporal action detection on precomputed frame
embeddings, with optional per-video test-time adaptation."""

from .errors import (ConfigError, DataError, FormatError, SamplingError,
                     SchemaError, ShapeError, TruncationError, ZadError)
from .evaluation import EvalConfig, EvalReport, error_profile, evaluate, tiou
from .feature_store import (AnnotationSet, Detection, FeatureMatrix,
                            Instance, PromptBank, load_annotations,
                            load_features, load_predictions, load_prompts,
                            save_annotations, save_features, save_prompts,
                            write_predictions)
from .kernels import BACKEND
from .pipeline import (PipelineConfig, ScoreTrace, Segment, classify_video,
                       detect, merge_segments, score_frames)
from .scoring import (LogDecayWeights, SegmentScore, calibrate, dft_energy,
                      log_decay_weights, logoic, score_segments)
from .synth import SynthConfig, generate
from .tta import AdapterState, SampleSets, TtaConfig, adapt_and_detect

__version__ = "0.1.0"

__all__ = [
    "AdapterState", "AnnotationSet", "BACKEND", "ConfigError", "DataError",
    "Detection", "EvalConfig", "EvalReport", "FeatureMatrix", "FormatError",
    "Instance", "LogDecayWeights", "PipelineConfig", "PromptBank",
    "SampleSets", "SamplingError", "SchemaError", "ScoreTrace", "Segment",
    "SegmentScore", "ShapeError", "SynthConfig", "TruncationError",
    "TtaConfig", "ZadError", "adapt_and_detect", "calibrate",
    "classify_video", "detect", "dft_energy", "error_profile", "evaluate",
    "generate", "load_annotations", "load_features", "load_predictions",
    "load_prompts", "log_decay_weights", "logoic", "merge_segments",
    "save_annotations", "save_features", "save_prompts", "score_frames",
    "score_segments", "tiou", "write_predictions",
]
