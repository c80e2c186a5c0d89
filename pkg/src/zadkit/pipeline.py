"""Training-free detection core: pseudo-label classification, per-frame
similarity scoring with smoothing and min-max normalization, and
mean-threshold segment merging.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels, scoring
from .errors import ConfigError, ShapeError
from .feature_store import Detection

THRESHOLD_POLICIES = ("mean", "fixed")
SCORE_KINDS = ("logoic", "oic", "similarity")


@dataclass
class PipelineConfig:
    """Knobs of the training-free detector.

    ``smoothing_window`` is the moving-average length in frames; ``gamma1``
    and ``gamma2`` weight the outer penalty and the peak bonus of the
    contrast score; ``eta`` shifts the log in the outer decay weights and
    must stay positive so every log argument exceeds 1.
    """

    smoothing_window: int = 60
    gamma1: float = 0.2
    gamma2: float = 1.0
    eta: float = 1.0
    dc_exclude: bool = False
    threshold_policy: str = "mean"
    fixed_threshold: float = 0.5
    score_kind: str = "logoic"
    calibration: bool = True

    def __post_init__(self):
        if self.smoothing_window < 1:
            raise ConfigError("smoothing_window must be >= 1")
        if not self.eta > 0:
            raise ConfigError("eta must be > 0")
        if self.threshold_policy not in THRESHOLD_POLICIES:
            raise ConfigError(f"unknown threshold policy "
                              f"{self.threshold_policy!r}")
        if self.score_kind not in SCORE_KINDS:
            raise ConfigError(f"unknown score kind {self.score_kind!r}")
        if not np.isfinite(self.fixed_threshold):
            raise ConfigError("fixed_threshold must be finite")


@dataclass
class ScoreTrace:
    """Per-frame similarity trace and its smoothing/normalization state."""

    raw: np.ndarray
    smoothed: np.ndarray
    normalized: np.ndarray
    threshold: float


@dataclass(frozen=True)
class Segment:
    """Inclusive frame range [begin, end] of one candidate detection."""

    begin: int
    end: int
    video_id: str = ""

    def __post_init__(self):
        if not 0 <= self.begin <= self.end:
            raise ConfigError(f"invalid segment [{self.begin}, {self.end}]")

    @property
    def length(self):
        return self.end - self.begin + 1


def cosine_trace(frames, y):
    """Cosine similarity of each row of ``frames`` against ``y`` (float64).

    Zero-norm rows (possible only for degenerate projections) score 0.
    """
    frames = np.asarray(frames, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if frames.shape[1] != y.shape[0]:
        raise ShapeError(f"frame dim {frames.shape[1]} != prototype dim "
                         f"{y.shape[0]}")
    dots = frames @ y
    norms = np.linalg.norm(frames, axis=1) * np.linalg.norm(y)
    out = np.zeros(frames.shape[0], dtype=np.float64)
    ok = norms > 0
    out[ok] = dots[ok] / norms[ok]
    return out


def classify_video(features, prompts):
    """Pick the class whose text embedding best matches the mean frame.

    Returns ``(class_index, prototype)`` where the prototype is the winning
    prompt row as float64. Ties break toward the lowest class index.
    """
    if features.dim != prompts.dim:
        raise ShapeError(f"feature dim {features.dim} != prompt dim "
                         f"{prompts.dim}")
    mean_frame = features.data.astype(np.float64).mean(axis=0)
    sims = cosine_trace(prompts.data, mean_frame)
    c_hat = int(np.argmax(sims))
    return c_hat, prompts.data[c_hat].astype(np.float64)


def score_arrays(frames, y, cfg):
    """Build a :class:`ScoreTrace` from raw frame rows and a prototype."""
    raw = cosine_trace(frames, y)
    smoothed = kernels.moving_average(raw, cfg.smoothing_window)
    normalized = kernels.minmax_normalize(smoothed)
    if cfg.threshold_policy == "mean":
        threshold = float(np.mean(normalized))
    else:
        threshold = cfg.fixed_threshold
    return ScoreTrace(raw=raw, smoothed=smoothed, normalized=normalized,
                      threshold=threshold)


def score_frames(features, y, cfg):
    """Per-frame cosine trace against the prototype, smoothed + normalized."""
    return score_arrays(features.data, y, cfg)


def merge_segments(trace, video_id=""):
    """Maximal runs of frames whose normalized score strictly exceeds the
    threshold, as disjoint segments sorted by begin frame."""
    runs = kernels.runs_above(trace.normalized, trace.threshold)
    return [Segment(begin=int(b), end=int(e), video_id=video_id)
            for b, e in runs]


def detections_from_segments(features, label, segments, seg_scores):
    """Convert scored frame segments to second-based detections.

    Frame t covers [t/fps, (t+1)/fps), so an inclusive frame range [b, e]
    maps to the half-open interval [b/fps, (e+1)/fps).
    """
    fps = features.fps
    return [
        Detection(video_id=features.video_id, label=label,
                  begin=seg.begin / fps, end=(seg.end + 1) / fps,
                  confidence=score.confidence)
        for seg, score in zip(segments, seg_scores)
    ]


def detect(features, prompts, cfg, true_label=None):
    """Run the full training-free pipeline on one video.

    ``true_label`` switches on the perfect-class oracle: the pseudo-label is
    replaced by the given class (which must be in the prompt bank).
    """
    if features.dim != prompts.dim:
        raise ShapeError(f"feature dim {features.dim} != prompt dim "
                         f"{prompts.dim}")
    if true_label is not None:
        c_hat = prompts.index_of(true_label)
        y = prompts.data[c_hat].astype(np.float64)
    else:
        c_hat, y = classify_video(features, prompts)
    trace = score_frames(features, y, cfg)
    segments = merge_segments(trace, video_id=features.video_id)
    seg_scores = scoring.score_segments(trace, features.data, segments, cfg)
    label = prompts.class_names[c_hat]
    return detections_from_segments(features, label, segments, seg_scores)
