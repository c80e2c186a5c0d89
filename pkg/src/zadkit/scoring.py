"""Segment confidence scoring: inner/outer contrast with log-decay outer
weights, spectral actionness from the DFT energy of the segment's feature
rows, and their sigmoid-calibrated product.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError


@dataclass(frozen=True)
class LogDecayWeights:
    """Outer-context weights on each side of a segment.

    ``left[m-1]`` weights the frame m steps before the segment begin,
    ``right[m-1]`` the frame m steps after the end. Each side is
    renormalized to sum 1 over the frames that exist; a side that is
    flush against the clip boundary gets an empty array.
    """

    left: np.ndarray
    right: np.ndarray
    inflation: int


def inflation_length(seg_len):
    """Outer-region length: a quarter of the segment, rounded half up,
    never below one frame."""
    return kernels.inflation_length(int(seg_len))


def _side_weights(count, eta):
    if count <= 0:
        return np.zeros(0, dtype=np.float64)
    m = np.arange(1, count + 1, dtype=np.float64)
    w = 1.0 / np.log(m + eta)
    return w / w.sum()


def log_decay_weights(seg, num_frames, eta=1.0):
    """Per-side outer weights for a segment inside a clip of
    ``num_frames`` frames."""
    infl = inflation_length(seg.end - seg.begin + 1)
    left_n = min(infl, seg.begin)
    right_n = min(infl, num_frames - 1 - seg.end)
    return LogDecayWeights(left=_side_weights(left_n, eta),
                           right=_side_weights(right_n, eta),
                           inflation=infl)


@dataclass(frozen=True)
class SegmentScore:
    """Score breakdown for one segment.

    ``contrast`` is the inner/outer contrast score, ``actionness`` the
    sigmoid of the spectral energy, and ``confidence`` their product
    (or ``contrast`` alone when calibration is off).
    """

    s_inner: float
    s_outer: float
    s_max: float
    contrast: float
    actionness: float
    confidence: float


def logoic(trace, seg, cfg):
    """Contrast score of one segment: mean inner score minus the weighted
    outer mean, plus the peak bonus.

    Returns ``(s_inner, s_outer, s_max, contrast)``.
    """
    pre = kernels.prefix_sum(trace.normalized)
    starts = np.asarray([seg.begin], dtype=np.int64)
    ends = np.asarray([seg.end], dtype=np.int64)
    s_inner, s_outer, s_max, p = kernels.batch_segment_scores(
        trace.normalized, pre, starts, ends, cfg.eta, cfg.gamma1, cfg.gamma2,
        uniform_outer=(cfg.score_kind == "oic"))
    return float(s_inner[0]), float(s_outer[0]), float(s_max[0]), float(p[0])


def dft_energy(frames, seg, dc_exclude=False):
    """Mean squared DFT magnitude of the segment's feature rows.

    The transform runs per channel along the time axis; the energy is the
    total squared magnitude over all bins and channels divided by the
    segment length. ``dc_exclude`` drops the k=0 bin of every channel.
    """
    rows = frames.data if hasattr(frames, "data") else frames
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ShapeError("expected a 2-d feature matrix")
    window = rows[seg.begin:seg.end + 1]
    n = window.shape[0]
    spectrum = np.fft.fft(window, axis=0)
    mag2 = spectrum.real ** 2 + spectrum.imag ** 2
    if dc_exclude:
        mag2 = mag2[1:]
    return float(mag2.sum()) / n


def calibrate(contrast, energy):
    """Squash the spectral energy through a sigmoid and scale the contrast
    score by it. Returns ``(actionness, confidence)``."""
    if energy >= 0:
        actionness = 1.0 / (1.0 + math.exp(-energy))
    else:
        z = math.exp(energy)
        actionness = z / (1.0 + z)
    return actionness, contrast * actionness


def score_segments(trace, frames, segments, cfg):
    """Score every segment of one video in a single fused pass.

    ``frames`` must be the stored (unprojected) feature rows; the spectral
    actionness always reads them, while the contrast score reads the
    normalized trace.
    """
    if not segments:
        return []
    starts = np.asarray([s.begin for s in segments], dtype=np.int64)
    ends = np.asarray([s.end for s in segments], dtype=np.int64)
    pre = kernels.prefix_sum(trace.normalized)
    s_inner, s_outer, s_max, p = kernels.batch_segment_scores(
        trace.normalized, pre, starts, ends, cfg.eta, cfg.gamma1, cfg.gamma2,
        uniform_outer=(cfg.score_kind == "oic"))
    out = []
    for i, seg in enumerate(segments):
        if cfg.score_kind == "similarity":
            contrast = float(s_inner[i])
        else:
            contrast = float(p[i])
        energy = dft_energy(frames, seg, dc_exclude=cfg.dc_exclude)
        actionness, confidence = calibrate(contrast, energy)
        if not cfg.calibration:
            confidence = contrast
        out.append(SegmentScore(s_inner=float(s_inner[i]),
                                s_outer=float(s_outer[i]),
                                s_max=float(s_max[i]),
                                contrast=contrast,
                                actionness=actionness,
                                confidence=confidence))
    return out
