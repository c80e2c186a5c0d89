"""Numpy implementations of the per-frame hot kernels.

This is the fallback selected when the compiled extension is unavailable
(or when ``ZADKIT_NO_EXT`` is set). Both backends implement the same
contracts; integer outputs are identical, float outputs agree to ~1e-12
relative (summation order may differ in the last ulp).
"""

import math

import numpy as np

BACKEND = "numpy"


def prefix_sum(x):
    """pre[0] = 0, pre[i+1] = pre[i] + x[i]; sequential accumulation."""
    pre = np.empty(x.shape[0] + 1, dtype=np.float64)
    pre[0] = 0.0
    np.cumsum(x, out=pre[1:])
    return pre


def moving_average(x, window):
    """Centered moving average with truncated windows at the boundaries.

    The window spans ``[t - window//2, t + (window-1)//2]`` intersected with
    the valid index range (even windows lean one frame into the past).
    """
    n = x.shape[0]
    w = min(int(window), n)
    if w <= 1:
        return x.astype(np.float64, copy=True)
    half_lo = w // 2
    half_hi = (w - 1) // 2
    pre = prefix_sum(x)
    idx = np.arange(n)
    lo = np.maximum(idx - half_lo, 0)
    hi = np.minimum(idx + half_hi, n - 1)
    return (pre[hi + 1] - pre[lo]) / (hi - lo + 1)


def minmax_normalize(x):
    """Scale to [0, 1]; a constant input maps to all 0.5."""
    mn = float(np.min(x))
    mx = float(np.max(x))
    if mx == mn:
        return np.full(x.shape[0], 0.5, dtype=np.float64)
    return (x - mn) / (mx - mn)


def runs_above(x, threshold):
    """Maximal runs of consecutive indices with ``x > threshold`` (strict).

    Returns an int64 array of shape (n_runs, 2) with inclusive bounds.
    """
    above = x > threshold
    if not above.any():
        return np.empty((0, 2), dtype=np.int64)
    edges = np.diff(above.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    ends = np.flatnonzero(edges == -1)
    if above[0]:
        starts = np.concatenate(([0], starts))
    if above[-1]:
        ends = np.concatenate((ends, [x.shape[0] - 1]))
    return np.stack([starts, ends], axis=1).astype(np.int64)


def inflation_length(seg_len):
    """Quarter of the segment length, round-half-up, at least 1."""
    return max(1, int(math.floor(seg_len / 4.0 + 0.5)))


def _side_mean(norm, frames, weights):
    if frames.shape[0] == 0:
        return None
    return float(np.dot(weights, norm[frames]) / np.sum(weights))


def batch_segment_scores(norm, pre, starts, ends, eta, gamma1, gamma2,
                         uniform_outer=False):
    """Inner/outer/max statistics and contrast score for each segment.

    ``pre`` must be ``prefix_sum(norm)``. Outer frames at distance m from a
    boundary get weight 1/ln(m + eta) (or 1 when ``uniform_outer``); each
    side is renormalized over its in-range frames, the two available side
    means are averaged, and missing sides contribute nothing.
    """
    n_seg = starts.shape[0]
    t = norm.shape[0]
    s_inner = np.empty(n_seg, dtype=np.float64)
    s_outer = np.empty(n_seg, dtype=np.float64)
    s_max = np.empty(n_seg, dtype=np.float64)
    for i in range(n_seg):
        b = int(starts[i])
        e = int(ends[i])
        length = e - b + 1
        s_inner[i] = (pre[e + 1] - pre[b]) / length
        s_max[i] = float(np.max(norm[b:e + 1]))
        l = inflation_length(length)
        m = np.arange(1, l + 1, dtype=np.float64)
        if uniform_outer:
            w = np.ones(l, dtype=np.float64)
        else:
            w = 1.0 / np.log(m + eta)
        n_left = min(l, b)
        n_right = min(l, t - 1 - e)
        left = _side_mean(norm, b - np.arange(1, n_left + 1), w[:n_left])
        right = _side_mean(norm, e + np.arange(1, n_right + 1), w[:n_right])
        sides = [v for v in (left, right) if v is not None]
        s_outer[i] = sum(sides) / len(sides) if sides else 0.0
    p = s_inner - gamma1 * s_outer + gamma2 * s_max
    return s_inner, s_outer, s_max, p
