"""Test-time adaptation: two learnable square projections trained per video
with a self-supervised cosine loss over prototype-centric samples, optimized
by Adam with decoupled weight decay, then handed back to the training-free
detector.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import pipeline, scoring
from .errors import ConfigError, SamplingError, ShapeError

POSITIVE_STRATEGIES = ("pcs", "random", "perfect")
NEGATIVE_STRATEGIES = ("random", "farthest", "perfect")


@dataclass
class TtaConfig:
    """Adaptation hyperparameters.

    ``k`` positives and ``k`` negatives are redrawn every step; ``steps`` is
    the number of optimizer updates; ``beta`` weights the alignment term
    against the separation term.
    """

    k: int = 25
    steps: int = 60
    beta: float = 1.0
    learning_rate: float = 1e-5
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rng_seed: int = 0
    positive_strategy: str = "pcs"
    negative_strategy: str = "random"
    reset_per_video: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ConfigError("adam betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ConfigError("eps must be > 0")
        if self.positive_strategy not in POSITIVE_STRATEGIES:
            raise ConfigError(f"unknown positive strategy "
                              f"{self.positive_strategy!r}")
        if self.negative_strategy not in NEGATIVE_STRATEGIES:
            raise ConfigError(f"unknown negative strategy "
                              f"{self.negative_strategy!r}")
        if (self.positive_strategy == "perfect") != (
                self.negative_strategy == "perfect"):
            raise ConfigError("perfect sampling applies to both sides")


@dataclass
class AdapterState:
    """Learnable projections plus Adam moment buffers."""

    p_v: np.ndarray
    p_t: np.ndarray
    m_v: np.ndarray
    v_v: np.ndarray
    m_t: np.ndarray
    v_t: np.ndarray
    step: int = 0

    @classmethod
    def identity(cls, dim):
        return cls(p_v=np.eye(dim, dtype=np.float64),
                   p_t=np.eye(dim, dtype=np.float64),
                   m_v=np.zeros((dim, dim), dtype=np.float64),
                   v_v=np.zeros((dim, dim), dtype=np.float64),
                   m_t=np.zeros((dim, dim), dtype=np.float64),
                   v_t=np.zeros((dim, dim), dtype=np.float64))

    @property
    def param_count(self):
        return self.p_v.size + self.p_t.size


@dataclass
class SampleSets:
    """One step's positive/negative draw.

    ``x_pos``/``x_neg`` hold the unprojected frame rows so the loss can push
    them through the current projection; ``s_pos``/``s_neg`` record the
    similarity scores at draw time.
    """

    positive_indices: np.ndarray
    negative_indices: np.ndarray
    x_pos: np.ndarray
    x_neg: np.ndarray
    s_pos: np.ndarray
    s_neg: np.ndarray


def video_rng(global_seed, video_id):
    """Independent generator per video, stable under any scheduling order.

    The video id is folded to integers through sha256 so parallel workers
    and the serial path draw identical streams.
    """
    digest = hashlib.sha256(video_id.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(global_seed),
                                                         *words]))


def project(state, frames, y):
    """Apply the current projections: rows through p_v, prototype through
    p_t. Returns float64 arrays."""
    frames = np.asarray(frames, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return frames @ state.p_v.T, state.p_t @ y


def _ranked_indices(normalized):
    # sort by (-score, index): highest scores first, ties toward low index
    n = normalized.shape[0]
    return np.lexsort((np.arange(n), -normalized))


def sample(trace, frames, cfg, rng):
    """Draw the step's positive/negative sets from the current trace.

    Positives come from the top-2k pool by normalized score (or uniformly
    at random); negatives come from outside the pool (or from the
    bottom-2k pool under the farthest strategy). Pools shrink near short
    clips so both draws stay feasible without replacement.
    """
    frames = np.asarray(frames, dtype=np.float64)
    n = trace.normalized.shape[0]
    k = cfg.k
    if n < 2 * k:
        raise SamplingError(f"need at least {2 * k} frames to draw "
                            f"{k}+{k} samples, got {n}")
    order = _ranked_indices(trace.normalized)
    pool_size = min(2 * k, n - k)
    if cfg.positive_strategy == "pcs":
        pool = order[:pool_size]
        pos = rng.choice(pool, size=k, replace=False)
        excluded = set(pool.tolist())
    else:
        pos = rng.choice(n, size=k, replace=False)
        excluded = set(pos.tolist())
    if cfg.negative_strategy == "farthest":
        tail = [i for i in order[::-1] if i not in excluded]
        candidates = np.asarray(tail[:pool_size], dtype=np.int64)
    else:
        mask = np.ones(n, dtype=bool)
        mask[list(excluded)] = False
        candidates = np.flatnonzero(mask)
    if candidates.shape[0] < k:
        raise SamplingError(f"only {candidates.shape[0]} negative "
                            f"candidates for k={k}")
    neg = rng.choice(candidates, size=k, replace=False)
    pos = np.sort(pos.astype(np.int64))
    neg = np.sort(neg.astype(np.int64))
    return SampleSets(positive_indices=pos, negative_indices=neg,
                      x_pos=frames[pos], x_neg=frames[neg],
                      s_pos=trace.raw[pos].copy(),
                      s_neg=trace.raw[neg].copy())


def sample_perfect(trace, frames, foreground, cfg, rng):
    """Oracle draw: positives from ground-truth foreground frames,
    negatives from background frames, with replacement only when a side
    has fewer than k frames."""
    frames = np.asarray(frames, dtype=np.float64)
    fg = np.flatnonzero(foreground)
    bg = np.flatnonzero(~np.asarray(foreground, dtype=bool))
    if fg.size == 0 or bg.size == 0:
        raise SamplingError("perfect sampling needs both foreground and "
                            "background frames")
    k = cfg.k
    pos = rng.choice(fg, size=k, replace=fg.size < k)
    neg = rng.choice(bg, size=k, replace=bg.size < k)
    pos = np.sort(pos.astype(np.int64))
    neg = np.sort(neg.astype(np.int64))
    return SampleSets(positive_indices=pos, negative_indices=neg,
                      x_pos=frames[pos], x_neg=frames[neg],
                      s_pos=trace.raw[pos].copy(),
                      s_neg=trace.raw[neg].copy())


def _cosines(u, v):
    # u: (k, d) rows, v: (d,). Returns (cos, u_norms, v_norm).
    un = np.linalg.norm(u, axis=1)
    vn = np.linalg.norm(v)
    denom = un * vn
    cos = np.zeros(u.shape[0], dtype=np.float64)
    ok = denom > 0
    cos[ok] = (u[ok] @ v) / denom[ok]
    return cos, un, vn


def loss(state, sets, y, beta):
    """Two-term objective at the current state.

    Alignment pulls positives toward the projected prototype
    (mean of 2 - 2 cos); separation drives positive scores to 1 and
    negative scores to 0 (half mean squared error over both sets).
    Returns ``(total, l_align, l_sep)``.
    """
    y = np.asarray(y, dtype=np.float64)
    u_pos = sets.x_pos @ state.p_v.T
    u_neg = sets.x_neg @ state.p_v.T
    v = state.p_t @ y
    cos_pos, _, _ = _cosines(u_pos, v)
    cos_neg, _, _ = _cosines(u_neg, v)
    k = sets.x_pos.shape[0]
    l_align = float(np.mean(2.0 - 2.0 * cos_pos))
    l_sep = float((np.sum((cos_pos - 1.0) ** 2)
                   + np.sum(cos_neg ** 2)) / (2.0 * k))
    return beta * l_align + l_sep, l_align, l_sep


def grad(state, sets, y, beta):
    """Analytic gradients of :func:`loss` w.r.t. both projections.

    Uses d cos(u, v)/du = (v/|v| - cos * u/|u|) / |u| applied per sample,
    then chains through u = p_v x and v = p_t y.
    """
    y = np.asarray(y, dtype=np.float64)
    u_pos = sets.x_pos @ state.p_v.T
    u_neg = sets.x_neg @ state.p_v.T
    v = state.p_t @ y
    cos_pos, un_pos, vn = _cosines(u_pos, v)
    cos_neg, un_neg, _ = _cosines(u_neg, v)
    k = sets.x_pos.shape[0]

    # d total / d cos for each sample
    g_pos = (-2.0 * beta / k) + (cos_pos - 1.0) / k
    g_neg = cos_neg / k

    def chain(u, un, cos, g):
        # rows: d total / d u_i; columns of v-grad accumulate per sample
        safe = np.where(un > 0, un, 1.0)
        du = (g / (safe * vn))[:, None] * v[None, :] \
            - ((g * cos) / safe ** 2)[:, None] * u
        dv = (u * (g / (safe * vn))[:, None]).sum(axis=0) \
            - v * float(np.sum(g * cos) / vn ** 2)
        dead = un == 0
        if np.any(dead):
            du[dead] = 0.0
        return du, dv

    du_pos, dv_pos = chain(u_pos, un_pos, cos_pos, g_pos)
    du_neg, dv_neg = chain(u_neg, un_neg, cos_neg, g_neg)
    g_pv = du_pos.T @ sets.x_pos + du_neg.T @ sets.x_neg
    g_pt = np.outer(dv_pos + dv_neg, y)
    return g_pv, g_pt


def adam_step(state, g_pv, g_pt, cfg):
    """One Adam update with decoupled weight decay, in place.

    The decay multiplies the parameters by (1 - lr * wd) before the moment
    update is applied, so it never enters the moment estimates.
    """
    t = state.step + 1
    lr = cfg.learning_rate
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for param, m, v, g in ((state.p_v, state.m_v, state.v_v, g_pv),
                           (state.p_t, state.m_t, state.v_t, g_pt)):
        if cfg.weight_decay:
            param *= 1.0 - lr * cfg.weight_decay
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        param -= lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
    state.step = t
    return state


def foreground_mask(annotations, video_id, num_frames, fps):
    """Boolean per-frame mask: True where the frame midpoint falls inside
    any ground-truth instance of the video."""
    mask = np.zeros(num_frames, dtype=bool)
    mids = (np.arange(num_frames, dtype=np.float64) + 0.5) / fps
    for inst in annotations.instances.get(video_id, ()):
        mask |= (mids >= inst.begin) & (mids < inst.end)
    return mask


def adapt_and_detect(features, prompts, pipe_cfg, tta_cfg, true_label=None,
                     annotations=None, state=None):
    """Adapt the projections on one video, then detect with them.

    Every step rescoring runs through the projected features and prototype;
    samples are redrawn fresh. With ``steps == 0`` the identity projections
    reproduce the training-free detector bit for bit. Returns
    ``(detections, loss_records)`` where each record is a dict with the
    video id, step index and the loss terms.
    """
    if features.dim != prompts.dim:
        raise ShapeError(f"feature dim {features.dim} != prompt dim "
                         f"{prompts.dim}")
    if true_label is not None:
        c_hat = prompts.index_of(true_label)
        y = prompts.data[c_hat].astype(np.float64)
    else:
        c_hat, y = pipeline.classify_video(features, prompts)
    frames = features.data.astype(np.float64)
    if state is None or tta_cfg.reset_per_video:
        state = AdapterState.identity(features.dim)
    rng = video_rng(tta_cfg.rng_seed, features.video_id)
    perfect = tta_cfg.positive_strategy == "perfect"
    fg = None
    if perfect:
        if annotations is None:
            raise ConfigError("perfect sampling needs annotations")
        fg = foreground_mask(annotations, features.video_id,
                             features.num_frames, features.fps)
    records = []
    for step in range(tta_cfg.steps):
        proj_frames, proj_y = project(state, frames, y)
        trace = pipeline.score_arrays(proj_frames, proj_y, pipe_cfg)
        if perfect:
            sets = sample_perfect(trace, frames, fg, tta_cfg, rng)
        else:
            sets = sample(trace, frames, tta_cfg, rng)
        total, l_align, l_sep = loss(state, sets, y, tta_cfg.beta)
        records.append({"video_id": features.video_id, "step": step,
                        "L_r": l_align, "L_s": l_sep, "total": total})
        g_pv, g_pt = grad(state, sets, y, tta_cfg.beta)
        adam_step(state, g_pv, g_pt, tta_cfg)
    proj_frames, proj_y = project(state, frames, y)
    trace = pipeline.score_arrays(proj_frames, proj_y, pipe_cfg)
    segments = pipeline.merge_segments(trace, video_id=features.video_id)
    seg_scores = scoring.score_segments(trace, features.data, segments,
                                        pipe_cfg)
    label = prompts.class_names[c_hat]
    detections = pipeline.detections_from_segments(features, label, segments,
                                                   seg_scores)
    return detections, records
