"""Synthetic corpus generator: orthonormal class prototypes, planted
noisy segments, and three background regimes of increasing difficulty.
All draws come from one seeded generator so a config reproduces the corpus
byte for byte.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError
from .feature_store import (AnnotationSet, FeatureMatrix, Instance,
                            PromptBank, save_annotations, save_features,
                            save_prompts)

BACKGROUND_MODES = ("orthogonal", "random_unit", "distractor")


@dataclass
class SynthConfig:
    """Corpus shape and difficulty knobs.

    ``noise_sigma`` perturbs planted segment frames around their class
    prototype; ``background`` picks how non-action frames are drawn.
    ``min_gap`` keeps planted segments this many frames apart (and away
    from the clip edges) so smoothing cannot bridge them.
    """

    num_videos: int = 50
    num_classes: int = 10
    dim: int = 64
    fps: float = 25.0
    min_frames: int = 800
    max_frames: int = 1200
    min_segments: int = 1
    max_segments: int = 3
    # actions stay well longer than the default smoothing window so that
    # boundary smear cannot push a correct detection under tIoU 0.5
    min_segment_len: int = 90
    max_segment_len: int = 180
    min_gap: int = 60
    noise_sigma: float = 0.05
    background: str = "orthogonal"
    distractor_sigma: float = 0.0
    # offsets each prompt row from its visual prototype, modeling the
    # vision-text gap that per-video adaptation is meant to close
    prompt_sigma: float = 0.0
    seed: int = 0
    prompt_template: str = "a video of action {CLS}"

    def __post_init__(self):
        if self.background not in BACKGROUND_MODES:
            raise ConfigError(f"unknown background mode {self.background!r}")
        if self.num_videos < 1 or self.num_classes < 1:
            raise ConfigError("need at least one video and one class")
        if self.dim < self.num_classes:
            raise ConfigError("dim must be >= num_classes for orthonormal "
                              "prototypes")
        if self.background == "orthogonal" and self.dim <= self.num_classes:
            raise ConfigError("orthogonal backgrounds need dim > num_classes")
        if self.background == "distractor" and self.num_classes < 2:
            raise ConfigError("distractor backgrounds need >= 2 classes")
        if not self.fps > 0:
            raise ConfigError("fps must be positive")
        if not 1 <= self.min_frames <= self.max_frames:
            raise ConfigError("bad frame count range")
        if not 1 <= self.min_segments <= self.max_segments:
            raise ConfigError("bad segment count range")
        if not 1 <= self.min_segment_len <= self.max_segment_len:
            raise ConfigError("bad segment length range")
        if self.min_gap < 0:
            raise ConfigError("min_gap must be >= 0")
        if self.noise_sigma < 0 or self.distractor_sigma < 0:
            raise ConfigError("noise sigmas must be >= 0")
        if self.prompt_sigma < 0:
            raise ConfigError("prompt_sigma must be >= 0")
        fit = (self.min_segments * self.max_segment_len
               + (self.min_segments + 1) * self.min_gap)
        if fit > self.min_frames:
            raise ConfigError("min_frames too small for even the minimum "
                              "segment count at min_gap spacing")

    @property
    def effective_distractor_sigma(self):
        return self.distractor_sigma or 2.0 * self.noise_sigma


def _orthonormal_basis(rng, dim):
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    # fix the sign ambiguity of QR so the basis is a pure function of the
    # random draw
    q *= np.sign(np.diag(r))
    return q


def _place_segments(rng, num_frames, cfg):
    """Non-overlapping (begin, end) frame ranges, each separated from its
    neighbors and the clip edges by at least ``min_gap`` frames."""
    count = int(rng.integers(cfg.min_segments, cfg.max_segments + 1))
    lengths = rng.integers(cfg.min_segment_len, cfg.max_segment_len + 1,
                           size=count)
    while count > 1 and (lengths[:count].sum()
                         + (count + 1) * cfg.min_gap) > num_frames:
        count -= 1
    lengths = lengths[:count]
    # the config fit check guarantees leftover >= 0 once count bottoms out
    # at min_segments
    leftover = num_frames - int(lengths.sum()) - (count + 1) * cfg.min_gap
    slack = rng.multinomial(leftover, np.full(count + 1, 1.0 / (count + 1)))
    segments = []
    cursor = 0
    for i in range(count):
        cursor += cfg.min_gap + int(slack[i])
        begin = cursor
        cursor += int(lengths[i])
        segments.append((begin, cursor - 1))
    return segments


def _background_frame(rng, cfg, prototypes, comp_basis, label):
    if cfg.background == "orthogonal":
        z = comp_basis @ rng.standard_normal(comp_basis.shape[1])
    elif cfg.background == "random_unit":
        z = rng.standard_normal(cfg.dim)
    else:
        others = [c for c in range(cfg.num_classes) if c != label]
        pick = others[int(rng.integers(len(others)))]
        z = prototypes[pick] + (cfg.effective_distractor_sigma
                                * rng.standard_normal(cfg.dim))
    return z / np.linalg.norm(z)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def generate(cfg, out_dir):
    """Write a full corpus under ``out_dir``.

    Layout: ``features/<vid>.vfeat``, ``prompts.tfeat``,
    ``annotations.json`` and ``manifest.json`` (config echo, per-file
    sha256 checksums, per-video stats). Returns the manifest dict.
    """
    rng = np.random.default_rng(cfg.seed)
    basis = _orthonormal_basis(rng, cfg.dim)
    prototypes = basis[:, :cfg.num_classes].T.copy()
    comp_basis = basis[:, cfg.num_classes:]
    class_names = [f"action_{i:02d}" for i in range(cfg.num_classes)]
    prompt_rows = prototypes
    if cfg.prompt_sigma > 0:
        prompt_rows = prototypes + cfg.prompt_sigma * rng.standard_normal(
            prototypes.shape)
        prompt_rows /= np.linalg.norm(prompt_rows, axis=1, keepdims=True)

    feat_dir = os.path.join(out_dir, "features")
    os.makedirs(feat_dir, exist_ok=True)

    annots = AnnotationSet(classes=list(class_names))
    video_stats = []
    files = {}
    for v in range(cfg.num_videos):
        vid = f"synth_{v:04d}"
        num_frames = int(rng.integers(cfg.min_frames, cfg.max_frames + 1))
        label = int(rng.integers(cfg.num_classes))
        segments = _place_segments(rng, num_frames, cfg)
        frames = np.empty((num_frames, cfg.dim), dtype=np.float64)
        inside = np.zeros(num_frames, dtype=bool)
        for b, e in segments:
            inside[b:e + 1] = True
        for t in range(num_frames):
            if inside[t]:
                z = prototypes[label] + cfg.noise_sigma * rng.standard_normal(
                    cfg.dim)
                frames[t] = z / np.linalg.norm(z)
            else:
                frames[t] = _background_frame(rng, cfg, prototypes,
                                              comp_basis, label)
        matrix = FeatureMatrix(video_id=vid, fps=cfg.fps,
                               data=frames.astype(np.float32))
        rel = os.path.join("features", f"{vid}.vfeat")
        save_features(matrix, os.path.join(out_dir, rel))
        files[rel] = _sha256(os.path.join(out_dir, rel))
        annots.durations[vid] = num_frames / cfg.fps
        annots.instances[vid] = [
            Instance(label=class_names[label], begin=b / cfg.fps,
                     end=(e + 1) / cfg.fps)
            for b, e in segments
        ]
        video_stats.append({"video_id": vid, "num_frames": num_frames,
                            "label": class_names[label],
                            "num_segments": len(segments)})

    bank = PromptBank(class_names=list(class_names),
                      data=prompt_rows.astype(np.float32),
                      prompt_template=cfg.prompt_template)
    save_prompts(bank, os.path.join(out_dir, "prompts.tfeat"))
    files["prompts.tfeat"] = _sha256(os.path.join(out_dir, "prompts.tfeat"))
    save_annotations(annots, os.path.join(out_dir, "annotations.json"))
    files["annotations.json"] = _sha256(
        os.path.join(out_dir, "annotations.json"))

    manifest = {"config": asdict(cfg), "class_names": class_names,
                "videos": video_stats, "files": files}
    with open(os.path.join(out_dir, "manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
