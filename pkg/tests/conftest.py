import numpy as np
import pytest

from zadkit.feature_store import (AnnotationSet, FeatureMatrix, Instance,
                                  PromptBank)

# verdict lines collected by the acceptance suite, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def unit_rows(rng, n, d):
    m = rng.standard_normal((n, d))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_bank(rng):
    return PromptBank(class_names=["alpha", "bravo", "charlie"],
                      data=unit_rows(rng, 3, 16).astype(np.float32))


def planted_video(rng, video_id="vid", num_frames=400, dim=16, fps=10.0,
                  segments=((100, 199),), prototype=None, noise=0.02):
    """Frames near a prototype inside the given frame ranges, random unit
    vectors elsewhere. Returns (FeatureMatrix, prototype, segments)."""
    if prototype is None:
        prototype = rng.standard_normal(dim)
        prototype /= np.linalg.norm(prototype)
    frames = unit_rows(rng, num_frames, dim)
    for b, e in segments:
        block = prototype + noise * rng.standard_normal((e - b + 1, dim))
        frames[b:e + 1] = block / np.linalg.norm(block, axis=1,
                                                 keepdims=True)
    fm = FeatureMatrix(video_id=video_id, fps=fps,
                       data=frames.astype(np.float32))
    return fm, prototype, segments


def annotations_for(matrices, segment_map, classes):
    """AnnotationSet from {video_id: [(label, begin_s, end_s), ...]}."""
    out = AnnotationSet(classes=list(classes))
    for fm in matrices:
        out.durations[fm.video_id] = fm.duration
        out.instances[fm.video_id] = [
            Instance(label=lab, begin=b, end=e)
            for lab, b, e in segment_map.get(fm.video_id, [])
        ]
    return out
