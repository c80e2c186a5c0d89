"""On-disk formats and in-memory model for features, prompts, annotations
and predictions.

Binary containers are little-endian throughout:

* ``.vfeat``: magic ``VFE1`` | u32 T | u32 D | u32 dtype tag (1 = f32) |
  T*D f32 row-major | u32 trailer length | UTF-8 JSON trailer
  ``{"video_id": str, "fps": number}``.
* ``.tfeat``: magic ``TFE1`` | u32 C | u32 D | u32 dtype tag | C*D f32 |
  u32 trailer length | JSON ``{"class_names": [...], "prompt_template": str}``.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError, SchemaError, TruncationError

VFEAT_MAGIC = b"VFE1"
TFEAT_MAGIC = b"TFE1"
DTYPE_F32 = 1

# Frames are normalized at load; rows already unit within this tolerance are
# kept untouched so that save(load(p)) is byte-stable.
UNIT_NORM_TOL = 1e-5

PROMPT_PLACEHOLDER = "{CLS}"


def normalize_rows(data, what="row"):
    """Return ``data`` as float32 with unit-L2 rows.

    Rows whose norm already sits within ``UNIT_NORM_TOL`` of 1 are left
    bit-identical; anything else is rescaled. Zero-norm or non-finite rows
    raise :class:`DataError` naming the row.
    """
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise DataError(f"expected a 2-d matrix, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        bad = int(np.argwhere(~np.isfinite(data).all(axis=1))[0][0])
        raise DataError(f"non-finite value in {what} {bad}")
    norms = np.linalg.norm(data.astype(np.float64), axis=1)
    if np.any(norms == 0.0):
        bad = int(np.argmax(norms == 0.0))
        raise DataError(f"zero-norm {what} {bad}")
    off = np.abs(norms - 1.0) > UNIT_NORM_TOL
    if np.any(off):
        data = data.copy()
        data[off] = (data[off].astype(np.float64) / norms[off, None]).astype(
            np.float32)
    return data


@dataclass
class FeatureMatrix:
    """Per-frame embeddings of one video; rows are unit-normalized."""

    video_id: str
    fps: float
    data: np.ndarray

    def __post_init__(self):
        if not self.video_id:
            raise DataError("empty video_id")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise DataError(f"fps must be positive, got {self.fps}")
        if np.ndim(self.data) != 2 or np.size(self.data) == 0:
            raise DataError("empty feature matrix")
        self.data = normalize_rows(self.data, what="frame row")

    @property
    def num_frames(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]

    @property
    def duration(self):
        """Video length in seconds; frame t spans [t/fps, (t+1)/fps)."""
        return self.num_frames / self.fps


@dataclass
class PromptBank:
    """Text embeddings for the candidate class names."""

    class_names: list
    data: np.ndarray
    prompt_template: str = "a video of action {CLS}"

    def __post_init__(self):
        if len(self.class_names) == 0:
            raise DataError("prompt bank needs at least one class")
        if np.ndim(self.data) != 2 or self.data.shape[0] != len(self.class_names):
            raise DataError(
                f"prompt rows ({np.shape(self.data)[0]}) != class names "
                f"({len(self.class_names)})")
        if self.prompt_template.count(PROMPT_PLACEHOLDER) != 1:
            raise DataError(
                f"prompt_template must contain exactly one {PROMPT_PLACEHOLDER}"
                " placeholder")
        self.data = normalize_rows(self.data, what="prompt row")

    @property
    def num_classes(self):
        return len(self.class_names)

    @property
    def dim(self):
        return self.data.shape[1]

    def index_of(self, class_name):
        try:
            return self.class_names.index(class_name)
        except ValueError:
            raise DataError(f"unknown class {class_name!r}") from None


@dataclass(frozen=True)
class Instance:
    """One ground-truth action instance, in seconds."""

    label: str
    begin: float
    end: float


@dataclass
class AnnotationSet:
    """Ground truth for a corpus: instances, durations, class universe."""

    classes: list
    durations: dict = field(default_factory=dict)
    instances: dict = field(default_factory=dict)
    version: str = "1.0"

    def videos(self):
        return sorted(self.instances.keys())

    def labels_of(self, video_id):
        return [inst.label for inst in self.instances.get(video_id, [])]

    def dominant_label(self, video_id):
        """Most frequent ground-truth label of a video, ties lexicographic."""
        labels = self.labels_of(video_id)
        if not labels:
            return None
        counts = {}
        for lab in labels:
            counts[lab] = counts.get(lab, 0) + 1
        return min(counts, key=lambda lab: (-counts[lab], lab))


@dataclass(frozen=True)
class Detection:
    """One predicted action instance, in seconds."""

    video_id: str
    label: str
    begin: float
    end: float
    confidence: float

    def __post_init__(self):
        if not self.begin < self.end:
            raise DataError(
                f"detection begin {self.begin} must precede end {self.end}")
        if not np.isfinite(self.confidence):
            raise DataError("detection confidence must be finite")


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncationError(f"file ended while reading {what} "
                              f"({len(buf)} of {n} bytes)")
    return buf


def _read_matrix_container(fh, magic, path):
    got = fh.read(4)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    rows, cols, tag = struct.unpack("<III", _read_exact(fh, 12, "header"))
    if tag != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype tag {tag}")
    if rows == 0 or cols == 0:
        raise DataError(f"{path}: empty feature matrix ({rows}x{cols})")
    payload = _read_exact(fh, 4 * rows * cols, f"{rows}x{cols} f32 payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    (tlen,) = struct.unpack("<I", _read_exact(fh, 4, "trailer length"))
    trailer = _read_exact(fh, tlen, "JSON trailer")
    try:
        meta = json.loads(trailer.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad JSON trailer: {exc}") from exc
    return data, meta


def _write_matrix_container(fh, magic, data, meta):
    trailer = json.dumps(meta, separators=(",", ":")).encode("utf-8")
    fh.write(magic)
    fh.write(struct.pack("<III", data.shape[0], data.shape[1], DTYPE_F32))
    fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())
    fh.write(struct.pack("<I", len(trailer)))
    fh.write(trailer)


def load_features(path):
    """Load a ``.vfeat`` container into a validated :class:`FeatureMatrix`."""
    with open(path, "rb") as fh:
        data, meta = _read_matrix_container(fh, VFEAT_MAGIC, path)
    if not isinstance(meta.get("video_id"), str):
        raise FormatError(f"{path}: trailer missing video_id")
    if not isinstance(meta.get("fps"), (int, float)):
        raise FormatError(f"{path}: trailer missing fps")
    return FeatureMatrix(video_id=meta["video_id"], fps=float(meta["fps"]),
                         data=data)


def save_features(matrix, path):
    """Write a :class:`FeatureMatrix` as a ``.vfeat`` container."""
    meta = {"video_id": matrix.video_id, "fps": matrix.fps}
    with open(path, "wb") as fh:
        _write_matrix_container(fh, VFEAT_MAGIC, matrix.data, meta)


def load_prompts(path):
    """Load a ``.tfeat`` container into a validated :class:`PromptBank`."""
    with open(path, "rb") as fh:
        data, meta = _read_matrix_container(fh, TFEAT_MAGIC, path)
    names = meta.get("class_names")
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise FormatError(f"{path}: trailer missing class_names")
    template = meta.get("prompt_template")
    if not isinstance(template, str):
        raise FormatError(f"{path}: trailer missing prompt_template")
    return PromptBank(class_names=names, data=data, prompt_template=template)


def save_prompts(bank, path):
    """Write a :class:`PromptBank` as a ``.tfeat`` container."""
    meta = {"class_names": bank.class_names,
            "prompt_template": bank.prompt_template}
    with open(path, "wb") as fh:
        _write_matrix_container(fh, TFEAT_MAGIC, bank.data, meta)


def _expect(cond, path, message):
    if not cond:
        raise SchemaError(path, message)


def load_annotations(path):
    """Parse the annotation JSON (see module docstring for the schema)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    _expect(isinstance(doc, dict), "$", "top level must be an object")
    classes = doc.get("classes")
    _expect(isinstance(classes, list) and
            all(isinstance(c, str) for c in classes),
            "classes", "must be a list of strings")
    database = doc.get("database")
    _expect(isinstance(database, dict), "database", "must be an object")
    universe = set(classes)
    out = AnnotationSet(classes=list(classes),
                        version=str(doc.get("version", "1.0")))
    for vid, entry in database.items():
        vpath = f"database.{vid}"
        _expect(isinstance(entry, dict), vpath, "must be an object")
        duration = entry.get("duration")
        _expect(isinstance(duration, (int, float)) and duration > 0,
                f"{vpath}.duration", "must be a positive number")
        anns = entry.get("annotations", [])
        _expect(isinstance(anns, list), f"{vpath}.annotations",
                "must be a list")
        instances = []
        for i, ann in enumerate(anns):
            apath = f"{vpath}.annotations[{i}]"
            _expect(isinstance(ann, dict), apath, "must be an object")
            label = ann.get("label")
            _expect(isinstance(label, str), f"{apath}.label",
                    "must be a string")
            _expect(label in universe, f"{apath}.label",
                    f"label {label!r} not in class universe")
            seg = ann.get("segment")
            _expect(isinstance(seg, list) and len(seg) == 2 and
                    all(isinstance(v, (int, float)) for v in seg),
                    f"{apath}.segment", "must be [begin, end]")
            begin, end = float(seg[0]), float(seg[1])
            _expect(0.0 <= begin < end, f"{apath}.segment",
                    f"need 0 <= begin < end, got [{begin}, {end}]")
            _expect(end <= duration + 1e-9, f"{apath}.segment",
                    f"end {end} exceeds duration {duration}")
            instances.append(Instance(label=label, begin=begin, end=end))
        out.durations[vid] = float(duration)
        out.instances[vid] = instances
    return out


def save_annotations(annots, path):
    """Write an :class:`AnnotationSet` back to its JSON form."""
    database = {}
    for vid in sorted(annots.durations):
        database[vid] = {
            "duration": annots.durations[vid],
            "annotations": [
                {"label": inst.label, "segment": [inst.begin, inst.end]}
                for inst in annots.instances.get(vid, [])
            ],
        }
    doc = {"version": annots.version, "database": database,
           "classes": annots.classes}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_predictions(detections, path):
    """Write detections as prediction JSON, sorted for byte-stable output."""
    results = {}
    ordered = sorted(detections,
                     key=lambda d: (d.video_id, d.begin, d.end, d.label))
    for det in ordered:
        results.setdefault(det.video_id, []).append({
            "label": det.label,
            "score": det.confidence,
            "segment": [det.begin, det.end],
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"results": results}, fh, indent=2)
        fh.write("\n")


def load_predictions(path):
    """Parse prediction JSON back into a list of :class:`Detection`."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    _expect(isinstance(doc, dict) and isinstance(doc.get("results"), dict),
            "results", "must be an object")
    out = []
    for vid, entries in doc["results"].items():
        vpath = f"results.{vid}"
        _expect(isinstance(entries, list), vpath, "must be a list")
        for i, entry in enumerate(entries):
            epath = f"{vpath}[{i}]"
            _expect(isinstance(entry, dict), epath, "must be an object")
            label = entry.get("label")
            _expect(isinstance(label, str), f"{epath}.label",
                    "must be a string")
            score = entry.get("score")
            _expect(isinstance(score, (int, float)), f"{epath}.score",
                    "must be a number")
            seg = entry.get("segment")
            _expect(isinstance(seg, list) and len(seg) == 2 and
                    all(isinstance(v, (int, float)) for v in seg),
                    f"{epath}.segment", "must be [begin, end]")
            begin, end = float(seg[0]), float(seg[1])
            _expect(begin < end, f"{epath}.segment",
                    f"need begin < end, got [{begin}, {end}]")
            out.append(Detection(video_id=vid, label=label, begin=begin,
                                 end=end, confidence=float(score)))
    return out
