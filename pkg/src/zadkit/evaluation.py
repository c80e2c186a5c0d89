"""Detection quality measurement: temporal IoU, per-class all-point
interpolated average precision over a threshold grid, and a false-positive
breakdown of the ranked prediction list.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

THUMOS_GRID = (0.3, 0.4, 0.5, 0.6, 0.7)
ACTIVITYNET_GRID = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))

ERROR_CATEGORIES = ("true_positive", "double_detection", "wrong_label",
                    "localization", "confusion", "background")


@dataclass
class EvalConfig:
    """Threshold grid plus the knobs of the false-positive breakdown."""

    tiou_grid: tuple = THUMOS_GRID
    error_tiou: float = 0.5
    error_lo: float = 0.1
    error_budgets: tuple = (1, 2, 3)

    def __post_init__(self):
        if len(self.tiou_grid) == 0:
            raise ConfigError("tiou_grid must not be empty")
        if any(not 0 < x <= 1 for x in self.tiou_grid):
            raise ConfigError("tiou thresholds must lie in (0, 1]")
        if not 0 < self.error_tiou <= 1:
            raise ConfigError("error_tiou must lie in (0, 1]")
        if not 0 <= self.error_lo < self.error_tiou:
            raise ConfigError("need 0 <= error_lo < error_tiou")
        if any(b < 1 for b in self.error_budgets):
            raise ConfigError("error budgets must be >= 1")

    @classmethod
    def thumos(cls):
        return cls(tiou_grid=THUMOS_GRID)

    @classmethod
    def activitynet(cls):
        return cls(tiou_grid=ACTIVITYNET_GRID)


def tiou(a, b):
    """Temporal IoU of two (begin, end) intervals in seconds."""
    inter = min(a[1], b[1]) - max(a[0], b[0])
    if inter <= 0:
        return 0.0
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


def average_precision(tp_flags, num_gt):
    """All-point interpolated AP from ranked hit flags.

    ``tp_flags`` is the TP/FP outcome of each prediction, already sorted by
    descending confidence. Precision is replaced by its monotone envelope
    before summing area over recall change points.
    """
    if num_gt <= 0:
        return 0.0
    tp_flags = np.asarray(tp_flags, dtype=np.float64)
    if tp_flags.size == 0:
        return 0.0
    tp = np.cumsum(tp_flags)
    fp = np.cumsum(1.0 - tp_flags)
    recall = tp / num_gt
    precision = tp / (tp + fp)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    changed = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[changed + 1] - mrec[changed])
                        * mpre[changed + 1]))


def rank_detections(detections):
    """Deterministic evaluation order: confidence descending, ties broken
    by begin, video id, then end."""
    return sorted(detections,
                  key=lambda d: (-d.confidence, d.begin, d.video_id, d.end))


def _match_class(preds, gt_by_video, threshold):
    """Greedy matching of ranked same-class predictions against unmatched
    ground truth of the same video. Returns per-prediction hit flags."""
    matched = {vid: np.zeros(len(gts), dtype=bool)
               for vid, gts in gt_by_video.items()}
    flags = np.zeros(len(preds), dtype=np.float64)
    for i, det in enumerate(preds):
        gts = gt_by_video.get(det.video_id)
        if not gts:
            continue
        best, best_j = 0.0, -1
        for j, inst in enumerate(gts):
            if matched[det.video_id][j]:
                continue
            t = tiou((det.begin, det.end), (inst.begin, inst.end))
            if t > best:
                best, best_j = t, j
        if best_j >= 0 and best >= threshold:
            matched[det.video_id][best_j] = True
            flags[i] = 1.0
    return flags


@dataclass
class EvalReport:
    """Per-class AP table over the grid plus the derived means."""

    tiou_grid: tuple
    classes: list
    ap: dict
    map_at: dict
    mean_map: float
    num_gt: dict
    num_predictions: int
    error_profile: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "tiou_grid": list(self.tiou_grid),
            "ap": {c: {str(x): v for x, v in row.items()}
                   for c, row in self.ap.items()},
            "map_at": {str(x): v for x, v in self.map_at.items()},
            "mean_map": self.mean_map,
            "num_gt": dict(self.num_gt),
            "num_predictions": self.num_predictions,
            "error_profile": self.error_profile,
        }

    def table(self):
        """Plain-text summary: one mAP column per threshold plus the mean."""
        heads = [f"{x:.2f}" for x in self.tiou_grid] + ["avg"]
        vals = [self.map_at[x] for x in self.tiou_grid] + [self.mean_map]
        width = max(7, *(len(h) for h in heads))
        lines = [
            "mAP@tIoU (%)",
            " | ".join(h.rjust(width) for h in heads),
            "-+-".join("-" * width for _ in heads),
            " | ".join(f"{100 * v:.1f}".rjust(width) for v in vals),
        ]
        return "\n".join(lines) + "\n"


def evaluate(detections, annotations, cfg=None):
    """Score predictions against ground truth over the threshold grid.

    Classes that never occur in either predictions or ground truth are
    skipped; a class with predictions but no ground truth contributes 0.
    """
    if cfg is None:
        cfg = EvalConfig()
    ranked = rank_detections(detections)
    preds_by_class = {}
    for det in ranked:
        preds_by_class.setdefault(det.label, []).append(det)
    gt_by_class = {}
    num_gt = {}
    for vid, insts in annotations.instances.items():
        for inst in insts:
            gt_by_class.setdefault(inst.label, {}).setdefault(vid, []).append(
                inst)
            num_gt[inst.label] = num_gt.get(inst.label, 0) + 1
    active = [c for c in annotations.classes
              if c in preds_by_class or c in gt_by_class]
    ap = {c: {} for c in active}
    for c in active:
        preds = preds_by_class.get(c, [])
        gts = gt_by_class.get(c, {})
        total_gt = num_gt.get(c, 0)
        for x in cfg.tiou_grid:
            if total_gt == 0 or not preds:
                ap[c][x] = 0.0
            else:
                flags = _match_class(preds, gts, x)
                ap[c][x] = average_precision(flags, total_gt)
    map_at = {}
    for x in cfg.tiou_grid:
        vals = [ap[c][x] for c in active]
        map_at[x] = float(np.mean(vals)) if vals else 0.0
    mean_map = float(np.mean([map_at[x] for x in cfg.tiou_grid]))
    profile = error_profile(detections, annotations, cfg)
    return EvalReport(tiou_grid=tuple(cfg.tiou_grid), classes=active, ap=ap,
                      map_at=map_at, mean_map=mean_map, num_gt=num_gt,
                      num_predictions=len(detections), error_profile=profile)


def categorize_prediction(best_same_unmatched, best_same_matched, best_other,
                          threshold, lo=0.1):
    """Label one ranked prediction given its best overlaps.

    Inputs are the prediction's highest tIoU against (a) unmatched same-label
    ground truth, (b) already-matched same-label ground truth, and (c) any
    other-label ground truth. Checked in fixed precedence order.
    """
    if best_same_unmatched >= threshold:
        return "true_positive"
    if best_same_matched >= threshold:
        return "double_detection"
    if best_other >= threshold:
        return "wrong_label"
    if max(best_same_unmatched, best_same_matched) >= lo:
        return "localization"
    if best_other >= lo:
        return "confusion"
    return "background"


def error_profile(detections, annotations, cfg=None):
    """False-positive breakdown at the profiling threshold.

    For each budget k, the top k*G predictions of every class are kept
    (G = that class's ground-truth count), matched greedily in rank order,
    and each prediction is assigned one category. Fractions are over all
    kept predictions and sum to 1.
    """
    if cfg is None:
        cfg = EvalConfig()
    ranked = rank_detections(detections)
    num_gt = {}
    gt_by_video = {}
    for vid, insts in annotations.instances.items():
        gt_by_video[vid] = list(insts)
        for inst in insts:
            num_gt[inst.label] = num_gt.get(inst.label, 0) + 1
    out = {}
    for budget in cfg.error_budgets:
        kept = []
        taken = {}
        for det in ranked:
            limit = budget * num_gt.get(det.label, 0)
            if taken.get(det.label, 0) < limit:
                taken[det.label] = taken.get(det.label, 0) + 1
                kept.append(det)
        counts = {cat: 0 for cat in ERROR_CATEGORIES}
        matched = {vid: np.zeros(len(gts), dtype=bool)
                   for vid, gts in gt_by_video.items()}
        for det in kept:
            gts = gt_by_video.get(det.video_id, [])
            best_su, best_sm, best_other = 0.0, 0.0, 0.0
            best_j = -1
            for j, inst in enumerate(gts):
                t = tiou((det.begin, det.end), (inst.begin, inst.end))
                if inst.label != det.label:
                    best_other = max(best_other, t)
                elif matched[det.video_id][j]:
                    best_sm = max(best_sm, t)
                elif t > best_su:
                    best_su, best_j = t, j
            cat = categorize_prediction(best_su, best_sm, best_other,
                                        cfg.error_tiou, cfg.error_lo)
            if cat == "true_positive":
                matched[det.video_id][best_j] = True
            counts[cat] += 1
        total = len(kept)
        fractions = {cat: (counts[cat] / total if total else 0.0)
                     for cat in ERROR_CATEGORIES}
        out[str(budget)] = {"total": total, "counts": counts,
                            "fractions": fractions}
    return out
