"""Acceptance gate: every release-blocking behavior asserted at its stated
tolerance, one printed verdict line per criterion.

Two seeded corpora drive the end-to-end checks: a clean one (low noise,
orthogonal backgrounds) where training-free detection must be near-perfect,
and a pinned hard one (heavy noise, distractor backgrounds, prompts offset
from the visual prototypes) where per-video adaptation must earn its keep.
The hard-corpus floor values were measured once on the frozen configuration
and act as regression gates.
"""

import time

import numpy as np
import pytest

import conftest

from zadkit import synth
from zadkit.cli import main
from zadkit.evaluation import (EvalConfig, ERROR_CATEGORIES, error_profile,
                               evaluate)
from zadkit.feature_store import (Detection, load_annotations,
                                  load_features, load_predictions,
                                  load_prompts)
from zadkit.pipeline import PipelineConfig, Segment, classify_video, detect
from zadkit.scoring import dft_energy, log_decay_weights
from zadkit.tta import (AdapterState, SampleSets, TtaConfig,
                        adapt_and_detect, grad, loss)

from test_evaluation import brute_evaluate, random_eval_case

CLEAN = dict(num_videos=50, num_classes=10, dim=64, noise_sigma=0.05,
             background="orthogonal", seed=0)

# frozen difficulty configuration; floors below were measured once on it
HARD = dict(num_videos=50, num_classes=10, dim=64, seed=3,
            background="distractor", noise_sigma=0.45, prompt_sigma=0.3,
            min_frames=1500, max_frames=2500, min_segments=1,
            max_segments=2, min_segment_len=90, max_segment_len=150)

HARD_TTA = dict(steps=60, k=25, learning_rate=3e-4, rng_seed=0)

# measured on the frozen hard corpus: mAP@0.5 0.1754 unadapted, 0.2493 at
# 60 steps, 0.1093 for the similarity-score variant, 0.1681 for random
# positives + farthest negatives, 50/50 videos with descending loss
MAP0_RANGE = (0.16, 0.19)
MAP60_FLOOR = 0.24


def verdict(ok, name, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def clean_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("clean")
    synth.generate(synth.SynthConfig(**CLEAN), str(root))
    return root


@pytest.fixture(scope="module")
def hard_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("hard")
    synth.generate(synth.SynthConfig(**HARD), str(root))
    return root


def corpus_videos(root):
    feat_dir = root / "features"
    return [load_features(str(p)) for p in sorted(feat_dir.iterdir())]


def run_corpus(videos, bank, pipe_cfg, tta_cfg=None):
    detections = []
    all_records = []
    for fm in videos:
        if tta_cfg is None:
            detections.extend(detect(fm, bank, pipe_cfg))
        else:
            dets, records = adapt_and_detect(fm, bank, pipe_cfg, tta_cfg)
            detections.extend(dets)
            all_records.append(records)
    return detections, all_records


def map_at_half(detections, annots):
    report = evaluate(detections, annots, EvalConfig(tiou_grid=(0.5,)))
    return report.map_at[0.5]


@pytest.fixture(scope="module")
def hard_runs(hard_dir):
    """All hard-corpus variants, computed once: unadapted LogOIC, the
    similarity-score ablation, and two 60-step sampling ablations."""
    videos = corpus_videos(hard_dir)
    bank = load_prompts(str(hard_dir / "prompts.tfeat"))
    annots = load_annotations(str(hard_dir / "annotations.json"))
    pipe = PipelineConfig()
    out = {}
    dets, _ = run_corpus(videos, bank, pipe)
    out["map0"] = map_at_half(dets, annots)
    out["detections0"] = dets
    dets, _ = run_corpus(videos, bank,
                         PipelineConfig(score_kind="similarity"))
    out["map0_similarity"] = map_at_half(dets, annots)
    dets, records = run_corpus(videos, bank, pipe,
                               TtaConfig(**HARD_TTA))
    out["map60"] = map_at_half(dets, annots)
    out["records"] = records
    dets, _ = run_corpus(videos, bank, pipe,
                         TtaConfig(**HARD_TTA, positive_strategy="random",
                                   negative_strategy="farthest"))
    out["map60_rand_far"] = map_at_half(dets, annots)
    return out


class TestCriterion1CleanEndToEnd:
    def test_map_accuracy_and_speed(self, clean_dir):
        start = time.perf_counter()
        videos = corpus_videos(clean_dir)
        bank = load_prompts(str(clean_dir / "prompts.tfeat"))
        annots = load_annotations(str(clean_dir / "annotations.json"))
        pipe = PipelineConfig()
        detections, _ = run_corpus(videos, bank, pipe)
        elapsed = time.perf_counter() - start
        correct = 0
        for fm in videos:
            c_hat, _ = classify_video(fm, bank)
            correct += (bank.class_names[c_hat]
                        == annots.dominant_label(fm.video_id))
        accuracy = correct / len(videos)
        map50 = map_at_half(detections, annots)
        verdict(map50 >= 0.90 and accuracy >= 0.95 and elapsed < 10.0,
                "clean end-to-end",
                f"mAP@0.5 {map50:.4f} (>= 0.90), pseudo-label accuracy "
                f"{accuracy:.3f} (>= 0.95), {elapsed:.2f}s (< 10s)")


class TestCriterion2ZeroStepIdentity:
    def test_adapt_steps0_equals_detect(self, clean_dir, tmp_path):
        base = ["--features", str(clean_dir / "features"),
                "--prompts", str(clean_dir / "prompts.tfeat")]
        det_out = tmp_path / "det.json"
        ada_out = tmp_path / "ada.json"
        assert main(["detect"] + base + ["--out", str(det_out)]) == 0
        assert main(["adapt"] + base + ["--out", str(ada_out),
                                        "--steps", "0"]) == 0
        same = det_out.read_bytes() == ada_out.read_bytes()
        verdict(same, "zero-step identity",
                "adapt --steps 0 output byte-identical to detect")


class TestCriterion3GradientCheck:
    def test_analytic_matches_central_differences(self):
        rng = np.random.default_rng(2024)
        h = 1e-4
        worst = 0.0
        configs = 0
        for _ in range(20):
            d = int(rng.integers(4, 13))
            k = int(rng.integers(2, 7))
            state = AdapterState.identity(d)
            state.p_v += 0.1 * rng.standard_normal((d, d))
            state.p_t += 0.1 * rng.standard_normal((d, d))

            def rows(n):
                z = rng.standard_normal((n, d))
                return z / np.linalg.norm(z, axis=1, keepdims=True)

            sets = SampleSets(positive_indices=np.arange(k),
                              negative_indices=np.arange(k, 2 * k),
                              x_pos=rows(k), x_neg=rows(k),
                              s_pos=np.zeros(k), s_neg=np.zeros(k))
            y = rows(1)[0]
            beta = float(rng.uniform(0.3, 2.0))
            g_pv, g_pt = grad(state, sets, y, beta)
            for param, g in ((state.p_v, g_pv), (state.p_t, g_pt)):
                for i in range(d):
                    for j in range(d):
                        keep = param[i, j]
                        param[i, j] = keep + h
                        up = loss(state, sets, y, beta)[0]
                        param[i, j] = keep - h
                        down = loss(state, sets, y, beta)[0]
                        param[i, j] = keep
                        fd = (up - down) / (2.0 * h)
                        rel = abs(fd - g[i, j]) / max(abs(fd),
                                                      abs(g[i, j]), 1e-12)
                        worst = max(worst, rel)
            configs += 1
        verdict(configs >= 20 and worst <= 1e-4, "gradient check",
                f"max relative error {worst:.3e} (<= 1e-4) over "
                f"{configs} configurations, every coordinate probed")


class TestCriterion4AdaptationEfficacy:
    def test_loss_descent_and_map_gain(self, hard_runs):
        records = hard_runs["records"]
        improved = sum(r[-1]["total"] < r[0]["total"] for r in records)
        frac = improved / len(records)
        map0, map60 = hard_runs["map0"], hard_runs["map60"]
        in_range = MAP0_RANGE[0] <= map0 <= MAP0_RANGE[1]
        verdict(frac >= 0.95 and map60 >= map0 and in_range
                and map60 >= MAP60_FLOOR,
                "adaptation efficacy",
                f"loss improved on {improved}/{len(records)} videos "
                f"(>= 95%), mAP@0.5 {map0:.4f} -> {map60:.4f} at 60 steps "
                f"(floors: start in [{MAP0_RANGE[0]}, {MAP0_RANGE[1]}], "
                f"end >= {MAP60_FLOOR})")


class TestCriterion5WeightLaw:
    def test_normalized_and_strictly_decreasing(self):
        rng = np.random.default_rng(77)
        checked = 0
        worst_sum = 0.0
        for _ in range(1000):
            num_frames = int(rng.integers(5, 3000))
            b = int(rng.integers(0, num_frames))
            e = int(rng.integers(b, num_frames))
            w = log_decay_weights(Segment(b, e), num_frames,
                                  eta=float(rng.uniform(0.5, 3.0)))
            for side in (w.left, w.right):
                if side.size == 0:
                    continue
                worst_sum = max(worst_sum, abs(side.sum() - 1.0))
                assert np.all(side > 0)
                if side.size > 1:
                    assert np.all(np.diff(side) < 0)
            checked += 1
        verdict(checked == 1000 and worst_sum <= 1e-9, "weight law",
                f"per-side sums within {worst_sum:.2e} of 1 (<= 1e-9) and "
                f"strictly decreasing over {checked} random segments")


class TestCriterion6Spectral:
    def test_parseval_and_constant_closed_form(self):
        rng = np.random.default_rng(88)
        worst = 0.0
        for _ in range(1000):
            n_frames = int(rng.integers(8, 300))
            d = int(rng.integers(2, 24))
            frames = rng.standard_normal((n_frames, d))
            b = int(rng.integers(0, n_frames))
            e = int(rng.integers(b, n_frames))
            seg = Segment(b, e)
            energy = dft_energy(frames, seg)
            direct = float((frames[b:e + 1] ** 2).sum())
            worst = max(worst, abs(energy - direct) / max(direct, 1e-12))
        row = rng.standard_normal(16)
        row /= np.linalg.norm(row)
        const = np.tile(row, (40, 1))
        seg = Segment(3, 29)
        const_energy = dft_energy(const, seg)
        n = seg.end - seg.begin + 1
        const_ok = abs(const_energy - n) / n <= 1e-6
        verdict(worst <= 1e-6 and const_ok, "spectral correctness",
                f"Parseval relative error {worst:.2e} (<= 1e-6) on 1000 "
                f"segments; constant unit-row energy {const_energy:.9f} "
                f"== {n}")


class TestCriterion7EvaluatorOracle:
    def test_matches_brute_force_on_500_sets(self):
        rng = np.random.default_rng(99)
        worst = 0.0
        for _ in range(500):
            dets, annots = random_eval_case(rng)
            grid = (0.3, 0.5, 0.7)
            report = evaluate(dets, annots, EvalConfig(tiou_grid=grid))
            ref_ap, ref_map = brute_evaluate(dets, annots, grid)
            for c, row in ref_ap.items():
                for x, v in row.items():
                    worst = max(worst, abs(report.ap[c][x] - v))
            for x in grid:
                worst = max(worst, abs(report.map_at[x] - ref_map[x]))
        from zadkit.feature_store import AnnotationSet, Instance
        annots = AnnotationSet(classes=["a"])
        annots.instances["v"] = [Instance("a", 10.0, 20.0)]
        fixture = evaluate(
            [Detection("v", "a", 40.0, 50.0, 0.9),
             Detection("v", "a", 10.0, 20.0, 0.8)],
            annots, EvalConfig(tiou_grid=(0.5,)))
        half_ok = fixture.map_at[0.5] == 0.5
        verdict(worst <= 1e-9 and half_ok, "evaluator oracle",
                f"max |AP - brute force| {worst:.2e} (<= 1e-9) over 500 "
                f"sets; two-prediction fixture AP == 0.5 exactly")


class TestCriterion8Determinism:
    def test_reruns_and_jobs_are_bit_identical(self, clean_dir, tmp_path):
        base = ["--features", str(clean_dir / "features"),
                "--prompts", str(clean_dir / "prompts.tfeat")]
        gt = str(clean_dir / "annotations.json")
        outs = {}
        for tag, jobs in (("a", "1"), ("b", "1"), ("j8", "8")):
            pred = tmp_path / f"pred_{tag}.json"
            log = tmp_path / f"loss_{tag}.jsonl"
            report = tmp_path / f"report_{tag}.json"
            code = main(["adapt"] + base + [
                "--out", str(pred), "--steps", "5", "--lr", "1e-4",
                "--seed", "11", "--loss-log", str(log), "--jobs", jobs])
            assert code == 0
            assert main(["eval", "--pred", str(pred), "--gt", gt,
                         "--out", str(report)]) == 0
            outs[tag] = (pred.read_bytes(), log.read_bytes(),
                         report.read_bytes())
        rerun_same = outs["a"] == outs["b"]
        jobs_same = outs["a"] == outs["j8"]
        verdict(rerun_same and jobs_same, "determinism",
                "rerun and --jobs 8 byte-identical to --jobs 1 for "
                "predictions, loss logs and reports")


class TestCriterion9ErrorProfile:
    def test_fractions_tp_and_double_detection(self, clean_dir, hard_dir,
                                               hard_runs):
        annots = load_annotations(str(clean_dir / "annotations.json"))
        hard_annots = load_annotations(str(hard_dir / "annotations.json"))
        videos = corpus_videos(clean_dir)
        bank = load_prompts(str(clean_dir / "prompts.tfeat"))
        clean_dets, _ = run_corpus(videos, bank, PipelineConfig())

        sums_ok = True
        double_zero = True
        for dets, gt in ((clean_dets, annots),
                         (hard_runs["detections0"], hard_annots)):
            profile = error_profile(dets, gt)
            for row in profile.values():
                if row["total"]:
                    sums_ok &= abs(sum(row["fractions"].values())
                                   - 1.0) <= 1e-12
                double_zero &= row["counts"]["double_detection"] == 0

        exact = [Detection(vid, inst.label, inst.begin, inst.end, 0.9)
                 for vid, insts in annots.instances.items()
                 for inst in insts]
        exact_profile = error_profile(exact, annots)
        all_tp = all(row["fractions"]["true_positive"] == 1.0
                     for row in exact_profile.values())
        verdict(sums_ok and double_zero and all_tp, "error profile",
                "fractions sum to 1 per budget, exact-match corpus is "
                "100% true positives, double-detection bucket 0 on "
                "pipeline outputs")


class TestCriterion10Ablations:
    def test_directional_orderings(self, hard_runs):
        logoic = hard_runs["map0"]
        similarity = hard_runs["map0_similarity"]
        pcs_rand = hard_runs["map60"]
        rand_far = hard_runs["map60_rand_far"]
        verdict(logoic >= similarity and pcs_rand >= rand_far,
                "ablation directions",
                f"contrast+calibration mAP {logoic:.4f} >= similarity "
                f"{similarity:.4f}; pcs+random {pcs_rand:.4f} >= "
                f"random+farthest {rand_far:.4f}")
