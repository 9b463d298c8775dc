# test_metrics.py - Tests for IoU, nIoU, Pd/Fa and connected-component matching

import csv
import os
import tempfile
from collections import deque

import numpy as np
import pytest

from models.model_config import tiny_config
from models.scene import SynthConfig
from services.data_synth import generate_dataset
from services.errors import ConfigurationError, DimensionError
from services.metrics import (REPORT_NAME, SAMPLES_NAME, binarize, connected_components, evaluate,
                              evaluate_masks, format_report_table, iou, match_targets, niou, pd_fa,
                              write_report_csv)
from services.network import ConductionNet


def flood_fill_components(mask: np.ndarray) -> list:
    """8-connected components as sets of pixels, by breadth-first search"""
    seen = np.zeros(mask.shape, dtype=bool)
    components = []
    height, width = mask.shape
    for i in range(height):
        for j in range(width):
            if not mask[i, j] or seen[i, j]:
                continue
            queue, pixels = deque([(i, j)]), set()
            seen[i, j] = True
            while queue:
                r, c = queue.popleft()
                pixels.add((r, c))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, cc = r + dr, c + dc
                        if 0 <= rr < height and 0 <= cc < width and mask[rr, cc] and not seen[rr, cc]:
                            seen[rr, cc] = True
                            queue.append((rr, cc))
            components.append(pixels)
    return components


def count_iou(pred: np.ndarray, gt: np.ndarray) -> tuple:
    tp = t = p = 0
    for a, b in zip(pred.reshape(-1), gt.reshape(-1)):
        tp += int(a and b)
        t += int(b)
        p += int(a)
    return tp, t, p


def test_components_match_flood_fill():
    print("🔍 Testing connected components against flood fill...")
    rng = np.random.default_rng(0)
    for _ in range(100):
        height, width = rng.integers(1, 21, size=2)
        mask = rng.uniform(size=(height, width)) < rng.uniform(0.1, 0.6)
        labels, count = connected_components(mask)
        oracle = flood_fill_components(mask)
        assert count == len(oracle)
        found = set()
        for pixels in oracle:
            ids = {int(labels[r, c]) for r, c in pixels}
            assert len(ids) == 1 and 0 not in ids
            found |= ids
        assert found == set(range(1, count + 1))


def test_diagonal_pixels_join_under_eight_connectivity():
    mask = np.eye(4, dtype=bool)
    assert connected_components(mask)[1] == 1
    assert connected_components(mask, connectivity=4)[1] == 4
    with pytest.raises(ConfigurationError):
        connected_components(mask, connectivity=6)


def test_perfect_prediction():
    mask = np.zeros((2, 16, 16), dtype=bool)
    mask[0, 3:6, 4:7] = True
    mask[1, 10, 10] = True
    assert iou(mask, mask) == 1.0 and niou(mask, mask) == 1.0
    assert pd_fa(mask, mask) == (1.0, 0.0)


def test_single_sample_iou():
    gt = np.zeros((8, 8), dtype=bool)
    gt[2, 2:5] = True
    pred = np.zeros((8, 8), dtype=bool)
    pred[2, 4:6] = True
    assert iou(pred, gt) == 0.25
    assert niou(pred, gt) == 0.25


def test_niou_differs_from_pooled_iou():
    gt = np.zeros((2, 8, 8), dtype=bool)
    pred = np.zeros((2, 8, 8), dtype=bool)
    gt[0, 1:4, 1:4] = pred[0, 1:4, 1:4] = True
    gt[1, 2, 2:5] = True
    pred[1, 2, 4:6] = True
    assert niou(pred, gt) == 0.625
    assert iou(pred, gt) == 10 / 13


def test_pd_half_with_spurious_blob():
    gt = np.zeros((64, 64), dtype=bool)
    gt[10:12, 10:12] = True
    gt[40:42, 40:42] = True
    pred = np.zeros((64, 64), dtype=bool)
    pred[10:12, 10:12] = True
    pred[55, 5:8] = True
    assert pd_fa(pred, gt) == (0.5, 3 / 4096)


def test_shifted_prediction_is_missed():
    gt = np.zeros((64, 64), dtype=bool)
    gt[20:23, 20:23] = True
    pred = np.zeros((64, 64), dtype=bool)
    pred[20:23, 30:33] = True
    assert pd_fa(pred, gt) == (0.0, 9 / 4096)
    assert pd_fa(pred, gt, match_dist=10.0) == (1.0, 0.0)


def test_greedy_matching_prefers_closest_pairs():
    gt = [(0.0, 0.0), (0.0, 2.0)]
    pred = [(0.0, 1.0), (0.0, 2.5)]
    assert match_targets(gt, pred) == [(1, 1), (0, 0)]
    assert match_targets(gt, pred, match_dist=0.75) == [(1, 1)]
    assert match_targets([], pred) == []


def test_counts_match_pixel_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        pred = rng.uniform(size=(n, 12, 12)) < 0.2
        gt = rng.uniform(size=(n, 12, 12)) < 0.2
        tp, t, p = count_iou(pred, gt)
        assert iou(pred, gt) == (1.0 if t + p - tp == 0 else tp / (t + p - tp))
        per_sample = []
        for a, b in zip(pred, gt):
            s_tp, s_t, s_p = count_iou(a, b)
            per_sample.append(1.0 if s_t + s_p - s_tp == 0 else s_tp / (s_t + s_p - s_tp))
        assert niou(pred, gt) == float(np.mean(per_sample))
        pd, fa = pd_fa(pred, gt)
        assert 0.0 <= pd <= 1.0 and 0.0 <= fa <= 1.0


def test_spurious_component_is_monotone():
    rng = np.random.default_rng(2)
    for _ in range(20):
        gt = np.zeros((64, 64), dtype=bool)
        gt[:40, :40] = rng.uniform(size=(40, 40)) < 0.05
        pred = np.zeros((64, 64), dtype=bool)
        pred[:50, :50] = rng.uniform(size=(50, 50)) < 0.05
        pd_before, fa_before = pd_fa(pred, gt)
        pred[62, 62] = True
        pd_after, fa_after = pd_fa(pred, gt)
        assert pd_after <= pd_before
        assert fa_after > fa_before


def test_no_targets_reports_full_detection():
    empty = np.zeros((3, 8, 8), dtype=bool)
    report = evaluate_masks(empty, empty)
    assert report.pd == 1.0 and report.no_targets
    assert report.iou == 1.0 and report.niou == 1.0 and report.fa == 0.0
    assert "no ground-truth targets" in format_report_table(report)


def test_input_validation():
    with pytest.raises(DimensionError):
        iou(np.zeros((2, 4, 4)), np.zeros((2, 4, 5)))
    with pytest.raises(DimensionError):
        niou(np.zeros((4,)), np.zeros((4,)))
    with pytest.raises(ConfigurationError):
        iou(np.zeros((0, 4, 4)), np.zeros((0, 4, 4)))
    with pytest.raises(ConfigurationError):
        binarize(np.zeros((2, 2)), threshold=1.5)


def test_binarize():
    logits = np.array([[-3.0, 0.0], [0.5, 4.0]])
    assert np.array_equal(binarize(logits), [[False, False], [True, True]])
    assert np.array_equal(binarize(logits, threshold=0.9), [[False, False], [False, True]])


def test_report_agrees_with_metric_functions():
    rng = np.random.default_rng(3)
    pred = rng.uniform(size=(4, 1, 16, 16)) < 0.1
    gt = rng.uniform(size=(4, 1, 16, 16)) < 0.1
    report = evaluate_masks(pred, gt)
    assert report.iou == iou(pred, gt)
    assert report.niou == niou(pred, gt)
    assert (report.pd, report.fa) == pd_fa(pred, gt)
    assert report.n_samples == 4 and len(report.per_sample) == 4
    table = format_report_table(report)
    assert "Fa(e-6)" in table and "nIoU" in table

    with tempfile.TemporaryDirectory() as tmp:
        path = write_report_csv(report, tmp, ids=["a", "b", "c", "d"])
        assert os.path.basename(path) == REPORT_NAME
        with open(path, newline="") as f:
            row = next(csv.DictReader(f))
        assert float(row["iou"]) == report.iou
        with open(os.path.join(tmp, SAMPLES_NAME), newline="") as f:
            samples = list(csv.DictReader(f))
        assert [s["id"] for s in samples] == ["a", "b", "c", "d"]


def test_evaluate_model_on_scenes():
    dataset = generate_dataset(SynthConfig(image_size=(32, 32), target_area=(4, 30), margin=3), n=3, seed=1)
    report = evaluate(ConductionNet(tiny_config(), seed=0), dataset)
    assert report.n_samples == 3
    assert 0.0 <= report.iou <= 1.0 and 0.0 <= report.pd <= 1.0
    with pytest.raises(ConfigurationError):
        evaluate(ConductionNet(tiny_config(), seed=0), dataset, threshold=0.0)


def main():
    """Run all tests and print a summary"""
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    results = []
    for name, fn in tests:
        try:
            fn()
            results.append((name, True))
        except Exception as e:
            print(f"❌ {name} failed: {e}")
            results.append((name, False))

    print("\n" + "=" * 50)
    print("📊 TEST RESULTS:")
    for name, passed in results:
        print(f"{name}: {'✅ PASSED' if passed else '❌ FAILED'}")
    print(f"\nOverall: {sum(p for _, p in results)}/{len(results)} tests passed")


if __name__ == "__main__":
    main()
