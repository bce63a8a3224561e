import json

import numpy as np
import pytest

from cubenn import (ConfusionMatrix, Prng, SplitConfig, TrainConfig, build,
                    classify_map, evaluate, registry, run, stratified_split)
from cubenn.errors import DatasetError, ShapeMismatchError
from cubenn.train import averaged_runs, early_point, first_lr_drop_iteration, loss_step_means

from conftest import make_synthetic


def _toy_run(dataset, family="b", n=1, k=50, max_epoch=5, seed=0, **cfg_kw):
    spec = registry(family, n, dataset.cube.bands, dataset.gt.nclass)
    net = build(spec, Prng(seed).derive(3))
    split = stratified_split(dataset.gt, SplitConfig(mode="count", k=k, seed=seed),
                             Prng(seed).derive(100))
    cfg = TrainConfig(S=3, T=64, max_epoch=max_epoch, seed=seed, runs=1, **cfg_kw)
    return net, split, run(net, dataset, split, cfg)


# --- the training loop ------------------------------------------------------------

def test_separable_toy_reaches_full_accuracy_within_five_epochs(toy_dataset):
    _, _, report = _toy_run(toy_dataset)
    assert max(report.epoch_accuracy) == 1.0
    assert report.final_accuracy == 1.0


def test_zero_epochs_reports_only_initial_evaluation(toy_dataset):
    _, _, report = _toy_run(toy_dataset, max_epoch=0)
    assert len(report.epoch_accuracy) == 1
    assert report.iter_loss == []
    assert report.early_iteration == 0


def test_fixed_seed_reproduces_loss_curve_bitwise(toy_dataset):
    _, _, a = _toy_run(toy_dataset, seed=3)
    _, _, b = _toy_run(toy_dataset, seed=3)
    assert a.iter_loss == b.iter_loss
    assert a.epoch_accuracy == b.epoch_accuracy
    assert a.confusion == b.confusion


def test_report_json_deterministic_apart_from_timing(toy_dataset):
    _, _, a = _toy_run(toy_dataset, seed=5)
    _, _, b = _toy_run(toy_dataset, seed=5)
    assert a.to_json(include_timing=False) == b.to_json(include_timing=False)
    parsed = json.loads(a.to_json())
    assert "wall_time_s" in parsed


def test_first_epoch_loss_beats_uniform_prediction(noisy_dataset):
    _, _, report = _toy_run(noisy_dataset, family="c", n=3, k=80, max_epoch=1)
    uniform = np.log(noisy_dataset.gt.nclass)
    first_epoch = report.iter_loss[: report.iters_per_epoch]
    assert np.mean(first_epoch) < uniform


def test_geometry_mismatch_fails_before_any_step(toy_dataset):
    spec = registry("b", 1, toy_dataset.cube.bands + 1, toy_dataset.gt.nclass)
    net = build(spec, Prng(0))
    split = stratified_split(toy_dataset.gt, SplitConfig(mode="count", k=5, seed=0), Prng(0))
    with pytest.raises(ShapeMismatchError):
        run(net, toy_dataset, split, TrainConfig(max_epoch=1, runs=1))


def test_report_invariants(toy_dataset):
    _, _, report = _toy_run(toy_dataset, seed=1)
    total_iters = report.max_epoch * report.iters_per_epoch
    assert report.early_accuracy >= 0.95 * report.final_accuracy
    assert 0 <= report.early_iteration <= total_iters
    assert len(report.iter_loss) == total_iters
    assert np.array(report.confusion).sum() == len(_toy_run(toy_dataset, seed=1)[1].test)


# --- evaluation ---------------------------------------------------------------------

def test_confusion_oracle_predictor_is_diagonal():
    cm = ConfusionMatrix(4)
    labels = np.array([0, 1, 2, 3, 3, 2])
    cm.add(labels, labels)  # predictions fed back from the labels
    assert cm.accuracy() == 1.0
    assert np.count_nonzero(cm.counts - np.diag(np.diag(cm.counts))) == 0


def test_constant_predictor_on_balanced_set():
    dataset = make_synthetic(nclass=9, bands=4, height=27, width=27)
    spec = registry("b", 1, 4, 9)
    net = build(spec, Prng(0))
    for _, value, _ in net.params(False):
        value.fill(0.0)  # all-zero net: logits tie, argmax picks class index 0
    coords = dataset.gt.labeled_coords()
    acc, cm = evaluate(net, dataset, coords, T=128)
    assert acc == pytest.approx(1.0 / 9.0)
    assert cm.counts[:, 0].sum() == cm.total()


def test_accuracy_equals_confusion_trace_ratio(toy_dataset):
    net, split, _ = _toy_run(toy_dataset, max_epoch=2)
    acc, cm = evaluate(net, toy_dataset, split.test, T=50)
    assert acc == pytest.approx(np.trace(cm.counts) / cm.counts.sum())


def test_empty_test_set_rejected(toy_dataset):
    net, _, _ = _toy_run(toy_dataset, max_epoch=0)
    with pytest.raises(DatasetError):
        evaluate(net, toy_dataset, np.empty((0, 2), np.int32), T=8)


def test_evaluation_is_dropout_free_and_repeatable(toy_dataset):
    net, split, _ = _toy_run(toy_dataset, max_epoch=2)
    a, _ = evaluate(net, toy_dataset, split.test, T=32)
    b, _ = evaluate(net, toy_dataset, split.test, T=32)
    assert a == b


# --- early point -----------------------------------------------------------------------

def test_early_point_monotone_curve():
    accs = [0.10, 0.50, 0.80, 0.883, 0.90, 0.929]
    it, acc = early_point(accs, iters_per_epoch=100)
    assert acc >= 0.95 * 0.929  # threshold 0.88255
    assert (it, acc) == (300, 0.883)


def test_early_point_single_evaluation():
    assert early_point([0.7], 50) == (0, 0.7)


def test_early_point_constant_curve():
    assert early_point([0.6, 0.6, 0.6], 10) == (0, 0.6)


# --- averaged runs ------------------------------------------------------------------------

def test_averaged_single_run_mean_is_the_run(toy_dataset):
    spec = registry("b", 1, toy_dataset.cube.bands, toy_dataset.gt.nclass)
    cfg = TrainConfig(S=3, T=64, max_epoch=2, seed=9, runs=1)
    summary = averaged_runs(spec, toy_dataset, SplitConfig(mode="count", k=30, seed=9), cfg)
    assert summary.mean_accuracy == summary.accuracies[0]
    assert summary.max_deviation == 0.0


def test_averaged_runs_mean_bounded_by_extremes(noisy_dataset):
    spec = registry("b", 1, noisy_dataset.cube.bands, noisy_dataset.gt.nclass)
    cfg = TrainConfig(S=3, T=128, max_epoch=2, seed=4, runs=3)
    summary = averaged_runs(spec, noisy_dataset, SplitConfig(mode="count", k=40, seed=4), cfg)
    assert min(summary.accuracies) <= summary.mean_accuracy <= max(summary.accuracies)
    assert len(summary.reports) == 3


def test_averaged_runs_zero_deviation_when_all_converge(toy_dataset):
    spec = registry("b", 1, toy_dataset.cube.bands, toy_dataset.gt.nclass)
    cfg = TrainConfig(S=3, T=64, max_epoch=4, seed=0, runs=3)
    summary = averaged_runs(spec, toy_dataset, SplitConfig(mode="count", k=50, seed=0), cfg)
    assert summary.accuracies == [1.0, 1.0, 1.0]
    assert summary.max_deviation == 0.0
    assert not summary.deviation_flagged


def test_averaged_runs_deterministic(toy_dataset):
    spec = registry("b", 1, toy_dataset.cube.bands, toy_dataset.gt.nclass)
    cfg = TrainConfig(S=3, T=64, max_epoch=1, seed=2, runs=2)
    split_cfg = SplitConfig(mode="count", k=20, seed=2)
    a = averaged_runs(spec, toy_dataset, split_cfg, cfg)
    b = averaged_runs(spec, toy_dataset, split_cfg, cfg)
    assert a.accuracies == b.accuracies


# --- classification maps --------------------------------------------------------------------

def test_classify_map_dimensions(toy_dataset):
    net, _, _ = _toy_run(toy_dataset, max_epoch=2)
    label_img = classify_map(net, toy_dataset.cube, T=64)
    assert label_img.shape == (toy_dataset.cube.height, toy_dataset.cube.width)
    assert label_img.min() >= 1 and label_img.max() <= toy_dataset.gt.nclass


def test_classify_map_agrees_with_evaluate(toy_dataset):
    net, split, _ = _toy_run(toy_dataset)
    label_img = classify_map(net, toy_dataset.cube, T=64)
    _, cm = evaluate(net, toy_dataset, split.test, T=64)
    from cubenn import extract_batch
    preds = net.predict(extract_batch(toy_dataset.cube, split.test, net.spec.n)) + 1
    for (x, y), p in zip(split.test, preds):
        assert label_img[y, x] == p


def test_classify_map_constant_on_uniform_cube():
    from cubenn import HyperCube
    cube = HyperCube(values=np.full((6, 10, 10), 0.4, np.float32))
    spec = registry("b", 1, 6, 3)
    net = build(spec, Prng(8))
    label_img = classify_map(net, cube, T=32)
    assert len(np.unique(label_img)) == 1


# --- learning-rate step behavior ---------------------------------------------------------------

def test_loss_step_around_first_lr_drop():
    dataset = make_synthetic(nclass=9, bands=16, height=63, width=63, noise=0.5, seed=11)
    spec = registry("c", 3, 16, 9)
    net = build(spec, Prng(5).derive(3))
    split = stratified_split(dataset.gt, SplitConfig(mode="count", k=200, seed=5),
                             Prng(5).derive(100))
    cfg = TrainConfig(S=3, T=200, max_epoch=6, seed=5, runs=1, base_lr=0.005)
    report = run(net, dataset, split, cfg)
    drop = first_lr_drop_iteration(cfg.max_epoch, report.iters_per_epoch)
    assert drop == 2 * report.iters_per_epoch
    pre, post = loss_step_means(report)
    assert post <= pre
