"""Training/evaluation harness: epoch loop, metrics, and multi-run averaging.

One run alternates a full pass over the shuffled training pixels (batches of
S voxels, mean cross-entropy, backprop, L1, momentum SGD at the scheduled
rate) with a full evaluation of the test pixels, starting with an evaluation
of the untrained network so the accuracy curve has max_epoch + 1 points.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .data import (Dataset, DatasetSplit, GroundTruth, SplitConfig, epoch_batches,
                   extract_batch, iterations_per_epoch, labels_at, stratified_split)
from .errors import DatasetError, ShapeMismatchError
from .layers import softmax_cross_entropy
from .netspec import Network, NetworkSpec, build
from .optim import LrSchedule, SgdMomentum, apply_l1, lr_at
from .tensor import Prng


@dataclass
class TrainConfig:
    S: int = 3            # training batch size
    T: int = 200          # evaluation batch size
    max_epoch: int = 30
    seed: int = 0
    l1_lambda: float = 1e-4
    runs: int = 3
    momentum: float = 0.9
    base_lr: float = 0.001

    def __post_init__(self):
        if self.S < 1 or self.T < 1 or self.runs < 1 or self.max_epoch < 0:
            raise ValueError("S, T and runs must be >= 1 and max_epoch >= 0")


class ConfusionMatrix:
    """Rows are true classes, columns predicted; zero-based class indices."""

    def __init__(self, nclass: int):
        self.counts = np.zeros((nclass, nclass), dtype=np.int64)

    def add(self, true_idx: np.ndarray, pred_idx: np.ndarray) -> None:
        np.add.at(self.counts, (true_idx, pred_idx), 1)

    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        total = self.total()
        return float(np.trace(self.counts)) / total if total else 0.0

    def to_lists(self) -> list[list[int]]:
        return self.counts.tolist()


@dataclass
class RunReport:
    epoch_accuracy: list[float]      # max_epoch + 1 entries, first is pre-training
    iter_loss: list[float]
    confusion: list[list[int]]
    param_count: int
    wall_time_s: float               # process CPU seconds (comparable across hosts)
    early_iteration: int
    early_accuracy: float
    iters_per_epoch: int
    max_epoch: int
    seed: int

    @property
    def final_accuracy(self) -> float:
        return self.epoch_accuracy[-1]

    def to_dict(self) -> dict:
        return {
            "epoch_accuracy": self.epoch_accuracy,
            "iter_loss": self.iter_loss,
            "confusion": self.confusion,
            "param_count": self.param_count,
            "wall_time_s": self.wall_time_s,
            "early_iteration": self.early_iteration,
            "early_accuracy": self.early_accuracy,
            "iters_per_epoch": self.iters_per_epoch,
            "max_epoch": self.max_epoch,
            "seed": self.seed,
        }

    def to_json(self, include_timing: bool = True) -> str:
        d = self.to_dict()
        if not include_timing:
            del d["wall_time_s"]
        return json.dumps(d, sort_keys=True)


def evaluate(net: Network, dataset: Dataset, test_coords: np.ndarray, T: int
             ) -> tuple[float, ConfusionMatrix]:
    """Accuracy and confusion matrix over the given pixels, batched by T.

    Deterministic: fixed visiting order, dropout inactive, argmax ties go to
    the lowest class index.
    """
    if len(test_coords) == 0:
        raise DatasetError("cannot evaluate on an empty test set")
    cm = ConfusionMatrix(net.spec.nclass)
    for start in range(0, len(test_coords), T):
        chunk = test_coords[start: start + T]
        voxels = extract_batch(dataset.cube, chunk, net.spec.n)
        true_idx = labels_at(dataset.gt, chunk) - 1
        pred_idx = net.predict(voxels)
        cm.add(true_idx, pred_idx)
    return cm.accuracy(), cm


def early_point(epoch_accuracy: list[float], iters_per_epoch: int) -> tuple[int, float]:
    """First evaluation reaching 95% of the final accuracy, as (iteration, acc).

    Evaluation e happened after e * iters_per_epoch training iterations
    (e = 0 is the pre-training evaluation).
    """
    if not epoch_accuracy:
        raise ValueError("need at least one evaluation")
    threshold = 0.95 * epoch_accuracy[-1]
    for e, acc in enumerate(epoch_accuracy):
        if acc >= threshold:
            return e * iters_per_epoch, acc
    return (len(epoch_accuracy) - 1) * iters_per_epoch, epoch_accuracy[-1]


def run(net: Network, dataset: Dataset, split: DatasetSplit, cfg: TrainConfig) -> RunReport:
    """Train ``net`` on the split per the config and report the full history."""
    n, f, nclass = net.spec.n, net.spec.f, net.spec.nclass
    if dataset.cube.bands != f:
        raise ShapeMismatchError(f"network expects {f} bands, cube has {dataset.cube.bands}")
    if dataset.gt.nclass != nclass:
        raise ShapeMismatchError(
            f"network expects {nclass} classes, ground truth declares {dataset.gt.nclass}")
    if (dataset.cube.height, dataset.cube.width) != (dataset.gt.height, dataset.gt.width):
        raise DatasetError("cube and ground truth dimensions disagree")
    if len(split.train) == 0:
        raise DatasetError("empty training set")

    master = Prng(cfg.seed)
    net.reseed_dropout(master.derive(1))
    shuffle_rng = master.derive(2)
    sched = LrSchedule(max_epoch=max(cfg.max_epoch, 1), base_lr=cfg.base_lr)
    opt = SgdMomentum(momentum=cfg.momentum)
    ipe = iterations_per_epoch(len(split.train), cfg.S)

    t0 = time.process_time()
    losses: list[float] = []
    net.set_mode("infer")
    acc, cm = evaluate(net, dataset, split.test, cfg.T)
    accs = [acc]

    for epoch in range(cfg.max_epoch):
        lr = lr_at(sched, epoch)
        net.set_mode("train")
        for batch in epoch_batches(split.train, cfg.S, shuffle_rng):
            voxels = extract_batch(dataset.cube, batch, n)
            targets = labels_at(dataset.gt, batch) - 1
            logits = net.forward(voxels, train=True)
            loss, grad = softmax_cross_entropy(logits, targets)
            net.zero_grads()
            net.backward(grad)
            if cfg.l1_lambda:
                for _, w, g in net.weight_params(trainable_only=True):
                    apply_l1(g, w, cfg.l1_lambda)
            opt.step(net.params(trainable_only=True), lr)
            losses.append(loss)
        net.set_mode("infer")
        acc, cm = evaluate(net, dataset, split.test, cfg.T)
        accs.append(acc)

    elapsed = time.process_time() - t0
    early_it, early_acc = early_point(accs, ipe)
    return RunReport(
        epoch_accuracy=accs,
        iter_loss=losses,
        confusion=cm.to_lists(),
        param_count=net.param_count(),
        wall_time_s=elapsed,
        early_iteration=early_it,
        early_accuracy=early_acc,
        iters_per_epoch=ipe,
        max_epoch=cfg.max_epoch,
        seed=cfg.seed,
    )


@dataclass
class RunSummary:
    accuracies: list[float]
    mean_accuracy: float
    max_deviation: float
    deviation_flagged: bool          # true when spread exceeds 0.2 accuracy points
    reports: list[RunReport] = field(repr=False, default_factory=list)
    networks: list[Network] = field(repr=False, default_factory=list)


def averaged_runs(spec: NetworkSpec, dataset: Dataset, split_cfg: SplitConfig,
                  cfg: TrainConfig) -> RunSummary:
    """Train ``cfg.runs`` fresh networks on fresh seeded splits and average.

    Run i derives its split and init seeds from cfg.seed + i, so the runs are
    independent but the whole summary is reproducible.
    """
    reports: list[RunReport] = []
    nets: list[Network] = []
    for i in range(cfg.runs):
        run_seed = cfg.seed + i
        split = stratified_split(dataset.gt, split_cfg, Prng(split_cfg.seed).derive(100 + i))
        net = build(spec, Prng(run_seed).derive(3))
        run_cfg = TrainConfig(S=cfg.S, T=cfg.T, max_epoch=cfg.max_epoch, seed=run_seed,
                              l1_lambda=cfg.l1_lambda, runs=1, momentum=cfg.momentum,
                              base_lr=cfg.base_lr)
        reports.append(run(net, dataset, split, run_cfg))
        nets.append(net)
    accs = [r.final_accuracy for r in reports]
    mean = float(np.mean(accs))
    max_dev = float(max(abs(a - mean) for a in accs))
    return RunSummary(
        accuracies=accs,
        mean_accuracy=mean,
        max_deviation=max_dev,
        deviation_flagged=max_dev > 0.002,
        reports=reports,
        networks=nets,
    )


def classify_map(net: Network, cube, T: int = 200) -> np.ndarray:
    """Predict every pixel (labeled or not): [height, width] of class ids 1..nclass."""
    coords = np.stack(
        np.meshgrid(np.arange(cube.width), np.arange(cube.height)), axis=-1
    ).reshape(-1, 2).astype(np.int32)
    out = np.empty(len(coords), dtype=np.uint16)
    net.set_mode("infer")
    for start in range(0, len(coords), T):
        chunk = coords[start: start + T]
        voxels = extract_batch(cube, chunk, net.spec.n)
        out[start: start + len(chunk)] = net.predict(voxels).astype(np.uint16) + 1
    return out.reshape(cube.height, cube.width)


def first_lr_drop_iteration(max_epoch: int, ipe: int) -> int | None:
    """Global iteration index where the learning rate first steps down."""
    if max_epoch < 2:
        return None
    sched = LrSchedule(max_epoch=max_epoch)
    for epoch in range(1, max_epoch):
        if lr_at(sched, epoch) < lr_at(sched, epoch - 1):
            return epoch * ipe
    return None


def loss_step_means(report: RunReport, window: int = 200) -> tuple[float, float] | None:
    """Mean loss over the windows before/after the first LR drop.

    Returns None when the run has no drop or no iterations on one side.
    """
    drop = first_lr_drop_iteration(report.max_epoch, report.iters_per_epoch)
    if drop is None or drop <= 0 or drop >= len(report.iter_loss):
        return None
    pre = report.iter_loss[max(0, drop - window): drop]
    post = report.iter_loss[drop: drop + window]
    return float(np.mean(pre)), float(np.mean(post))


# ---------------------------------------------------------------------------
# Report artifacts

def write_report_json(path, report: RunReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")


def write_curves_csv(loss_path, acc_path, report: RunReport) -> None:
    with open(loss_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss"])
        for i, v in enumerate(report.iter_loss, start=1):
            w.writerow([i, v])
    with open(acc_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "accuracy"])
        for e, v in enumerate(report.epoch_accuracy):
            w.writerow([e * report.iters_per_epoch, v])


def write_pgm(path, label_image: np.ndarray) -> None:
    """P5 map with one byte per pixel carrying the class id."""
    if label_image.max(initial=0) > 255:
        raise ValueError("class ids above 255 do not fit a P5 byte map")
    h, w = label_image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(label_image.astype(np.uint8).tobytes())


def write_map_legend(path, gt: GroundTruth | None = None, nclass: int | None = None,
                     class_names: list[str] | None = None) -> None:
    if gt is not None:
        nclass = gt.nclass
        class_names = gt.class_names
    names = class_names or [f"class_{i}" for i in range(1, nclass + 1)]
    legend = {str(i): names[i - 1] for i in range(1, nclass + 1)}
    legend["0"] = "unlabeled"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(legend, fh, sort_keys=True, indent=2)
        fh.write("\n")
