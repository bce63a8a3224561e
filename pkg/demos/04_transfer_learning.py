"""Freeze a trained feature extractor and retrain only the classifier head
on a second scene with a different band count and class list.

Run:  python demos/04_transfer_learning.py
"""

import numpy as np

from cubenn import (GroundTruth, HyperCube, Prng, SplitConfig, TrainConfig, build,
                    fine_tune, load, pair, registry, run, save, stratified_split)


def make_scene(nclass, bands, side, noise, seed):
    rng = np.random.default_rng(seed)
    signatures = np.full((nclass, bands), 0.15, np.float32)
    group = max(1, bands // nclass)
    for c in range(nclass):
        signatures[c, c * group:(c + 1) * group] = 0.9
    labels = np.zeros((side, side), np.uint16)
    values = np.zeros((bands, side, side), np.float32)
    stripe = side // nclass
    for c in range(nclass):
        x1 = side if c == nclass - 1 else (c + 1) * stripe
        labels[:, c * stripe:x1] = c + 1
        values[:, :, c * stripe:x1] = signatures[c][:, None, None]
    values += rng.normal(0, noise, values.shape).astype(np.float32)
    return pair(HyperCube(values=values), GroundTruth(labels=labels, nclass=nclass))


source = make_scene(nclass=4, bands=12, side=40, noise=0.2, seed=11)
target = make_scene(nclass=3, bands=11, side=36, noise=0.2, seed=23)
print("source scene: 12 bands, 4 classes; target scene: 11 bands, 3 classes")

spec = registry("c", 3, 12, 4)
src_net = build(spec, Prng(1).derive(3))
src_split = stratified_split(source.gt, SplitConfig(mode="frac", p=0.2, seed=1),
                             Prng(1).derive(100))
src_report = run(src_net, source, src_split, TrainConfig(S=3, T=128, max_epoch=6, seed=1, runs=1))
print(f"source training: final accuracy {src_report.final_accuracy:.4f}")

ckpt = save(src_net, meta={"scene": "synthetic-source"})
print(f"checkpoint: {len(ckpt.blob)} weight bytes, "
      f"{len(ckpt.manifest['tensors'])} tensors")

tgt_split = stratified_split(target.gt, SplitConfig(mode="frac", p=0.2, seed=2),
                             Prng(2).derive(100))
ft_net, ft_report = fine_tune(ckpt, target, tgt_split,
                              TrainConfig(S=3, T=128, max_epoch=4, seed=2, runs=1))
print(f"fine-tuned head on target: final accuracy {ft_report.final_accuracy:.4f}")

trainable = sum(v.size for _, v, _ in ft_net.params(trainable_only=True))
total = ft_net.param_count()
print(f"trainable parameters during fine-tuning: {trainable} of {total} "
      f"(the convolutional features stay constant)")

saved = load(ckpt)
frozen_ok = all(
    np.array_equal(dst.weights, src.weights) and np.array_equal(dst.bias, src.bias)
    for dst, src in zip(ft_net.conv_layers, saved.conv_layers)
)
print(f"frozen conv tensors bit-identical after fine-tuning: {frozen_ok}")
