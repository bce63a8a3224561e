import numpy as np
import pytest

from cubenn import (Prng, SplitConfig, TrainConfig, build, fine_tune, load,
                    read_checkpoint, registry, run, save, stratified_split,
                    write_checkpoint)
from cubenn.errors import (CheckpointShapeError, CheckpointTruncatedError,
                           CheckpointVersionError, InvalidArchitectureError)
from cubenn.transfer import head_spec_for

from conftest import make_synthetic


def _trained_net(dataset, family="c", n=3, seed=0, max_epoch=2, k=40):
    spec = registry(family, n, dataset.cube.bands, dataset.gt.nclass)
    net = build(spec, Prng(seed).derive(3))
    split = stratified_split(dataset.gt, SplitConfig(mode="count", k=k, seed=seed),
                             Prng(seed).derive(100))
    run(net, dataset, split, TrainConfig(S=3, T=64, max_epoch=max_epoch, seed=seed, runs=1))
    return net


# --- checkpoint round trips -----------------------------------------------------

def test_round_trip_forward_equality(noisy_dataset):
    net = _trained_net(noisy_dataset)
    restored = load(save(net))
    voxel = Prng(1).normal((4, 1, noisy_dataset.cube.bands, 3, 3))
    a = net.forward(voxel, train=False)
    b = restored.forward(voxel, train=False)
    assert np.array_equal(a, b)


def test_double_round_trip_is_byte_identical(noisy_dataset):
    net = _trained_net(noisy_dataset)
    first = save(net, meta={"origin": "test"})
    second = save(load(first), meta={"origin": "test"})
    assert first.blob == second.blob
    assert first.manifest == second.manifest


def test_checkpoint_file_round_trip(tmp_path, noisy_dataset):
    net = _trained_net(noisy_dataset)
    ckpt = save(net, meta={"k": 1})
    path = tmp_path / "net.ckpt"
    write_checkpoint(path, ckpt)
    back = read_checkpoint(path)
    assert back.manifest == ckpt.manifest
    assert back.blob == ckpt.blob


def test_truncated_blob_raises(tmp_path, noisy_dataset):
    net = _trained_net(noisy_dataset)
    path = tmp_path / "net.ckpt"
    write_checkpoint(path, save(net))
    raw = path.read_bytes()
    path.write_bytes(raw[:-16])
    with pytest.raises(CheckpointTruncatedError):
        read_checkpoint(path)


def test_version_mismatch_raises(noisy_dataset):
    net = _trained_net(noisy_dataset)
    ckpt = save(net)
    ckpt.manifest["version"] = 99
    with pytest.raises(CheckpointVersionError):
        load(ckpt)


def test_shape_mismatch_raises(noisy_dataset):
    net = _trained_net(noisy_dataset)
    ckpt = save(net)
    ckpt.manifest["tensors"][0]["shape"][0] += 1
    with pytest.raises(CheckpointShapeError):
        load(ckpt)


# --- head retargeting ---------------------------------------------------------------

def test_head_spec_adapts_bands_and_classes(noisy_dataset):
    net = _trained_net(noisy_dataset)  # 12 bands, 4 classes
    new_spec = head_spec_for(net.spec, f=15, nclass=7)
    assert new_spec.f == 15 and new_spec.nclass == 7
    assert new_spec.layers[-1].filters == 7
    conv_old = [l for l in net.spec.layers if l.kind != "fc"]
    conv_new = [l for l in new_spec.layers if l.kind != "fc"]
    assert conv_old == conv_new


def test_head_spec_rejects_impossible_band_count():
    from cubenn import LayerSpec, NetworkSpec
    layers = (LayerSpec("conv", 4, (3, 1, 1), (1, 1, 1), (0, 0, 0), relu=True),
              LayerSpec("fc", 2))
    spec = NetworkSpec("custom", 1, 12, 2, layers)  # unpadded spectral kernel 3
    assert head_spec_for(spec, f=5, nclass=2).f == 5
    with pytest.raises(InvalidArchitectureError):
        head_spec_for(spec, f=2, nclass=2)  # kernel no longer fits the spectral axis


# --- fine-tuning -----------------------------------------------------------------------

def test_fine_tune_freezes_conv_tensors_bitwise():
    source_ds = make_synthetic(nclass=4, bands=12, height=36, width=36, noise=0.15, seed=11)
    target_ds = make_synthetic(nclass=3, bands=10, height=30, width=30, noise=0.10, seed=23)
    ckpt = save(_trained_net(source_ds))
    split = stratified_split(target_ds.gt, SplitConfig(mode="frac", p=0.2, seed=5),
                             Prng(5).derive(100))
    cfg = TrainConfig(S=3, T=64, max_epoch=3, seed=5, runs=1)
    net, report = fine_tune(ckpt, target_ds, split, cfg)

    source = load(ckpt)
    for dst, src in zip(net.conv_layers, source.conv_layers):
        assert np.array_equal(dst.weights, src.weights)
        assert np.array_equal(dst.bias, src.bias)
    assert report.final_accuracy > 0.5  # the head actually learned something


def test_fine_tune_trains_only_the_head():
    source_ds = make_synthetic(nclass=4, bands=12, height=36, width=36, noise=0.15, seed=11)
    target_ds = make_synthetic(nclass=5, bands=12, height=40, width=40, noise=0.10, seed=29)
    ckpt = save(_trained_net(source_ds))
    split = stratified_split(target_ds.gt, SplitConfig(mode="frac", p=0.2, seed=6),
                             Prng(6).derive(100))
    net, _ = fine_tune(ckpt, target_ds, split, TrainConfig(S=3, T=64, max_epoch=1, seed=6, runs=1))

    trainable = net.params(trainable_only=True)
    head_only = sum(v.size for _, v, _ in trainable)
    fc_expected = sum(l.weights.size + l.bias.size for l in net.fc_layers)
    assert head_only == fc_expected
    assert all(name.startswith("fc") for name, _, _ in trainable)


def test_fine_tune_band_count_change_revalidates_trace():
    source_ds = make_synthetic(nclass=4, bands=12, height=36, width=36, noise=0.1, seed=11)
    target_ds = make_synthetic(nclass=4, bands=11, height=36, width=36, noise=0.1, seed=31)
    ckpt = save(_trained_net(source_ds))
    split = stratified_split(target_ds.gt, SplitConfig(mode="frac", p=0.2, seed=7),
                             Prng(7).derive(100))
    net, report = fine_tune(ckpt, target_ds, split,
                            TrainConfig(S=3, T=64, max_epoch=2, seed=7, runs=1))
    assert net.spec.f == 11
    assert len(report.epoch_accuracy) == 3


def test_fine_tune_unfrozen_updates_convs():
    source_ds = make_synthetic(nclass=4, bands=12, height=36, width=36, noise=0.15, seed=11)
    target_ds = make_synthetic(nclass=3, bands=12, height=30, width=30, noise=0.1, seed=37)
    ckpt = save(_trained_net(source_ds))
    split = stratified_split(target_ds.gt, SplitConfig(mode="frac", p=0.2, seed=8),
                             Prng(8).derive(100))
    net, _ = fine_tune(ckpt, target_ds, split,
                       TrainConfig(S=3, T=64, max_epoch=1, seed=8, runs=1), freeze=False)
    source = load(ckpt)
    changed = any(
        not np.array_equal(dst.weights, src.weights)
        for dst, src in zip(net.conv_layers, source.conv_layers)
    )
    assert changed
