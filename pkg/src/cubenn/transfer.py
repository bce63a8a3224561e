"""Checkpoints and cross-dataset fine-tuning with frozen feature extractors.

A checkpoint is one file: a UTF-8 JSON manifest line (format version, the
architecture description, a tensor table with byte offsets, caller-provided
metadata) followed by the concatenated little-endian float32 tensors in
manifest order.  Loading is bit-exact, and saving a loaded network
reproduces the original bytes as long as the metadata is carried over.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, DatasetSplit
from .errors import (CheckpointShapeError, CheckpointTruncatedError,
                     CheckpointVersionError, InvalidArchitectureError)
from .netspec import (Network, NetworkSpec, build, spec_from_dict, spec_to_dict,
                      validate)
from .tensor import Prng
from .train import RunReport, TrainConfig, run

FORMAT_VERSION = 1
MAGIC = "CKPT1"


@dataclass
class Checkpoint:
    manifest: dict
    blob: bytes


def save(net: Network, meta: dict | None = None) -> Checkpoint:
    """Serialize every parameter tensor; round-trips bit-exactly."""
    tensors = []
    chunks = []
    offset = 0
    for name, value, _ in net.params(trainable_only=False):
        raw = np.ascontiguousarray(value, dtype="<f4").tobytes()
        tensors.append({
            "name": name,
            "shape": [int(d) for d in value.shape],
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "magic": MAGIC,
        "version": FORMAT_VERSION,
        "spec": spec_to_dict(net.spec),
        "tensors": tensors,
        "meta": meta if meta is not None else {},
    }
    return Checkpoint(manifest=manifest, blob=b"".join(chunks))


def load(ckpt: Checkpoint) -> Network:
    """Rebuild a network whose forward pass is bit-identical to the saved one."""
    manifest = ckpt.manifest
    if manifest.get("magic") != MAGIC:
        raise CheckpointVersionError(f"bad magic {manifest.get('magic')!r}")
    if manifest.get("version") != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"unsupported checkpoint version {manifest.get('version')!r}")
    spec = spec_from_dict(manifest["spec"])
    net = build(spec, Prng(0))
    by_name = {name: value for name, value, _ in net.params(trainable_only=False)}
    for entry in manifest["tensors"]:
        name = entry["name"]
        if name not in by_name:
            raise CheckpointShapeError(f"manifest tensor {name!r} not present in the architecture")
        target = by_name[name]
        shape = tuple(entry["shape"])
        if shape != target.shape:
            raise CheckpointShapeError(
                f"tensor {name!r}: manifest shape {shape} != built shape {target.shape}")
        start, nbytes = entry["offset"], entry["nbytes"]
        if nbytes != int(np.prod(shape)) * 4:
            raise CheckpointShapeError(
                f"tensor {name!r}: {nbytes} bytes inconsistent with shape {shape}")
        if start + nbytes > len(ckpt.blob):
            raise CheckpointTruncatedError(
                f"blob ends at {len(ckpt.blob)} bytes, tensor {name!r} needs {start + nbytes}")
        target[...] = np.frombuffer(ckpt.blob, dtype="<f4", count=nbytes // 4,
                                    offset=start).reshape(shape)
    net.set_mode("infer")
    return net


def write_checkpoint(path, ckpt: Checkpoint) -> None:
    with open(path, "wb") as fh:
        fh.write((json.dumps(ckpt.manifest, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(ckpt.blob)


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            manifest = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointVersionError(f"unreadable manifest: {exc}") from exc
        blob = fh.read()
    expected = sum(t["nbytes"] for t in manifest.get("tensors", []))
    if len(blob) < expected:
        raise CheckpointTruncatedError(f"blob is {len(blob)} bytes, manifest promises {expected}")
    return Checkpoint(manifest=manifest, blob=blob)


def head_spec_for(spec: NetworkSpec, f: int, nclass: int) -> NetworkSpec:
    """The saved architecture re-targeted at a new band/class count.

    Convolution kernels slide along the spectral axis, so they carry over
    unchanged; only the flattened feature length, and with it the fully
    connected head, depends on f and nclass.
    """
    layers = []
    for layer in spec.layers:
        if layer.kind == "fc":
            if layer is spec.layers[-1]:
                layers.append(replace(layer, filters=nclass))
            else:
                layers.append(layer)
        else:
            layers.append(layer)
    new_spec = NetworkSpec(family=spec.family, n=spec.n, f=f, nclass=nclass,
                           layers=tuple(layers))
    validate(new_spec)  # raises InvalidArchitectureError if f collapses an axis
    return new_spec


def fine_tune(ckpt: Checkpoint, dataset: Dataset, split: DatasetSplit,
              cfg: TrainConfig | None = None, freeze: bool = True
              ) -> tuple[Network, RunReport]:
    """Retrain the classifier head of a saved network on a new dataset.

    All convolution weights are loaded from the checkpoint; with ``freeze``
    (the default) they receive no gradient, no L1 penalty, and no optimizer
    state, so they stay bit-identical.  The fully connected layers are
    replaced by freshly initialized ones sized to the new flattened feature
    length and class count.
    """
    if cfg is None:
        cfg = TrainConfig(max_epoch=10)
    source = load(ckpt)
    new_spec = head_spec_for(source.spec, dataset.cube.bands, dataset.gt.nclass)
    net = build(new_spec, Prng(cfg.seed).derive(4))
    if len(net.conv_layers) != len(source.conv_layers):
        raise InvalidArchitectureError("checkpoint and target conv stacks differ")
    for dst, src in zip(net.conv_layers, source.conv_layers):
        dst.weights[...] = src.weights
        dst.bias[...] = src.bias
    net.frozen_features = freeze
    report = run(net, dataset, split, cfg)
    return net, report
