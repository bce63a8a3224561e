"""Declarative architecture specs, the a-e family registry, and network building.

Feature geometry follows one frozen convention throughout the registry:

* every convolution slides a length-3 kernel along the spectral axis with
  zero padding 1, so stride-1 layers preserve the band count;
* "convpool" layers are convolutions with spectral stride 2 (learned
  pooling); they carry no activation and use 1x1 spatial kernels;
* the spatial neighborhood collapses through 3x3 unpadded kernels placed on
  the leading stride-1 convolutions: one collapse for n=3, two for n=5,
  three for n=7 (families with only two volumetric slots use a spatial
  stride of 2 in the first to handle n=7);
* the classifier head is one or two fully connected layers; dropout 0.5 is
  attached to the input of the first.

Published parameter budgets for a handful of configurations are kept in
``REFERENCE_PARAM_COUNTS``; traced counts are reported against them rather
than forced to match, since the exact per-layer geometry behind those
budgets is not recoverable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArchitectureError, InvalidGeometryError, ShapeMismatchError
from .layers import Conv3d, Dense, Dropout, relu, relu_backward, size_out
from .optim import init_msra
from .tensor import F32, Prng, Tensor

Triple = tuple[int, int, int]

FAMILIES = ("a", "b", "c", "d", "e")
SPATIAL_SIZES = (1, 3, 5, 7)

# (family, n, f, nclass) -> published parameter budget, for delta reporting.
REFERENCE_PARAM_COUNTS: dict[tuple[str, int, int, int], int] = {
    ("a", 5, 103, 9): 56669,
    ("b", 5, 103, 9): 28749,
    ("c", 3, 102, 9): 6074,
    ("d", 5, 103, 9): 6862,
    ("d", 3, 102, 9): 3681,
    ("d", 5, 176, 13): 2251,
}

D_FAMILY_BUDGET = 7000  # hard cap for family d at n=5, f=103, nclass=9


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a network description.

    kind is "conv", "convpool" or "fc".  For fc layers ``filters`` is the
    output width and the geometry fields are ignored.  ``dropout`` is the
    rate applied to this layer's input (used on the first fc).
    """

    kind: str
    filters: int
    kernel: Triple = (1, 1, 1)
    stride: Triple = (1, 1, 1)
    pad: Triple = (0, 0, 0)
    relu: bool = False
    dropout: float | None = None


@dataclass(frozen=True)
class NetworkSpec:
    family: str
    n: int
    f: int
    nclass: int
    layers: tuple[LayerSpec, ...]


# Conv plan rows: (kind, filters, spectral_stride, volumetric_slot).
# Volumetric slots are the positions that receive 3x3 spatial kernels.
_FAMILY_PLANS: dict[str, dict] = {
    "a": {
        "convs": [("conv", 20, 1, True), ("convpool", 35, 2, True), ("convpool", 35, 2, False)],
        "fc": [50],
        "depth": 3,
    },
    "b": {
        "convs": [("conv", 20, 1, True), ("conv", 35, 1, True),
                  ("convpool", 35, 2, False), ("convpool", 35, 2, False)],
        "fc": [],
        "depth": 4,
    },
    "c": {
        "convs": [("conv", 20, 1, True), ("convpool", 2, 2, False),
                  ("conv", 35, 1, True), ("convpool", 2, 2, False),
                  ("conv", 35, 1, False), ("convpool", 4, 2, False)],
        "fc": [],
        "depth": 6,
    },
    "d": {
        "convs": [("conv", 20, 1, True), ("convpool", 2, 2, False),
                  ("conv", 35, 1, True), ("convpool", 2, 2, False),
                  ("conv", 35, 1, True), ("convpool", 2, 2, False),
                  ("conv", 35, 1, False), ("convpool", 4, 2, False)],
        "fc": [],
        "depth": 8,
    },
    "e": {
        "convs": [("conv", 20, 1, True), ("convpool", 2, 2, False),
                  ("conv", 35, 1, True), ("convpool", 2, 2, False),
                  ("conv", 35, 1, True), ("convpool", 2, 2, False),
                  ("conv", 35, 1, True), ("convpool", 2, 2, False),
                  ("conv", 35, 1, False), ("convpool", 4, 2, False)],
        "fc": [],
        "depth": 10,
    },
}

_DROPOUT_RATE = 0.5


def _collapse_count(n: int, slots: int) -> int:
    return min(slots, {1: 0, 3: 1, 5: 2, 7: 3}[n])


def _spatial_plan(n: int, slots: int) -> list[tuple[int, int]]:
    """Per-volumetric-slot (spatial kernel, spatial stride) pairs."""
    if n == 7 and slots == 2:
        return [(3, 2), (3, 1)]  # 7 -> 3 -> 1
    return [(3, 1)] * _collapse_count(n, slots)


def family_counts(family: str, n: int) -> tuple[int, int, int]:
    """(volumetric convs, spectral-only convs, fc layers) for a family at n."""
    plan = _FAMILY_PLANS[family]
    slots = sum(1 for row in plan["convs"] if row[3])
    n3d = len(_spatial_plan(n, slots))
    return n3d, len(plan["convs"]) - n3d, len(plan["fc"]) + 1


def registry(family: str, n: int, f: int, nclass: int) -> NetworkSpec:
    """Canonical spec for one of the embedded families a-e."""
    if family not in FAMILIES:
        raise InvalidArchitectureError(f"unknown family {family!r}, expected one of {FAMILIES}")
    if n not in SPATIAL_SIZES:
        raise InvalidArchitectureError(f"spatial neighborhood must be one of {SPATIAL_SIZES}, got {n}")
    spec = _registry_spec(family, n, f, nclass)
    validate(spec)
    if family == "d":
        canonical = _registry_spec("d", 5, 103, 9)
        budget = param_count(canonical)
        if budget >= D_FAMILY_BUDGET:
            raise InvalidArchitectureError(
                f"family d self-check failed: {budget} parameters at n=5/f=103/nclass=9 "
                f"(must stay below {D_FAMILY_BUDGET})"
            )
    return spec


def _registry_spec(family: str, n: int, f: int, nclass: int) -> NetworkSpec:
    plan = _FAMILY_PLANS[family]
    slots = sum(1 for row in plan["convs"] if row[3])
    spatial = _spatial_plan(n, slots)

    layers: list[LayerSpec] = []
    slot_idx = 0
    for kind, filters, s_spec, volumetric in plan["convs"]:
        if volumetric and slot_idx < len(spatial):
            k_sp, s_sp = spatial[slot_idx]
            slot_idx += 1
        else:
            k_sp, s_sp = 1, 1
        layers.append(LayerSpec(
            kind=kind,
            filters=filters,
            kernel=(3, k_sp, k_sp),
            stride=(s_spec, s_sp, s_sp),
            pad=(1, 0, 0),
            relu=(kind == "conv"),
        ))

    widths = list(plan["fc"]) + [nclass]
    for j, width in enumerate(widths):
        layers.append(LayerSpec(
            kind="fc",
            filters=width,
            relu=(j < len(widths) - 1),
            dropout=_DROPOUT_RATE if j == 0 else None,
        ))
    return NetworkSpec(family=family, n=n, f=f, nclass=nclass, layers=tuple(layers))


def shape_trace(spec: NetworkSpec) -> list[tuple[int, ...]]:
    """Per-layer output shapes: (C, F, H, W) for convs, (width,) for fc layers.

    Raises InvalidArchitectureError naming the first layer whose geometry
    fails (any axis dropping below size 1).
    """
    shapes, _, _ = _trace(spec)
    return shapes


def validate(spec: NetworkSpec) -> list[str]:
    """Check the spec end to end; returns flooring warnings, raises on errors."""
    _, _, warnings = _trace(spec)
    return warnings


def _trace(spec: NetworkSpec) -> tuple[list[tuple[int, ...]], int, list[str]]:
    if spec.n < 1 or spec.n % 2 == 0:
        raise InvalidArchitectureError(f"spatial neighborhood must be odd and positive, got {spec.n}")
    if spec.f < 1:
        raise InvalidArchitectureError(f"band count must be positive, got {spec.f}")
    if spec.nclass < 2:
        raise InvalidArchitectureError(f"need at least 2 classes, got {spec.nclass}")
    if not spec.layers:
        raise InvalidArchitectureError("empty layer list")

    shapes: list[tuple[int, ...]] = []
    warnings: list[str] = []
    shape = (1, spec.f, spec.n, spec.n)  # (C, F, H, W)
    flatten_dim = None
    seen_fc = False
    axis_names = ("spectral", "height", "width")

    for idx, layer in enumerate(spec.layers):
        label = f"layer {idx} ({layer.kind}[{layer.filters}])"
        if layer.kind in ("conv", "convpool"):
            if seen_fc:
                raise InvalidArchitectureError(f"{label}: convolution after a fully connected layer")
            if layer.kind == "convpool" and all(s < 2 for s in layer.stride):
                raise InvalidArchitectureError(f"{label}: convpool requires stride >= 2 on some axis")
            out_axes = []
            for a in range(3):
                try:
                    out_axes.append(size_out(shape[1 + a], layer.kernel[a], layer.pad[a], layer.stride[a]))
                except InvalidGeometryError as exc:
                    raise InvalidArchitectureError(f"{label}: {axis_names[a]} axis: {exc}") from exc
                slack = (shape[1 + a] - layer.kernel[a] + 2 * layer.pad[a]) % layer.stride[a]
                if slack:
                    warnings.append(
                        f"{label}: {axis_names[a]} axis discards {slack} position(s) to flooring"
                    )
            shape = (layer.filters,) + tuple(out_axes)
            shapes.append(shape)
        elif layer.kind == "fc":
            if not seen_fc:
                flatten_dim = shape[0] * shape[1] * shape[2] * shape[3]
                seen_fc = True
            shapes.append((layer.filters,))
            shape = (layer.filters, 1, 1, 1)
        else:
            raise InvalidArchitectureError(f"{label}: unknown layer kind {layer.kind!r}")

    if not seen_fc:
        raise InvalidArchitectureError("network must end in at least one fully connected layer")
    if spec.layers[-1].kind != "fc" or spec.layers[-1].filters != spec.nclass:
        raise InvalidArchitectureError(
            f"final layer must be fc[{spec.nclass}] to cover the target classes"
        )
    return shapes, flatten_dim, warnings


def param_count(spec: NetworkSpec) -> int:
    """Trainable parameters implied by the spec: weights plus biases."""
    total = 0
    in_channels = 1
    flatten = None
    shapes, flatten_dim, _ = _trace(spec)
    for layer, shape in zip(spec.layers, shapes):
        if layer.kind == "fc":
            in_dim = flatten_dim if flatten is None else flatten
            total += in_dim * layer.filters + layer.filters
            flatten = layer.filters
        else:
            kvol = layer.kernel[0] * layer.kernel[1] * layer.kernel[2]
            total += layer.filters * in_channels * kvol + layer.filters
            in_channels = layer.filters
    return total


class Network:
    """Built layers with weights, gradients, and train/infer mode.

    Single-owner during training; safe to share read-only for inference.
    """

    def __init__(self, spec: NetworkSpec, conv_layers: list[Conv3d],
                 fc_layers: list[Dense], dropout: Dropout | None, flatten_dim: int):
        self.spec = spec
        self.conv_layers = conv_layers
        self.fc_layers = fc_layers
        self.dropout = dropout
        self.flatten_dim = flatten_dim
        self.conv_relu = [l.relu for l in spec.layers if l.kind != "fc"]
        self.fc_relu = [l.relu for l in spec.layers if l.kind == "fc"]
        self.mode = "train"
        self.frozen_features = False
        self._dropout_rng: Prng | None = None
        self._pre_relu_conv: list = [None] * len(conv_layers)
        self._pre_relu_fc: list = [None] * len(fc_layers)
        self._conv_out_shape = None

    def set_mode(self, mode: str) -> None:
        if mode not in ("train", "infer"):
            raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
        self.mode = mode
        if self.dropout is not None:
            self.dropout.mode = mode

    def reseed_dropout(self, p: Prng) -> None:
        self._dropout_rng = p

    def forward(self, x: Tensor, train: bool | None = None) -> Tensor:
        """[N, 1, f, n, n] voxels -> [N, nclass] logits."""
        train = (self.mode == "train") if train is None else train
        expected = (1, self.spec.f, self.spec.n, self.spec.n)
        if x.ndim != 5 or tuple(x.shape[1:]) != expected:
            raise ShapeMismatchError(f"expected voxels [N, {expected}], got {tuple(x.shape)}")
        h = x.astype(F32, copy=False)
        for i, layer in enumerate(self.conv_layers):
            z = layer.forward(h, cache=train)
            if self.conv_relu[i]:
                self._pre_relu_conv[i] = z if train else None
                h = relu(z)
            else:
                h = z
        self._conv_out_shape = h.shape if train else None
        h = h.reshape(h.shape[0], -1)
        if self.dropout is not None and train:
            rng = self._dropout_rng
            if rng is None:
                raise RuntimeError("dropout enabled but no rng attached; call reseed_dropout()")
            self.dropout.mode = "train"
            h = self.dropout.forward(h, rng)
        elif self.dropout is not None:
            self.dropout.mask = None
        for j, fc in enumerate(self.fc_layers):
            z = fc.forward(h, cache=train)
            if self.fc_relu[j]:
                self._pre_relu_fc[j] = z if train else None
                h = relu(z)
            else:
                h = z
        return h

    def backward(self, grad_logits: Tensor) -> None:
        """Propagate loss gradients into every trainable layer's grad buffers."""
        g = grad_logits.astype(F32, copy=False)
        for j in range(len(self.fc_layers) - 1, -1, -1):
            if self.fc_relu[j]:
                g = relu_backward(g, self._pre_relu_fc[j])
            g = self.fc_layers[j].backward(g)
        if self.dropout is not None:
            g = self.dropout.backward(g)
        if self.frozen_features:
            return
        g = g.reshape(self._conv_out_shape)
        for i in range(len(self.conv_layers) - 1, -1, -1):
            if self.conv_relu[i]:
                g = relu_backward(g, self._pre_relu_conv[i])
            g = self.conv_layers[i].backward(g)

    def zero_grads(self) -> None:
        for _, _, grad in self.params(trainable_only=False):
            grad.fill(0)

    def params(self, trainable_only: bool = True):
        """(name, value, grad) triples; frozen features are excluded when asked."""
        out = []
        if not (trainable_only and self.frozen_features):
            for i, layer in enumerate(self.conv_layers):
                out.append((f"conv{i}.weights", layer.weights, layer.grad_weights))
                out.append((f"conv{i}.bias", layer.bias, layer.grad_bias))
        for j, layer in enumerate(self.fc_layers):
            out.append((f"fc{j}.weights", layer.weights, layer.grad_weights))
            out.append((f"fc{j}.bias", layer.bias, layer.grad_bias))
        return out

    def weight_params(self, trainable_only: bool = True):
        return [p for p in self.params(trainable_only) if p[0].endswith(".weights")]

    def predict(self, x: Tensor) -> np.ndarray:
        """Argmax class indices (ties resolve to the lowest index)."""
        logits = self.forward(x, train=False)
        return np.argmax(logits, axis=1)

    def param_count(self) -> int:
        return sum(int(v.size) for _, v, _ in self.params(trainable_only=False))


def build(spec: NetworkSpec, p: Prng) -> Network:
    """Materialize a spec: variance-scaled Gaussian weights, zero biases."""
    shapes, flatten_dim, _ = _trace(spec)
    conv_layers: list[Conv3d] = []
    fc_layers: list[Dense] = []
    dropout = None
    in_channels = 1
    in_dim = flatten_dim
    for layer, shape in zip(spec.layers, shapes):
        if layer.kind == "fc":
            dense = Dense(in_dim, layer.filters)
            dense.weights[...] = init_msra(dense.weights.shape, in_dim, p)
            fc_layers.append(dense)
            if layer.dropout is not None and dropout is None:
                dropout = Dropout(layer.dropout)
            in_dim = layer.filters
        else:
            conv = Conv3d(in_channels, layer.filters, layer.kernel, layer.stride, layer.pad)
            fan_in = in_channels * layer.kernel[0] * layer.kernel[1] * layer.kernel[2]
            conv.weights[...] = init_msra(conv.weights.shape, fan_in, p)
            conv_layers.append(conv)
            in_channels = layer.filters
    net = Network(spec, conv_layers, fc_layers, dropout, flatten_dim)
    net.reseed_dropout(p.derive(0xD0))
    return net


# ---------------------------------------------------------------------------
# Text serialization: one layer per line, e.g.
#   conv 20 3,3,3 1,1,1 1,0,0 relu
#   convpool 2 3,1,1 2,1,1 1,0,0
#   fc 9
# fc lines accept optional "relu" and "dropout=0.5" flags.

def format_spec(spec: NetworkSpec) -> str:
    lines = [f"# cubenn spec family={spec.family} n={spec.n} f={spec.f} nclass={spec.nclass}"]
    for layer in spec.layers:
        if layer.kind == "fc":
            parts = ["fc", str(layer.filters)]
            if layer.relu:
                parts.append("relu")
            if layer.dropout is not None:
                parts.append(f"dropout={layer.dropout}")
        else:
            parts = [
                layer.kind,
                str(layer.filters),
                ",".join(map(str, layer.kernel)),
                ",".join(map(str, layer.stride)),
                ",".join(map(str, layer.pad)),
            ]
            if layer.relu:
                parts.append("relu")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def _parse_triple(token: str, what: str) -> Triple:
    parts = token.split(",")
    if len(parts) != 3:
        raise InvalidArchitectureError(f"{what} must be three comma-separated ints, got {token!r}")
    return tuple(int(v) for v in parts)


def parse_spec(text: str, n: int, f: int, nclass: int, family: str = "custom") -> NetworkSpec:
    layers: list[LayerSpec] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0].lower()
        try:
            if kind == "fc":
                width = int(tokens[1])
                relu_flag = "relu" in tokens[2:]
                rate = None
                for tok in tokens[2:]:
                    if tok.startswith("dropout="):
                        rate = float(tok.split("=", 1)[1])
                layers.append(LayerSpec("fc", width, relu=relu_flag, dropout=rate))
            elif kind in ("conv", "convpool"):
                filters = int(tokens[1])
                kernel = _parse_triple(tokens[2], "kernel")
                stride = _parse_triple(tokens[3], "stride")
                pad = _parse_triple(tokens[4], "pad")
                relu_flag = "relu" in tokens[5:]
                layers.append(LayerSpec(kind, filters, kernel, stride, pad, relu=relu_flag))
            else:
                raise InvalidArchitectureError(f"line {lineno}: unknown layer kind {kind!r}")
        except (ValueError, IndexError) as exc:
            raise InvalidArchitectureError(f"line {lineno}: cannot parse {raw!r}: {exc}") from exc
    spec = NetworkSpec(family=family, n=n, f=f, nclass=nclass, layers=tuple(layers))
    validate(spec)
    return spec


def spec_to_dict(spec: NetworkSpec) -> dict:
    return {
        "family": spec.family,
        "n": spec.n,
        "f": spec.f,
        "nclass": spec.nclass,
        "layers": [
            {
                "kind": l.kind,
                "filters": l.filters,
                "kernel": list(l.kernel),
                "stride": list(l.stride),
                "pad": list(l.pad),
                "relu": l.relu,
                "dropout": l.dropout,
            }
            for l in spec.layers
        ],
    }


def spec_from_dict(d: dict) -> NetworkSpec:
    layers = tuple(
        LayerSpec(
            kind=l["kind"],
            filters=int(l["filters"]),
            kernel=tuple(l["kernel"]),
            stride=tuple(l["stride"]),
            pad=tuple(l["pad"]),
            relu=bool(l["relu"]),
            dropout=None if l.get("dropout") is None else float(l["dropout"]),
        )
        for l in d["layers"]
    )
    return NetworkSpec(family=d["family"], n=int(d["n"]), f=int(d["f"]),
                       nclass=int(d["nclass"]), layers=layers)
