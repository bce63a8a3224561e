"""Hyperspectral cube and ground-truth model, file IO, voxels, and splits.

File formats (shared with external tooling):

``.hsc`` cube file: one UTF-8 JSON header line
``{"magic":"HSC1","width":W,"height":H,"bands":B,"dtype":"f32le","layout":"bsq"}``
followed by W*H*B little-endian float32 values in band-sequential order
(band-major, then row-major within a band).

``.hsg`` ground-truth file: same pattern with
``{"magic":"HSG1",...,"dtype":"u16le","layout":"row-major","nclass":K,"class_names":[...]}``
followed by H*W little-endian uint16 labels; 0 marks unlabeled pixels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DatasetError
from .tensor import F32, Prng, Tensor


@dataclass
class HyperCube:
    """Raw spectral image; values indexed [band, y, x]."""

    values: Tensor  # float32 [bands, height, width]
    scale_mode: str = "raw"

    def __post_init__(self):
        if self.values.ndim != 3:
            raise DatasetError(f"cube values must be [bands, height, width], got {self.values.shape}")
        if self.values.shape[0] < 1:
            raise DatasetError("cube needs at least one band")
        self.values = np.ascontiguousarray(self.values, dtype=F32)

    @property
    def bands(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass
class GroundTruth:
    """Per-pixel labels; 0 = unlabeled, classes are 1..nclass."""

    labels: np.ndarray  # uint16 [height, width]
    nclass: int
    class_names: list[str] | None = None

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint16)
        if self.labels.ndim != 2:
            raise DatasetError(f"labels must be 2-D, got shape {self.labels.shape}")
        if self.labels.max(initial=0) > self.nclass:
            raise DatasetError(
                f"label {int(self.labels.max())} exceeds declared class count {self.nclass}"
            )
        if self.class_names is not None and len(self.class_names) != self.nclass:
            raise DatasetError("class_names length must equal nclass")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def labeled_coords(self) -> np.ndarray:
        """All labeled pixel coordinates as [N, 2] (x, y) int32."""
        ys, xs = np.nonzero(self.labels)
        return np.stack([xs, ys], axis=1).astype(np.int32)


class Dataset(NamedTuple):
    cube: HyperCube
    gt: GroundTruth


def pair(cube: HyperCube, gt: GroundTruth) -> Dataset:
    if (cube.height, cube.width) != (gt.height, gt.width):
        raise DatasetError(
            f"dimension mismatch: cube {cube.height}x{cube.width} vs labels {gt.height}x{gt.width}"
        )
    return Dataset(cube, gt)


# ---------------------------------------------------------------------------
# File IO

def _read_header(fh, magic: str) -> dict:
    line = fh.readline()
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetError(f"unreadable header: {exc}") from exc
    if header.get("magic") != magic:
        raise DatasetError(f"expected magic {magic!r}, got {header.get('magic')!r}")
    return header


def write_hsc(path, cube: HyperCube) -> None:
    header = {
        "magic": "HSC1",
        "width": cube.width,
        "height": cube.height,
        "bands": cube.bands,
        "dtype": "f32le",
        "layout": "bsq",
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(cube.values.astype("<f4", copy=False).tobytes())


def read_hsc(path) -> HyperCube:
    with open(path, "rb") as fh:
        header = _read_header(fh, "HSC1")
        if header.get("dtype") != "f32le" or header.get("layout") != "bsq":
            raise DatasetError(f"unsupported cube encoding: {header}")
        w, h, b = int(header["width"]), int(header["height"]), int(header["bands"])
        raw = fh.read()
    expected = w * h * b * 4
    if len(raw) != expected:
        raise DatasetError(f"cube payload is {len(raw)} bytes, expected {expected}")
    values = np.frombuffer(raw, dtype="<f4").reshape(b, h, w)
    return HyperCube(values=values.astype(F32))


def write_hsg(path, gt: GroundTruth) -> None:
    header = {
        "magic": "HSG1",
        "width": gt.width,
        "height": gt.height,
        "dtype": "u16le",
        "layout": "row-major",
        "nclass": gt.nclass,
        "class_names": gt.class_names or [f"class_{i}" for i in range(1, gt.nclass + 1)],
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(gt.labels.astype("<u2", copy=False).tobytes())


def read_hsg(path) -> GroundTruth:
    with open(path, "rb") as fh:
        header = _read_header(fh, "HSG1")
        if header.get("dtype") != "u16le" or header.get("layout") != "row-major":
            raise DatasetError(f"unsupported label encoding: {header}")
        w, h = int(header["width"]), int(header["height"])
        raw = fh.read()
    expected = w * h * 2
    if len(raw) != expected:
        raise DatasetError(f"label payload is {len(raw)} bytes, expected {expected}")
    labels = np.frombuffer(raw, dtype="<u2").reshape(h, w)
    return GroundTruth(labels=labels.astype(np.uint16), nclass=int(header["nclass"]),
                       class_names=list(header.get("class_names") or []) or None)


# ---------------------------------------------------------------------------
# Voxels

def _reflect(idx: np.ndarray, size: int) -> np.ndarray:
    """Mirror out-of-range indices at the borders (no edge repetition)."""
    if size == 1:
        return np.zeros_like(idx)
    period = 2 * size - 2
    idx = np.abs(idx) % period
    return np.where(idx < size, idx, period - idx)


def _reflect_indices(center: int, n: int, size: int) -> np.ndarray:
    """Neighborhood indices around ``center`` mirrored at the image borders."""
    half = n // 2
    return _reflect(np.arange(center - half, center + half + 1), size)


def extract_voxel(cube: HyperCube, x: int, y: int, n: int) -> Tensor:
    """The n x n neighborhood of (x, y) across all bands: [1, bands, n, n].

    Out-of-image neighbors are filled by reflection, never by invented values.
    """
    if n < 1 or n % 2 == 0:
        raise DatasetError(f"neighborhood size must be odd and positive, got {n}")
    if not (0 <= x < cube.width and 0 <= y < cube.height):
        raise DatasetError(f"pixel ({x}, {y}) outside {cube.width}x{cube.height} image")
    ys = _reflect_indices(y, n, cube.height)
    xs = _reflect_indices(x, n, cube.width)
    return cube.values[:, ys[:, None], xs[None, :]][None]


def extract_batch(cube: HyperCube, coords: np.ndarray, n: int) -> Tensor:
    """Stack voxels for [N, 2] (x, y) coordinates: [N, 1, bands, n, n].

    One gather over the whole batch; equivalent to per-pixel extract_voxel.
    """
    if n < 1 or n % 2 == 0:
        raise DatasetError(f"neighborhood size must be odd and positive, got {n}")
    coords = np.asarray(coords)
    if len(coords) == 0:
        return np.empty((0, 1, cube.bands, n, n), F32)
    xs, ys = coords[:, 0], coords[:, 1]
    if xs.min() < 0 or xs.max() >= cube.width or ys.min() < 0 or ys.max() >= cube.height:
        raise DatasetError("coordinate outside the image")
    offsets = np.arange(n) - n // 2
    yy = _reflect(ys[:, None] + offsets[None, :], cube.height)   # [N, n]
    xx = _reflect(xs[:, None] + offsets[None, :], cube.width)    # [N, n]
    vox = cube.values[:, yy[:, :, None], xx[:, None, :]]          # [bands, N, n, n]
    # transposed view only; the first convolution's padding pass copies it
    return vox.transpose(1, 0, 2, 3)[:, None]


def labels_at(gt: GroundTruth, coords: np.ndarray) -> np.ndarray:
    return gt.labels[coords[:, 1], coords[:, 0]].astype(np.int64)


# ---------------------------------------------------------------------------
# Splits and batches

@dataclass(frozen=True)
class SplitConfig:
    """Per-class sampling: fixed count per class or a fraction of each class."""

    mode: str  # "count" | "frac"
    k: int | None = None
    p: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode == "count":
            if self.k is None or self.k < 1:
                raise DatasetError(f"count mode needs k >= 1, got {self.k}")
        elif self.mode == "frac":
            if self.p is None or not 0.0 < self.p < 1.0:
                raise DatasetError(f"fraction mode needs 0 < p < 1, got {self.p}")
        else:
            raise DatasetError(f"unknown split mode {self.mode!r}")

    @staticmethod
    def parse(text: str, seed: int = 0) -> "SplitConfig":
        """Parse CLI syntax ``count:200`` or ``frac:0.05``."""
        kind, _, value = text.partition(":")
        if kind == "count":
            return SplitConfig(mode="count", k=int(value), seed=seed)
        if kind == "frac":
            return SplitConfig(mode="frac", p=float(value), seed=seed)
        raise DatasetError(f"cannot parse split {text!r} (use count:<k> or frac:<p>)")


@dataclass
class DatasetSplit:
    train: np.ndarray  # [Nt, 2] (x, y)
    test: np.ndarray   # [Ne, 2]


def stratified_split(gt: GroundTruth, cfg: SplitConfig, p: Prng) -> DatasetSplit:
    """Per class: draw the configured number of training pixels, rest to test.

    Unlabeled (0) pixels never appear on either side.  A class too small for
    the request fails loudly with the class named.
    """
    train_parts, test_parts = [], []
    for cls in range(1, gt.nclass + 1):
        ys, xs = np.nonzero(gt.labels == cls)
        coords = np.stack([xs, ys], axis=1).astype(np.int32)
        size = len(coords)
        name = (gt.class_names[cls - 1] if gt.class_names else f"class {cls}")
        if cfg.mode == "count":
            if size < cfg.k:
                raise DatasetError(
                    f"{name} has only {size} labeled pixels, cannot draw {cfg.k} for training"
                )
            take = cfg.k
        else:
            if size < 2:
                raise DatasetError(f"{name} has only {size} labeled pixels, cannot split")
            take = max(1, int(cfg.p * size + 0.5))
        order = p.permutation(size)
        train_parts.append(coords[order[:take]])
        test_parts.append(coords[order[take:]])
    return DatasetSplit(
        train=np.concatenate(train_parts, axis=0),
        test=np.concatenate(test_parts, axis=0),
    )


def epoch_batches(split_train: np.ndarray, S: int, p: Prng) -> Iterator[np.ndarray]:
    """Yield coordinate batches covering the train set exactly once, shuffled.

    The last batch may be smaller than S.
    """
    if S < 1:
        raise ValueError(f"batch size must be >= 1, got {S}")
    order = p.permutation(len(split_train))
    for start in range(0, len(split_train), S):
        yield split_train[order[start: start + S]]


def iterations_per_epoch(train_size: int, S: int) -> int:
    return (train_size + S - 1) // S


def scale(cube: HyperCube, mode: str) -> HyperCube:
    """"raw" returns the cube untouched; "global-max" divides by max |value|."""
    if mode == "raw":
        return cube
    if mode == "global-max":
        peak = float(np.abs(cube.values).max())
        if peak == 0.0:
            raise DatasetError("cannot global-max scale an all-zero cube")
        return HyperCube(values=cube.values / F32(peak), scale_mode="global-max")
    raise DatasetError(f"unknown scale mode {mode!r}")
