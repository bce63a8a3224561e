"""MAT-file to .hsc/.hsg conversion.

MAT scenes store the cube as (rows, cols, bands) and the ground truth as
(rows, cols); all axis-order normalization happens here so downstream
consumers only ever see band-sequential cubes and row-major label maps.
"""

from __future__ import annotations

import numpy as np
from scipy.io import loadmat

from .descriptors import DatasetDescriptor, match_descriptor
from .formats import write_hsc, write_hsg


class ConversionError(ValueError):
    pass


def _load_array(path, ndim: int, what: str) -> np.ndarray:
    """Pick the largest ndim-dimensional numeric variable from a MAT file."""
    try:
        table = loadmat(path)
    except (OSError, ValueError, NotImplementedError) as exc:
        raise ConversionError(f"{path}: cannot read MAT file: {exc}") from exc
    candidates = [
        v for k, v in table.items()
        if not k.startswith("__") and isinstance(v, np.ndarray)
        and v.ndim == ndim and np.issubdtype(v.dtype, np.number)
    ]
    if not candidates:
        raise ConversionError(f"{path}: no {ndim}-D numeric array found for the {what}")
    return max(candidates, key=lambda a: a.size)


def convert(mat_cube_path, mat_gt_path, out_prefix,
            descriptor: DatasetDescriptor | None = None) -> dict:
    """Emit <prefix>.hsc and <prefix>.hsg; returns a summary dict.

    Values are cast to float32 (cube) and uint16 (labels); the cube is
    reordered to band-sequential layout.  Nothing is written on failure.
    """
    cube_src = _load_array(mat_cube_path, 3, "cube")
    gt_src = _load_array(mat_gt_path, 2, "ground truth")

    rows, cols, bands = cube_src.shape
    if gt_src.shape != (rows, cols):
        raise ConversionError(
            f"ground truth {gt_src.shape} does not match cube image plane {(rows, cols)}")
    if np.issubdtype(gt_src.dtype, np.floating):
        if not np.all(gt_src == np.round(gt_src)):
            raise ConversionError("ground truth has non-integer labels")
    gt = gt_src.astype(np.int64)
    if gt.min() < 0:
        raise ConversionError("ground truth has negative labels")
    if gt.max() > np.iinfo(np.uint16).max:
        raise ConversionError("ground truth labels exceed uint16 range")

    if descriptor is None:
        descriptor = match_descriptor(rows, cols, bands)
    if descriptor is not None:
        expected = (descriptor.height, descriptor.width, descriptor.bands)
        if (rows, cols, bands) != expected:
            raise ConversionError(
                f"{descriptor.name}: cube is {rows}x{cols}x{bands}, expected "
                f"{expected[0]}x{expected[1]}x{expected[2]}")
        if gt.max() > descriptor.nclass:
            raise ConversionError(
                f"{descriptor.name}: label {int(gt.max())} exceeds "
                f"{descriptor.nclass} classes")
        nclass = descriptor.nclass
        class_names = list(descriptor.class_names)
    else:
        nclass = int(gt.max())
        if nclass < 1:
            raise ConversionError("ground truth contains no labeled pixels")
        class_names = [f"class_{i}" for i in range(1, nclass + 1)]

    values = np.ascontiguousarray(np.transpose(cube_src, (2, 0, 1)), dtype=np.float32)
    cube_header = write_hsc(f"{out_prefix}.hsc", values)
    gt_header = write_hsg(f"{out_prefix}.hsg", gt.astype(np.uint16), nclass, class_names)
    return {
        "cube": cube_header,
        "gt": gt_header,
        "dataset": descriptor.name if descriptor else None,
        "labeled_pixels": int((gt > 0).sum()),
    }
