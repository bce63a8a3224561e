"""Geometry and label checks for converted .hsc/.hsg pairs."""

from __future__ import annotations

import numpy as np

from .descriptors import DatasetDescriptor
from .formats import read_hsc, read_hsg


class VerificationError(ValueError):
    pass


def verify(prefix, descriptor: DatasetDescriptor | None = None) -> dict:
    """Check a converted pair; returns the per-class histogram on success.

    Always checked: headers parse, payload sizes match, cube/label planes
    agree, labels stay within 0..nclass, every class 1..nclass is non-empty.
    With a descriptor, the geometry must also match it exactly.
    """
    cube_header, values = read_hsc(f"{prefix}.hsc")
    gt_header, labels = read_hsg(f"{prefix}.hsg")

    if (cube_header["height"], cube_header["width"]) != (gt_header["height"], gt_header["width"]):
        raise VerificationError(
            f"cube {cube_header['height']}x{cube_header['width']} vs "
            f"labels {gt_header['height']}x{gt_header['width']}")

    nclass = int(gt_header["nclass"])
    names = gt_header.get("class_names") or [f"class_{i}" for i in range(1, nclass + 1)]
    if labels.max(initial=0) > nclass:
        raise VerificationError(
            f"label {int(labels.max())} exceeds declared class count {nclass}")

    counts = np.bincount(labels.reshape(-1).astype(np.int64), minlength=nclass + 1)
    for cls in range(1, nclass + 1):
        if counts[cls] == 0:
            raise VerificationError(f"class {cls} ({names[cls - 1]}) has no pixels")

    if descriptor is not None:
        got = (cube_header["height"], cube_header["width"], cube_header["bands"], nclass)
        want = (descriptor.height, descriptor.width, descriptor.bands, descriptor.nclass)
        if got != want:
            raise VerificationError(
                f"{descriptor.name}: geometry {got} does not match expected {want}")

    return {
        "width": cube_header["width"],
        "height": cube_header["height"],
        "bands": cube_header["bands"],
        "nclass": nclass,
        "unlabeled": int(counts[0]),
        "histogram": {names[c - 1]: int(counts[c]) for c in range(1, nclass + 1)},
    }
