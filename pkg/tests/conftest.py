import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cubenn import Dataset, GroundTruth, HyperCube, pair


def make_synthetic(nclass=2, bands=8, height=24, width=24, noise=0.0, seed=0,
                   unlabeled_border=0):
    """Stripe-structured cube: class c fills a vertical stripe and lights up
    its own band group, with optional Gaussian noise on top."""
    rng = np.random.default_rng(seed)
    signatures = np.full((nclass, bands), 0.15, dtype=np.float32)
    group = max(1, bands // nclass)
    for c in range(nclass):
        signatures[c, c * group:(c + 1) * group] = 0.9
    labels = np.zeros((height, width), dtype=np.uint16)
    values = np.zeros((bands, height, width), dtype=np.float32)
    stripe = width // nclass
    for c in range(nclass):
        x0 = c * stripe
        x1 = width if c == nclass - 1 else (c + 1) * stripe
        labels[:, x0:x1] = c + 1
        values[:, :, x0:x1] = signatures[c][:, None, None]
    if noise:
        values += rng.normal(0.0, noise, size=values.shape).astype(np.float32)
    if unlabeled_border:
        b = unlabeled_border
        mask = np.zeros_like(labels, dtype=bool)
        mask[b:-b, b:-b] = True
        labels[~mask] = 0
    cube = HyperCube(values=values)
    gt = GroundTruth(labels=labels, nclass=nclass,
                     class_names=[f"stripe_{i}" for i in range(1, nclass + 1)])
    return pair(cube, gt)


@pytest.fixture
def toy_dataset() -> Dataset:
    return make_synthetic(nclass=2, bands=8, height=24, width=24, noise=0.0, seed=7)


@pytest.fixture
def noisy_dataset() -> Dataset:
    return make_synthetic(nclass=4, bands=12, height=36, width=36, noise=0.15, seed=11)
