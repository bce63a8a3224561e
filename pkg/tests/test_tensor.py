import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cubenn import Prng, reshape, sample_indices_without_replacement
from cubenn.errors import ShapeMismatchError


def test_reshape_row_major_flatten():
    t = np.arange(6, dtype=np.float32).reshape(2, 3)
    flat = reshape(t, [6])
    assert flat.tolist() == [0, 1, 2, 3, 4, 5]


def test_reshape_3d_to_1d_product_identity():
    t = np.zeros((1, 103, 3, 3), dtype=np.float32)
    assert reshape(t, [927]).shape == (927,)


def test_reshape_mismatch_errors():
    t = np.zeros((2, 3), dtype=np.float32)
    with pytest.raises(ShapeMismatchError):
        reshape(t, [4])


def test_reshape_returns_view_for_contiguous():
    t = np.arange(12, dtype=np.float32).reshape(3, 4)
    v = reshape(t, [12])
    v[0] = 99.0
    assert t[0, 0] == 99.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_reshape_preserves_sum(a, b, seed):
    t = np.random.default_rng(seed).normal(size=(a, b)).astype(np.float32)
    assert np.isclose(reshape(t, [b, a]).sum(), t.sum())
    assert np.isclose(reshape(t, [a * b]).sum(), t.sum())


def test_prng_identical_seed_identical_stream():
    a = Prng(1234).uniform(10_000)
    b = Prng(1234).uniform(10_000)
    assert np.array_equal(a, b)


def test_prng_million_draws_match():
    a = Prng(7).uniform(1_000_000)
    b = Prng(7).uniform(1_000_000)
    assert np.array_equal(a, b)


def test_prng_derive_changes_stream_reproducibly():
    base = Prng(5)
    c1 = base.derive(1).uniform(100)
    c2 = base.derive(2).uniform(100)
    c1_again = Prng(5).derive(1).uniform(100)
    assert not np.array_equal(c1, c2)
    assert np.array_equal(c1, c1_again)


def test_sample_exhaustion_is_permutation():
    got = sample_indices_without_replacement(Prng(3), 5, 5)
    assert sorted(got) == [0, 1, 2, 3, 4]


def test_sample_zero_is_empty():
    assert sample_indices_without_replacement(Prng(3), 5, 0) == []


def test_sample_fixed_seed_reproducible():
    a = sample_indices_without_replacement(Prng(42), 100, 10)
    b = sample_indices_without_replacement(Prng(42), 100, 10)
    assert a == b
    assert len(set(a)) == 10


def test_sample_overdraw_errors():
    with pytest.raises(ValueError):
        sample_indices_without_replacement(Prng(0), 3, 4)
