import numpy as np
import pytest
from hypothesis import given, strategies as st

from selab import rng


def test_mix64_golden():
    assert rng.mix64(0) == 0
    assert rng.mix64(42) == 12058926934050108962


def test_uniform_golden():
    assert rng.uniform_at(42, 0) == pytest.approx(0.7415648787718233, abs=0)
    assert rng.uniform_at(42, 1) == pytest.approx(0.1599103928769201, abs=0)


def test_scalar_vector_agree():
    u = rng.uniforms(seed=9, count=100, offset=3)
    assert all(u[i] == rng.uniform_at(9, 3 + i) for i in range(100))


@given(st.integers(0, 2**64 - 1))
def test_mix64_array_matches_scalar(z):
    arr = rng.mix64_array(np.array([z], dtype=np.uint64))
    assert int(arr[0]) == rng.mix64(z)


def test_derive_distinct_streams():
    seeds = {rng.derive(1, "field", i) for i in range(1000)}
    assert len(seeds) == 1000
    assert rng.derive(1, "field", 0) != rng.derive(1, "walk", 0)
    assert rng.derive(1, "field", 0) == rng.derive(1, "field", 0)


def test_site_uniforms_pure_and_order_free():
    coords = np.array([[0, 0], [5, -3], [0, 0], [-1, 7]])
    u = rng.site_uniforms(11, coords)
    assert u[0] == u[2]  # same site, same value
    perm = rng.site_uniforms(11, coords[::-1])
    assert np.array_equal(perm, u[::-1])
    assert np.all((0 <= u) & (u < 1))


def test_site_uniforms_roughly_uniform():
    coords = np.arange(20000).reshape(-1, 1)
    u = rng.site_uniforms(3, coords)
    assert abs(u.mean() - 0.5) < 0.01
    assert abs(np.mean(u < 0.25) - 0.25) < 0.01
