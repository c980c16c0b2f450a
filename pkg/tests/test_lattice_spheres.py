import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import box_counts, brute_sphere
from spherical_recurrence.errors import ResourceLimitError, ValidationError
from spherical_recurrence.lattice_spheres import (
    canonicalize,
    enumerate_sphere,
    fold_mod,
    residue_profile,
    sphere_size,
    sphere_sizes,
    symmetry_images,
)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_sizes_match_box_count(d):
    r = 6
    want = box_counts(d, r)
    assert list(sphere_sizes(d, r * r)) == list(want)


def test_known_small_values():
    assert [sphere_size(5, n) for n in range(6)] == [1, 10, 40, 80, 90, 112]
    assert [sphere_size(2, n) for n in range(6)] == [1, 4, 4, 0, 4, 8]
    assert sphere_size(3, 7) == 0


@given(st.integers(1, 4), st.integers(0, 30))
def test_enumeration_equals_brute_force(d, N):
    s = enumerate_sphere(d, N)
    assert [tuple(p) for p in s.points.tolist()] == brute_sphere(d, N)
    assert len(s) == sphere_size(d, N)


@given(st.integers(1, 5), st.integers(0, 60))
def test_points_have_norm_and_are_sorted(d, N):
    pts = enumerate_sphere(d, N).points
    if len(pts):
        assert np.all((pts ** 2).sum(axis=1) == N)
        assert np.array_equal(pts, canonicalize(pts[::-1]))


@pytest.mark.parametrize("threads", [2, 3, 8])
def test_threads_do_not_change_result(threads):
    a = enumerate_sphere(5, 50).points
    b = enumerate_sphere(5, 50, threads=threads).points
    assert np.array_equal(a, b)


def test_symmetry_closure():
    pts = enumerate_sphere(4, 11).points
    for img in symmetry_images(pts[:3]):
        assert set(map(tuple, img.tolist())) <= set(map(tuple, pts.tolist()))


def test_resource_ceiling():
    with pytest.raises(ResourceLimitError):
        enumerate_sphere(5, 400, max_points=1000)
    # counting is never limited
    assert sphere_size(5, 400) > 1000


def test_validation():
    with pytest.raises(ValidationError):
        sphere_size(0, 3)
    with pytest.raises(ValidationError):
        enumerate_sphere(3, -1)


@given(st.integers(1, 4), st.integers(0, 25), st.integers(1, 6))
def test_residue_profile_matches_folding(d, N, M):
    prof = residue_profile(d, N, M)
    sphere = enumerate_sphere(d, N)
    assert prof.total == len(sphere)
    assert np.array_equal(prof.dense, fold_mod(sphere, M))


@given(st.integers(1, 3), st.integers(0, 20), st.integers(1, 6), st.integers(0, 12))
def test_scaled_profile(d, N, M, q):
    prof = residue_profile(d, N, M)
    want = np.zeros((M,) * d, dtype=np.int64)
    for p in enumerate_sphere(d, N).points:
        want[tuple((q * p) % M)] += 1
    assert np.array_equal(prof.scaled(q), want)


def test_profile_work_ceiling():
    with pytest.raises(ResourceLimitError):
        residue_profile(5, 1000, 30, max_work=10_000)
