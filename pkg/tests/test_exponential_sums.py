import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import naive_exp_sum
from spherical_recurrence import exponential_sums as es
from spherical_recurrence.errors import EmptySphereError, ValidationError
from spherical_recurrence.lattice_spheres import enumerate_sphere

thetas5 = st.lists(st.floats(-3, 3, allow_nan=False), min_size=5, max_size=5)


def test_lcm_up_to():
    assert [es.lcm_up_to(k) for k in range(0, 8)] == [1, 1, 2, 6, 12, 60, 60, 420]
    for k in range(1, 30):
        assert all(es.lcm_up_to(k) % j == 0 for j in range(1, k + 1))


def test_q_eta_c_examples():
    assert es.q_eta_c(0.5, 1) == 12
    assert es.q_eta_c(0.1, 0.05) == es.lcm_up_to(5)
    # decimal reading: 0.1^-2 is exactly 100
    assert es.q_eta_c(0.1, 0.01) == 1
    assert es.min_N(0.5, 1) == 16


@given(st.floats(0.05, 1), st.floats(0.01, 3))
def test_q_eta_c_is_lcm_of_cap(eta, C):
    cap = math.floor(Fraction(repr(C)) / Fraction(repr(eta)) ** 2)
    assert es.q_eta_c(eta, C) == es.lcm_up_to(cap)


@given(st.integers(1, 4), st.integers(1, 40), st.data())
def test_matches_naive_sum(d, N, data):
    s = enumerate_sphere(d, N)
    if len(s) == 0:
        with pytest.raises(EmptySphereError):
            es.exp_sum(s, [0.0] * d)
        return
    theta = data.draw(st.lists(st.floats(-2, 2, allow_nan=False), min_size=d, max_size=d))
    assert abs(es.exp_sum(s, theta) - naive_exp_sum(s.points, theta)) < 1e-12


@given(st.integers(1, 60), thetas5, st.integers(-4, 4))
def test_symmetries(N, theta, shift):
    s = enumerate_sphere(5, N)
    v = es.exp_sum(s, theta)
    assert abs(es.exp_sum(s, [-t for t in theta]) - v.conjugate()) < 1e-12
    assert abs(es.exp_sum(s, [t + shift for t in theta]) - v) < 1e-12
    assert abs(v) <= 1 + 1e-12
    # the sphere is invariant under sign flips, so the sum is real
    assert abs(v.imag) < 1e-12


def test_trivial_frequencies():
    for N in range(1, 40):
        s = enumerate_sphere(5, N)
        assert abs(es.exp_sum(s, [0] * 5) - 1) < 1e-12
        assert abs(es.exp_sum(s, [0.5] * 5) - (-1) ** N) < 1e-12


def test_shape_error():
    with pytest.raises(ValidationError):
        es.exp_sum(enumerate_sphere(3, 2), [0.1, 0.2])


@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 2 ** 31))
def test_table_matches_direct(d, k, seed):
    thetas = es.sample_frequencies(d, k, seed)
    table = es.exp_sum_table(d, thetas, 30)
    for N in range(31):
        s = enumerate_sphere(d, N)
        for i, th in enumerate(thetas):
            direct = es.exp_sum(s, th) * len(s) if len(s) else 0
            assert abs(table[i, N] - direct) < 1e-9 * max(1, len(s))


def test_sample_stream_is_seeded():
    a = es.sample_frequencies(5, 10, 3)
    assert np.array_equal(a, es.sample_frequencies(5, 10, 3))
    assert not np.array_equal(a, es.sample_frequencies(5, 10, 4))
    assert np.all((a >= 0) & (a < 1))


@given(st.floats(0.1, 1), st.floats(0.01, 0.5), st.integers(1, 10 ** 5), thetas5)
def test_arc_classification_oracle(eta, C, N, theta):
    params = es.ArcParameters(eta, C, N)
    q, w = params.q, params.width
    t = np.mod(theta, 1.0)
    near = all(min(abs(x - round(x * q) / q), 1) <= w + 1e-15 for x in t)
    got = es.classify_arc(theta, params) is es.Arc.MAJOR
    if params.vacuous:
        assert got
    elif q < 10 ** 6:
        # recompute the distance to (1/q)Z directly, modulo the wrap at 1
        dist = [min(abs(x * q - round(x * q)), 1) / q for x in t]
        assert got == all(v <= w for v in dist)
        assert got == near or any(abs(v - w) < 1e-12 for v in dist)


def test_vacuous_when_width_covers_grid():
    p = es.ArcParameters(0.5, 1.0, 16)
    assert p.vacuous
    rep = es.scan_minor_arcs(5, 0.5, 1.0, 16, 50, 0)
    assert rep.minor_samples == 0 and rep.passed and rep.warnings


def test_scan_counts_violations_consistently():
    rep = es.scan_minor_arcs(5, 0.3, 0.02, 60, 200, 1)
    thetas = es.sample_frequencies(5, 200, 1)
    params = es.ArcParameters(0.3, 0.02, 60)
    minor = thetas[~es.classify_arcs(thetas, params)]
    s = enumerate_sphere(5, 60)
    moduli = [abs(es.exp_sum(s, th)) for th in minor]
    assert rep.minor_samples == len(minor) > 0
    assert rep.violations == sum(m > 0.3 for m in moduli)
    assert rep.max_modulus == pytest.approx(max(moduli), abs=1e-12)


def test_scan_range_matches_single_scans():
    reps = es.scan_range(5, 0.5, 0.05, [1, 7, 30], 100, 9)
    for r in reps:
        one = es.scan_minor_arcs(5, 0.5, 0.05, r.N, 100, 9)
        assert r.to_dict() == one.to_dict()


def test_empty_sphere_is_reported():
    rep = es.scan_minor_arcs(3, 0.5, 0.05, 7, 10, 0)
    assert rep.empty_sphere and rep.minor_samples == 0


def test_estimate_constant_picks_first_passing():
    est = es.estimate_constant(5, 0.5, None, [0.02, 0.05], 100, 0, span=20)
    assert est.found and est.C == 0.02
    assert est.per_C[0]["passed"]
    with pytest.raises(ValidationError):
        es.estimate_constant(5, 0.5, None, [1, 0.5], 10, 0)
