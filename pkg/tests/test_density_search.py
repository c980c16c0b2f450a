import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spherical_recurrence import density_search as ds
from spherical_recurrence import tree_model as tm
from spherical_recurrence.errors import ValidationError


@st.composite
def windows(draw, max_d=3, max_l=5):
    d = draw(st.integers(1, max_d))
    L = draw(st.integers(1, max_l))
    bits = draw(st.lists(st.booleans(), min_size=L ** d, max_size=L ** d))
    return ds.WindowSet(d, L, np.array(bits, dtype=bool).reshape((L,) * d))


def _pairwise(B):
    pts = [tuple(p) for p in B.points.tolist()]
    return {sum((a - b) ** 2 for a, b in zip(p, r)) for p in pts for r in pts}


def test_generators():
    B, w = ds.generate_window({"kind": "congruence", "g": 2, "residues": [0]}, 5, 8)
    assert len(B) == 1024 and B.density == 1 / 32 and w is None
    B, w = ds.generate_window({"kind": "planted", "witness": [[0, 0], [1, 1]], "noise": 0}, 2, 3)
    assert sorted(map(tuple, B.points.tolist())) == [(0, 0), (1, 1)] and w == [(0, 0), (1, 1)]
    a, _ = ds.generate_window({"kind": "uniform_random", "density": 0.4, "seed": 7}, 3, 6)
    b, _ = ds.generate_window({"kind": "uniform_random", "density": 0.4, "seed": 7}, 3, 6)
    assert np.array_equal(a.mask, b.mask)
    with pytest.raises(ValidationError):
        ds.generate_window({"kind": "planted", "witness": [[9, 9]]}, 2, 3)
    with pytest.raises(ValidationError):
        ds.generate_window({"kind": "spiral"}, 2, 3)


def test_window_json_round_trip(tmp_path):
    B, _ = ds.generate_window({"kind": "uniform_random", "density": 0.5, "seed": 1}, 2, 5)
    p = tmp_path / "w.json"
    p.write_text(json.dumps(B.to_dict()))
    assert np.array_equal(ds.WindowSet.load(p).mask, B.mask)
    gen = {"dimension": 2, "side": 4, "generator": {"kind": "congruence", "g": 2, "residues": [[0, 1]]}}
    assert len(ds.WindowSet.from_dict(gen)) == 4
    with pytest.raises(ValidationError):
        ds.WindowSet.from_points(2, 3, [[3, 0]])


@given(windows())
def test_distance_set_oracle(B):
    assert ds.squared_distance_set(B) == _pairwise(B)


def test_distance_set_fft_path():
    B, _ = ds.generate_window({"kind": "uniform_random", "density": 0.5, "seed": 3}, 2, 70)
    assert len(B) ** 2 > 4_000_000
    D = ds.squared_distance_set(B)
    sub = ds.WindowSet(2, 70, B.mask)
    pts = sub.points[:200]
    some = {int(((p - r) ** 2).sum()) for p in pts for r in pts}
    assert some <= D and max(D) <= 2 * 69 ** 2


@given(windows(), st.integers(1, 4), st.integers(0, 6), st.integers(0, 10))
def test_coverage(B, q, lo, span):
    rep = ds.ap_coverage(B, q, lo, lo + span)
    D = _pairwise(B)
    assert rep.missing == [t for t in range(lo, lo + span + 1) if q * t not in D]
    if rep.empirical_N0 is not None:
        assert all(q * t in D for t in range(rep.empirical_N0, lo + span + 1))


@given(windows(max_d=2, max_l=4), st.integers(1, 2),
       st.lists(st.integers(1, 4), min_size=1, max_size=2))
def test_chain_matches_brute_force(B, q, gaps):
    query = ds.ChainQuery(q, gaps)
    rep = ds.find_chain(B, query)
    assert rep.found == ds.brute_force_chain_exists(B, query)
    if rep.found:
        assert ds.validate_chain(B, query, rep.witness["chain"])


@given(windows(max_d=2, max_l=5), st.integers(1, 2),
       st.lists(st.integers(1, 5), min_size=1, max_size=2), st.booleans())
def test_tree_matches_brute_force(B, q, labels, star):
    t = tm.make_star(labels) if star else tm.make_path(labels)
    rep = ds.find_tree_embedding(B, t, q)
    assert rep.found == ds.brute_force_tree_exists(B, t, q)
    if rep.found:
        w = rep.witness
        assert ds.validate_tree_witness(B, t, q, w["base"], w["embedding"])


def test_budget_exhaustion():
    B, _ = ds.generate_window({"kind": "uniform_random", "density": 0.3, "seed": 2}, 3, 6)
    rep = ds.find_chain(B, ds.ChainQuery(1, [50, 50]), budget=5)
    assert rep.status == ds.BUDGET_EXHAUSTED and rep.nodes_explored == 5


def test_validators_reject_bad_witnesses():
    B = ds.WindowSet.from_points(2, 4, [[0, 0], [1, 0], [1, 1], [2, 2]])
    q = ds.ChainQuery(1, [1, 1])
    assert ds.validate_chain(B, q, [[0, 0], [1, 0], [1, 1]])
    assert not ds.validate_chain(B, q, [[0, 0], [1, 0], [0, 0]])
    assert not ds.validate_chain(B, q, [[0, 0], [1, 0], [2, 0]])
    t = tm.make_path([2])
    assert ds.validate_tree_witness(B, t, 1, [0, 0], {"v0": [0, 0], "v1": [1, 1]})
    assert not ds.validate_tree_witness(B, t, 1, [1, 0], {"v0": [0, 0], "v1": [1, 1]})
    assert ds.validate_tree_witness(B, t, 2, [0, 0], {"v0": [0, 0], "v1": [1, 1]})
    assert not ds.validate_tree_witness(B, t, 3, [0, 0], {"v0": [0, 0], "v1": [1, 1]})
