import itertools
import json
import math

import pytest
from hypothesis import given, strategies as st

from oracles import brute_sphere, tree_immersions
from spherical_recurrence import tree_model as tm
from spherical_recurrence.errors import ResourceLimitError, ValidationError
from spherical_recurrence.lattice_spheres import sphere_size

labels = st.lists(st.integers(1, 6), min_size=1, max_size=3)


def _bfs_edges(tree):
    return [(p, c, tree.tree.label(p, c)) for p, c in tm.leaf_order(tree)]


def test_tree_validation():
    with pytest.raises(ValidationError):
        tm.EdgeLabelledTree(["a", "b", "c"], [("a", "b", 1)])  # disconnected
    with pytest.raises(ValidationError):
        tm.EdgeLabelledTree(["a", "b"], [("a", "b", 0)])
    with pytest.raises(ValidationError):
        tm.EdgeLabelledTree(["a", "b", "c"], [("a", "b", 1), ("b", "c", 1), ("c", "a", 1)])
    with pytest.raises(ValidationError):
        tm.make_path([])


def test_json_round_trip(tmp_path):
    t = tm.make_star([3, 1, 2])
    path = tmp_path / "t.json"
    path.write_text(json.dumps(t.to_dict()))
    back = tm.RootedTree.load(path)
    assert back.to_dict() == t.to_dict()
    with pytest.raises(ValidationError):
        tm.RootedTree.from_dict({**t.to_dict(), "colour": "red"})


def test_leaf_order_prefixes_are_connected():
    t = tm.RootedTree(tm.EdgeLabelledTree(
        ["r", "x", "y", "z", "w"],
        [("r", "y", 1), ("r", "x", 2), ("x", "z", 3), ("y", "w", 1)]), "r")
    order = tm.leaf_order(t)
    assert order == [("r", "x"), ("x", "z"), ("r", "y"), ("y", "w")]
    seen = {"r"}
    for p, c in order:
        assert p in seen
        seen.add(c)


def test_path_example():
    t = tm.make_path([1, 1])
    assert tm.count_immersions(t, 5) == 100
    assert tm.count_embeddings(t, 5) == 90
    assert tm.embedding_lower_bound(t, 5) == 90


@given(labels, st.integers(2, 3), st.booleans())
def test_counts_against_brute_force(ls, d, star):
    t = tm.make_star(ls) if star else tm.make_path(ls)
    assert tm.count_immersions(t, d) == math.prod(sphere_size(d, w) for w in ls)
    imms = list(tree_immersions(_bfs_edges(t), t.root, d))
    assert len(imms) == tm.count_immersions(t, d)
    injective = sum(len(set(p.values())) == len(p) for p in imms)
    assert tm.count_embeddings(t, d) == injective
    assert injective >= tm.embedding_lower_bound(t, d)


@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(2, 4))
def test_enumeration_is_valid_and_ordered(ls, d):
    t = tm.make_path(ls)
    got = list(tm.enumerate_immersions(t, d))
    assert all(imm.validate() for imm in got)
    want = list(tree_immersions(_bfs_edges(t), t.root, d))
    assert [imm.placement for imm in got] == want
    names, arr = tm.immersion_array(t, d)
    assert [{v: tuple(r) for v, r in zip(names, row.tolist())} for row in arr] == want


def test_enumerate_limit_and_ceiling():
    t = tm.make_path([9, 9, 9])
    assert len(list(tm.enumerate_immersions(t, 5, limit=7))) == 7
    with pytest.raises(ResourceLimitError):
        tm.enumerate_immersions(t, 5, max_count=100)


def test_lower_bound_clamps_at_zero():
    t = tm.make_star([1] * 12)
    # 12 leaves on a 10-point sphere cannot be placed injectively
    assert tm.embedding_lower_bound(t, 5) == 0
    assert tm.count_embeddings(tm.make_star([1] * 3), 2) == 4 * 3 * 2


def test_immersion_validate_rejects_bad_placement():
    t = tm.make_path([2])
    good = tm.Immersion(t, {"v0": (0, 0, 0), "v1": (1, 1, 0)})
    bad = tm.Immersion(t, {"v0": (0, 0, 0), "v1": (1, 0, 0)})
    moved = tm.Immersion(t, {"v0": (1, 0, 0), "v1": (2, 1, 0)})
    assert good.validate() and not bad.validate() and not moved.validate()
