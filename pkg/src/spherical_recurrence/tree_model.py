"""Edge-labelled trees and their locally isometric immersions into Z^d.

A label is the *squared* length an edge must realize.  Immersions place the
root at the origin; embeddings are the injective immersions.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from spherical_recurrence import config
from spherical_recurrence.errors import ResourceLimitError, ValidationError
from spherical_recurrence.lattice_spheres import DiscreteSphere, enumerate_sphere, sphere_size

Edge = tuple[str, str]


def _edge_key(u: str, v: str) -> Edge:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class EdgeLabelledTree:
    vertices: tuple[str, ...]
    labels: tuple[tuple[Edge, int], ...]

    def __init__(self, vertices, edges):
        """``edges`` is an iterable of (u, v, label) or a mapping {(u, v): label}."""
        verts = tuple(sorted(str(v) for v in vertices))
        if len(set(verts)) != len(verts):
            raise ValidationError("duplicate vertex identifiers")
        if not verts:
            raise ValidationError("a tree needs at least one vertex")
        items = edges.items() if isinstance(edges, dict) else [((u, v), lab) for u, v, lab in edges]
        lab: dict[Edge, int] = {}
        vset = set(verts)
        for (u, v), w in items:
            u, v = str(u), str(v)
            if u not in vset or v not in vset:
                raise ValidationError(f"edge {u}-{v} references an unknown vertex")
            if u == v:
                raise ValidationError(f"self-loop at {u}")
            if isinstance(w, bool) or not isinstance(w, (int, np.integer)) or w < 1:
                raise ValidationError(f"edge {u}-{v} has label {w!r}; labels must be integers >= 1")
            key = _edge_key(u, v)
            if key in lab:
                raise ValidationError(f"duplicate edge {u}-{v}")
            lab[key] = int(w)
        if len(lab) != len(verts) - 1:
            raise ValidationError(
                f"a tree on {len(verts)} vertices has {len(verts) - 1} edges, got {len(lab)}"
            )
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "labels", tuple(sorted(lab.items())))
        # |E| = |V| - 1 plus connectivity rules out cycles
        seen = {verts[0]}
        stack = [verts[0]]
        while stack:
            u = stack.pop()
            for w in self.neighbours[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != len(verts):
            raise ValidationError("edges do not connect all vertices")

    @cached_property
    def label_map(self) -> dict[Edge, int]:
        return dict(self.labels)

    @cached_property
    def neighbours(self) -> dict[str, list[str]]:
        nb: dict[str, list[str]] = {v: [] for v in self.vertices}
        for (u, v), _ in self.labels:
            nb[u].append(v)
            nb[v].append(u)
        for v in nb:
            nb[v].sort()
        return nb

    def label(self, u: str, v: str) -> int:
        return self.label_map[_edge_key(u, v)]

    @property
    def edges(self) -> tuple[Edge, ...]:
        return tuple(e for e, _ in self.labels)

    def __len__(self):
        return len(self.vertices)


@dataclass(frozen=True)
class RootedTree:
    tree: EdgeLabelledTree
    root: str

    def __post_init__(self):
        if self.root not in self.tree.vertices:
            raise ValidationError(f"root {self.root!r} is not a vertex")

    @property
    def m(self) -> int:
        return len(self.tree.vertices)

    @cached_property
    def children(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {v: [] for v in self.tree.vertices}
        seen = {self.root}
        stack = [self.root]
        while stack:
            u = stack.pop()
            for w in self.tree.neighbours[u]:
                if w not in seen:
                    seen.add(w)
                    out[u].append(w)
                    stack.append(w)
        return out

    @cached_property
    def parent(self) -> dict[str, str]:
        return {c: p for p, cs in self.children.items() for c in cs}

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.tree.vertices),
            "root": self.root,
            "edges": [{"u": u, "v": v, "label": w} for (u, v), w in self.tree.labels],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RootedTree":
        try:
            vertices = data["vertices"]
            root = data["root"]
            edges = [(e["u"], e["v"], e["label"]) for e in data["edges"]]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed tree description: missing {exc}") from None
        unknown = set(data) - {"vertices", "root", "edges"}
        if unknown:
            raise ValidationError(f"unknown tree fields: {sorted(unknown)}")
        return cls(EdgeLabelledTree(vertices, edges), str(root))

    @classmethod
    def load(cls, path) -> "RootedTree":
        with open(Path(path)) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)


def make_path(labels: Sequence[int]) -> RootedTree:
    """Path v0 - v1 - ... rooted at v0, edge i labelled ``labels[i]``."""
    labels = list(labels)
    if not labels:
        raise ValidationError("a path needs at least one edge label")
    verts = [f"v{i}" for i in range(len(labels) + 1)]
    edges = [(verts[i], verts[i + 1], w) for i, w in enumerate(labels)]
    return RootedTree(EdgeLabelledTree(verts, edges), "v0")


def make_star(labels: Sequence[int]) -> RootedTree:
    """Star with centre v0 (the root) and leaves v1.. labelled in order."""
    labels = list(labels)
    if not labels:
        raise ValidationError("a star needs at least one edge label")
    verts = [f"v{i}" for i in range(len(labels) + 1)]
    edges = [("v0", verts[i + 1], w) for i, w in enumerate(labels)]
    return RootedTree(EdgeLabelledTree(verts, edges), "v0")


def leaf_order(tree: RootedTree) -> list[tuple[str, str]]:
    """Edges as (parent, child) pairs in depth-first preorder from the root.

    Children are visited in identifier order, so every prefix is connected
    and contains the root.
    """
    order = []
    stack = [tree.root]
    while stack:
        u = stack.pop()
        stack.extend(reversed(sorted(tree.children[u])))
        if u != tree.root:
            order.append((tree.parent[u], u))
    return order


def count_immersions(tree: RootedTree, d: int) -> int:
    """|I| = product over edges of |S_label|."""
    return math.prod(sphere_size(d, w) for _, w in tree.tree.labels)


def embedding_lower_bound(tree: RootedTree, d: int) -> int:
    """prod_j max(0, |S_{label(e_j)}| - j + 1) along :func:`leaf_order`."""
    out = 1
    for j, (u, v) in enumerate(leaf_order(tree), start=1):
        out *= max(0, sphere_size(d, tree.tree.label(u, v)) - j + 1)
    return out


@dataclass(frozen=True)
class Immersion:
    tree: RootedTree
    placement: dict

    def point(self, v: str) -> tuple[int, ...]:
        return self.placement[v]

    def validate(self) -> bool:
        """Exact integer check of the root pin and every edge length."""
        d = len(self.placement[self.tree.root])
        if any(c != 0 for c in self.placement[self.tree.root]):
            return False
        for (u, v), w in self.tree.tree.labels:
            a, b = self.placement[u], self.placement[v]
            if len(a) != d or len(b) != d:
                return False
            if sum((x - y) ** 2 for x, y in zip(a, b)) != w:
                return False
        return True

    def to_dict(self) -> dict:
        return {v: list(self.placement[v]) for v in self.tree.tree.vertices}


def is_embedding(imm: Immersion) -> bool:
    pts = list(imm.placement.values())
    return len(set(pts)) == len(pts)


def _spheres_for(tree: RootedTree, d: int) -> dict[int, DiscreteSphere]:
    return {w: enumerate_sphere(d, w) for w in sorted({w for _, w in tree.tree.labels})}


def enumerate_immersions(tree: RootedTree, d: int, limit: int | None = None, *,
                         max_count: int | None = None) -> Iterator[Immersion]:
    """Depth-first stream of immersions with the root at the origin.

    Edges are taken in :func:`leaf_order`, each edge ranging over its sphere in
    canonical order (earlier edges vary slowest).
    """
    if limit is not None and limit < 0:
        raise ValidationError("limit must be nonnegative")
    if limit is None:
        cap = config.max_points() if max_count is None else max_count
        total = count_immersions(tree, d)
        if total > cap:
            raise ResourceLimitError(
                f"tree has {total} immersions, above the ceiling {cap}; pass a limit"
            )
    return _immersion_stream(tree, d, limit)


def _immersion_stream(tree, d, limit):
    if limit == 0:
        return
    order = leaf_order(tree)
    spheres = _spheres_for(tree, d)
    steps = [(p, c, [tuple(int(v) for v in row) for row in spheres[tree.tree.label(p, c)].points])
             for p, c in order]
    placement = {tree.root: (0,) * d}
    emitted = 0

    def rec(i):
        nonlocal emitted
        if i == len(steps):
            emitted += 1
            yield Immersion(tree, dict(placement))
            return
        p, c, pts = steps[i]
        base = placement[p]
        for s in pts:
            placement[c] = tuple(a + b for a, b in zip(base, s))
            yield from rec(i + 1)
            if limit is not None and emitted >= limit:
                return
        placement.pop(c, None)

    yield from rec(0)


def immersion_array(tree: RootedTree, d: int, *, upto: int | None = None,
                    max_rows: int | None = None) -> tuple[list[str], np.ndarray]:
    """All immersions at once as an array of shape (count, m, d).

    Rows follow the order of :func:`enumerate_immersions`.  ``upto`` stops
    after that many edges of :func:`leaf_order` (a partial placement).
    Returns the vertex order used on axis 1.
    """
    order = leaf_order(tree)
    if upto is not None:
        order = order[:upto]
    spheres = _spheres_for(tree, d)
    rows = math.prod(len(spheres[tree.tree.label(p, c)]) for p, c in order)
    cap = config.max_points() if max_rows is None else max_rows
    if rows > cap:
        raise ResourceLimitError(f"{rows} partial immersions exceed the ceiling {cap}")
    names = [tree.root] + [c for _, c in order]
    pos = {v: i for i, v in enumerate(names)}
    arr = np.zeros((1, 1, d), dtype=np.int64)
    for p, c in order:
        pts = spheres[tree.tree.label(p, c)].points
        n = arr.shape[0]
        # earlier edges vary slowest: repeat old rows, tile new points
        old = np.repeat(arr, len(pts), axis=0)
        child = old[:, pos[p], :] + np.tile(pts, (n, 1))
        arr = np.concatenate([old, child[:, None, :]], axis=1)
    return names, arr


def count_embeddings(tree: RootedTree, d: int, *, max_rows: int | None = None) -> int:
    """Exact number of injective immersions.

    All edges but the last are enumerated; the last vertex v = p + s is
    injective for |S_w| minus the number of already placed points at squared
    distance w from p, which needs no enumeration.
    """
    order = leaf_order(tree)
    if not order:
        return 1
    if count_immersions(tree, d) == 0:
        return 0
    names, arr = immersion_array(tree, d, upto=len(order) - 1, max_rows=max_rows)
    m = arr.shape[1]
    injective = np.ones(arr.shape[0], dtype=bool)
    for i in range(m):
        for j in range(i + 1, m):
            injective &= np.any(arr[:, i, :] != arr[:, j, :], axis=1)
    p, _ = order[-1]
    w = tree.tree.label(*order[-1])
    base = arr[:, names.index(p), :]
    sq = ((arr - base[:, None, :]) ** 2).sum(axis=2)
    clashes = (sq == w).sum(axis=1)
    free = sphere_size(d, w) - clashes
    return int(free[injective].sum())
