"""Chains, trees and distance sets inside a finite window B in [0, L)^d.

Searches treat the window literally (no wraparound) and visit base points in
lexicographic order and sphere offsets in canonical sphere order, so every
report is reproducible.  The budget counts placed vertices.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from spherical_recurrence.errors import ValidationError
from spherical_recurrence.lattice_spheres import enumerate_sphere
from spherical_recurrence.tree_model import Immersion, RootedTree, leaf_order

FOUND = "found"
NOT_FOUND = "not_found"
BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class WindowSet:
    dimension: int
    side: int
    mask: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (self.side,) * self.dimension:
            raise ValidationError(f"mask shape {mask.shape} does not match the window")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_points(cls, d: int, L: int, points) -> "WindowSet":
        mask = np.zeros((L,) * d, dtype=bool)
        for p in points:
            p = tuple(int(v) for v in p)
            if len(p) != d or any(not 0 <= v < L for v in p):
                raise ValidationError(f"point {p} lies outside [0, {L})^{d}")
            mask[p] = True
        return cls(d, L, mask)

    @property
    def points(self) -> np.ndarray:
        """Points as rows in lexicographic order."""
        return np.argwhere(self.mask).astype(np.int64)

    def __len__(self):
        return int(np.count_nonzero(self.mask))

    @property
    def density(self) -> float:
        return len(self) / self.side ** self.dimension

    def __contains__(self, p) -> bool:
        p = tuple(int(v) for v in p)
        if len(p) != self.dimension or any(not 0 <= v < self.side for v in p):
            return False
        return bool(self.mask[p])

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts)
        inside = np.all((pts >= 0) & (pts < self.side), axis=1)
        out = np.zeros(pts.shape[0], dtype=bool)
        if inside.any():
            out[inside] = self.mask[tuple(pts[inside].T)]
        return out

    def scaled(self, q: int) -> "WindowSet":
        """The set q*B inside the window [0, q*(L-1)+1)^d."""
        return WindowSet.from_points(self.dimension, q * (self.side - 1) + 1,
                                     (q * p for p in self.points))

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "side": self.side,
            "points": [[int(v) for v in p] for p in self.points],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WindowSet":
        unknown = set(data) - {"dimension", "side", "points", "generator"}
        if unknown:
            raise ValidationError(f"unknown window fields: {sorted(unknown)}")
        try:
            d, L = int(data["dimension"]), int(data["side"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"window needs dimension and side ({exc})") from None
        if ("points" in data) == ("generator" in data):
            raise ValidationError("give exactly one of 'points' or 'generator'")
        if "points" in data:
            return cls.from_points(d, L, data["points"])
        return generate_window(dict(data["generator"]), d, L)[0]

    @classmethod
    def load(cls, path) -> "WindowSet":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def generate_window(kind: dict, d: int, L: int):
    """Build a window from a generator descriptor; returns (set, planted witness or None).

    Descriptors: ``{"kind": "uniform_random", "density": p, "seed": s}``,
    ``{"kind": "congruence", "g": g, "residues": [...]}`` and
    ``{"kind": "planted", "witness": [[...], ...], "noise": p, "seed": s}``.
    """
    name = kind.get("kind")
    shape = (L,) * d
    if name == "uniform_random":
        p = float(kind["density"])
        if not 0 <= p <= 1:
            raise ValidationError("density must lie in [0, 1]")
        rng = np.random.default_rng(int(kind.get("seed", 0)))
        return WindowSet(d, L, rng.random(shape) < p), None
    if name == "congruence":
        g = int(kind["g"])
        if g < 1:
            raise ValidationError("g must be positive")
        sel = np.zeros((g,) * d, dtype=bool)
        for r in kind["residues"]:
            r = (r,) * d if isinstance(r, int) else tuple(r)
            if len(r) != d:
                raise ValidationError(f"residue {r} has wrong dimension")
            sel[tuple(int(v) % g for v in r)] = True
        idx = np.arange(L) % g
        return WindowSet(d, L, sel[np.ix_(*([idx] * d))]), None
    if name == "planted":
        witness = [tuple(int(v) for v in p) for p in kind["witness"]]
        noise = float(kind.get("noise", 0.0))
        rng = np.random.default_rng(int(kind.get("seed", 0)))
        mask = rng.random(shape) < noise
        for p in witness:
            if len(p) != d or any(not 0 <= v < L for v in p):
                raise ValidationError(f"planted point {p} does not fit in the window")
            mask[p] = True
        return WindowSet(d, L, mask), witness
    raise ValidationError(f"unknown generator kind {name!r}")


# ---------------------------------------------------------------------------
# distance sets


def squared_distance_set(B: WindowSet) -> frozenset[int]:
    """{|b1 - b2|^2 : b1, b2 in B}; contains 0 exactly when B is nonempty."""
    pts = B.points
    n = pts.shape[0]
    if n == 0:
        return frozenset()
    if n * n <= 4_000_000:
        out = {0}
        for start in range(0, n, 512):
            block = pts[start:start + 512]
            diff = block[:, None, :] - pts[None, :, :]
            out.update(np.unique((diff * diff).sum(axis=2)).tolist())
        return frozenset(int(v) for v in out)
    # difference set via autocorrelation of the indicator on a padded grid
    size = 2 * B.side
    axes = tuple(range(B.dimension))
    F = np.fft.rfftn(B.mask.astype(float), s=(size,) * B.dimension, axes=axes)
    corr = np.fft.irfftn(F * np.conj(F), s=(size,) * B.dimension, axes=axes)
    present = corr > 0.5
    offs = np.arange(size)
    offs = np.where(offs >= B.side, offs - size, offs)
    sq = np.zeros((size,) * B.dimension, dtype=np.int64)
    for axis in range(B.dimension):
        shape = [1] * B.dimension
        shape[axis] = size
        sq = sq + (offs ** 2).reshape(shape)
    return frozenset(int(v) for v in np.unique(sq[present]))


@dataclass
class CoverageReport:
    q: int
    lo: int
    hi: int
    attained: list[bool]

    @property
    def empirical_N0(self) -> int | None:
        """Smallest t in [lo, hi] with q*t' attained for every t' in [t, hi]."""
        t = None
        for i in range(len(self.attained) - 1, -1, -1):
            if not self.attained[i]:
                break
            t = self.lo + i
        return t

    @property
    def missing(self) -> list[int]:
        return [self.lo + i for i, a in enumerate(self.attained) if not a]

    def to_dict(self) -> dict:
        return {
            "q": self.q, "lo": self.lo, "hi": self.hi,
            "attained_count": sum(self.attained),
            "missing_t": self.missing,
            "empirical_N0": self.empirical_N0,
        }


def ap_coverage(B: WindowSet, q: int, lo: int, hi: int, *, distances=None) -> CoverageReport:
    """Which multiples q*t, lo <= t <= hi, occur as squared distances in B."""
    if q < 1 or lo > hi:
        raise ValidationError("need q >= 1 and lo <= hi")
    D = squared_distance_set(B) if distances is None else distances
    return CoverageReport(q, lo, hi, [q * t in D for t in range(lo, hi + 1)])


# ---------------------------------------------------------------------------
# searches


@dataclass(frozen=True)
class ChainQuery:
    q: int
    gaps: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "gaps", tuple(int(t) for t in self.gaps))
        if self.q < 1 or not self.gaps or any(t < 1 for t in self.gaps):
            raise ValidationError("chain query needs q >= 1 and at least one gap, all >= 1")


@dataclass
class SearchReport:
    query: dict
    status: str
    nodes_explored: int
    budget: int | None
    witness: dict | None = None

    @property
    def found(self) -> bool:
        return self.status == FOUND

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "status": self.status,
            "found": self.found,
            "nodes_explored": self.nodes_explored,
            "budget": self.budget,
            "witness": self.witness,
        }


class _Budget(Exception):
    pass


def validate_chain(B: WindowSet, query: ChainQuery, chain) -> bool:
    chain = [tuple(int(v) for v in p) for p in chain]
    if len(chain) != len(query.gaps) + 1 or len(set(chain)) != len(chain):
        return False
    if not all(p in B for p in chain):
        return False
    return all(sum((a - b) ** 2 for a, b in zip(chain[i], chain[i + 1])) == query.q * t
               for i, t in enumerate(query.gaps))


def find_chain(B: WindowSet, query: ChainQuery, budget: int | None = None) -> SearchReport:
    """Distinct b_1..b_{m+1} in B with |b_i - b_{i+1}|^2 = q t_i (backtracking)."""
    d = B.dimension
    echo = {"q": query.q, "gaps": list(query.gaps)}
    offsets = [enumerate_sphere(d, query.q * t).points for t in query.gaps]
    nodes = 0

    def tick():
        nonlocal nodes
        if budget is not None and nodes >= budget:
            raise _Budget
        nodes += 1

    chain: list[tuple[int, ...]] = []

    def extend(i):
        if i == len(offsets):
            return True
        cur = np.asarray(chain[-1], dtype=np.int64)
        cand = cur + offsets[i]
        for p in cand[B.contains_many(cand)]:
            p = tuple(int(v) for v in p)
            if p in chain:
                continue
            tick()
            chain.append(p)
            if extend(i + 1):
                return True
            chain.pop()
        return False

    try:
        if all(len(o) for o in offsets):
            for b in B.points:
                tick()
                chain[:] = [tuple(int(v) for v in b)]
                if extend(0):
                    assert validate_chain(B, query, chain)
                    return SearchReport(echo, FOUND, nodes, budget,
                                        {"chain": [list(p) for p in chain]})
    except _Budget:
        return SearchReport(echo, BUDGET_EXHAUSTED, nodes, budget)
    return SearchReport(echo, NOT_FOUND, nodes, budget)


def validate_tree_witness(B: WindowSet, tree: RootedTree, q: int, base, placement) -> bool:
    """Injective, locally isometric, root at 0, and base + q*iota(V) inside B."""
    imm = Immersion(tree, {v: tuple(int(c) for c in p) for v, p in placement.items()})
    if set(imm.placement) != set(tree.tree.vertices) or not imm.validate():
        return False
    pts = list(imm.placement.values())
    if len(set(pts)) != len(pts):
        return False
    return all(tuple(b + q * c for b, c in zip(base, p)) in B for p in pts)


def find_tree_embedding(B: WindowSet, tree: RootedTree, q: int,
                        budget: int | None = None) -> SearchReport:
    """Base b in B and an embedding iota with b + q*iota(V) inside B."""
    if q < 1:
        raise ValidationError("q must be positive")
    d = B.dimension
    echo = {"q": q, "tree": tree.to_dict()}
    order = leaf_order(tree)
    offsets = [q * enumerate_sphere(d, tree.tree.label(p, c)).points for p, c in order]
    nodes = 0

    def tick():
        nonlocal nodes
        if budget is not None and nodes >= budget:
            raise _Budget
        nodes += 1

    # absolute positions (base + q*iota) of the placed vertices
    placed: dict[str, tuple[int, ...]] = {}
    used: set[tuple[int, ...]] = set()

    def extend(i):
        if i == len(order):
            return True
        p, c = order[i]
        cand = np.asarray(placed[p], dtype=np.int64) + offsets[i]
        for x in cand[B.contains_many(cand)]:
            x = tuple(int(v) for v in x)
            if x in used:
                continue
            tick()
            placed[c] = x
            used.add(x)
            if extend(i + 1):
                return True
            used.discard(x)
            del placed[c]
        return False

    try:
        if all(len(o) for o in offsets):
            for b in B.points:
                tick()
                b = tuple(int(v) for v in b)
                placed.clear()
                used.clear()
                placed[tree.root] = b
                used.add(b)
                if extend(0):
                    iota = {v: tuple((x - y) // q for x, y in zip(placed[v], b))
                            for v in tree.tree.vertices}
                    assert validate_tree_witness(B, tree, q, b, iota)
                    return SearchReport(echo, FOUND, nodes, budget, {
                        "base": list(b),
                        "embedding": {v: list(iota[v]) for v in tree.tree.vertices},
                        "points": {v: list(placed[v]) for v in tree.tree.vertices},
                    })
    except _Budget:
        return SearchReport(echo, BUDGET_EXHAUSTED, nodes, budget)
    return SearchReport(echo, NOT_FOUND, nodes, budget)


# ---------------------------------------------------------------------------
# brute-force references


def brute_force_chain_exists(B: WindowSet, query: ChainQuery) -> bool:
    """Exhaustive check over all (m+1)-tuples of distinct points."""
    pts = [tuple(int(v) for v in p) for p in B.points]
    targets = [query.q * t for t in query.gaps]
    for combo in itertools.permutations(pts, len(targets) + 1):
        if all(sum((a - b) ** 2 for a, b in zip(combo[i], combo[i + 1])) == targets[i]
               for i in range(len(targets))):
            return True
    return False


def brute_force_tree_exists(B: WindowSet, tree: RootedTree, q: int) -> bool:
    """Exhaustive check over injective vertex placements into B."""
    pts = [tuple(int(v) for v in p) for p in B.points]
    verts = list(tree.tree.vertices)
    if len(pts) < len(verts):
        return False
    for combo in itertools.permutations(pts, len(verts)):
        pos = dict(zip(verts, combo))
        if all(sum((a - b) ** 2 for a, b in zip(pos[u], pos[v])) == q * q * w
               and all((a - b) % q == 0 for a, b in zip(pos[u], pos[v]))
               for (u, v), w in tree.tree.labels):
            return True
    return False

