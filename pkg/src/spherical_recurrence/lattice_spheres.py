"""Lattice points on discrete spheres S_N = {x in Z^d : |x|^2 = N}.

Two independent backends are provided: explicit enumeration (recursive
descent over coordinates) and exact counting (iterated convolution of the
one-dimensional square-count sequence).  ``residue_profile`` pushes the
uniform measure on S_N forward to (Z_M)^d without enumerating S_N.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from spherical_recurrence import config
from spherical_recurrence.errors import ResourceLimitError, ValidationError


def _check_dims(d, N):
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ValidationError(f"dimension must be a positive integer, got {d!r}")
    if not isinstance(N, (int, np.integer)) or N < 0:
        raise ValidationError(f"squared radius must be a nonnegative integer, got {N!r}")


# ---------------------------------------------------------------------------
# counting backend


@lru_cache(maxsize=64)
def _count_table(d, n_max):
    """Exact r_d(n) for 0 <= n <= n_max, as a read-only integer array.

    Uses int64 when (2*sqrt(n_max)+1)^d certifies no overflow and Python
    integers (object dtype) otherwise.
    """
    safe = (2 * math.isqrt(n_max) + 3) ** d < 2 ** 62
    dtype = np.int64 if safe else object
    one = np.zeros(n_max + 1, dtype=dtype)
    one[0] = 1
    x = 1
    while x * x <= n_max:
        one[x * x] = 2
        x += 1
    table = one
    for _ in range(d - 1):
        out = np.zeros(n_max + 1, dtype=dtype)
        # sparse convolution: the one-dimensional sequence lives on squares
        x = 0
        while x * x <= n_max:
            s = x * x
            out[s:] += one[s] * table[: n_max + 1 - s]
            x += 1
        table = out
    table.setflags(write=False)
    return table


def _table_bound(N):
    # round up so that neighbouring queries share one cached table
    return max(64, 1 << (int(N).bit_length()))


def sphere_size(d: int, N: int) -> int:
    """|S_N| in dimension ``d``, computed without materializing points."""
    _check_dims(d, N)
    return int(_count_table(int(d), _table_bound(N))[int(N)])


def sphere_sizes(d: int, n_max: int) -> tuple[int, ...]:
    """(|S_0|, ..., |S_{n_max}|) in dimension ``d``."""
    _check_dims(d, n_max)
    return tuple(int(v) for v in _count_table(int(d), _table_bound(n_max))[: int(n_max) + 1])


# ---------------------------------------------------------------------------
# enumeration backend


@dataclass(frozen=True)
class DiscreteSphere:
    """All x in Z^d with sum(x_i^2) == radius_sq, rows in lexicographic order."""

    dimension: int
    radius_sq: int
    points: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        self.points.setflags(write=False)

    def __len__(self):
        return int(self.points.shape[0])

    def __iter__(self):
        for row in self.points:
            yield tuple(int(v) for v in row)

    def __contains__(self, x):
        x = tuple(x)
        return len(x) == self.dimension and sum(v * v for v in x) == self.radius_sq

    @property
    def is_empty(self):
        return self.points.shape[0] == 0


def _descend(d, N):
    if d == 1:
        r = math.isqrt(N)
        if r * r != N:
            return np.empty((0, 1), dtype=np.int64)
        if r == 0:
            return np.zeros((1, 1), dtype=np.int64)
        return np.array([[-r], [r]], dtype=np.int64)
    r = math.isqrt(N)
    blocks = [_prefixed(x, _descend_cached(d - 1, N - x * x)) for x in range(-r, r + 1)]
    return _stack(blocks, d)


@lru_cache(maxsize=2048)
def _descend_cached(d, N):
    pts = _descend(d, N)
    pts.setflags(write=False)
    return pts


def _prefixed(x, tail):
    out = np.empty((tail.shape[0], tail.shape[1] + 1), dtype=np.int64)
    out[:, 0] = x
    out[:, 1:] = tail
    return out


def _stack(blocks, d):
    blocks = [b for b in blocks if b.shape[0]]
    if not blocks:
        return np.empty((0, d), dtype=np.int64)
    return np.concatenate(blocks, axis=0)


def enumerate_sphere(d: int, N: int, *, max_points: int | None = None,
                     threads: int = 1) -> DiscreteSphere:
    """Materialize S_N in canonical (lexicographic) order.

    Raises ResourceLimitError when |S_N| exceeds ``max_points``; use
    :func:`sphere_size` in that regime.  ``threads`` splits the work over the
    first coordinate and never changes the result.
    """
    _check_dims(d, N)
    d, N = int(d), int(N)
    limit = config.max_points() if max_points is None else max_points
    size = sphere_size(d, N)
    if size > limit:
        raise ResourceLimitError(
            f"|S_{N}| = {size} in dimension {d} exceeds the point ceiling {limit}"
        )
    if d == 1 or threads <= 1:
        pts = _descend(d, N).copy()
    else:
        r = math.isqrt(N)
        first = list(range(-r, r + 1))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # map preserves input order, so the concatenation stays canonical
            blocks = list(pool.map(lambda x: _prefixed(x, _descend_cached(d - 1, N - x * x)), first))
        pts = _stack(blocks, d)
    return DiscreteSphere(d, N, pts)


def canonicalize(points) -> np.ndarray:
    """Sort rows lexicographically and drop duplicates."""
    arr = np.asarray(points, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        return arr.reshape(-1, arr.shape[-1] if arr.ndim == 2 else 0)
    return np.unique(arr, axis=0)


# ---------------------------------------------------------------------------
# residue profiles


@dataclass(frozen=True)
class ResidueSphereProfile:
    """Counts of S_N points in each residue class of (Z_M)^d.

    ``dense`` has shape (M,) * d; ``dense[r]`` is |{x in S_N : x = r mod M}|.
    """

    dimension: int
    radius_sq: int
    modulus: int
    dense: np.ndarray = field(repr=False, compare=False)

    @property
    def total(self) -> int:
        return int(self.dense.sum())

    @property
    def counts(self) -> dict[tuple[int, ...], int]:
        nz = np.argwhere(self.dense)
        return {tuple(int(v) for v in r): int(self.dense[tuple(r)]) for r in nz}

    def weights(self) -> np.ndarray:
        """Probability weights on (Z_M)^d (the pushforward of uniform on S_N)."""
        total = self.total
        if total == 0:
            return np.zeros(self.dense.shape, dtype=float)
        return self.dense.astype(float) / total

    def scaled(self, q: int) -> np.ndarray:
        """Counts of the residues of q*x for x in S_N (integer array)."""
        M, d = self.modulus, self.dimension
        out = np.zeros_like(self.dense)
        idx = np.indices(self.dense.shape).reshape(d, -1)
        target = tuple((q * idx) % M)
        np.add.at(out, target, self.dense.reshape(-1))
        return out


def residue_profile(d: int, N: int, M: int, *, max_work: int | None = None) -> ResidueSphereProfile:
    """Residue-class counts of S_N modulo M by DP over coordinates.

    The state after k coordinates is (partial squared sum, residue vector of
    the first k coordinates); the final coordinate only needs the rows that
    complete the sum to N.
    """
    _check_dims(d, N)
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise ValidationError(f"modulus must be a positive integer, got {M!r}")
    d, N, M = int(d), int(N), int(M)
    limit = config.max_work() if max_work is None else max_work
    work = (N + 1) * M ** d
    if work > limit:
        raise ResourceLimitError(
            f"residue profile needs (N+1)*M^d = {work} cells, ceiling is {limit}"
        )
    dtype = np.int64 if sphere_size(d, N) < 2 ** 62 else object

    # one-coordinate moves grouped by (square, residue)
    moves: dict[tuple[int, int], int] = {}
    r = math.isqrt(N)
    for x in range(-r, r + 1):
        key = (x * x, x % M)
        moves[key] = moves.get(key, 0) + 1

    # table[s, flat residue of the coordinates placed so far]
    table = np.zeros((N + 1, 1), dtype=dtype)
    table[0, 0] = 1
    for k in range(d):
        last = k == d - 1
        width = table.shape[1]
        if last:
            new = np.zeros((width, M), dtype=dtype)
            for (s, res), mult in moves.items():
                new[:, res] += mult * table[N - s]
            table = new.reshape(1, width * M)
        else:
            new = np.zeros((N + 1, width, M), dtype=dtype)
            for (s, res), mult in moves.items():
                new[s:, :, res] += mult * table[: N + 1 - s]
            table = new.reshape(N + 1, width * M)
    dense = table.reshape((M,) * d)
    dense.setflags(write=False)
    return ResidueSphereProfile(d, N, M, dense)


def fold_mod(sphere: DiscreteSphere, M: int) -> np.ndarray:
    """Residue-class counts obtained by reducing every enumerated point mod M."""
    d = sphere.dimension
    out = np.zeros((M,) * d, dtype=np.int64)
    if len(sphere):
        np.add.at(out, tuple((sphere.points % M).T), 1)
    return out


def symmetry_images(points: np.ndarray):
    """Yield the point set under every coordinate permutation and sign pattern."""
    d = points.shape[1]
    for perm in itertools.permutations(range(d)):
        for signs in itertools.product((1, -1), repeat=d):
            yield points[:, perm] * np.asarray(signs, dtype=np.int64)
