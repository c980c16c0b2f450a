"""Exact ergodic quantities for translation actions on finite tori.

The model system is X = (Z_M)^d with uniform measure and T^a x = x + a.
Functions on X are arrays of shape (M,) * d, and the translate T^a f is
``x -> f(x + a)``; accordingly ``T^a B`` denotes ``B - a`` so that its
indicator is ``T^a 1_B``.

On such a system the Birkhoff limit of ``1_B`` along the sub-action ``T^q``
is the density of ``B`` in the coset ``x + (g Z_M)^d`` with ``g = gcd(q, M)``,
so the ergodic statements reduce to finite identities and inequalities.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

from spherical_recurrence.errors import EmptySphereError, ModulusExhaustedError, ValidationError
from spherical_recurrence.lattice_spheres import residue_profile, sphere_size
from spherical_recurrence.tree_model import (
    Immersion,
    RootedTree,
    _immersion_stream,
    is_embedding,
)

IDENTITY_TOL = 1e-10


# ---------------------------------------------------------------------------
# systems and sets


@dataclass(frozen=True)
class TorusSystem:
    modulus: int
    dimension: int

    def __post_init__(self):
        if self.modulus < 1 or self.dimension < 1:
            raise ValidationError("modulus and dimension must be positive integers")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.modulus,) * self.dimension

    @property
    def size(self) -> int:
        return self.modulus ** self.dimension

    def translate(self, f: np.ndarray, a) -> np.ndarray:
        """T^a f, i.e. x -> f(x + a)."""
        shift = tuple(-int(v) % self.modulus for v in a)
        return np.roll(f, shift, axis=tuple(range(self.dimension)))

    def integrate(self, f: np.ndarray):
        return f.mean()

    def norm(self, f: np.ndarray) -> float:
        """L^2(mu) norm."""
        return float(np.sqrt(np.mean(np.abs(f) ** 2)))

    def check_action(self) -> dict:
        """Measure preservation and ergodicity of the translation action."""
        M, d = self.modulus, self.dimension
        # the orbit of 0 under the generators e_i is all of X
        reached = np.zeros(self.shape, dtype=bool)
        frontier = [(0,) * d]
        reached[frontier[0]] = True
        while frontier:
            nxt = []
            for x in frontier:
                for i in range(d):
                    y = list(x)
                    y[i] = (y[i] + 1) % M
                    y = tuple(y)
                    if not reached[y]:
                        reached[y] = True
                        nxt.append(y)
            frontier = nxt
        labels = np.arange(self.size).reshape(self.shape)
        bijective = all(
            np.array_equal(np.sort(self.translate(labels, np.eye(d, dtype=int)[i]).ravel()),
                           np.arange(self.size))
            for i in range(d)
        )
        return {"ergodic": bool(reached.all()), "measure_preserving": bijective}


@dataclass(frozen=True)
class MeasurableSet:
    system: TorusSystem
    mask: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.system.shape:
            raise ValidationError(f"mask shape {mask.shape} != {self.system.shape}")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def measure(self) -> float:
        return self.count / self.system.size

    @property
    def measure_exact(self) -> Fraction:
        return Fraction(self.count, self.system.size)

    @property
    def indicator(self) -> np.ndarray:
        return self.mask.astype(float)

    def points(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in p) for p in np.argwhere(self.mask)]

    def translate(self, a) -> "MeasurableSet":
        return MeasurableSet(self.system, self.system.translate(self.mask, a))

    def __and__(self, other):
        return MeasurableSet(self.system, self.mask & other.mask)

    def __or__(self, other):
        return MeasurableSet(self.system, self.mask | other.mask)

    def __sub__(self, other):
        return MeasurableSet(self.system, self.mask & ~other.mask)

    # constructors

    @classmethod
    def empty(cls, system):
        return cls(system, np.zeros(system.shape, dtype=bool))

    @classmethod
    def full(cls, system):
        return cls(system, np.ones(system.shape, dtype=bool))

    @classmethod
    def from_points(cls, system, points):
        mask = np.zeros(system.shape, dtype=bool)
        for p in points:
            p = tuple(int(v) for v in p)
            if len(p) != system.dimension:
                raise ValidationError(f"point {p} has wrong dimension")
            mask[tuple(v % system.modulus for v in p)] = True
        return cls(system, mask)

    @classmethod
    def from_congruence(cls, system, g, residues):
        """All x with (x mod g) in ``residues``; g must divide M.

        A bare integer residue r stands for the vector (r, ..., r).
        """
        M, d = system.modulus, system.dimension
        if g < 1 or M % g:
            raise ValidationError(f"congruence modulus {g} must divide {M}")
        res = np.zeros((g,) * d, dtype=bool)
        for r in residues:
            r = (r,) * d if isinstance(r, (int, np.integer)) else tuple(r)
            if len(r) != d:
                raise ValidationError(f"residue {r} has wrong dimension")
            res[tuple(int(v) % g for v in r)] = True
        idx = np.arange(M) % g
        return cls(system, res[np.ix_(*([idx] * d))])

    @classmethod
    def random(cls, system, density, seed):
        rng = np.random.default_rng(seed)
        return cls(system, rng.random(system.shape) < density)

    # serialization

    def to_dict(self) -> dict:
        return {
            "modulus": self.system.modulus,
            "dimension": self.system.dimension,
            "points": [list(p) for p in self.points()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurableSet":
        try:
            system = TorusSystem(int(data["modulus"]), int(data["dimension"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"set description needs modulus and dimension ({exc})") from None
        unknown = set(data) - {"modulus", "dimension", "points", "congruence"}
        if unknown:
            raise ValidationError(f"unknown set fields: {sorted(unknown)}")
        if ("points" in data) == ("congruence" in data):
            raise ValidationError("give exactly one of 'points' or 'congruence'")
        if "points" in data:
            return cls.from_points(system, data["points"])
        cong = data["congruence"]
        try:
            return cls.from_congruence(system, int(cong["g"]), cong["residues"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"congruence needs g and residues ({exc})") from None

    @classmethod
    def load(cls, path) -> "MeasurableSet":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def _as_function(system: TorusSystem, f) -> np.ndarray:
    if isinstance(f, MeasurableSet):
        return f.indicator
    arr = np.asarray(f)
    if arr.shape != system.shape:
        raise ValidationError(f"function shape {arr.shape} != {system.shape}")
    return arr


# ---------------------------------------------------------------------------
# characters


@dataclass(frozen=True)
class SpectralCoefficients:
    """c_k = <f, chi_k> for chi_k(x) = exp(2 pi i <k, x> / M)."""

    system: TorusSystem
    coeffs: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def of(cls, system, f) -> "SpectralCoefficients":
        f = _as_function(system, f)
        # numpy's forward transform carries exp(-2 pi i k x / M) = conj(chi_k)
        return cls(system, np.fft.fftn(f) / system.size)

    @property
    def mass(self) -> float:
        """sum_k |c_k|^2, which equals ||f||_2^2 (Parseval)."""
        return math.fsum((np.abs(self.coeffs) ** 2).ravel().tolist())

    @property
    def mean(self) -> complex:
        return complex(self.coeffs[(0,) * self.system.dimension])

    def synthesize(self, keep: np.ndarray | None = None) -> np.ndarray:
        """sum over kept k of c_k chi_k."""
        c = self.coeffs if keep is None else np.where(keep, self.coeffs, 0)
        return np.fft.ifftn(c) * self.system.size

    def norm(self, keep: np.ndarray | None = None) -> float:
        c = self.coeffs if keep is None else self.coeffs[keep]
        return math.sqrt(math.fsum((np.abs(c) ** 2).ravel().tolist()))


def torsion_characters(system: TorusSystem, q: int, *, include_trivial=True) -> np.ndarray:
    """Mask of k with chi_k^q = 1, i.e. M | q k_i for every i."""
    g = math.gcd(q, system.modulus)
    step = system.modulus // g
    axis = np.arange(system.modulus) % step == 0
    keep = np.ones(system.shape, dtype=bool)
    for i in range(system.dimension):
        shape = [1] * system.dimension
        shape[i] = system.modulus
        keep = keep & axis.reshape(shape)
    if not include_trivial:
        keep[(0,) * system.dimension] = False
    return keep


# ---------------------------------------------------------------------------
# invariant projections and components


def _coset_sums(system: TorusSystem, f: np.ndarray, g: int) -> np.ndarray:
    """Sums of f over each coset a + (g Z_M)^d, indexed by a in [0, g)^d."""
    M, d = system.modulus, system.dimension
    shape = []
    for _ in range(d):
        shape += [M // g, g]
    return f.reshape(shape).sum(axis=tuple(range(0, 2 * d, 2)))


def _lift(system: TorusSystem, per_coset: np.ndarray, g: int) -> np.ndarray:
    idx = np.arange(system.modulus) % g
    return per_coset[np.ix_(*([idx] * system.dimension))]


def invariant_projection(system: TorusSystem, B, q: int) -> np.ndarray:
    """P_{T^q} f: the average of f over the T^q-orbit (coset of gcd(q, M)) of x."""
    if q < 1:
        raise ValidationError("q must be a positive integer")
    f = _as_function(system, B)
    g = math.gcd(q, system.modulus)
    coset_size = (system.modulus // g) ** system.dimension
    return _lift(system, _coset_sums(system, f, g) / coset_size, g)


def q_torsion_projection(system: TorusSystem, B, q: int) -> tuple[np.ndarray, float]:
    """Projection h of f onto the nontrivial characters killed by q, and ||h||_2."""
    if q < 1:
        raise ValidationError("q must be a positive integer")
    spec = SpectralCoefficients.of(system, B)
    keep = torsion_characters(system, q, include_trivial=False)
    h = spec.synthesize(keep)
    return h, spec.norm(keep)


@dataclass(frozen=True)
class Component:
    """The coset base + (gap * Z_M)^d with its conditional measure."""

    system: TorusSystem
    gap: int
    base: tuple[int, ...]

    def __post_init__(self):
        if self.system.modulus % self.gap:
            raise ValidationError(f"gap {self.gap} must divide {self.system.modulus}")
        object.__setattr__(self, "base", tuple(int(b) % self.gap for b in self.base))

    @cached_property
    def mask(self) -> np.ndarray:
        sel = np.zeros((self.gap,) * self.system.dimension, dtype=bool)
        sel[self.base] = True
        return _lift(self.system, sel, self.gap)

    @property
    def measure(self) -> Fraction:
        return Fraction(1, self.gap ** self.system.dimension)

    @property
    def cardinality(self) -> int:
        return (self.system.modulus // self.gap) ** self.system.dimension

    def density(self, B: MeasurableSet) -> Fraction:
        """nu(B) = mu(B | C)."""
        return Fraction(int(np.count_nonzero(B.mask & self.mask)), self.cardinality)

    def to_dict(self) -> dict:
        return {"gap": self.gap, "base": list(self.base), "measure": float(self.measure)}


def ergodic_components(system: TorusSystem, Q: int) -> list[Component]:
    """The gcd(Q, M)^d cosets of (gcd(Q, M) Z_M)^d, in lexicographic order."""
    if Q < 1:
        raise ValidationError("Q must be a positive integer")
    g = math.gcd(Q, system.modulus)
    return [Component(system, g, base)
            for base in itertools.product(range(g), repeat=system.dimension)]


def verify_components(system: TorusSystem, Q: int, B: MeasurableSet | None = None) -> dict:
    """Check invariance, ergodicity, partition and measure claims for T^Q."""
    comps = ergodic_components(system, Q)
    d, M = system.dimension, system.modulus
    g = comps[0].gap
    gens = [tuple(Q if j == i else 0 for j in range(d)) for i in range(d)]
    invariant = all(
        np.array_equal(system.translate(c.mask, a), c.mask) for c in comps for a in gens
    )
    # multiples of Q mod M are exactly the multiples of g, so T^Q moves
    # within a coset transitively
    steps = {(Q * a) % M for a in range(M)}
    transitive = steps == set(range(0, M, g))
    cover = np.sum([c.mask.astype(np.int64) for c in comps], axis=0)
    out = {
        "Q": Q,
        "gap": g,
        "count": len(comps),
        "count_ok": len(comps) == g ** d,
        "invariant": bool(invariant),
        "ergodic": bool(transitive),
        "partition": bool(np.all(cover == 1)),
        "equal_measure": len({c.measure for c in comps}) == 1,
        "measure_lower_bound": all(c.measure >= Fraction(1, Q ** d) for c in comps),
    }
    if B is not None:
        avg = sum((c.density(B) for c in comps), Fraction(0)) / len(comps)
        out["average_of_components"] = avg == B.measure_exact
    return out


@dataclass
class EquidistributionResult:
    q: int
    delta: float
    measure: float
    max_density: float
    equidistributed: bool
    witness: Component | None = None

    @property
    def bound(self) -> float:
        return (1 + self.delta) * self.measure

    def to_dict(self) -> dict:
        return {
            "q": self.q, "delta": self.delta, "measure": self.measure,
            "max_density": self.max_density, "bound": self.bound,
            "equidistributed": self.equidistributed,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }


def _densest_subcoset(system, B, outer: Component, g_inner: int):
    """Densest coset of (g_inner Z_M)^d inside ``outer`` (lexicographic tie-break)."""
    counts = _coset_sums(system, B.mask.astype(np.int64), g_inner)
    size = (system.modulus // g_inner) ** system.dimension
    best = None
    for a in itertools.product(range(g_inner), repeat=system.dimension):
        if any(ai % outer.gap != bi for ai, bi in zip(a, outer.base)):
            continue
        dens = Fraction(int(counts[a]), size)
        if best is None or dens > best[1]:
            best = (a, dens)
    return Component(system, g_inner, best[0]), best[1]


def is_equidistributed(system: TorusSystem, B: MeasurableSet, q: int,
                       delta: float) -> EquidistributionResult:
    """max_x P_{T^q} 1_B(x) <= (1 + delta) mu(B), decided in exact arithmetic."""
    if q < 1 or delta < 0:
        raise ValidationError("need q >= 1 and delta >= 0")
    whole = Component(system, 1, (0,) * system.dimension)
    g = math.gcd(q, system.modulus)
    comp, dens = _densest_subcoset(system, B, whole, g)
    ok = dens <= (1 + Fraction(delta)) * B.measure_exact
    return EquidistributionResult(q, delta, B.measure, float(dens), ok,
                                  None if ok else comp)


@dataclass
class IncrementResult:
    Q: int
    J: int
    component: Component
    certificate: dict


def measure_increment(system: TorusSystem, B: MeasurableSet, q: int, delta: float,
                      epsilon: float) -> IncrementResult:
    """Pass to denser components of T^q, T^{q^2}, ... until B is equidistributed.

    At each stage the densest T^{Qq}-component inside the current one is
    taken whenever it beats (1 + delta) times the current density.
    """
    mu = B.measure_exact
    if not (0 < Fraction(epsilon) < mu):
        raise ValidationError(f"need 0 < epsilon < mu(B) = {float(mu)}, got {epsilon}")
    if not delta > 0:
        raise ValidationError("delta must be positive")
    if q < 2:
        raise ValidationError("q must be at least 2")
    growth = 1 + Fraction(delta)
    j_max = math.log(1 / epsilon) / math.log1p(delta)

    comp = Component(system, 1, (0,) * system.dimension)
    density = mu
    Q, J = 1, 0
    steps = [{"j": 0, "Q": 1, "gap": 1, "base": list(comp.base), "density": float(density)}]
    while True:
        g_next = math.gcd(Q * q, system.modulus)
        sub, sub_density = _densest_subcoset(system, B, comp, g_next)
        if sub_density <= growth * density:
            break
        if g_next == comp.gap or J + 1 > j_max + 1e-9:
            # unreachable in exact arithmetic: equal gaps give sub == comp
            raise ModulusExhaustedError(
                "component refinement stalled before equidistribution",
                {"steps": steps},
            )
        comp, density = sub, sub_density
        Q *= q
        J += 1
        steps.append({"j": J, "Q": Q, "gap": comp.gap, "base": list(comp.base),
                      "density": float(density)})

    certificate = {
        "inputs": {"modulus": system.modulus, "dimension": system.dimension,
                   "q": q, "delta": delta, "epsilon": epsilon, "measure": float(mu)},
        "steps": steps,
        "Q": Q,
        "J": J,
        "J_bound": j_max,
        "Q_within_bound": J <= j_max + 1e-12,
        "increments_ok": all(b["density"] >= (1 + delta) * a["density"] * (1 - 1e-12)
                             for a, b in zip(steps, steps[1:])),
        "final_density": float(density),
        "density_not_decreased": density >= mu,
        "final_max_subdensity": float(sub_density),
        "equidistributed_on_component": True,
    }
    return IncrementResult(Q, J, comp, certificate)


# ---------------------------------------------------------------------------
# spherical averages


@lru_cache(maxsize=256)
def _sphere_residue_counts(M: int, d: int, N: int, q: int) -> tuple[np.ndarray, int]:
    size = sphere_size(d, N)
    if size == 0:
        raise EmptySphereError(d, N)
    prof = residue_profile(d, N, M)
    counts = prof.dense if q % M == 1 % M else prof.scaled(q)
    counts = np.asarray(counts, dtype=float if size >= 2 ** 53 else np.int64)
    counts.setflags(write=False)
    return counts, size


def sphere_weights(system: TorusSystem, N: int, q: int = 1) -> np.ndarray:
    """Distribution of q*a mod M for a uniform on S_N."""
    counts, size = _sphere_residue_counts(system.modulus, system.dimension, N, q)
    return counts / size


def sphere_multipliers(system: TorusSystem, N: int, q: int = 1) -> np.ndarray:
    """Eigenvalue of the averaging operator on chi_k: the exp sum of S_N at q k / M."""
    w = sphere_weights(system, N, q)
    return np.conj(np.fft.fftn(w))


def spherical_average(system: TorusSystem, f, N: int, q: int = 1) -> np.ndarray:
    """x -> (1/|S_N|) sum over a in S_N of f(x + q a), via the residue profile."""
    arr = _as_function(system, f)
    out = np.fft.ifftn(np.fft.fftn(arr) * sphere_multipliers(system, N, q))
    return out.real if np.isrealobj(arr) else out


def spherical_sum_exact(system: TorusSystem, B: MeasurableSet, N: int, q: int = 1) -> np.ndarray | None:
    """Integer array x -> |{a in S_N : x + q a in B}|, or None if not exactly recoverable."""
    counts, size = _sphere_residue_counts(system.modulus, system.dimension, N, q)
    if size >= 2 ** 40:
        return None
    raw = np.fft.ifftn(np.fft.fftn(B.indicator) * np.conj(np.fft.fftn(counts))).real
    out = np.rint(raw).astype(np.int64)
    if np.max(np.abs(raw - out)) > 0.25:
        return None
    return out


def spherical_mean_deviation(system: TorusSystem, B: MeasurableSet, N: int, q: int = 1) -> float:
    """|| mu(B) - A_N 1_B ||_2."""
    avg = spherical_average(system, B, N, q)
    return system.norm(B.measure - avg)


def spherical_correlation(system: TorusSystem, B: MeasurableSet, N: int, q: int = 1) -> float:
    """(1/|S_N|) sum over a in S_N of mu(B cap T^{qa} B)."""
    avg = spherical_average(system, B, N, q)
    return float(np.mean(B.indicator * avg))


def mean_ergodic_decomposition(system: TorusSystem, B: MeasurableSet, N: int, q: int) -> dict:
    """Split mu(B) - A_N 1_B along characters killed by q and the rest.

    Returns the deviation, its exact spectral value
    sqrt(sum_{k != 0} |c_k|^2 |sigma_N(k/M)|^2), the norms of the two
    spectral pieces, the largest |sigma_N(k/M)| over k outside R_q, and the
    bound ||h|| + max_minor * ||rest||.
    """
    spec = SpectralCoefficients.of(system, B)
    sigma = sphere_multipliers(system, N, 1)
    torsion = torsion_characters(system, q, include_trivial=False)
    outside = ~torsion_characters(system, q, include_trivial=True)
    nontrivial = np.ones(system.shape, dtype=bool)
    nontrivial[(0,) * system.dimension] = False
    spectral = math.sqrt(math.fsum((np.abs(spec.coeffs[nontrivial]) ** 2
                                    * np.abs(sigma[nontrivial]) ** 2).tolist()))
    h_norm = spec.norm(torsion)
    rest_norm = spec.norm(outside)
    minor_max = float(np.max(np.abs(sigma[outside]))) if outside.any() else 0.0
    deviation = spherical_mean_deviation(system, B, N)
    return {
        "N": N,
        "q": q,
        "deviation": deviation,
        "spectral_deviation": spectral,
        "h_norm": h_norm,
        "rest_norm": rest_norm,
        "minor_max": minor_max,
        "bound": h_norm + minor_max * rest_norm,
    }


# ---------------------------------------------------------------------------
# trees


def _check_tree_spheres(tree: RootedTree, d: int):
    for (u, v), w in tree.tree.labels:
        if sphere_size(d, w) == 0:
            raise EmptySphereError(d, w, context=f"edge {u}-{v}")


def tree_correlation_expectation(system: TorusSystem, B: MeasurableSet, tree: RootedTree,
                                 q: int = 1) -> float:
    """E over immersions of mu(intersection over v of T^{q iota(v)} B).

    Leaves are peeled into the averaging operator of their edge:
    F_v = 1_B * prod over children c of A_{label(v, c)} F_c, result = mean(F_root).
    """
    _check_tree_spheres(tree, system.dimension)
    base = B.indicator

    def peel(v):
        out = base.copy()
        for c in tree.children[v]:
            out *= spherical_average(system, peel(c), tree.tree.label(v, c), q)
        return out

    return float(np.mean(peel(tree.root)))


def intersection_measure(system: TorusSystem, B: MeasurableSet, imm: Immersion, q: int = 1) -> float:
    """mu(intersection over v of T^{q iota(v)} B)."""
    acc = np.ones(system.shape, dtype=bool)
    for p in imm.placement.values():
        acc &= system.translate(B.mask, [q * c for c in p])
    return int(np.count_nonzero(acc)) / system.size


@dataclass
class RecurrenceSearch:
    found: bool
    threshold: float
    examined: int
    embedding: Immersion | None
    measure: float | None

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "status": "found" if self.found else "not_found",
            "threshold": self.threshold,
            "examined": self.examined,
            "embedding": None if self.embedding is None else self.embedding.to_dict(),
            "measure": self.measure,
        }


def find_recurrent_embedding(system: TorusSystem, B: MeasurableSet, tree: RootedTree, q: int,
                             threshold: float, *, max_iter: int = 100_000) -> RecurrenceSearch:
    """First embedding (canonical order) whose intersection measure reaches
    ``threshold``; otherwise the best one seen within ``max_iter`` embeddings."""
    _check_tree_spheres(tree, system.dimension)
    best, best_measure, examined = None, None, 0
    for imm in _immersion_stream(tree, system.dimension, None):
        if not is_embedding(imm):
            continue
        examined += 1
        m = intersection_measure(system, B, imm, q)
        if m >= threshold:
            return RecurrenceSearch(True, threshold, examined, imm, m)
        if best_measure is None or m > best_measure:
            best, best_measure = imm, m
        if examined >= max_iter:
            break
    return RecurrenceSearch(False, threshold, examined, best, best_measure)


# ---------------------------------------------------------------------------
# pointwise recurrence


@dataclass
class PointwiseReport:
    N: int
    epsilon: float
    exception_set: MeasurableSet
    good_mass: float
    deviation: float

    @property
    def exception_measure(self) -> float:
        return self.exception_set.measure

    @property
    def markov_bound(self) -> float:
        return self.deviation / self.epsilon

    @property
    def markov_ok(self) -> bool:
        return self.exception_measure <= self.markov_bound + 1e-9

    def to_dict(self) -> dict:
        return {
            "N": self.N, "epsilon": self.epsilon,
            "exception_measure": self.exception_measure,
            "good_mass": self.good_mass,
            "deviation": self.deviation,
            "markov_bound": self.markov_bound,
            "markov_ok": self.markov_ok,
        }


def exception_mask(system: TorusSystem, B: MeasurableSet, N: int, epsilon: float,
                   q: int = 1) -> np.ndarray:
    """Points where |mu(B) - A_N 1_B| >= epsilon, compared exactly when possible."""
    exact = spherical_sum_exact(system, B, N, q)
    if exact is None:
        avg = spherical_average(system, B, N, q)
        return np.abs(B.measure - avg) >= epsilon
    size = sphere_size(system.dimension, N)
    # |count/size_X - s/|S|| >= eps  <=>  |count*|S| - s*size_X| >= eps*size_X*|S|
    lhs = np.abs(B.count * size - exact.astype(object) * system.size)
    rhs = Fraction(epsilon) * system.size * size
    return np.vectorize(lambda v: v >= rhs, otypes=[bool])(lhs)


def pointwise_exception_set(system: TorusSystem, B: MeasurableSet, N: int, epsilon: float,
                            q: int = 1) -> PointwiseReport:
    """U_N and mu(B minus U_N), with the deviation needed for the Markov bound."""
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    U = MeasurableSet(system, exception_mask(system, B, N, epsilon, q))
    good = (B - U).measure
    return PointwiseReport(N, epsilon, U, good, spherical_mean_deviation(system, B, N, q))


@dataclass
class MultiPointwiseReport:
    epsilon: float
    witness_mass: float
    per_N: list[PointwiseReport]

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "witness_mass": self.witness_mass,
            "per_N": [r.to_dict() for r in self.per_N],
        }


def multi_pointwise_check(system: TorusSystem, B: MeasurableSet, N_list, epsilon: float,
                          q: int = 1) -> MultiPointwiseReport:
    """mu(B minus the union of U_{N_j}) together with each mu(U_{N_j})."""
    reports = [pointwise_exception_set(system, B, int(N), epsilon, q) for N in N_list]
    union = MeasurableSet.empty(system)
    for r in reports:
        union = union | r.exception_set
    return MultiPointwiseReport(epsilon, (B - union).measure, reports)
