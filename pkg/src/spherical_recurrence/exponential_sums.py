"""Normalized exponential sums over discrete spheres and major/minor arcs.

The arc structure is governed by ``q = lcm(1..floor(C / eta^2))`` and the
half-width ``(eta * N) ** -0.5``.  The constant ``C`` is only known to
exist, so everything here takes it as a parameter and
:func:`estimate_constant` picks it empirically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np

from spherical_recurrence.errors import EmptySphereError, ValidationError
from spherical_recurrence.lattice_spheres import DiscreteSphere, sphere_size

TWO_PI = 2.0 * math.pi


def lcm_up_to(k: int) -> int:
    """lcm(1, 2, ..., k) as an exact integer; 1 for k <= 1."""
    if k < 1:
        return 1
    return reduce(math.lcm, range(1, int(k) + 1), 1)


def _exact(x) -> Fraction:
    # decimal reading of a float so that e.g. eta=0.1 gives eta^-2 == 100
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


def reduce_frequency(theta) -> np.ndarray:
    """Map a frequency vector into [0, 1)^d."""
    th = np.asarray(theta, dtype=float)
    out = np.mod(th, 1.0)
    out[out >= 1.0] = 0.0
    return out


def exp_sum(sphere: DiscreteSphere, theta) -> complex:
    """(1/|S_N|) * sum over x in S_N of exp(2 pi i <x, theta>).

    Phases are reduced mod 1 before the exponential and the real and
    imaginary parts are accumulated with ``math.fsum``, so the result does
    not depend on summation order.
    """
    if sphere.is_empty:
        raise EmptySphereError(sphere.dimension, sphere.radius_sq)
    th = reduce_frequency(theta)
    if th.shape != (sphere.dimension,):
        raise ValidationError(
            f"frequency has shape {th.shape}, expected ({sphere.dimension},)"
        )
    phase = np.mod(sphere.points @ th, 1.0) * TWO_PI
    n = len(sphere)
    re = math.fsum(np.cos(phase).tolist()) / n
    im = math.fsum(np.sin(phase).tolist()) / n
    return complex(re, im)


class Arc(str, enum.Enum):
    MAJOR = "major"
    MINOR = "minor"


@dataclass(frozen=True)
class ArcParameters:
    eta: float
    C: float
    N: int
    q: int = field(init=False)
    width: float = field(init=False)

    def __post_init__(self):
        if not self.eta > 0 or not self.C > 0:
            raise ValidationError("eta and C must be positive")
        if self.N < 1:
            raise ValidationError("N must be a positive integer")
        object.__setattr__(self, "q", q_eta_c(self.eta, self.C))
        object.__setattr__(self, "width", (self.eta * self.N) ** -0.5)

    @property
    def grid_cap(self) -> int:
        return math.floor(_exact(self.C) / _exact(self.eta) ** 2)

    @property
    def vacuous(self) -> bool:
        """True when every frequency is major (width covers half a grid cell)."""
        return 2 * self.width * self.q >= 1


def q_eta_c(eta, C) -> int:
    """lcm of all integers in [1, C * eta^-2]."""
    return lcm_up_to(math.floor(_exact(C) / _exact(eta) ** 2))


def min_N(eta, C) -> int:
    """Smallest integer N with N >= C * eta^-4."""
    return math.ceil(_exact(C) / _exact(eta) ** 4)


def _circle_dist_to_grid(theta: np.ndarray, q: int) -> np.ndarray:
    # distance from theta to (1/q)Z on the circle, computed in units of 1/q
    t = np.mod(theta, 1.0)
    if q < 2 ** 52:
        scaled = np.mod(t * q, 1.0)
        return np.minimum(scaled, 1.0 - scaled) / q
    # grid finer than double resolution: every float sits on a grid point
    return np.zeros_like(t)


def classify_arcs(thetas, params: ArcParameters) -> np.ndarray:
    """Vectorized classification; True marks a major-arc frequency."""
    th = np.atleast_2d(np.asarray(thetas, dtype=float))
    if params.vacuous:
        return np.ones(th.shape[0], dtype=bool)
    dist = _circle_dist_to_grid(th, params.q)
    return np.all(dist <= params.width, axis=-1)


def classify_arc(theta, params: ArcParameters) -> Arc:
    return Arc.MAJOR if bool(classify_arcs(theta, params)[0]) else Arc.MINOR


@dataclass
class ScanReport:
    d: int
    eta: float
    C: float
    N: int
    seed: int
    q: int
    width: float
    sphere_size: int
    samples_drawn: int
    minor_samples: int = 0
    violations: int = 0
    max_modulus: float | None = None
    argmax_theta: list[float] | None = None
    warnings: list[str] = field(default_factory=list)
    empty_sphere: bool = False

    @property
    def violation_fraction(self) -> float | None:
        if self.minor_samples == 0:
            return None
        return self.violations / self.minor_samples

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "parameters": {
                "d": self.d, "eta": self.eta, "C": self.C, "N": self.N,
                "seed": self.seed, "samples": self.samples_drawn,
            },
            "q": self.q,
            "width": self.width,
            "sphere_size": self.sphere_size,
            "empty_sphere": self.empty_sphere,
            "minor_samples": self.minor_samples,
            "violations": self.violations,
            "max_modulus": self.max_modulus,
            "argmax_theta": self.argmax_theta,
            "violation_fraction": self.violation_fraction,
            "warnings": list(self.warnings),
        }


def exp_sum_table(d: int, thetas, n_max: int) -> np.ndarray:
    """Unnormalized sums over S_n for every n <= n_max, one row per frequency.

    S_n is invariant under each coordinate sign flip, so the sum equals
    sum over x in S_n of prod_i cos(2 pi x_i theta_i), which is real.  The
    product is accumulated by convolution over coordinates.
    """
    th = np.atleast_2d(reduce_frequency(thetas))
    if th.shape[1] != d:
        raise ValidationError(f"frequencies must have {d} coordinates")
    k = th.shape[0]
    r = math.isqrt(n_max)
    xs = np.arange(r + 1)
    mult = np.where(xs == 0, 1.0, 2.0)
    table = np.zeros((k, n_max + 1))
    table[:, 0] = 1.0
    for i in range(d):
        # weights for +x and -x folded together
        w = mult[None, :] * np.cos(TWO_PI * np.mod(np.outer(th[:, i], xs), 1.0))
        out = np.zeros_like(table)
        for x in range(r + 1):
            s = x * x
            out[:, s:] += w[:, x:x + 1] * table[:, : n_max + 1 - s]
        table = out
    return table


def sample_frequencies(d: int, sample_count: int, seed: int) -> np.ndarray:
    """The seeded uniform frequency stream used by every scan."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(d)]))
    return rng.random((max(int(sample_count), 0), d))


def _scan_from_table(report: ScanReport, params: ArcParameters, thetas, table):
    major = classify_arcs(thetas, params) if len(thetas) else np.zeros(0, dtype=bool)
    idx = np.flatnonzero(~major)
    report.minor_samples = int(idx.size)
    if idx.size == 0:
        if params.vacuous:
            report.warnings.append("every frequency is major at this (eta, C, N)")
        return report
    moduli = np.abs(table[idx, report.N]) / report.sphere_size
    best = int(np.argmax(moduli))
    report.max_modulus = float(moduli[best])
    report.argmax_theta = [float(v) for v in thetas[idx[best]]]
    report.violations = int(np.count_nonzero(moduli > report.eta))
    return report


def _new_report(d, eta, C, N, sample_count, seed):
    params = ArcParameters(eta, C, N)
    report = ScanReport(d=d, eta=eta, C=C, N=N, seed=seed, q=params.q, width=params.width,
                        sphere_size=sphere_size(d, N), samples_drawn=max(sample_count, 0))
    if N < min_N(eta, C):
        report.warnings.append(f"N={N} is below C*eta^-4 (needs N >= {min_N(eta, C)})")
    if report.sphere_size == 0:
        report.empty_sphere = True
        report.warnings.append("empty sphere; scan skipped")
    return params, report


def scan_minor_arcs(d: int, eta: float, C: float, N: int, sample_count: int,
                    seed: int) -> ScanReport:
    """Probe the minor-arc bound |exp_sum| <= eta on random frequencies.

    Frequencies come from :func:`sample_frequencies`; major-arc draws are
    rejected, not redrawn.
    """
    params, report = _new_report(d, eta, C, N, sample_count, seed)
    if report.empty_sphere or sample_count <= 0:
        return report
    thetas = sample_frequencies(d, sample_count, seed)
    if params.vacuous:
        return _scan_from_table(report, params, thetas, None)
    return _scan_from_table(report, params, thetas, exp_sum_table(d, thetas, N))


def scan_range(d: int, eta: float, C: float, Ns, sample_count: int, seed: int) -> list[ScanReport]:
    """:func:`scan_minor_arcs` for every N in ``Ns`` with one shared table."""
    Ns = [int(n) for n in Ns]
    if not Ns:
        return []
    thetas = sample_frequencies(d, sample_count, seed)
    table = None
    reports = []
    for N in Ns:
        params, report = _new_report(d, eta, C, N, sample_count, seed)
        if not (report.empty_sphere or sample_count <= 0):
            if table is None and not params.vacuous:
                table = exp_sum_table(d, thetas, max(Ns))
            _scan_from_table(report, params, thetas, table)
        reports.append(report)
    return reports


@dataclass
class ConstantEstimate:
    d: int
    eta: float
    grid: list[float]
    seed: int
    sample_count: int
    C: float | None
    ranges: dict = field(default_factory=dict)
    per_C: list[dict] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.C is not None

    def to_dict(self) -> dict:
        return {
            "parameters": {"d": self.d, "eta": self.eta, "grid": list(self.grid),
                           "seed": self.seed, "samples": self.sample_count},
            "found": self.found,
            "C": self.C,
            "per_C": self.per_C,
        }


def default_N_range(eta, C, span: int) -> range:
    lo = max(1, min_N(eta, C))
    return range(lo, lo + span + 1)


def estimate_constant(d: int, eta: float, N_range, grid_of_C, sample_count: int, seed: int,
                      *, span: int = 200) -> ConstantEstimate:
    """Smallest C in ``grid_of_C`` whose scans report no violation on ``N_range``.

    ``N_range=None`` scans ``[ceil(C eta^-4), ceil(C eta^-4) + span]`` for each
    candidate C.  Spheres are shared across candidates.
    """
    grid = [float(c) for c in grid_of_C]
    if not grid:
        raise ValidationError("grid of C values must be nonempty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValidationError("grid of C values must be ascending")
    result = ConstantEstimate(d=d, eta=eta, grid=grid, seed=seed,
                              sample_count=sample_count, C=None)
    for C in grid:
        Ns = list(default_N_range(eta, C, span) if N_range is None else N_range)
        reports = scan_range(d, eta, C, Ns, sample_count, seed)
        bad = [r.N for r in reports if not r.passed]
        moduli = [r.max_modulus for r in reports if r.max_modulus is not None]
        result.per_C.append({
            "C": C, "N_lo": Ns[0] if Ns else None, "N_hi": Ns[-1] if Ns else None,
            "passed": not bad, "first_violation_N": bad[0] if bad else None,
            "violating_N": len(bad),
            "minor_samples": sum(r.minor_samples for r in reports),
            "max_modulus": max(moduli) if moduli else None,
        })
        if not bad:
            result.C = C
            break
    return result
