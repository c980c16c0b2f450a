"""Lattice spheres, exponential sums, tree immersions and exact recurrence
checks on finite torus systems."""

from spherical_recurrence.errors import (
    EmptySphereError,
    ModulusExhaustedError,
    ResourceLimitError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "EmptySphereError",
    "ModulusExhaustedError",
    "ResourceLimitError",
    "ValidationError",
    "__version__",
]
