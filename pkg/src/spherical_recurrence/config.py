"""Process-wide work ceilings and thread defaults, overridable by env vars."""

import os

ENV_THREADS = "SPHREC_THREADS"
ENV_MAX_POINTS = "SPHREC_MAX_POINTS"
ENV_MAX_WORK = "SPHREC_MAX_WORK"

_DEFAULT_MAX_POINTS = 5_000_000
_DEFAULT_MAX_WORK = 200_000_000


def _env_int(name, default):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    value = int(raw)
    if value < 1:
        raise ValueError(f"{name} must be a positive integer, got {raw!r}")
    return value


def max_points():
    """Ceiling on materialized lattice points (sphere or immersion count)."""
    return _env_int(ENV_MAX_POINTS, _DEFAULT_MAX_POINTS)


def max_work():
    """Ceiling on dynamic-programming cells for residue profiles."""
    return _env_int(ENV_MAX_WORK, _DEFAULT_MAX_WORK)


def default_threads():
    return _env_int(ENV_THREADS, 1)
