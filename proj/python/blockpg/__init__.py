"""Blocked particle Gibbs samplers for hidden Markov models."""

from ._core import (
    CapacityError,
    Error,
    ValidationError,
    build_cover,
    common_rates,
    coupling_alpha,
    cover_violations,
    pg_epsilon,
    pg_rates,
    run,
    sweep_operator,
)

__all__ = [
    "CapacityError",
    "Error",
    "ValidationError",
    "build_cover",
    "common_rates",
    "coupling_alpha",
    "cover_violations",
    "pg_epsilon",
    "pg_rates",
    "run",
    "sweep_operator",
]
