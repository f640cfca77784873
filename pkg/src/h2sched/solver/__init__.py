"""Branch-and-bound engine, continuous backends and checking tools."""

from .backends import (
    BACKENDS,
    AutoBackend,
    Backend,
    BackendError,
    CapabilityError,
    HighsBackend,
    IPMBackend,
    OABackend,
    RelaxResult,
    get_backend,
)
from .bnb import BnBConfig, Propagator, SolveResult, solve_bnb
from .enumerate import EnumerationError, enumerate_solve
from .feasibility import Violation, check_feasibility

__all__ = [
    "BACKENDS",
    "AutoBackend",
    "Backend",
    "BackendError",
    "BnBConfig",
    "CapabilityError",
    "EnumerationError",
    "HighsBackend",
    "IPMBackend",
    "OABackend",
    "Propagator",
    "RelaxResult",
    "SolveResult",
    "Violation",
    "check_feasibility",
    "enumerate_solve",
    "get_backend",
    "solve_bnb",
]
