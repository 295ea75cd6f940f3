"""Numerical laboratory for NLS equations with potential, local and Hartree nonlinearities."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CorruptFieldError, DivergenceError, EmptyConstraintSlice, GridError, HypothesisViolation,
    MassCollapseError, NLSLabError, NotDilationReachable, UndecidableModelError,
)
from .grid import ComplexField, Grid, field_from_function, make_grid  # noqa: E402
from .model import KernelSpec, LocalNonlinearitySpec, ModelSpec, PotentialSpec  # noqa: E402

__all__ = [
    "__version__", "ComplexField", "Grid", "make_grid", "field_from_function",
    "ModelSpec", "PotentialSpec", "LocalNonlinearitySpec", "KernelSpec",
    "NLSLabError", "GridError", "CorruptFieldError", "UndecidableModelError", "HypothesisViolation",
    "MassCollapseError", "DivergenceError", "NotDilationReachable", "EmptyConstraintSlice",
]
