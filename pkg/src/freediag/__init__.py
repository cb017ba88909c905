"""Free sums with amalgamation over the diagonal, traffic combinatorics and
resolvent comparisons for random Hermitian matrices."""

from .errors import BudgetExceeded, ConvergenceError, FreediagError, ParameterError
from .models import HermitianMatrix, ModelSpec, generate

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "ConvergenceError",
    "FreediagError",
    "ParameterError",
    "HermitianMatrix",
    "ModelSpec",
    "generate",
]
