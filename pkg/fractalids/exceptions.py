"""Define the exceptions raised while building and analyzing fractal operators."""

import sys
from typing import Any, Dict, Optional

from rich.console import Console


class FractalIdsError(Exception):
    """Base class for every error raised by the fractalids package."""


class AxiomViolation(FractalIdsError):
    """An iterated function system fails one of the nested-fractal axioms."""

    def __init__(self, name: str, detail: str = "") -> None:
        """Record which axiom failed and why."""
        self.name = name
        self.detail = detail
        super().__init__(f"{name}: {detail}" if detail else name)


class NotPlanar(FractalIdsError):
    """The similitudes are not maps of the plane."""


class SizeLimit(FractalIdsError):
    """A lattice or a dense matrix would exceed the configured cap."""


class OutOfLattice(FractalIdsError):
    """A vertex, cell or point lies outside the materialized region."""


class MissingFolding(FractalIdsError):
    """A reflected operator or field was requested without a folding map."""


class ConvergenceFailure(FractalIdsError):
    """An eigensolve returned pairs whose residual is above tolerance."""

    def __init__(self, residual: float, tolerance: float) -> None:
        """Record the residual that exceeded the tolerance."""
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"eigenpair residual {residual:.3e} exceeds {tolerance:.3e}"
        )


class DomainError(FractalIdsError, ValueError):
    """A function was evaluated outside of its domain."""


class ViolatesB(FractalIdsError):
    """A Bernstein function has no certified power-law bounds near zero."""

    def __init__(self, detail: str) -> None:
        """Record the detail of the failure."""
        self.detail = detail
        super().__init__(detail)


class NegativePotential(FractalIdsError):
    """A potential takes a negative value."""


class GateFailure(FractalIdsError):
    """An assumption required by an ensemble run did not verify."""

    def __init__(self, assumption: str, detail: Optional[Any] = None) -> None:
        """Record the failed assumption and its numbers."""
        self.assumption = assumption
        self.detail = detail
        super().__init__(f"assumption {assumption} failed: {detail}")


class DegenerateLaw(FractalIdsError):
    """The coupling law puts no mass below the truncation level."""


class PreconditionMNotReached(FractalIdsError):
    """The complex is too small for the ground-state lower bound to apply."""


class EmptyWindow(FractalIdsError):
    """The counting function vanishes on the whole fitting window."""


class IncompatiblePhi(FractalIdsError):
    """The Bernstein function does not match the walk's time change."""


class ConfigError(FractalIdsError):
    """A run configuration is malformed or references unknown presets."""


# explanations shown on the console for each of the package's exceptions
explanations: Dict[str, str] = {
    "AxiomViolation": "The similitudes do not describe a nested fractal. Check the translations and the contraction ratio.",
    "NotPlanar": "Every similitude needs a 2x2 rotation part and a planar translation.",
    "SizeLimit": "The requested lattice or matrix is too large. Lower M or n, or raise the caps in the configuration.",
    "OutOfLattice": "The vertex is not part of the enumerated region. Enumerate a larger complex.",
    "MissingFolding": "Neumann operators and periodized fields need a good labeling of the same order.",
    "ConvergenceFailure": "The eigensolver did not reach the residual tolerance. Try a smaller depth.",
    "DomainError": "A function was evaluated outside of its domain.",
    "ViolatesB": "The Bernstein function fails the power-law bounds near zero or the logarithmic growth at infinity.",
    "NegativePotential": "Potentials must be nonnegative at every vertex.",
    "GateFailure": "An assumption check failed. Inspect the gate report in the manifest.",
    "DegenerateLaw": "The coupling law is degenerate below the truncation level D_0.",
    "PreconditionMNotReached": "Choose a level at or above M_2 for the ground-state lower bound.",
    "EmptyWindow": "The counting function is zero on the whole window. Widen the window or use a larger complex.",
    "IncompatiblePhi": "The Monte Carlo clock needs the matching Bernstein function.",
    "ConfigError": "The run configuration is invalid. Fix the reported fields and try again.",
}


def explain_exception(console: Console) -> None:
    """Print the type of the last exception with an explanation."""
    exc_type, exc_obj, _ = sys.exc_info()
    if exc_type is None:
        return
    console.print(f"[bold red]Exception Type: {exc_type.__name__}[/bold red]")
    # known exceptions come with an explanation of the fix
    if exc_type.__name__ in explanations:
        console.print(f"Explanation: {explanations[exc_type.__name__]}")
    console.print(f"Error Message: {exc_obj!s}")
