"""Enumerations for defining levels or options for the fractal-ids tool."""

from enum import Enum


class Boundary(str, Enum):
    """An enumeration of the boundary behaviors of an operator on a complex."""

    dirichlet = "dirichlet"
    neumann = "neumann"


class PotentialMode(str, Enum):
    """An enumeration of the ways an alloy field sums its site couplings."""

    free = "free"
    periodized = "periodized"


class PhiKind(str, Enum):
    """An enumeration of the Bernstein functions that can subordinate a walk."""

    identity = "identity"
    stable = "stable"
    relativistic = "relativistic"
    gamma = "gamma"
    user = "user"


class ProfileKind(str, Enum):
    """An enumeration of the single-site profiles of an alloy potential."""

    hierarchical = "hierarchical"
    gasket_4pow = "gasket_4pow"
    finite_range = "finite_range"
    user = "user"


class LawKind(str, Enum):
    """An enumeration of the distributions of the lattice couplings."""

    bernoulli = "bernoulli"
    uniform = "uniform"
    exponential = "exponential"
    user = "user"


class TimeChange(str, Enum):
    """An enumeration of the clocks a Monte Carlo walk can run on."""

    none = "none"
    stable = "stable"


class Verdict(str, Enum):
    """An enumeration of the outcomes of a Lifschitz-tail fit."""

    band = "lifschitz-band"
    no_tail = "no-tail"
    inconclusive = "inconclusive"


class Theme(str, Enum):
    """An enumeration of the themes for syntax highlighting in rich."""

    ansi_dark = "ansi_dark"
    ansi_light = "ansi_light"


class ReportType(str, Enum):
    """An enumeration of report types furnishing details about a run."""

    all = "all"
    exitcode = "status"
    debug = "debug"
    setup = "setup"
    gates = "gates"
    spectrum = "spectrum"
    ids = "ids"
    lifschitz = "lifschitz"
    montecarlo = "montecarlo"
    manifest = "manifest"
