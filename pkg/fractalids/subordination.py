"""Bernstein functions, the (B) certification and the Schrödinger matrix."""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .enumerations import PhiKind
from .exceptions import ConfigError, DomainError, NegativePotential, ViolatesB
from .laplacian import SpectrumBundle

Number = Union[float, np.ndarray]

# grid size of the concavity and monotonicity check
SHAPE_POINTS = 1000

# largest deviation of the local log-log slope from the fitted exponent
SLOPE_TOLERANCE = 1e-2


@dataclass(frozen=True)
class BernsteinFunction:
    """A Bernstein function phi with phi(0+) = 0, given by its kind and parameters."""

    kind: PhiKind = PhiKind.identity
    exponent: float = 1.0
    mass: float = 1.0
    rate: float = 1.0
    table: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self) -> None:
        """Validate the parameters of phi."""
        if self.kind == PhiKind.stable and not 0 < self.exponent <= 1:
            raise ConfigError(f"stable exponent {self.exponent} is not in (0, 1]")
        if self.kind == PhiKind.relativistic:
            if not 0 < self.exponent < 1:
                raise ConfigError(f"relativistic exponent {self.exponent} is not in (0, 1)")
            if self.mass <= 0:
                raise ConfigError(f"relativistic mass {self.mass} must be positive")
        if self.kind == PhiKind.gamma and self.rate <= 0:
            raise ConfigError(f"gamma rate {self.rate} must be positive")
        if self.kind == PhiKind.user:
            if not self.table or len(self.table) < 2:  # noqa: PLR2004
                raise ConfigError("a tabulated Bernstein function needs two points or more")
            xs = [x for x, _ in self.table]
            if any(b <= a for a, b in zip(xs, xs[1:])) or xs[0] < 0:
                raise ConfigError("tabulated abscissae must be nonnegative and increasing")

    @property
    def drift(self) -> float:
        """The linear coefficient b of the Levy-Khintchine form."""
        if self.kind == PhiKind.identity:
            return 1.0
        if self.kind == PhiKind.stable and self.exponent == 1:
            return 1.0
        return 0.0

    @property
    def levy_density(self) -> str:
        """A readable form of the Levy density, kept as metadata."""
        if self.kind == PhiKind.stable and self.exponent < 1:
            a = self.exponent
            return f"{a}/Gamma({1 - a}) u^(-{1 + a})"
        if self.kind == PhiKind.relativistic:
            a = self.exponent
            lam = self.mass ** (1 / a)
            return f"{a}/Gamma({1 - a}) exp(-{lam} u) u^(-{1 + a})"
        if self.kind == PhiKind.gamma:
            return f"exp(-{self.rate} u) / u"
        return "none"

    def describe(self) -> str:
        """Short label used in reports."""
        if self.kind == PhiKind.stable:
            return f"stable({self.exponent})"
        if self.kind == PhiKind.relativistic:
            return f"relativistic({self.exponent}, m={self.mass})"
        if self.kind == PhiKind.gamma:
            return f"gamma(b={self.rate})"
        return self.kind.value


def _evaluate(phi: BernsteinFunction, lam: np.ndarray) -> np.ndarray:
    """Evaluate phi on an array."""
    if phi.kind == PhiKind.identity:
        return lam.copy()
    if phi.kind == PhiKind.stable:
        return np.power(lam, phi.exponent)
    if phi.kind == PhiKind.relativistic:
        shift = phi.mass ** (1 / phi.exponent)
        return np.power(lam + shift, phi.exponent) - phi.mass
    if phi.kind == PhiKind.gamma:
        return np.log1p(lam / phi.rate)
    table = np.asarray(phi.table, dtype=float)
    xs, ys = table[:, 0], table[:, 1]
    values = np.interp(lam, xs, ys)
    # continue the last segment linearly beyond the table
    slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
    beyond = lam > xs[-1]
    values[beyond] = ys[-1] + slope * (lam[beyond] - xs[-1])
    return values


def eval_phi(phi: BernsteinFunction, lam: Union[float, Sequence[float], np.ndarray]) -> Number:
    """Evaluate phi at one value or at an array of nonnegative values."""
    values = np.asarray(lam, dtype=float)
    if np.any(values < 0) or np.any(np.isnan(values)):
        raise DomainError(f"phi is defined on [0, inf), got {lam}")
    result = _evaluate(phi, np.atleast_1d(values))
    if values.ndim == 0:
        return float(result[0])
    return result.reshape(values.shape)


def shape_check(
    phi: BernsteinFunction, upper: float = 10.0, points: int = SHAPE_POINTS, tolerance: float = 1e-10
) -> bool:
    """Check phi(0) = 0, monotonicity and concavity on a uniform grid."""
    grid = np.linspace(0.0, upper, points)
    values = eval_phi(phi, grid)
    first = np.diff(values)
    second = np.diff(values, 2)
    return bool(
        abs(values[0]) <= tolerance
        and np.all(first >= -tolerance)
        and np.all(second <= tolerance * max(1.0, float(np.abs(values).max())))
    )


@dataclass(frozen=True)
class AssumptionBReport:
    """Certified power-law bounds of phi near zero and its growth at infinity."""

    alpha: float
    beta: float
    c1: float
    c2: float
    lambda_0: float
    log_growth: bool
    lambda_hi: float
    walk_dim: float


def _local_slopes(phi: BernsteinFunction, grid: np.ndarray) -> np.ndarray:
    """Slopes of log phi against log lambda between grid points."""
    values = np.asarray(eval_phi(phi, grid))
    return np.diff(np.log(values)) / np.diff(np.log(grid))


def check_assumption_B(
    phi: BernsteinFunction,
    walk_dim: float,
    lambda_0: float = 1.0,
    points: int = 200,
    lambda_hi: float = 10.0,
) -> AssumptionBReport:
    """Fit phi(lambda) ~ lambda^(alpha/d_w) near zero and certify the bounds.

    The exponent comes from a log-log regression on the lowest quarter of a
    geometric grid that reaches eight decades below lambda_0. The constants are
    the extreme ratios phi / lambda^beta on the grid. Growth faster than the
    logarithm is checked by requiring phi / log to increase beyond lambda_hi.
    """
    if lambda_0 <= 0 or points < 8:  # noqa: PLR2004
        raise ViolatesB(f"the grid needs lambda_0 > 0 and at least 8 points, got {lambda_0}, {points}")
    grid = np.geomspace(lambda_0 * 1e-8, lambda_0, points)
    values = np.asarray(eval_phi(phi, grid))
    if np.any(values <= 0):
        raise ViolatesB("phi vanishes somewhere on (0, lambda_0]")
    low = max(points // 4, 2)
    beta = float(np.polyfit(np.log(grid[:low]), np.log(values[:low]), 1)[0])
    if beta > 1 and beta < 1 + SLOPE_TOLERANCE:
        beta = 1.0
    if not 0 < beta <= 1:
        raise ViolatesB(f"fitted exponent {beta:.6f} is not in (0, 1]")
    slopes = _local_slopes(phi, grid[:low])
    if np.max(np.abs(slopes - beta)) > SLOPE_TOLERANCE:
        raise ViolatesB(f"phi is not a power law near zero, slopes deviate from {beta:.6f}")
    ratios = values / grid**beta
    c1, c2 = float(ratios.min()), float(ratios.max())
    # phi / log must grow without bound; test it from where the slope has settled
    tail_slope = float(_local_slopes(phi, np.array([1e6, 2e6]))[0])
    start = max(lambda_hi, math.exp(min(2 / max(tail_slope, 1e-3), 50)))
    far = np.geomspace(start, start * 1e6, points)
    growth = np.asarray(eval_phi(phi, far)) / np.log(far)
    log_growth = bool(np.all(np.diff(growth) > 0))
    if not log_growth:
        raise ViolatesB("phi(lambda) / log(lambda) does not increase at large lambda")
    return AssumptionBReport(
        alpha=beta * walk_dim,
        beta=beta,
        c1=c1,
        c2=c2,
        lambda_0=lambda_0,
        log_growth=log_growth,
        lambda_hi=start,
        walk_dim=walk_dim,
    )


def apply_phi(spectrum: SpectrumBundle, phi: BernsteinFunction) -> np.ndarray:
    """phi of the eigenvalues, with round-off below zero clipped."""
    return np.asarray(eval_phi(phi, np.clip(spectrum.eigenvalues, 0.0, None)))


def operator_function(spectrum: SpectrumBundle, phi: BernsteinFunction) -> np.ndarray:
    """The matrix phi(-L) in the orthonormal coordinates of the spectrum."""
    vectors = spectrum.symmetric_vectors
    return (vectors * apply_phi(spectrum, phi)[None, :]) @ vectors.T


def schrodinger_matrix(
    spectrum: SpectrumBundle, phi: BernsteinFunction, potential: np.ndarray
) -> np.ndarray:
    """The symmetric matrix of phi(-L) + V in orthonormal coordinates."""
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (spectrum.dimension,):
        raise ValueError(
            f"potential has shape {potential.shape}, the spectrum has {spectrum.dimension} vertices"
        )
    if np.any(potential < 0):
        raise NegativePotential(f"potential has minimum {potential.min():.3e}")
    matrix = operator_function(spectrum, phi) + np.diag(potential)
    return (matrix + matrix.T) / 2
