"""Assemble Dirichlet and Neumann Laplacians on complexes and decompose them."""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from .enumerations import Boundary
from .exceptions import ConvergenceFailure, MissingFolding, OutOfLattice, SizeLimit
from .geometry import DEFAULT_SIZE_CAP, FractalSpec, LatticeGraph, enumerate_lattice
from .labeling import FoldingMap, NoGLP, build_folding, find_good_labeling

# default cap on the dimension of a dense eigenproblem
DENSE_CAP = 6000

# residual bound, relative to max(1, mu), for an accepted eigenpair
RESIDUAL_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class VertexMeasure:
    """Rank-weighted vertex weights of a complex, kept as exact fractions."""

    lattice: LatticeGraph
    level: int
    support: np.ndarray
    weights: Tuple[Fraction, ...]

    @property
    def total_mass(self) -> Fraction:
        """Sum of the weights."""
        return sum(self.weights, Fraction(0))

    @property
    def as_array(self) -> np.ndarray:
        """Weights as floats."""
        return np.array([float(weight) for weight in self.weights])

    def weight_of(self, vertex: int) -> Fraction:
        """Weight of a lattice index; zero outside K^<level>."""
        position = np.searchsorted(self.support, vertex)
        if position < len(self.support) and self.support[position] == vertex:
            return self.weights[position]
        return Fraction(0)


def build_measure(lattice: LatticeGraph, level: Optional[int] = None) -> VertexMeasure:
    """Give each vertex of K^<level> its share of the cells that contain it."""
    level = lattice.level if level is None else level
    if level > lattice.level:
        raise OutOfLattice(f"K^<{level}> is larger than the lattice K^<{lattice.level}>")
    spec = lattice.spec
    support = np.flatnonzero(lattice.inside(level))
    denominator = spec.num_corners * spec.num_maps**lattice.depth
    weights = tuple(
        Fraction(lattice.rank_within(int(x), level), denominator) for x in support
    )
    return VertexMeasure(lattice=lattice, level=level, support=support, weights=weights)


@dataclass(frozen=True, eq=False)
class DiscreteLaplacian:
    """The generator c (I - P) of a walk on a complex, with its time scale."""

    boundary: Boundary
    level: int
    depth: int
    lattice: LatticeGraph
    measure: VertexMeasure
    support: np.ndarray
    weights: np.ndarray
    transition: np.ndarray
    scale: float

    @property
    def spec(self) -> FractalSpec:
        """The fractal of the lattice."""
        return self.lattice.spec

    @property
    def renorm(self) -> float:
        """Time factor tau^n that turns graph steps into level-0 time."""
        return self.spec.time_scale**self.depth

    @property
    def level_scale(self) -> float:
        """Factor tau^(-M) relating eigenvalues of K^<M> to those of K^<0>."""
        return self.spec.time_scale ** (-self.level)

    @property
    def dimension(self) -> int:
        """Number of vertices the operator acts on."""
        return len(self.support)

    @property
    def generator(self) -> np.ndarray:
        """The pre-renormalization matrix c (I - P) acting on functions."""
        return self.scale * (np.eye(self.dimension) - self.transition)

    @property
    def matrix(self) -> np.ndarray:
        """Renormalized generator."""
        return self.renorm * self.generator

    @property
    def asymmetry(self) -> float:
        """Largest entry of W G - (W G)^T, zero for a reversible walk."""
        weighted = self.weights[:, None] * self.generator
        return float(np.max(np.abs(weighted - weighted.T), initial=0.0))

    def symmetric(self, renormalized: bool = True) -> np.ndarray:
        """The operator in the orthonormal coordinates W^(1/2) f."""
        root = np.sqrt(self.weights)
        matrix = self.matrix if renormalized else self.generator
        result = root[:, None] * matrix / root[None, :]
        return (result + result.T) / 2


def build_laplacian(
    lattice: LatticeGraph,
    measure: VertexMeasure,
    boundary: Boundary,
    fold: Optional[FoldingMap] = None,
) -> DiscreteLaplacian:
    """Build the killed or the folded walk generator on K^<M>."""
    level = measure.level
    spec = lattice.spec
    inside = measure.support
    position = {int(x): i for i, x in enumerate(inside)}
    if boundary == Boundary.neumann:
        if fold is None or fold.order != level or fold.lattice is not lattice:
            raise MissingFolding(
                f"the Neumann operator on K^<{level}> needs a folding map of order {level}"
            )
        support = inside
        transition = np.zeros((len(support), len(support)))
        for i, x in enumerate(support):
            # neighbors outside K^<M> are folded onto their images
            around = lattice.neighbors[x]
            for u in around:
                transition[i, position[int(fold.image[u])]] += 1.0 / len(around)
    else:
        corners = set(lattice.corner_indices(level))
        support = np.array([x for x in inside if int(x) not in corners], dtype=np.int64)
        position = {int(x): i for i, x in enumerate(support)}
        transition = np.zeros((len(support), len(support)))
        for i, x in enumerate(support):
            around = lattice.neighbors[x]
            for u in around:
                if int(u) in position:
                    transition[i, position[int(u)]] += 1.0 / len(around)
    weights = np.array([float(measure.weight_of(int(x))) for x in support])
    return DiscreteLaplacian(
        boundary=boundary,
        level=level,
        depth=lattice.depth,
        lattice=lattice,
        measure=measure,
        support=support,
        weights=weights,
        transition=transition,
        scale=spec.generator_scale,
    )


def folded_setup(
    spec: FractalSpec, level: int, depth: int, cap: int = DEFAULT_SIZE_CAP
) -> Tuple[LatticeGraph, FoldingMap]:
    """Enumerate K^<M+1> and fold it onto K^<M>."""
    lattice = enumerate_lattice(spec, level + 1, depth, cap)
    labeling = find_good_labeling(lattice, level)
    if isinstance(labeling, NoGLP):
        raise MissingFolding(f"no good labeling of order {level}: {labeling.describe()}")
    return lattice, build_folding(labeling)


def assemble_operator(
    spec: FractalSpec,
    level: int,
    depth: int,
    boundary: Boundary,
    cap: int = DEFAULT_SIZE_CAP,
) -> DiscreteLaplacian:
    """Enumerate, fold when needed, and assemble one operator."""
    lattice, fold = folded_setup(spec, level, depth, cap)
    measure = build_measure(lattice, level)
    if boundary == Boundary.neumann:
        return build_laplacian(lattice, measure, boundary, fold)
    return build_laplacian(lattice, measure, boundary)


@dataclass(frozen=True, eq=False)
class SpectrumBundle:
    """Eigenpairs of one operator with the provenance needed to cache them."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    symmetric_vectors: np.ndarray
    weights: np.ndarray
    support: np.ndarray
    boundary: Boundary
    level: int
    depth: int
    spec_hash: str
    renormalized: bool = True

    @property
    def dimension(self) -> int:
        """Number of eigenvalues."""
        return len(self.eigenvalues)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the first nonzero component of every column positive."""
    fixed = vectors.copy()
    for j in range(fixed.shape[1]):
        column = fixed[:, j]
        nonzero = np.flatnonzero(np.abs(column) > 1e-12)
        if len(nonzero) and column[nonzero[0]] < 0:
            fixed[:, j] = -column
    return fixed


def eigendecompose(
    operator: DiscreteLaplacian, cap: int = DENSE_CAP, renormalized: bool = True
) -> SpectrumBundle:
    """Fully diagonalize an operator with weighted-orthonormal eigenvectors."""
    if operator.dimension > cap:
        raise SizeLimit(f"dense eigenproblem of size {operator.dimension} exceeds {cap}")
    symmetric = operator.symmetric(renormalized)
    if operator.dimension == 0:
        values, vectors = np.zeros(0), np.zeros((0, 0))
    else:
        values, vectors = linalg.eigh(symmetric)
    vectors = _fix_signs(vectors)
    functions = vectors / np.sqrt(operator.weights)[:, None]
    # check the pairs against the unsymmetrized generator
    matrix = operator.matrix if renormalized else operator.generator
    if operator.dimension:
        residual = np.abs(matrix @ functions - functions * values[None, :]).max(axis=0)
        scale = np.maximum(1.0, np.abs(values))
        worst = float(np.max(residual / scale))
        if worst > RESIDUAL_TOLERANCE:
            raise ConvergenceFailure(worst, RESIDUAL_TOLERANCE)
    return SpectrumBundle(
        eigenvalues=values,
        eigenvectors=functions,
        symmetric_vectors=vectors,
        weights=operator.weights.copy(),
        support=operator.support.copy(),
        boundary=operator.boundary,
        level=operator.level,
        depth=operator.depth,
        spec_hash=operator.spec.spec_hash,
        renormalized=renormalized,
    )


def heat_trace(operator: DiscreteLaplacian, t: float) -> float:
    """Trace of exp(-t G) by scaling and squaring."""
    return float(np.trace(linalg.expm(-t * operator.symmetric())))


def spectral_heat_trace(spectrum: SpectrumBundle, t: float) -> float:
    """Trace of exp(-t G) summed over the eigenvalues."""
    return float(np.exp(-t * spectrum.eigenvalues).sum())


@dataclass(frozen=True)
class DecimationRule:
    """Spectral decimation data of a fractal with a polynomial renormalization map."""

    name: str
    forward: Callable[[float], float]
    branches: Callable[[float], Tuple[float, float]]
    exceptional: Tuple[float, ...]
    base_neumann: Tuple[float, ...]


def _gasket_branches(value: float) -> Tuple[float, float]:
    """The two preimages of a value under lambda (5 - lambda)."""
    root = math.sqrt(max(25.0 - 4.0 * value, 0.0))
    return (5.0 - root) / 2.0, (5.0 + root) / 2.0


DECIMATION_RULES: Dict[str, DecimationRule] = {
    "gasket": DecimationRule(
        name="gasket",
        forward=lambda z: z * (5.0 - z),
        branches=_gasket_branches,
        exceptional=(2.0, 5.0, 6.0),
        base_neumann=(0.0, 6.0, 6.0),
    )
}


def _power_traces(spec: FractalSpec, depth: int) -> Tuple[int, float, float]:
    """Dimension, trace and trace of the square of the Neumann generator of K^<0>."""
    lattice = enumerate_lattice(spec, 0, depth)
    c = spec.generator_scale
    # on K^<0> the folded walk is the simple walk of the graph
    returns = sum(
        1.0 / (len(around) * len(lattice.neighbors[y]))
        for around in lattice.neighbors
        for y in around
    )
    count = lattice.num_vertices
    return count, c * count, c * c * (count + returns)


def decimation_spectrum(spec: FractalSpec, depth: int) -> List[float]:
    """Predict the Neumann spectrum of K^<0> at a depth without an eigensolver.

    Generic eigenvalues come from the two branches of the inverse renormalization
    map; the multiplicities of the exceptional values follow from matching the
    dimension and the first two power traces of the generator.
    """
    rule = DECIMATION_RULES.get(spec.name)
    if rule is None:
        raise KeyError(f"no decimation rule is registered for {spec.name}")
    spectrum = list(rule.base_neumann)
    for level in range(1, depth + 1):
        generic: List[float] = []
        for value in spectrum:
            for branch in rule.branches(value):
                if all(abs(branch - e) > 1e-9 for e in rule.exceptional):
                    generic.append(branch)
        dimension, trace, square = _power_traces(spec, level)
        residual = np.array(
            [
                dimension - len(generic),
                trace - sum(generic),
                square - sum(g * g for g in generic),
            ]
        )
        system = np.array([[1.0 for _ in rule.exceptional], list(rule.exceptional), [e * e for e in rule.exceptional]])
        counts = linalg.solve(system, residual)
        rounded = np.rint(counts)
        if np.any(np.abs(counts - rounded) > 1e-6) or np.any(rounded < 0):
            raise ValueError(f"exceptional multiplicities {counts.tolist()} at depth {level}")
        spectrum = sorted(
            generic
            + [e for e, m in zip(rule.exceptional, rounded.astype(int)) for _ in range(m)]
        )
    return sorted(spectrum)


@dataclass(frozen=True)
class ScalingReport:
    """Deviation of the lowest eigenvalues of two complexes after rescaling."""

    coarse: Tuple[int, int]
    fine: Tuple[int, int]
    count: int
    walk_dim: float
    raw_deviation: float
    corrected_deviation: Optional[float]


def eigenvalue_scaling_check(
    spec: FractalSpec,
    depth: int,
    first: int,
    second: int,
    second_depth: Optional[int] = None,
    count: int = 10,
    cap: int = DENSE_CAP,
) -> ScalingReport:
    """Compare the lowest Neumann eigenvalues of K^<M1> and K^<M2> after rescaling."""
    if second_depth is None:
        second_depth = depth + (second - first)
    spectra = []
    for level, n in ((first, depth), (second, second_depth)):
        operator = assemble_operator(spec, level, n, Boundary.neumann)
        spectra.append(eigendecompose(operator, cap, renormalized=False).eigenvalues)
    coarse, fine = spectra
    count = min(count, len(coarse), len(fine))
    tau = spec.time_scale
    # renormalized eigenvalues of K^<M2> times tau^(M2 - M1) should match K^<M1>
    coarse_scaled = tau**depth * coarse[:count]
    rescaled = tau ** (second - first + second_depth) * fine[:count]
    raw = _relative_deviation(coarse_scaled, rescaled)
    corrected = None
    rule = DECIMATION_RULES.get(spec.name)
    steps = (second + second_depth) - (first + depth)
    if rule is not None and steps >= 0:
        mapped = fine[:count].copy()
        for _ in range(steps):
            mapped = np.array([rule.forward(value) for value in mapped])
        corrected = _relative_deviation(coarse[:count], np.sort(mapped))
    return ScalingReport(
        coarse=(first, depth),
        fine=(second, second_depth),
        count=count,
        walk_dim=spec.walk_dim,
        raw_deviation=raw,
        corrected_deviation=corrected,
    )


def _relative_deviation(expected: np.ndarray, found: np.ndarray) -> float:
    """Largest gap, relative except at zero."""
    scale = np.maximum(np.abs(expected), 1e-12)
    gaps = np.abs(expected - found)
    # the zero mode compares absolutely
    gaps = np.where(np.abs(expected) < 1e-12, gaps, gaps / scale)
    return float(gaps.max(initial=0.0))


def dirichlet_dominates(dirichlet: SpectrumBundle, neumann: SpectrumBundle) -> bool:
    """Check mu_k^D >= mu_k^N for every k both spectra share."""
    count = min(dirichlet.dimension, neumann.dimension)
    return bool(
        np.all(dirichlet.eigenvalues[:count] >= neumann.eigenvalues[:count] - 1e-9)
    )
