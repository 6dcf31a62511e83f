"""Test cases for the laplacian.py file."""

import math
from fractions import Fraction

import numpy as np
import pytest

from fractalids.enumerations import Boundary
from fractalids.exceptions import MissingFolding, SizeLimit
from fractalids.geometry import preset_spec
from fractalids.laplacian import (
    assemble_operator,
    build_laplacian,
    build_measure,
    decimation_spectrum,
    dirichlet_dominates,
    eigendecompose,
    eigenvalue_scaling_check,
    folded_setup,
    heat_trace,
    spectral_heat_trace,
)


@pytest.fixture(scope="module")
def gasket():
    """Build the gasket once for the module."""
    return preset_spec("gasket")


def test_measure_of_the_first_complex(gasket):
    """Confirm corner weights 1/9 and junction weights 2/9 at depth 1."""
    lattice, _ = folded_setup(gasket, 0, 1)
    measure = build_measure(lattice, 0)
    corners = set(lattice.corner_indices(0))
    for vertex, weight in zip(measure.support, measure.weights):
        expected = Fraction(1, 9) if int(vertex) in corners else Fraction(2, 9)
        assert weight == expected
    assert measure.total_mass == 1
    assert measure.weight_of(int(np.flatnonzero(~lattice.inside(0))[0])) == 0


def test_measure_mass_grows_with_the_complex(gasket):
    """Confirm that K^M carries mass N^M at every depth."""
    for level, depth in ((0, 0), (1, 1), (2, 1)):
        lattice, _ = folded_setup(gasket, level, depth)
        assert build_measure(lattice, level).total_mass == 3**level


def test_neumann_spectrum_of_the_triangle(gasket):
    """Confirm the folded walk on K^0 has the spectrum {0, 6, 6}."""
    operator = assemble_operator(gasket, 0, 0, Boundary.neumann)
    spectrum = eigendecompose(operator, renormalized=False)
    assert np.allclose(spectrum.eigenvalues, [0.0, 6.0, 6.0], atol=1e-12)


def test_dirichlet_spectrum_at_depth_one(gasket):
    """Confirm the killed walk on K^0 at depth 1 has the spectrum {2, 5, 5}."""
    operator = assemble_operator(gasket, 0, 1, Boundary.dirichlet)
    spectrum = eigendecompose(operator, renormalized=False)
    assert np.allclose(spectrum.eigenvalues, [2.0, 5.0, 5.0], atol=1e-12)
    assert operator.renorm == pytest.approx(5.0)
    renormalized = eigendecompose(operator)
    assert np.allclose(renormalized.eigenvalues, [10.0, 25.0, 25.0], atol=1e-10)


def test_neumann_needs_a_folding_map(gasket):
    """Confirm that the reflected operator refuses to run without pi_M."""
    lattice, _ = folded_setup(gasket, 0, 1)
    with pytest.raises(MissingFolding):
        build_laplacian(lattice, build_measure(lattice, 0), Boundary.neumann)


def test_transition_rows(gasket):
    """Confirm that the folded walk is conservative and the killed walk leaks."""
    neumann = assemble_operator(gasket, 1, 1, Boundary.neumann)
    assert np.allclose(neumann.transition.sum(axis=1), 1.0)
    assert np.allclose(neumann.generator.sum(axis=1), 0.0)
    dirichlet = assemble_operator(gasket, 1, 1, Boundary.dirichlet)
    rows = dirichlet.transition.sum(axis=1)
    assert np.all(rows <= 1.0 + 1e-12)
    assert np.any(rows < 1.0)
    assert dirichlet.dimension == neumann.dimension - 3


def test_walks_are_reversible(gasket):
    """Confirm that both generators are symmetric against the measure."""
    for boundary in Boundary:
        operator = assemble_operator(gasket, 1, 1, boundary)
        assert operator.asymmetry < 1e-12


def test_zero_mode_is_constant(gasket):
    """Confirm the Neumann ground state is 0 with a constant eigenfunction."""
    spectrum = eigendecompose(assemble_operator(gasket, 1, 2, Boundary.neumann))
    assert abs(spectrum.eigenvalues[0]) < 1e-10
    assert np.allclose(np.abs(spectrum.eigenvectors[:, 0]), 3 ** (-1 / 2))
    assert np.all(spectrum.eigenvalues[1:] > 0)


def test_eigenvectors_are_weighted_orthonormal(gasket):
    """Confirm sum_x w(x) f_i(x) f_j(x) = delta_ij."""
    spectrum = eigendecompose(assemble_operator(gasket, 1, 1, Boundary.dirichlet))
    gram = spectrum.eigenvectors.T @ (spectrum.weights[:, None] * spectrum.eigenvectors)
    assert np.allclose(gram, np.eye(spectrum.dimension), atol=1e-10)


def test_dense_cap(gasket):
    """Confirm that a dense solve beyond the cap raises SizeLimit."""
    operator = assemble_operator(gasket, 1, 1, Boundary.neumann)
    with pytest.raises(SizeLimit):
        eigendecompose(operator, cap=2)


def test_heat_trace_agrees_with_the_spectrum(gasket):
    """Confirm Tr exp(-tG) by matrix exponential and by eigenvalues."""
    operator = assemble_operator(gasket, 0, 2, Boundary.neumann)
    spectrum = eigendecompose(operator)
    for t in (0.1, 1.0, 10.0):
        assert heat_trace(operator, t) == pytest.approx(
            spectral_heat_trace(spectrum, t), rel=1e-8, abs=1e-10
        )


def test_heat_trace_starts_at_the_dimension(gasket):
    """Confirm that the trace at small times counts the vertices."""
    operator = assemble_operator(gasket, 0, 1, Boundary.neumann)
    assert heat_trace(operator, 1e-12) == pytest.approx(operator.dimension)


@pytest.mark.parametrize("depth", [1, 2, 3, 4, 5])
def test_decimation_matches_the_eigensolver(gasket, depth):
    """Confirm that spectral decimation predicts the spectrum at every depth."""
    operator = assemble_operator(gasket, 0, depth, Boundary.neumann)
    solved = eigendecompose(operator, renormalized=False).eigenvalues
    predicted = decimation_spectrum(gasket, depth)
    assert len(predicted) == len(solved)
    assert np.allclose(predicted, solved, atol=1e-9)


def test_decimation_first_step(gasket):
    """Confirm the depth-1 spectrum {0, 3, 3, 6, 6, 6}."""
    assert np.allclose(decimation_spectrum(gasket, 1), [0, 3, 3, 6, 6, 6])


def test_decimation_needs_a_rule():
    """Confirm that fractals without a rule raise KeyError."""
    with pytest.raises(KeyError):
        decimation_spectrum(preset_spec("vicsek"), 1)


@pytest.mark.parametrize("depth", [2, 4])
def test_scaling_check_with_decimation(gasket, depth):
    """Confirm that the corrected lowest eigenvalues of K^0 and K^1 agree."""
    report = eigenvalue_scaling_check(gasket, depth, 0, 1)
    assert report.fine == (1, depth + 1)
    assert report.count == 10  # noqa: PLR2004
    assert report.corrected_deviation is not None
    assert report.corrected_deviation < 1e-6
    assert report.walk_dim == pytest.approx(math.log(5) / math.log(2))


def test_scaling_check_against_itself(gasket):
    """Confirm that a complex compared with itself has no deviation."""
    report = eigenvalue_scaling_check(gasket, 1, 0, 0, count=5)
    assert report.raw_deviation == pytest.approx(0.0, abs=1e-12)
    assert report.corrected_deviation == pytest.approx(0.0, abs=1e-12)


def test_dirichlet_dominates_neumann(gasket):
    """Confirm mu_k^D >= mu_k^N on K^1."""
    dirichlet = eigendecompose(assemble_operator(gasket, 1, 1, Boundary.dirichlet))
    neumann = eigendecompose(assemble_operator(gasket, 1, 1, Boundary.neumann))
    assert dirichlet_dominates(dirichlet, neumann)
    assert not dirichlet_dominates(neumann, dirichlet)
