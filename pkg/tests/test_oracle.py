"""Test cases for the oracle.py file."""

import math

import numpy as np
import pytest

from fractalids.enumerations import Boundary, PhiKind, TimeChange
from fractalids.exceptions import ConfigError, DomainError, IncompatiblePhi, MissingFolding
from fractalids.geometry import enumerate_lattice, preset_spec
from fractalids.laplacian import build_laplacian, build_measure, eigendecompose, folded_setup
from fractalids.oracle import (
    WalkConfig,
    estimate_trace,
    folding_occupation_test,
    one_step_frequencies,
    sample_stable_subordinator,
    simulate_walk,
    spectral_trace,
    survival_fraction,
)
from fractalids.subordination import BernsteinFunction

# |z| beyond this is treated as a disagreement
Z_LIMIT = 4.0


@pytest.fixture(scope="module")
def gasket():
    """Build the gasket once for the module."""
    return preset_spec("gasket")


@pytest.fixture(scope="module")
def reflected(gasket):
    """The folded region, the Neumann spectrum and a walk config on K^0."""
    lattice, fold = folded_setup(gasket, 0, 1)
    operator = build_laplacian(lattice, build_measure(lattice, 0), Boundary.neumann, fold)
    return lattice, fold, operator, eigendecompose(operator)


@pytest.mark.parametrize(
    "arguments",
    [
        {"paths": 50},
        {"horizon": 0.0},
        {"batches": 10},
        {"time_change": TimeChange.stable, "alpha_exp": 1.0},
    ],
)
def test_walk_config_validation(arguments):
    """Confirm that unusable experiments raise ConfigError."""
    with pytest.raises(ConfigError):
        WalkConfig(level=0, depth=1, **arguments)


def test_reflected_walk_needs_a_folding(reflected):
    """Confirm that the Neumann walk refuses to run without pi_M."""
    lattice, _, _, _ = reflected
    with pytest.raises(MissingFolding):
        simulate_walk(WalkConfig(level=0, depth=1), lattice)


def test_reflected_walk_matches_the_operator(reflected):
    """Confirm that the sampler jumps with the operator's transition matrix."""
    lattice, fold, operator, _ = reflected
    sampler = simulate_walk(WalkConfig(level=0, depth=1), lattice, fold)
    assert np.array_equal(sampler.domain, operator.support)
    assert np.allclose(sampler.transition, operator.transition)
    assert sampler.rate == pytest.approx(20.0)


def test_one_step_frequencies(reflected):
    """Confirm that observed jumps follow the transition row."""
    lattice, fold, _, _ = reflected
    sampler = simulate_walk(WalkConfig(level=0, depth=1), lattice, fold)
    jumps = 20_000
    corner = lattice.corner_indices(0)[0]
    observed, row = one_step_frequencies(sampler, corner, jumps, seed=5)
    assert row.sum() == pytest.approx(1.0)
    spread = np.sqrt(row * (1 - row) / jumps)
    assert np.all(np.abs(observed - row) <= Z_LIMIT * spread + 1e-12)


def test_survival_of_the_killed_walk(gasket):
    """Confirm the empirical survival against exp(-tG) applied to 1."""
    lattice = enumerate_lattice(gasket, 0, 1)
    sampler = simulate_walk(WalkConfig(level=0, depth=1, boundary=Boundary.dirichlet), lattice)
    inner = int(sampler.domain[np.flatnonzero(sampler.allowed)[0]])
    paths = 4000
    empirical, exact = survival_fraction(sampler, inner, 0.1, paths, seed=11)
    assert 0 < exact < 1
    assert abs(empirical - exact) <= Z_LIMIT * math.sqrt(exact * (1 - exact) / paths)


def test_free_trace_estimate(reflected):
    """Confirm the walk estimate of the normalized heat trace."""
    lattice, fold, _, spectrum = reflected
    cfg = WalkConfig(level=0, depth=1, horizon=0.05, paths=4000, seed=3)
    sampler = simulate_walk(cfg, lattice, fold)
    exact = spectral_trace(spectrum, BernsteinFunction(), cfg.horizon, 3)
    assert exact == pytest.approx(1 + 2 * math.exp(-0.75) + 3 * math.exp(-1.5))
    estimate = estimate_trace(cfg, sampler, BernsteinFunction())
    assert estimate.paths == 4000  # noqa: PLR2004
    assert abs(estimate.z_score(exact)) < Z_LIMIT


def test_trace_estimate_with_a_potential(reflected):
    """Confirm the Feynman-Kac weights against the Schrödinger spectrum."""
    lattice, fold, _, spectrum = reflected
    cfg = WalkConfig(level=0, depth=1, horizon=0.05, paths=4000, seed=4)
    sampler = simulate_walk(cfg, lattice, fold)
    potential = np.linspace(0.0, 2.0, sampler.size)
    exact = spectral_trace(spectrum, BernsteinFunction(), cfg.horizon, 3, potential)
    estimate = estimate_trace(cfg, sampler, BernsteinFunction(), potential, mode="disordered")
    assert estimate.mode == "disordered"
    assert abs(estimate.z_score(exact)) < Z_LIMIT


def test_subordinated_trace_estimate(reflected):
    """Confirm the stable-clock walk against phi = lambda^(1/2)."""
    lattice, fold, _, spectrum = reflected
    cfg = WalkConfig(
        level=0,
        depth=1,
        horizon=0.2,
        paths=2000,
        seed=6,
        time_change=TimeChange.stable,
        alpha_exp=0.5,
        time_steps=8,
    )
    phi = BernsteinFunction(PhiKind.stable, 0.5)
    sampler = simulate_walk(cfg, lattice, fold)
    exact = spectral_trace(spectrum, phi, cfg.horizon, 3)
    estimate = estimate_trace(cfg, sampler, phi, spectrum=spectrum)
    assert abs(estimate.z_score(exact)) < Z_LIMIT


def test_incompatible_phi(reflected):
    """Confirm that the clock and phi must match."""
    lattice, fold, _, spectrum = reflected
    plain = WalkConfig(level=0, depth=1)
    sampler = simulate_walk(plain, lattice, fold)
    with pytest.raises(IncompatiblePhi):
        estimate_trace(plain, sampler, BernsteinFunction(PhiKind.stable, 0.5))
    stable = WalkConfig(level=0, depth=1, time_change=TimeChange.stable, alpha_exp=0.5)
    with pytest.raises(IncompatiblePhi):
        estimate_trace(stable, sampler, BernsteinFunction(), spectrum=spectrum)


def test_stable_subordinator_laplace_transform():
    """Confirm E exp(-S_t) = exp(-t) for the stable(1/2) subordinator."""
    draws = sample_stable_subordinator(0.5, 1.0, seed=2, size=20_000)
    assert np.all(draws > 0)
    values = np.exp(-draws)
    spread = values.std(ddof=1) / math.sqrt(len(values))
    assert abs(values.mean() - math.exp(-1.0)) < Z_LIMIT * spread
    with pytest.raises(DomainError):
        sample_stable_subordinator(1.5, 1.0, seed=2, size=10)


def test_folded_walk_occupation(gasket):
    """Confirm that folding the walk on K^1 reproduces the walk on K^0."""
    report = folding_occupation_test(gasket, 0, 1, horizon=0.1, paths=3000, seed=3)
    assert report.p_value > 1e-4
    assert sum(a for a, _ in report.counts.values()) == 3000  # noqa: PLR2004
    assert sum(b for _, b in report.counts.values()) == 3000  # noqa: PLR2004
