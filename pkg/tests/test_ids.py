"""Test cases for the ids.py file."""

import math

import numpy as np
import pytest

from fractalids.enumerations import Boundary, LawKind, PotentialMode, Verdict
from fractalids.exceptions import (
    DegenerateLaw,
    DomainError,
    EmptyWindow,
    GateFailure,
    PreconditionMNotReached,
)
from fractalids.geometry import preset_spec
from fractalids.ids import (
    EnsembleSettings,
    RateFunctions,
    binomial_tail_bound,
    binomial_tail_check,
    counting_measure,
    ensemble_run,
    laplace_transform,
    least_level,
    lifschitz_fit,
    prepare_level,
    rate_functions,
    richardson_limit,
    temple_bound,
    temple_check,
    window_spans,
)
from fractalids.potential import DisorderLaw, SingleSiteProfile, sample_disorder
from fractalids.subordination import BernsteinFunction

HAUSDORFF = math.log(3) / math.log(2)
WALK_DIM = math.log(5) / math.log(2)


@pytest.fixture(scope="module")
def settings():
    """A small gasket ensemble with the identity phi."""
    return EnsembleSettings(
        spec=preset_spec("gasket"),
        levels=(0, 1),
        depth=1,
        phi=BernsteinFunction(),
        profile=SingleSiteProfile(),
        law=DisorderLaw(),
        samples=3,
        seed=7,
        t_grid=(0.5, 1.0, 2.0),
        lambda_grid=(1.0, 10.0, 100.0),
    )


@pytest.fixture(scope="module")
def result(settings):
    """Run the small ensemble once."""
    return ensemble_run(settings)


def _rates(d0=0.1, lambda_0=0.5):
    """Rate functions of the default Bernoulli law with a fixed D_0."""
    return RateFunctions(
        law=DisorderLaw(),
        d0=d0,
        c1_tilde=1.0,
        hausdorff_dim=HAUSDORFF,
        alpha=WALK_DIM,
        lambda_0=lambda_0,
        d0_interval=(d0, d0),
    )


def test_counting_measure():
    """Confirm the normalization by N^M and the right-continuity."""
    measure = counting_measure([2.0, 0.0, 1.0], 1, Boundary.neumann, 3)
    assert measure(1.0) == pytest.approx(2 / 3)
    assert measure(-1.0) == 0.0
    assert measure.total == pytest.approx(1.0)
    assert np.allclose(measure(np.array([0.0, 5.0])), [1 / 3, 1.0])


def test_laplace_transform():
    """Confirm the normalized trace on a time grid."""
    measure = counting_measure([0.0, 1.0, 2.0], 1, Boundary.neumann, 3)
    curve = laplace_transform(measure, [0.5, 1.0, 2.0])
    expected = [sum(math.exp(-t * lam) for lam in (0, 1, 2)) / 3 for t in (0.5, 1, 2)]
    assert np.allclose(curve.values, expected)
    assert curve.is_completely_monotone()


def test_laplace_transform_needs_positive_times():
    """Confirm that t <= 0 raises DomainError."""
    measure = counting_measure([0.0], 0, Boundary.neumann, 3)
    with pytest.raises(DomainError):
        laplace_transform(measure, [0.0, 1.0])


def test_rate_functions_of_bernoulli():
    """Confirm D_0 and the closed forms of x_t and h for a Bernoulli law."""
    rates = rate_functions(
        DisorderLaw(),
        floor=0.5,
        vertex_constant=2.0,
        max_rank=2,
        hausdorff_dim=HAUSDORFF,
        alpha=WALK_DIM,
        walk_dim=WALK_DIM,
        c1=1.0,
        mu2=4.0,
        lambda_0=0.5,
    )
    assert rates.c1_tilde == pytest.approx(4.0)
    assert rates.d0 == pytest.approx(0.5)
    assert rates.d0_interval == pytest.approx((0.5, 0.5))
    assert rates.x_low == pytest.approx(1.0)
    assert rates.t0 == pytest.approx(math.log(2))
    t = 4 * rates.t0
    assert rates.x_t(t) == pytest.approx(4 ** (1 / (HAUSDORFF + WALK_DIM)), rel=1e-9)
    assert rates.h(t) == pytest.approx(math.log(2))
    with pytest.raises(DomainError):
        rates.x_t(rates.t0 / 2)


def test_degenerate_law():
    """Confirm that a law with all its mass at zero has no rate function."""
    with pytest.raises(DegenerateLaw):
        rate_functions(
            DisorderLaw(atom=1.0),
            floor=0.5,
            vertex_constant=2.0,
            max_rank=2,
            hausdorff_dim=HAUSDORFF,
            alpha=WALK_DIM,
            walk_dim=WALK_DIM,
            c1=1.0,
            mu2=4.0,
            lambda_0=0.5,
        )


def test_temple_bound():
    """Confirm Temple's bound on a diagonal matrix."""
    hamiltonian = np.diag([1.0, 3.0])
    assert temple_bound(hamiltonian, np.array([1.0, 0.0]), 3.0) == pytest.approx(1.0)
    assert temple_bound(hamiltonian, np.array([1.0, 1.0]), 3.0) == pytest.approx(1.0)
    assert temple_bound(hamiltonian, np.array([1.0, 1.0]), 2.5) <= 1.0
    with pytest.raises(ValueError):
        temple_bound(hamiltonian, np.array([1.0, 1.0]), 2.0)
    with pytest.raises(ValueError):
        temple_bound(1e6 * hamiltonian, np.array([1.0, 1.0]), 2e6)


def test_least_level():
    """Confirm the first level whose threshold falls below phi(mu_2)."""
    spec = preset_spec("gasket")
    phi = BernsteinFunction()
    assert least_level(spec, phi, 4.0, WALK_DIM, {0: 1.0, 1: 1.0}) == 1
    assert least_level(spec, phi, 4.0, WALK_DIM, {0: 1.0}) is None


def test_temple_check_below_the_least_level(settings):
    """Confirm that levels below M_2 refuse the comparison."""
    context = prepare_level(settings, 0)
    operator = context.operators[Boundary.dirichlet]
    sample = sample_disorder(settings.law, context.fold.lattice, settings.seed)
    with pytest.raises(PreconditionMNotReached):
        temple_check(
            operator,
            context.spectra[Boundary.dirichlet],
            sample,
            settings.phi,
            settings.profile,
            _rates(),
            context.fold,
            None,
        )


def test_richardson_limit():
    """Confirm that Aitken's step recovers the limit of a geometric sequence."""
    limit, spread = richardson_limit([1.25, 1.125, 1.0625])
    assert limit == pytest.approx(1.0)
    assert spread == pytest.approx(0.0625)
    assert richardson_limit([2.0, 3.0]) == (3.0, 1.0)
    assert richardson_limit([1.0, 1.0, 1.0]) == (1.0, 0.0)


def test_ensemble_statistics(settings, result):
    """Confirm the shapes and sample counts of the ensemble."""
    assert len(result.members) == 2 * settings.samples
    for level in settings.levels:
        for boundary in settings.boundaries:
            statistics = result.of(level, boundary, PotentialMode.periodized)
            assert statistics.count == settings.samples
            assert statistics.laplace_mean.shape == (3,)
            assert statistics.counting_mean.shape == (3,)
            assert np.all(statistics.laplace_stderr >= 0)


def test_dirichlet_below_neumann(result):
    """Confirm N^D <= N^N and Lambda^D <= Lambda^N on every sample."""
    assert result.ordering_holds()


def test_gap_and_convergence_tables(result):
    """Confirm the reductions across levels."""
    gaps = result.gap_table(PotentialMode.periodized)
    assert sorted(gaps) == [0, 1]
    assert all(np.all(gap >= 0) for gap in gaps.values())
    rows = result.convergence_table(Boundary.neumann, PotentialMode.periodized)
    assert len(rows) == 1
    assert rows[0]["from"] == 0
    assert rows[0]["to"] == 1
    moments = result.integrability()
    assert set(moments) == {(0, PotentialMode.periodized), (1, PotentialMode.periodized)}
    for mean, square in moments.values():
        assert mean >= 0
        assert square >= mean**2 - 1e-12


def test_ensemble_does_not_depend_on_workers(settings, result):
    """Confirm that a thread pool reproduces the sequential run."""
    parallel = ensemble_run(
        EnsembleSettings(**{**settings.__dict__, "workers": 2}),
        contexts=result.contexts,
    )
    for key, statistics in result.statistics.items():
        assert np.array_equal(statistics.laplace_mean, parallel.statistics[key].laplace_mean)
        assert np.array_equal(statistics.counting_mean, parallel.statistics[key].counting_mean)


def test_ensemble_refuses_failed_gates(settings):
    """Confirm that a failed assumption stops the run."""
    with pytest.raises(GateFailure) as error:
        ensemble_run(settings, gates={"B": False, "W": True})
    assert error.value.assumption == "B"


def test_ensemble_needs_two_samples(settings):
    """Confirm that a single sample cannot give a spread."""
    with pytest.raises(ValueError):
        ensemble_run(EnsembleSettings(**{**settings.__dict__, "samples": 1}))


def test_lifschitz_band():
    """Confirm that an exponentially thin count gives a Lifschitz band."""
    rates = _rates()
    exponent = HAUSDORFF / WALK_DIM
    lambdas = np.geomspace(0.05, 0.5, 6)
    counting = np.exp(-0.5 * lambdas ** (-exponent))
    times = np.array([0.5, 1.0, 2.0])
    fit = lifschitz_fit(lambdas, counting, times, np.exp(-times), rates)
    assert fit.verdict == Verdict.band
    assert fit.r_band == pytest.approx((-0.5 / math.log(2), -0.5 / math.log(2)))
    assert fit.s_band is not None
    assert fit.radius == pytest.approx(0.1)


def test_weyl_count_has_no_tail():
    """Confirm that a power-law count is flagged as having no tail."""
    exponent = HAUSDORFF / WALK_DIM
    lambdas = np.geomspace(0.05, 0.5, 6)
    counting = 0.1 * lambdas**exponent
    fit = lifschitz_fit(lambdas, counting, [1.0], [0.5], _rates())
    assert fit.verdict == Verdict.no_tail
    assert fit.slope is not None
    assert fit.slope > exponent / 2


def test_empty_window():
    """Confirm that a window without eigenvalues raises EmptyWindow."""
    with pytest.raises(EmptyWindow):
        lifschitz_fit([0.1, 0.2], [0.0, 0.0], [1.0], [0.5], _rates())


def test_one_point_window_is_inconclusive():
    """Confirm that a single positive count cannot give a verdict."""
    lambdas = np.array([0.05, 0.1, 0.5])
    counting = np.array([0.0, 0.0, 1e-3])
    fit = lifschitz_fit(lambdas, counting, [1.0], [0.5], _rates())
    assert fit.verdict == Verdict.inconclusive
    assert fit.slope is None
    assert len(fit.lambdas) == 1


def test_window_shorter_than_a_decade_is_inconclusive():
    """Confirm that a band-shaped count over a narrow window stays inconclusive."""
    exponent = HAUSDORFF / WALK_DIM
    lambdas = np.geomspace(0.1, 0.5, 5)
    counting = np.exp(-0.5 * lambdas ** (-exponent))
    fit = lifschitz_fit(lambdas, counting, [1.0], [0.5], _rates())
    assert np.all(fit.ratio_r < 0)
    assert fit.verdict == Verdict.inconclusive


def test_window_spans():
    """Test the decade requirement on a window."""
    assert window_spans(np.geomspace(0.05, 0.5, 6))
    assert window_spans(np.array([1.0, 10.0]))
    assert not window_spans(np.array([0.5]))
    assert not window_spans(np.array([]))
    assert not window_spans(np.array([0.1, 0.5, 0.9]))
    assert window_spans(np.array([1.0, 2.0]), span=2.0)


def test_fit_window_on_the_ensemble(settings, result):
    """Confirm that the derived window starts at the lowest ground state."""
    mode = PotentialMode.periodized
    window = result.fit_window(1, Boundary.dirichlet, mode)
    assert window_spans(window)
    grounds = [
        m.ground[Boundary.dirichlet] for m in result.members if m.level == 1 and m.mode == mode
    ]
    assert window[0] == pytest.approx(min(grounds))
    assert np.all(result.counting_on(1, Boundary.dirichlet, mode, window) > 0)


def test_counting_on_matches_the_statistics(settings, result):
    """Confirm that the kept spectra reproduce the mean counting function."""
    for level in settings.levels:
        for boundary in settings.boundaries:
            statistics = result.of(level, boundary, PotentialMode.periodized)
            recomputed = result.counting_on(
                level, boundary, PotentialMode.periodized, settings.lambda_grid
            )
            assert np.allclose(recomputed, statistics.counting_mean)


def test_convergence_table_flags_both_directions(result):
    """Confirm that each row carries both monotonicity flags."""
    for boundary in (Boundary.dirichlet, Boundary.neumann):
        for row in result.convergence_table(boundary, PotentialMode.periodized):
            assert isinstance(row["nonincreasing"], bool)
            assert isinstance(row["nondecreasing"], bool)


def test_binomial_tail_bound():
    """Confirm the bound at gamma = 1 and its domain."""
    assert binomial_tail_bound(10, 0.2, 1.0) == pytest.approx(0.2**10)
    with pytest.raises(DomainError):
        binomial_tail_bound(10, 0.5, 0.4)


def test_binomial_tail_check():
    """Confirm that simulated tails stay below the bound."""
    rows = binomial_tail_check([(20, 0.2, 0.5), (50, 0.1, 0.3)], draws=2000, seed=1)
    assert len(rows) == 2  # noqa: PLR2004
    assert all(row.within for row in rows)
    assert all(0 <= row.empirical <= 1 for row in rows)


def test_uniform_law_has_a_rate_function():
    """Confirm that a continuous law gives a positive rate on the grid."""
    rates = rate_functions(
        DisorderLaw(kind=LawKind.uniform),
        floor=0.5,
        vertex_constant=2.0,
        max_rank=2,
        hausdorff_dim=HAUSDORFF,
        alpha=WALK_DIM,
        walk_dim=WALK_DIM,
        c1=1.0,
        mu2=4.0,
        lambda_0=1.0,
    )
    assert float(rates.g(10.0)) == pytest.approx(math.log(20.0))


def test_binomial_tail_check_on_a_full_grid():
    """Confirm the bound on a grid of fifty (n, p, gamma) cells."""
    grid = [
        (n, p, round(p + step, 10))
        for n in (10, 20, 50, 100, 200)
        for p in (0.05, 0.1, 0.2, 0.3, 0.4)
        for step in (0.1, 0.3)
    ]
    assert len(grid) >= 50  # noqa: PLR2004
    rows = binomial_tail_check(grid, draws=4000, seed=3)
    assert len(rows) == len(grid)
    assert all(row.within for row in rows)
    assert all(row.bound <= 1 for row in rows)
