"""Test cases for the harness.py file."""

import json

import numpy as np
import pytest

from fractalids import harness
from fractalids.config import load_config
from fractalids.enumerations import Boundary, Verdict
from fractalids.exceptions import GateFailure
from fractalids.ids import window_spans
from fractalids.geometry import preset_spec
from fractalids.laplacian import assemble_operator

# |z| beyond this is treated as a disagreement
Z_LIMIT = 4.0


@pytest.fixture(scope="module")
def gasket():
    """Build the gasket once for the module."""
    return preset_spec("gasket")


def smoke_config(directory, **overrides):
    """The smoke preset at depth 2, writing into a temporary directory."""
    return load_config(
        preset="gasket-smoke",
        overrides={"depth": 2, "output": str(directory), "cache": str(directory / "cache"), **overrides},
    )


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    """Run the smoke preset once for the module."""
    directory = tmp_path_factory.mktemp("smoke")
    config = smoke_config(directory)
    return config, harness.run(config)


def test_output_writer_records_hashes(tmp_path):
    """Confirm that written files are hashed and read back."""
    writer = harness.OutputWriter(tmp_path / "out")
    path = writer.write_csv("rows.csv", ["k", "mu_k"], [{"k": 1, "mu_k": 0.1}, {"k": 2}])
    rows = harness.read_rows(path)
    assert rows == [{"k": "1", "mu_k": "0.1"}, {"k": "2", "mu_k": ""}]
    writer.write_json("data.json", {"b": 1, "a": [True, None]})
    assert set(writer.files) == {"rows.csv", "data.json"}
    assert json.loads((tmp_path / "out" / "data.json").read_text()) == {"a": [True, None], "b": 1}


def test_spectrum_cache_hits_on_the_second_call(tmp_path, gasket):
    """Confirm that a stored spectrum is reused and equals the computed one."""
    cache = harness.SpectrumCache(tmp_path)
    operator = assemble_operator(gasket, 0, 1, Boundary.neumann)
    first = cache.spectrum(operator)
    second = cache.spectrum(operator)
    assert (cache.hits, cache.misses) == (1, 1)
    assert (second.eigenvalues == first.eigenvalues).all()
    raw = cache.spectrum(operator, renormalized=False)
    assert cache.misses == 2  # noqa: PLR2004
    assert raw.eigenvalues[-1] < first.eigenvalues[-1]


def test_gates_pass_for_the_smoke_preset(tmp_path, gasket):
    """Confirm that the default assumptions verify."""
    config = smoke_config(tmp_path)
    report = harness.evaluate_gates(config, gasket)
    assert report.passed
    assert set(report.as_flags()) == {"GLP", "shape", "B", "Q1", "Q2", "W"}
    harness.require_gates(report)


def test_gamma_phi_fails_assumption_b(tmp_path, gasket):
    """Confirm that a logarithmic phi stops at (B)."""
    config = smoke_config(tmp_path, phi={"kind": "gamma"})
    report = harness.evaluate_gates(config, gasket)
    assert not report.passed
    assert report.first_failure().name == "B"
    assert report.assumption_b is None
    with pytest.raises(GateFailure) as error:
        harness.require_gates(report)
    assert error.value.assumption == "B"


def test_glp_check_exports_rotations(tmp_path, gasket):
    """Confirm the labeling report and its rotation table."""
    report = harness.glp_check(gasket, 1, tmp_path)
    assert report["glp"]
    rows = harness.read_rows(tmp_path / "rotations_M1.csv")
    assert len(rows) == 3  # noqa: PLR2004
    assert all(row["cell_address"].startswith("1:") for row in rows)
    assert rows[0]["rotation_index"] == "0"


def test_spectrum_table(tmp_path, gasket):
    """Confirm the raw Dirichlet spectrum of K^0 at depth 1."""
    config = load_config(
        preset="gasket",
        overrides={"depth": 1, "output": str(tmp_path), "cache": str(tmp_path / "cache")},
    )
    path = harness.spectrum_table(config, gasket, 0, Boundary.dirichlet)
    assert path.name == "spectrum_M0_n1_dirichlet.csv"
    values = [float(row["mu_k"]) for row in harness.read_rows(path)]
    assert values == pytest.approx([2.0, 5.0, 5.0])


def test_run_writes_a_manifest(smoke_run):
    """Confirm the outputs, the manifest and the gate flags of a run."""
    config, outcome = smoke_run
    assert not outcome.reused
    manifest = json.loads((outcome.directory / harness.MANIFEST).read_text())
    assert manifest["fingerprint"] == config.fingerprint()
    assert all(manifest["gates"].values())
    assert manifest["seeds"]["disorder"] == config.seed
    for name in ("gates.json", "ids.csv", "laplace.csv", "samples.csv", "analysis.json", "lifschitz.json"):
        assert name in outcome.files
        assert (outcome.directory / name).is_file()
    rows = harness.read_rows(outcome.directory / "ids.csv")
    assert len(rows) == len(config.levels) * 2 * len(config.modes) * len(config.lambda_grid)
    assert outcome.verdict["verdict"] in [verdict.value for verdict in Verdict]


def test_run_orders_dirichlet_below_neumann(smoke_run):
    """Confirm that the recorded analysis keeps N^D <= N^N."""
    _, outcome = smoke_run
    analysis = json.loads((outcome.directory / "analysis.json").read_text())
    assert analysis["ordering_holds"]
    assert analysis["D0"] > 0


def test_identical_run_is_reused(smoke_run):
    """Confirm that the same configuration does not recompute."""
    config, outcome = smoke_run
    again = harness.run(config)
    assert again.reused
    assert again.files == outcome.files
    assert harness.previous_run(outcome.directory, config.fingerprint()) is not None


def test_changed_seed_is_not_reused(smoke_run):
    """Confirm that a different seed does not match the manifest."""
    config, outcome = smoke_run
    reseeded = load_config(preset="gasket-smoke", overrides={"depth": 2, "seed": 1})
    assert harness.previous_run(outcome.directory, reseeded.fingerprint()) is None
    assert harness.previous_run(outcome.directory / "missing", config.fingerprint()) is None


def test_rerun_elsewhere_is_byte_identical(smoke_run, tmp_path):
    """Confirm that the same configuration writes the same bytes in a new directory."""
    config, outcome = smoke_run
    again = harness.run(smoke_config(tmp_path))
    assert not again.reused
    assert again.files == outcome.files
    for name in outcome.files:
        assert (tmp_path / name).read_bytes() == (outcome.directory / name).read_bytes()
    first = json.loads((outcome.directory / harness.MANIFEST).read_text())
    second = json.loads((tmp_path / harness.MANIFEST).read_text())
    for manifest in (first, second):
        for key in ("output", "cache"):
            manifest["config"].pop(key)
    assert first == second


def test_failed_gate_stops_the_run(tmp_path):
    """Confirm that gates are written but no manifest when (B) fails."""
    config = smoke_config(tmp_path, phi={"kind": "gamma"})
    with pytest.raises(GateFailure):
        harness.run(config)
    assert (tmp_path / "gates.json").is_file()
    assert not (tmp_path / harness.MANIFEST).is_file()
    gates = json.loads((tmp_path / "gates.json").read_text())
    assert not gates["B"]["passed"]


@pytest.mark.slow
def test_mc_check_agrees_with_the_spectrum(tmp_path):
    """Confirm the walk traces with and without disorder."""
    config = load_config(
        overrides={
            "depth": 1,
            "output": str(tmp_path),
            "cache": str(tmp_path / "cache"),
            "monte_carlo": {"level": 0, "horizon": 0.05, "paths": 2000},
        }
    )
    rows = harness.mc_check(config)
    assert [row["case"] for row in rows] == ["free", "disordered"]
    for row in rows:
        assert abs(row["z_score"]) < Z_LIMIT
    assert (tmp_path / "mc_check.json").is_file()


@pytest.fixture(scope="module")
def gasket_run(tmp_path_factory):
    """Run the gasket preset at M = 1, 2, 3 once for the module."""
    directory = tmp_path_factory.mktemp("gasket")
    config = load_config(
        preset="gasket",
        overrides={"output": str(directory), "cache": str(directory / "cache")},
    )
    return config, harness.run(config)


@pytest.mark.slow
def test_temple_margins_hold_from_the_least_level(gasket_run):
    """Confirm Temple's bound on every checked sample at M_2 and M_2 + 1."""
    config, outcome = gasket_run
    analysis = json.loads((outcome.directory / "analysis.json").read_text())
    assert analysis["M2"] is not None
    temple = analysis["temple"]
    assert temple["checked"] >= config.temple_samples
    assert temple["all_hold"]
    assert temple["least_margin"] >= 0
    rows = harness.read_rows(outcome.directory / "temple.csv")
    assert {int(row["M"]) for row in rows} <= {analysis["M2"], analysis["M2"] + 1}
    assert all(row["holds"] == "true" for row in rows)


@pytest.mark.slow
def test_laplace_curves_are_monotone_in_the_level(gasket_run):
    """Confirm Neumann curves do not grow and Dirichlet curves do not shrink with M."""
    _, outcome = gasket_run
    analysis = json.loads((outcome.directory / "analysis.json").read_text())
    neumann = analysis["convergence"]["neumann"]
    dirichlet = analysis["convergence"]["dirichlet"]
    assert [row["to"] for row in neumann] == [2, 3]
    assert all(row["nonincreasing"] for row in neumann)
    assert all(row["nondecreasing"] for row in dirichlet)


@pytest.mark.slow
def test_boundary_gap_shrinks_with_the_level(gasket_run):
    """Confirm that the mean squared D/N gap at t = 1 decreases over M = 1, 2, 3."""
    config, outcome = gasket_run
    analysis = json.loads((outcome.directory / "analysis.json").read_text())
    index = config.t_grid.index(1.0)
    gaps = [analysis["gap_squared"][str(level)][index] for level in (1, 2, 3)]
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.slow
def test_lifschitz_window_on_the_gasket_ensemble(gasket_run):
    """Confirm the tail ratios of the real ensemble over a decade above its bottom."""
    config, outcome = gasket_run
    verdict = json.loads((outcome.directory / "lifschitz.json").read_text())
    assert verdict["M"] == max(config.levels)
    low, high = verdict["window"]
    assert high >= 10 * low * (1 - 1e-9)
    assert outcome.analysis is not None
    fit = outcome.analysis.fit
    assert fit is not None
    assert window_spans(fit.lambdas)
    assert np.all(fit.counting > 0)
    # below the atom value a, log N < 0 and g = log 2 fix the sign of the ratio
    thin = (fit.counting < 1) & (fit.lambdas < config.law.value)
    assert thin.any()
    assert np.all(fit.ratio_r[thin] < 0)
    assert verdict["verdict"] == fit.verdict.value
    rows = harness.read_rows(outcome.directory / "lifschitz_r.csv")
    assert len(rows) == len(fit.lambdas)
