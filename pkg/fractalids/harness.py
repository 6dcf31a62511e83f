"""Run gates, spectra, ensembles and analyses and persist them reproducibly."""

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import convert, util
from . import debug as debugger
from .config import RunConfig
from .enumerations import Boundary, PotentialMode
from .exceptions import EmptyWindow, GateFailure, ViolatesB
from .geometry import FractalSpec, enumerate_lattice
from .ids import (
    EnsembleResult,
    LifschitzFit,
    RateFunctions,
    TempleReport,
    ensemble_run,
    least_level,
    lifschitz_fit,
    prepare_level,
    rate_functions,
    richardson_limit,
    temple_check,
)
from .labeling import GoodLabeling, find_good_labeling, glp_report, rotation_rows
from .laplacian import (
    DENSE_CAP,
    DiscreteLaplacian,
    SpectrumBundle,
    assemble_operator,
    build_laplacian,
    build_measure,
    eigendecompose,
    folded_setup,
)
from .oracle import estimate_trace, simulate_walk, spectral_trace
from .potential import (
    LawReport,
    WReport,
    potential_on,
    profile_from_spec,
    sample_disorder,
    verify_law,
    verify_W_conditions,
)
from .subordination import AssumptionBReport, check_assumption_B, shape_check

# name of the file that indexes every output of a run
MANIFEST = "manifest.json"


def code_version() -> str:
    """Version of the installed package, recorded in every manifest."""
    try:
        return metadata.version("fractalids")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def _cell(value: Any) -> Any:
    """Convert a value into a CSV cell."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return convert.format_float(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


@dataclass
class OutputWriter:
    """Writes CSV and JSON outputs into one directory and remembers their hashes."""

    directory: Path
    files: Dict[str, str] = field(default_factory=dict)

    def _record(self, path: Path) -> Path:
        """Hash a written file into the manifest."""
        self.files[path.name] = util.hash_file(path)
        return path

    def write_csv(
        self, name: str, fieldnames: Sequence[str], rows: Sequence[Dict[str, Any]]
    ) -> Path:
        """Write rows with a header; floats are written so they read back exactly."""
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(fieldnames), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({key: _cell(row.get(key, "")) for key in fieldnames})
        return self._record(path)

    def write_json(self, name: str, payload: Any) -> Path:
        """Write a JSON document with sorted keys."""
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        text = json.dumps(convert.to_serializable(payload), indent=2, sort_keys=True)
        path.write_text(text + "\n", encoding="utf-8")
        return self._record(path)


def read_rows(path: Path) -> List[Dict[str, str]]:
    """Read a CSV output back as a list of rows."""
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


@dataclass
class SpectrumCache:
    """Eigenpairs on disk, keyed by the hash of everything they depend on."""

    directory: Path
    dense_cap: int = DENSE_CAP
    debug: bool = False
    hits: int = 0
    misses: int = 0

    def key(self, operator: DiscreteLaplacian, renormalized: bool = True) -> str:
        """Cache key of an operator's spectrum."""
        return util.hash_data(
            {
                "spec": operator.spec.spec_hash,
                "M": operator.level,
                "n": operator.depth,
                "boundary": operator.boundary,
                "renormalized": renormalized,
                "dimension": operator.dimension,
            }
        )

    def _load(
        self, key: str, operator: DiscreteLaplacian, renormalized: bool
    ) -> Optional[SpectrumBundle]:
        """Read a cached spectrum, or None when absent."""
        arrays = self.directory / f"{key}.npz"
        if not arrays.is_file() or not (self.directory / f"{key}.json").is_file():
            return None
        with np.load(arrays) as data:
            support = data["support"]
            # a stale entry for a different region is recomputed
            if not np.array_equal(support, operator.support):
                return None
            return SpectrumBundle(
                eigenvalues=data["eigenvalues"],
                eigenvectors=data["eigenvectors"],
                symmetric_vectors=data["symmetric_vectors"],
                weights=data["weights"],
                support=support,
                boundary=operator.boundary,
                level=operator.level,
                depth=operator.depth,
                spec_hash=operator.spec.spec_hash,
                renormalized=renormalized,
            )

    def _store(self, key: str, bundle: SpectrumBundle) -> None:
        """Write a spectrum atomically into the cache."""
        self.directory.mkdir(parents=True, exist_ok=True)
        partial = self.directory / f"{key}.npz.partial"
        with partial.open("wb") as handle:
            np.savez(
                handle,
                eigenvalues=bundle.eigenvalues,
                eigenvectors=bundle.eigenvectors,
                symmetric_vectors=bundle.symmetric_vectors,
                weights=bundle.weights,
                support=bundle.support,
            )
        partial.replace(self.directory / f"{key}.npz")
        meta = {
            "spec_hash": bundle.spec_hash,
            "M": bundle.level,
            "n": bundle.depth,
            "boundary": bundle.boundary.value,
            "renormalized": bundle.renormalized,
            "eigenvalues": util.hash_data(bundle.eigenvalues),
        }
        (self.directory / f"{key}.json").write_text(
            util.canonical_json(meta) + "\n", encoding="utf-8"
        )

    def spectrum(self, operator: DiscreteLaplacian, renormalized: bool = True) -> SpectrumBundle:
        """Load the eigenpairs of an operator, or compute and store them."""
        key = self.key(operator, renormalized)
        cached = self._load(key, operator, renormalized)
        if cached is not None:
            self.hits += 1
            debugger.debug(self.debug, debugger.Debug.spectrum_reused.value)
            return cached
        bundle = eigendecompose(operator, self.dense_cap, renormalized)
        self._store(key, bundle)
        self.misses += 1
        debugger.debug(self.debug, debugger.Debug.spectrum_computed.value)
        return bundle

    def __call__(self, operator: DiscreteLaplacian) -> SpectrumBundle:
        """Diagonalize through the cache."""
        return self.spectrum(operator)


@dataclass
class Gate:
    """One assumption check and the numbers behind its verdict."""

    name: str
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)


@dataclass
class GateReport:
    """Every assumption check that guards an ensemble run."""

    gates: List[Gate]
    assumption_b: Optional[AssumptionBReport]
    law: LawReport
    conditions: WReport

    @property
    def passed(self) -> bool:
        """True when every gate passed."""
        return all(gate.passed for gate in self.gates)

    def first_failure(self) -> Optional[Gate]:
        """The first gate that failed, in evaluation order."""
        return next((gate for gate in self.gates if not gate.passed), None)

    def as_flags(self) -> Dict[str, bool]:
        """Gate names mapped to their outcomes."""
        return {gate.name: gate.passed for gate in self.gates}

    def to_json(self) -> Dict[str, Any]:
        """Gates with their details for gates.json."""
        return {gate.name: {"passed": gate.passed, **gate.detail} for gate in self.gates}


def evaluate_gates(config: RunConfig, spec: FractalSpec, debug: bool = False) -> GateReport:
    """Check the labeling, (B), the shape of phi, (Q1), (Q2) and (W) before computing."""
    gates: List[Gate] = []
    # --> the good labeling property at every requested level
    labelings = {}
    for level in config.levels:
        lattice = enumerate_lattice(spec, level + 1, 0, config.caps.size)
        labelings[str(level)] = glp_report(find_good_labeling(lattice, level))
    debugger.debug(debug, debugger.Debug.lattice_enumerated.value)
    found = all(report["glp"] for report in labelings.values())
    if found:
        debugger.debug(debug, debugger.Debug.labeling_found.value)
    gates.append(
        Gate(
            "GLP",
            found,
            {
                "levels": {
                    level: {key: value for key, value in report.items() if key != "labeling"}
                    for level, report in labelings.items()
                }
            },
        )
    )
    # --> the Bernstein function
    phi = config.phi.to_function()
    gates.append(Gate("shape", shape_check(phi), {"phi": phi.describe()}))
    assumption_b: Optional[AssumptionBReport] = None
    try:
        assumption_b = check_assumption_B(phi, spec.walk_dim, config.gates.phi_lambda_0)
        gates.append(Gate("B", True, convert.to_serializable(assumption_b)))
    except ViolatesB as error:
        gates.append(Gate("B", False, {"phi": phi.describe(), "reason": error.detail}))
    # --> the disorder law
    law = config.law.to_law()
    law_report = verify_law(law, config.law.lambda_0)
    law_detail = convert.to_serializable(law_report)
    gates.append(Gate("Q1", law_report.q1, {"law": law.describe(), **law_detail}))
    gates.append(Gate("Q2", law_report.q2, {"law": law.describe(), **law_detail}))
    # --> the single-site profile
    conditions = verify_W_conditions(
        config.profile.to_profile(),
        spec,
        config.gates.w_max_level,
        config.gates.w_depth,
        config.caps.size,
    )
    gates.append(
        Gate(
            "W",
            conditions.passed,
            {name: convert.to_serializable(report) for name, report in conditions.conditions.items()},
        )
    )
    report = GateReport(gates=gates, assumption_b=assumption_b, law=law_report, conditions=conditions)
    if report.passed:
        debugger.debug(debug, debugger.Debug.gates_passed.value)
    return report


def require_gates(report: GateReport) -> None:
    """Stop with the first failed assumption."""
    failure = report.first_failure()
    if failure is not None:
        raise GateFailure(failure.name, failure.detail)


@dataclass
class Analysis:
    """Truncation level, M_2, Temple margins and the Lifschitz fit of one ensemble."""

    mu2_by_depth: Dict[int, float]
    mu2_limit: float
    mu2_spread: float
    rate: RateFunctions
    second_eigenvalues: Dict[int, float]
    least: Optional[int]
    temple: List[TempleReport]
    temple_note: str
    fit: Optional[LifschitzFit]
    fit_level: int
    fit_boundary: Boundary
    fit_note: str = ""


def second_eigenvalues_by_depth(
    spec: FractalSpec, depth: int, cache: SpectrumCache, cap: int
) -> Dict[int, float]:
    """mu_2 of the Neumann operator on K^<0> at the last three depths up to n."""
    values = {}
    for n in range(max(depth - 2, 0), depth + 1):
        operator = assemble_operator(spec, 0, n, Boundary.neumann, cap)
        values[n] = float(cache(operator).eigenvalues[1])
    return values


def analyze(
    config: RunConfig,
    spec: FractalSpec,
    gates: GateReport,
    ensemble: EnsembleResult,
    cache: SpectrumCache,
) -> Analysis:
    """Build the rate functions, find M_2, check Temple's bound and fit the tail."""
    phi = config.phi.to_function()
    profile = profile_from_spec(config.profile.to_profile(), spec)
    law = config.law.to_law()
    assumption_b = gates.assumption_b
    if assumption_b is None:
        raise GateFailure("B", "rate functions need the certified constants of (B)")
    # --> D_0 from mu_2 at the working depth, its spread from the extrapolation
    mu2_by_depth = second_eigenvalues_by_depth(spec, config.depth, cache, config.caps.size)
    working = mu2_by_depth[config.depth]
    limit, spread = richardson_limit([mu2_by_depth[n] for n in sorted(mu2_by_depth)])
    rate = rate_functions(
        law,
        floor=profile.floor_value,
        vertex_constant=spec.vertex_constant,
        max_rank=spec.max_rank,
        hausdorff_dim=spec.hausdorff_dim,
        alpha=assumption_b.alpha,
        walk_dim=spec.walk_dim,
        c1=assumption_b.c1,
        mu2=working,
        lambda_0=gates.law.lambda_0,
        mu2_spread=abs(limit - working) + spread,
    )
    # --> M_2 from the Neumann spectra of the ensemble
    second = {
        level: float(context.spectra[Boundary.neumann].eigenvalues[1])
        for level, context in sorted(ensemble.contexts.items())
        if Boundary.neumann in context.spectra and context.spectra[Boundary.neumann].dimension > 1
    }
    least = least_level(spec, phi, rate.c1_tilde, rate.alpha, second)
    # --> Temple's bound at M_2 and M_2 + 1
    temple: List[TempleReport] = []
    if least is None:
        temple_note = "no computed level reaches M_2"
    elif not profile.claims_floor:
        temple_note = "the profile claims no floor A_0, so the bound does not apply"
    elif Boundary.neumann not in config.boundaries:
        temple_note = "the bound is checked on Neumann operators only"
    else:
        checked = [level for level in sorted(ensemble.contexts) if level >= least][:2]
        for level in checked:
            context = ensemble.contexts[level]
            for s in range(config.temple_samples):
                sample = sample_disorder(law, context.fold.lattice, config.seed, s)
                temple.append(
                    temple_check(
                        context.operators[Boundary.neumann],
                        context.spectra[Boundary.neumann],
                        sample,
                        phi,
                        profile,
                        rate,
                        context.fold,
                        least,
                    )
                )
        temple_note = f"levels {checked}, {config.temple_samples} samples each"
    # --> the Lifschitz fit at the largest level, over a decade above the lowest ground state
    fit_level = max(config.levels)
    fit_boundary = Boundary.neumann if Boundary.neumann in config.boundaries else config.boundaries[0]
    statistics = ensemble.of(fit_level, fit_boundary, config.modes[0])
    fit: Optional[LifschitzFit] = None
    fit_note = ""
    try:
        window = ensemble.fit_window(fit_level, fit_boundary, config.modes[0])
        fit = lifschitz_fit(
            window,
            ensemble.counting_on(fit_level, fit_boundary, config.modes[0], window),
            config.t_grid,
            statistics.laplace_mean,
            rate,
        )
    except EmptyWindow as error:
        fit_note = str(error)
    return Analysis(
        mu2_by_depth=mu2_by_depth,
        mu2_limit=limit,
        mu2_spread=spread,
        rate=rate,
        second_eigenvalues=second,
        least=least,
        temple=temple,
        temple_note=temple_note,
        fit=fit,
        fit_level=fit_level,
        fit_boundary=fit_boundary,
        fit_note=fit_note,
    )


def run_ensemble(
    config: RunConfig, spec: FractalSpec, cache: SpectrumCache, debug: bool = False
) -> EnsembleResult:
    """Fold and diagonalize every level, then sample the ensemble."""
    settings = config.ensemble_settings(spec)
    contexts = {level: prepare_level(settings, level, cache) for level in settings.levels}
    debugger.debug(debug, debugger.Debug.operator_assembled.value)
    result = ensemble_run(settings, spectrum_source=cache, contexts=contexts)
    debugger.debug(debug, debugger.Debug.ensemble_finished.value)
    return result


def spectrum_rows(bundle: SpectrumBundle) -> List[Dict[str, Any]]:
    """Rows (k, mu_k) with k counted from one."""
    return [{"k": k, "mu_k": value} for k, value in enumerate(bundle.eigenvalues, start=1)]


def write_spectra(writer: OutputWriter, ensemble: EnsembleResult) -> None:
    """Write every cached spectrum of the ensemble."""
    for level, context in sorted(ensemble.contexts.items()):
        for boundary, bundle in sorted(context.spectra.items(), key=lambda item: item[0].value):
            writer.write_csv(
                f"spectrum_M{level}_{boundary.value}.csv", ["k", "mu_k"], spectrum_rows(bundle)
            )


def write_ensemble(writer: OutputWriter, config: RunConfig, ensemble: EnsembleResult) -> None:
    """Counting functions, Laplace curves and per-sample summaries."""
    counting, laplace = [], []
    for (level, boundary, mode), stats in sorted(
        ensemble.statistics.items(), key=lambda item: (item[0][0], item[0][1].value, item[0][2].value)
    ):
        for lam, mean, stderr in zip(config.lambda_grid, stats.counting_mean, stats.counting_stderr):
            counting.append(
                {"M": level, "boundary": boundary, "mode": mode, "lambda": lam, "N_mean": mean, "N_stderr": stderr}
            )
        for t, mean, stderr in zip(config.t_grid, stats.laplace_mean, stats.laplace_stderr):
            laplace.append(
                {"M": level, "boundary": boundary, "mode": mode, "t": t, "L_mean": mean, "L_stderr": stderr}
            )
    writer.write_csv("ids.csv", ["M", "boundary", "mode", "lambda", "N_mean", "N_stderr"], counting)
    writer.write_csv("laplace.csv", ["M", "boundary", "mode", "t", "L_mean", "L_stderr"], laplace)
    members = [
        {
            "M": member.level,
            "mode": member.mode,
            "sample": member.sample,
            "boundary": boundary,
            "ground": ground,
            "V_mean": member.moments[0],
            "V2_mean": member.moments[1],
        }
        for member in ensemble.members
        for boundary, ground in sorted(member.ground.items(), key=lambda item: item[0].value)
    ]
    writer.write_csv(
        "samples.csv", ["M", "mode", "sample", "boundary", "ground", "V_mean", "V2_mean"], members
    )


def write_lifschitz(writer: OutputWriter, analysis: Analysis) -> Dict[str, Any]:
    """Tail ratios as curves and the verdict as JSON."""
    fit = analysis.fit
    verdict: Dict[str, Any] = {
        "M": analysis.fit_level,
        "boundary": analysis.fit_boundary,
        "D0": analysis.rate.d0,
        "D0_interval": analysis.rate.d0_interval,
        "alpha": analysis.rate.alpha,
    }
    if fit is None:
        verdict.update({"verdict": "inconclusive", "note": analysis.fit_note})
    else:
        writer.write_csv(
            "lifschitz_r.csv",
            ["lambda", "N_mean", "ratio_r"],
            [
                {"lambda": lam, "N_mean": n, "ratio_r": r}
                for lam, n, r in zip(fit.lambdas, fit.counting, fit.ratio_r)
            ],
        )
        writer.write_csv(
            "lifschitz_s.csv",
            ["t", "ratio_s"],
            [{"t": t, "ratio_s": s} for t, s in zip(fit.times, fit.ratio_s)],
        )
        finite = bool(np.any(np.isfinite(fit.ratio_r)))
        verdict.update(
            {
                "verdict": fit.verdict,
                "slope": fit.slope,
                "window": [float(fit.lambdas.min()), float(fit.lambdas.max())],
                "radius": fit.radius,
                "r_band": fit.r_band if finite else None,
                "s_band": fit.s_band,
            }
        )
    writer.write_json("lifschitz.json", verdict)
    return verdict


def write_analysis(
    writer: OutputWriter, config: RunConfig, ensemble: EnsembleResult, analysis: Analysis
) -> None:
    """Write the Temple, gap and integrability tables."""
    writer.write_csv(
        "temple.csv",
        ["M", "sample", "lhs", "rhs", "margin", "holds"],
        [
            {"M": r.level, "sample": r.sample, "lhs": r.lhs, "rhs": r.rhs, "margin": r.margin, "holds": r.holds}
            for r in analysis.temple
        ],
    )
    mode = config.modes[0]
    boundaries = set(config.boundaries)
    writer.write_json(
        "analysis.json",
        {
            "ordering_holds": ensemble.ordering_holds(),
            "gap_squared": ensemble.gap_table(mode) if len(boundaries) == 2 else {},  # noqa: PLR2004
            "convergence": {
                boundary.value: ensemble.convergence_table(boundary, mode)
                for boundary in config.boundaries
            },
            "integrability": {
                f"M{level}_{m.value}": moments for (level, m), moments in ensemble.integrability().items()
            },
            "mu2_by_depth": analysis.mu2_by_depth,
            "mu2_limit": analysis.mu2_limit,
            "mu2_spread": analysis.mu2_spread,
            "mu2_by_level": analysis.second_eigenvalues,
            "D0": analysis.rate.d0,
            "D0_interval": analysis.rate.d0_interval,
            "C1_tilde": analysis.rate.c1_tilde,
            "t0": analysis.rate.t0,
            "M2": analysis.least,
            "temple": {
                "note": analysis.temple_note,
                "checked": len(analysis.temple),
                "all_hold": all(r.holds for r in analysis.temple),
                "least_margin": min((r.margin for r in analysis.temple), default=None),
            },
        },
    )


@dataclass
class RunOutcome:
    """Where a run wrote its outputs and what it found."""

    directory: Path
    fingerprint: str
    files: Dict[str, str]
    reused: bool
    gates: Optional[GateReport] = None
    analysis: Optional[Analysis] = None
    verdict: Dict[str, Any] = field(default_factory=dict)
    cache_hits: int = 0
    cache_misses: int = 0


def previous_run(directory: Path, fingerprint: str) -> Optional[Dict[str, Any]]:
    """The manifest of an identical earlier run whose files are all intact."""
    path = directory / MANIFEST
    if not path.is_file():
        return None
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("fingerprint") != fingerprint or manifest.get("code_version") != code_version():
        return None
    for name, digest in manifest.get("files", {}).items():
        target = directory / name
        if not target.is_file() or util.hash_file(target) != digest:
            return None
    return manifest


def spec_summary(spec: FractalSpec) -> Dict[str, Any]:
    """Describe the fractal for the manifest."""
    return {
        "name": spec.name,
        "hash": spec.spec_hash,
        "N": spec.num_maps,
        "L": spec.scale,
        "k": spec.num_corners,
        "tau": spec.time_scale,
        "tau_source": spec.tau_source,
        "hausdorff_dim": spec.hausdorff_dim,
        "walk_dim": spec.walk_dim,
        "spectral_dim": spec.spectral_dim,
    }


def run(config: RunConfig, debug: bool = False) -> RunOutcome:
    """Gates, lattices, operators, ensemble and analysis, written with a manifest."""
    directory = config.output
    fingerprint = config.fingerprint()
    earlier = previous_run(directory, fingerprint)
    if earlier is not None:
        debugger.debug(debug, debugger.Debug.run_reused.value)
        return RunOutcome(
            directory=directory,
            fingerprint=fingerprint,
            files=earlier["files"],
            reused=True,
            verdict=earlier.get("verdict", {}),
        )
    spec = config.fractal_spec()
    debugger.debug(debug, debugger.Debug.spec_built.value)
    writer = OutputWriter(directory)
    cache = SpectrumCache(config.cache_directory(), config.caps.dense, debug)
    # --> GATES
    gates = evaluate_gates(config, spec, debug)
    writer.write_json("gates.json", gates.to_json())
    require_gates(gates)
    # --> ENSEMBLE
    ensemble = run_ensemble(config, spec, cache, debug)
    write_spectra(writer, ensemble)
    write_ensemble(writer, config, ensemble)
    # --> ANALYSIS
    analysis = analyze(config, spec, gates, ensemble, cache)
    write_analysis(writer, config, ensemble, analysis)
    verdict = write_lifschitz(writer, analysis)
    # --> MANIFEST
    manifest = {
        "fingerprint": fingerprint,
        "code_version": code_version(),
        "config": config.echo(),
        "spec": spec_summary(spec),
        "seeds": {
            "disorder": config.seed,
            "monte_carlo": config.seed if config.monte_carlo.seed is None else config.monte_carlo.seed,
        },
        "gates": gates.as_flags(),
        "verdict": verdict,
        "files": dict(sorted(writer.files.items())),
    }
    writer.directory.mkdir(parents=True, exist_ok=True)
    (directory / MANIFEST).write_text(
        json.dumps(convert.to_serializable(manifest), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    debugger.debug(debug, debugger.Debug.outputs_written.value)
    return RunOutcome(
        directory=directory,
        fingerprint=fingerprint,
        files=manifest["files"],  # type: ignore[arg-type]
        reused=False,
        gates=gates,
        analysis=analysis,
        verdict=verdict,
        cache_hits=cache.hits,
        cache_misses=cache.misses,
    )


def glp_check(
    spec: FractalSpec, level: int, directory: Optional[Path] = None, debug: bool = False
) -> Dict[str, Any]:
    """Search a labeling of order M and export its rotation table when asked."""
    lattice = enumerate_lattice(spec, level + 1, 0)
    debugger.debug(debug, debugger.Debug.lattice_enumerated.value)
    outcome = find_good_labeling(lattice, level)
    report = glp_report(outcome)
    if isinstance(outcome, GoodLabeling):
        debugger.debug(debug, debugger.Debug.labeling_found.value)
        if directory is not None:
            OutputWriter(directory).write_csv(
                f"rotations_M{level}.csv",
                ["cell_address", "rotation_index"],
                [{"cell_address": cell, "rotation_index": turn} for cell, turn in rotation_rows(outcome)],
            )
    return report


def spectrum_table(
    config: RunConfig,
    spec: FractalSpec,
    level: int,
    boundary: Boundary,
    renormalized: bool = False,
    debug: bool = False,
) -> Path:
    """Write the spectrum of one operator as a CSV of (k, mu_k)."""
    operator = assemble_operator(spec, level, config.depth, boundary, config.caps.size)
    debugger.debug(debug, debugger.Debug.operator_assembled.value)
    cache = SpectrumCache(config.cache_directory(), config.caps.dense, debug)
    bundle = cache.spectrum(operator, renormalized)
    return OutputWriter(config.output).write_csv(
        f"spectrum_M{level}_n{config.depth}_{boundary.value}.csv", ["k", "mu_k"], spectrum_rows(bundle)
    )


def ids_table(config: RunConfig, debug: bool = False) -> Path:
    """Run the gated ensemble and write its counting functions."""
    spec = config.fractal_spec()
    debugger.debug(debug, debugger.Debug.spec_built.value)
    gates = evaluate_gates(config, spec, debug)
    require_gates(gates)
    cache = SpectrumCache(config.cache_directory(), config.caps.dense, debug)
    ensemble = run_ensemble(config, spec, cache, debug)
    writer = OutputWriter(config.output)
    write_ensemble(writer, config, ensemble)
    debugger.debug(debug, debugger.Debug.outputs_written.value)
    return config.output / "ids.csv"


def lifschitz_report(config: RunConfig, debug: bool = False) -> Dict[str, Any]:
    """Run the gated ensemble, fit the tail and write the ratios and the verdict."""
    spec = config.fractal_spec()
    debugger.debug(debug, debugger.Debug.spec_built.value)
    gates = evaluate_gates(config, spec, debug)
    require_gates(gates)
    cache = SpectrumCache(config.cache_directory(), config.caps.dense, debug)
    ensemble = run_ensemble(config, spec, cache, debug)
    analysis = analyze(config, spec, gates, ensemble, cache)
    verdict = write_lifschitz(OutputWriter(config.output), analysis)
    debugger.debug(debug, debugger.Debug.outputs_written.value)
    return verdict


def mc_check(config: RunConfig, debug: bool = False) -> List[Dict[str, Any]]:
    """Compare Monte Carlo traces with spectral traces with and without disorder."""
    spec = config.fractal_spec()
    walk = config.monte_carlo.to_walk(config.depth, config.seed)
    phi = config.phi.to_function()
    lattice, fold = folded_setup(spec, walk.level, walk.depth, config.caps.size)
    measure = build_measure(lattice, walk.level)
    operator = build_laplacian(
        lattice, measure, walk.boundary, fold if walk.boundary == Boundary.neumann else None
    )
    cache = SpectrumCache(config.cache_directory(), config.caps.dense, debug)
    spectrum = cache(operator)
    sampler = simulate_walk(walk, lattice, fold)
    profile = profile_from_spec(config.profile.to_profile(), spec)
    sample = sample_disorder(config.law.to_law(), lattice, config.seed, 0)
    rows = []
    for case in ("free", "disordered"):
        walk_potential = spectral_potential = None
        if case == "disordered":
            walk_potential = potential_on(profile, sample, sampler.domain, PotentialMode.periodized, fold)
            spectral_potential = potential_on(
                profile, sample, spectrum.support, PotentialMode.periodized, fold
            )
        estimate = estimate_trace(walk, sampler, phi, walk_potential, spectrum, mode=case)
        target = spectral_trace(spectrum, phi, walk.horizon, spec.num_maps, spectral_potential)
        rows.append(
            {
                "case": case,
                "boundary": walk.boundary.value,
                "M": walk.level,
                "t": walk.horizon,
                "mc_mean": estimate.mean,
                "mc_stderr": estimate.stderr,
                "spectral_value": target,
                "z_score": estimate.z_score(target),
            }
        )
    debugger.debug(debug, debugger.Debug.walks_finished.value)
    OutputWriter(config.output).write_json("mc_check.json", rows)
    return rows
