"""Run fractal IDS experiments from the command line."""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer
from rich.console import Console
from typing_extensions import Annotated

from . import convert, display, enumerations, harness, util
from . import debug as debugger
from .config import RunConfig, load_config
from .exceptions import FractalIdsError, explain_exception

# create a Typer object to support the command-line interface
cli = typer.Typer(no_args_is_help=True)

# create a default console
console = Console()


def tldr_callback(value: bool) -> None:
    """Display a list of example commands and their descriptions."""
    if value:
        display.display_tldr(console)
        raise typer.Exit()


def to_json(data: Any) -> str:
    """Serialize a result for display."""
    return json.dumps(convert.to_serializable(data), indent=2, sort_keys=True)


def shown_reports(
    report: Optional[List[enumerations.ReportType]],
    primary: enumerations.ReportType,
) -> List[enumerations.ReportType]:
    """The requested reports, or the command's own result and its status."""
    if report:
        return list(report)
    return [primary, enumerations.ReportType.exitcode]


def make_overrides(**values: Any) -> Dict[str, Any]:
    """Turn the flags that were given into configuration keys."""
    overrides = {
        key: value
        for key, value in values.items()
        if value is not None and not (isinstance(value, (list, tuple, dict)) and not value)
    }
    return overrides


def display_setup(
    args: Dict[str, Any],
    report: List[enumerations.ReportType],
    fancy: bool,
    syntax_theme: str,
) -> None:
    """Display the parameters that the command received."""
    # --> SETUP
    display.display_content(
        console,
        enumerations.ReportType.setup,
        report,
        display.make_colon_separated_string(args),
        "Parameter Information",
        fancy,
        False,
        syntax_theme,
        "json",
        True,
    )


def finish(
    error: Optional[BaseException],
    report: List[enumerations.ReportType],
    fancy: bool,
    syntax_theme: str,
) -> None:
    """Show the debugging messages and the status, then exit with the return code."""
    return_code = util.determine_return_code(error)
    # display the debugging messages
    if debugger.has_debugging_messages():
        display.display_content(
            console,
            enumerations.ReportType.debug,
            report,
            debugger.get_debugging_messages(),
            "Debugging Information",
            fancy,
            False,
            syntax_theme,
            "json",
            True,
        )
    # display a final message about the return code, using
    # a human-readable message that indicates the overall status
    display.display_content(
        console,
        enumerations.ReportType.exitcode,
        report,
        display.get_display_return_code(return_code, fancy),
        "Overall Status",
        fancy,
        False,
        syntax_theme,
        "json",
        True,
    )
    raise typer.Exit(code=return_code)


def prepare(
    config: Optional[Path],
    preset: Optional[str],
    overrides: Dict[str, Any],
    debug: bool,
) -> RunConfig:
    """Load the configuration and record that it passed validation."""
    debugger.clear_debugging_messages()
    run_config = load_config(config, preset, overrides)
    debugger.debug(debug, debugger.Debug.parameter_check_passed.value)
    return run_config


@cli.command()
def run(  # noqa: PLR0913
    config: Optional[Path] = typer.Option(None, help="TOML or JSON run configuration"),
    preset: Optional[str] = typer.Option(None, help="Preset: gasket, gasket-smoke or vicsek"),
    output: Optional[Path] = typer.Option(None, help="Directory for outputs and the manifest"),
    cache: Optional[Path] = typer.Option(None, help="Spectrum cache directory"),
    level: Optional[List[int]] = typer.Option(None, help="Levels M of the ensemble"),
    depth: Optional[int] = typer.Option(None, help="Depth n of the lattices"),
    samples: Optional[int] = typer.Option(None, help="Disorder samples per level"),
    seed: Optional[int] = typer.Option(None, help="Seed of the disorder streams"),
    workers: Optional[int] = typer.Option(None, help="Threads for the ensemble"),
    tldr: Annotated[
        Optional[bool],
        typer.Option(
            "--tldr",
            callback=tldr_callback,
            help="Display summary of commands",
        ),
    ] = False,
    report: Optional[List[enumerations.ReportType]] = typer.Option(
        None,
        help="Types of reports to generate",
    ),
    debug: bool = typer.Option(False, help="Collect debugging information"),
    fancy: bool = typer.Option(True, help="Display fancy output"),
    syntax_theme: enumerations.Theme = typer.Option(
        enumerations.Theme.ansi_dark, help="Syntax highlighting theme"
    ),
) -> None:
    """Check the assumptions, run the ensemble and write every output with a manifest."""
    # extract the local parameters before anything else is defined
    args = locals()
    reports = shown_reports(report, enumerations.ReportType.manifest)
    display_setup(args, reports, fancy, syntax_theme.value)
    error: Optional[BaseException] = None
    try:
        run_config = prepare(
            config,
            preset,
            make_overrides(
                output=output, cache=cache, levels=level, depth=depth,
                samples=samples, seed=seed, workers=workers,
            ),
            debug,
        )
        outcome = harness.run(run_config, debug)
        # --> GATES
        if outcome.gates is not None:
            display.display_content(
                console,
                enumerations.ReportType.gates,
                reports,
                to_json(outcome.gates.as_flags()),
                "Assumption Gates",
                fancy,
                True,
                syntax_theme.value,
                "json",
                True,
            )
        # --> LIFSCHITZ
        display.display_content(
            console,
            enumerations.ReportType.lifschitz,
            reports,
            to_json(outcome.verdict),
            "Lifschitz Verdict",
            fancy,
            True,
            syntax_theme.value,
            "json",
            True,
        )
        # --> MANIFEST
        summary = {
            "directory": convert.path_to_string(outcome.directory),
            "fingerprint": outcome.fingerprint,
            "reused": outcome.reused,
            "files": sorted(outcome.files),
            "cache": {"hits": outcome.cache_hits, "misses": outcome.cache_misses},
        }
        display.display_content(
            console,
            enumerations.ReportType.manifest,
            reports,
            to_json(summary),
            "Run Manifest",
            fancy,
            True,
            syntax_theme.value,
            "json",
            True,
        )
    except FractalIdsError as caught:
        error = caught
        explain_exception(console)
    finish(error, reports, fancy, syntax_theme.value)


@cli.command(name="glp-check")
def glp_check(  # noqa: PLR0913
    config: Optional[Path] = typer.Option(None, help="TOML or JSON run configuration"),
    preset: Optional[str] = typer.Option(None, help="Preset: gasket, gasket-smoke or vicsek"),
    level: Optional[int] = typer.Option(None, help="Order M of the labeling; default all levels"),
    output: Optional[Path] = typer.Option(None, help="Directory for the rotation tables"),
    export: bool = typer.Option(False, help="Write the rotation tables as CSV"),
    report: Optional[List[enumerations.ReportType]] = typer.Option(
        None,
        help="Types of reports to generate",
    ),
    debug: bool = typer.Option(False, help="Collect debugging information"),
    fancy: bool = typer.Option(True, help="Display fancy output"),
    syntax_theme: enumerations.Theme = typer.Option(
        enumerations.Theme.ansi_dark, help="Syntax highlighting theme"
    ),
) -> None:
    """Search for a good labeling and report it or the junction that breaks it."""
    args = locals()
    reports = shown_reports(report, enumerations.ReportType.gates)
    display_setup(args, reports, fancy, syntax_theme.value)
    error: Optional[BaseException] = None
    try:
        run_config = prepare(config, preset, make_overrides(output=output), debug)
        spec = run_config.fractal_spec()
        debugger.debug(debug, debugger.Debug.spec_built.value)
        orders = run_config.levels if level is None else [level]
        results = {
            str(order): harness.glp_check(
                spec, order, run_config.output if export else None, debug
            )
            for order in orders
        }
        # the full labeling is long; the table holds the rotations
        for result in results.values():
            result.pop("labeling", None)
        display.display_content(
            console,
            enumerations.ReportType.gates,
            reports,
            to_json(results if level is None else results[str(level)]),
            "Good Labeling",
            fancy,
            True,
            syntax_theme.value,
            "json",
            True,
        )
    except FractalIdsError as caught:
        error = caught
        explain_exception(console)
    finish(error, reports, fancy, syntax_theme.value)


@cli.command()
def spectrum(  # noqa: PLR0913
    config: Optional[Path] = typer.Option(None, help="TOML or JSON run configuration"),
    preset: Optional[str] = typer.Option(None, help="Preset: gasket, gasket-smoke or vicsek"),
    level: int = typer.Option(0, "--level", "--M", help="Level M of the complex"),
    depth: Optional[int] = typer.Option(None, "--depth", "--n", help="Depth n of the lattice"),
    boundary: enumerations.Boundary = typer.Option(
        enumerations.Boundary.neumann, help="Boundary condition"
    ),
    renormalized: bool = typer.Option(
        False, "--renormalized/--raw", help="Scale eigenvalues by tau^n"
    ),
    output: Optional[Path] = typer.Option(None, help="Directory for the CSV"),
    cache: Optional[Path] = typer.Option(None, help="Spectrum cache directory"),
    report: Optional[List[enumerations.ReportType]] = typer.Option(
        None,
        help="Types of reports to generate",
    ),
    debug: bool = typer.Option(False, help="Collect debugging information"),
    fancy: bool = typer.Option(True, help="Display fancy output"),
    syntax_theme: enumerations.Theme = typer.Option(
        enumerations.Theme.ansi_dark, help="Syntax highlighting theme"
    ),
) -> None:
    """Write the eigenvalues of one discrete Laplacian as (k, mu_k)."""
    args = locals()
    reports = shown_reports(report, enumerations.ReportType.spectrum)
    display_setup(args, reports, fancy, syntax_theme.value)
    error: Optional[BaseException] = None
    try:
        run_config = prepare(
            config, preset, make_overrides(output=output, cache=cache, depth=depth), debug
        )
        spec = run_config.fractal_spec()
        debugger.debug(debug, debugger.Debug.spec_built.value)
        path = harness.spectrum_table(run_config, spec, level, boundary, renormalized, debug)
        rows = harness.read_rows(path)
        display.display_content(
            console,
            enumerations.ReportType.spectrum,
            reports,
            f"\n{convert.path_to_string(path)}" + display.make_table_string(rows),
            "Spectrum",
            fancy,
            False,
            syntax_theme.value,
            "json",
            True,
        )
    except FractalIdsError as caught:
        error = caught
        explain_exception(console)
    finish(error, reports, fancy, syntax_theme.value)


@cli.command()
def ids(  # noqa: PLR0913
    config: Optional[Path] = typer.Option(None, help="TOML or JSON run configuration"),
    preset: Optional[str] = typer.Option(None, help="Preset: gasket, gasket-smoke or vicsek"),
    output: Optional[Path] = typer.Option(None, help="Directory for the CSV files"),
    cache: Optional[Path] = typer.Option(None, help="Spectrum cache directory"),
    level: Optional[List[int]] = typer.Option(None, help="Levels M of the ensemble"),
    depth: Optional[int] = typer.Option(None, help="Depth n of the lattices"),
    samples: Optional[int] = typer.Option(None, help="Disorder samples per level"),
    seed: Optional[int] = typer.Option(None, help="Seed of the disorder streams"),
    workers: Optional[int] = typer.Option(None, help="Threads for the ensemble"),
    report: Optional[List[enumerations.ReportType]] = typer.Option(
        None,
        help="Types of reports to generate",
    ),
    debug: bool = typer.Option(False, help="Collect debugging information"),
    fancy: bool = typer.Option(True, help="Display fancy output"),
    syntax_theme: enumerations.Theme = typer.Option(
        enumerations.Theme.ansi_dark, help="Syntax highlighting theme"
    ),
) -> None:
    """Write the ensemble counting functions and Laplace transforms."""
    args = locals()
    reports = shown_reports(report, enumerations.ReportType.ids)
    display_setup(args, reports, fancy, syntax_theme.value)
    error: Optional[BaseException] = None
    try:
        run_config = prepare(
            config,
            preset,
            make_overrides(
                output=output, cache=cache, levels=level, depth=depth,
                samples=samples, seed=seed, workers=workers,
            ),
            debug,
        )
        path = harness.ids_table(run_config, debug)
        display.display_content(
            console,
            enumerations.ReportType.ids,
            reports,
            f"\n{convert.path_to_string(path)}"
            + display.make_table_string(harness.read_rows(path)),
            "Integrated Density of States",
            fancy,
            False,
            syntax_theme.value,
            "json",
            True,
        )
    except FractalIdsError as caught:
        error = caught
        explain_exception(console)
    finish(error, reports, fancy, syntax_theme.value)


@cli.command()
def lifschitz(  # noqa: PLR0913
    config: Optional[Path] = typer.Option(None, help="TOML or JSON run configuration"),
    preset: Optional[str] = typer.Option(None, help="Preset: gasket, gasket-smoke or vicsek"),
    output: Optional[Path] = typer.Option(None, help="Directory for the ratios and the verdict"),
    cache: Optional[Path] = typer.Option(None, help="Spectrum cache directory"),
    level: Optional[List[int]] = typer.Option(None, help="Levels M of the ensemble"),
    depth: Optional[int] = typer.Option(None, help="Depth n of the lattices"),
    samples: Optional[int] = typer.Option(None, help="Disorder samples per level"),
    seed: Optional[int] = typer.Option(None, help="Seed of the disorder streams"),
    report: Optional[List[enumerations.ReportType]] = typer.Option(
        None,
        help="Types of reports to generate",
    ),
    debug: bool = typer.Option(False, help="Collect debugging information"),
    fancy: bool = typer.Option(True, help="Display fancy output"),
    syntax_theme: enumerations.Theme = typer.Option(
        enumerations.Theme.ansi_dark, help="Syntax highlighting theme"
    ),
) -> None:
    """Fit the normalized tail ratios at the largest level and report a verdict."""
    args = locals()
    reports = shown_reports(report, enumerations.ReportType.lifschitz)
    display_setup(args, reports, fancy, syntax_theme.value)
    error: Optional[BaseException] = None
    try:
        run_config = prepare(
            config,
            preset,
            make_overrides(
                output=output, cache=cache, levels=level, depth=depth,
                samples=samples, seed=seed,
            ),
            debug,
        )
        verdict = harness.lifschitz_report(run_config, debug)
        display.display_content(
            console,
            enumerations.ReportType.lifschitz,
            reports,
            to_json(verdict),
            "Lifschitz Verdict",
            fancy,
            True,
            syntax_theme.value,
            "json",
            True,
        )
    except FractalIdsError as caught:
        error = caught
        explain_exception(console)
    finish(error, reports, fancy, syntax_theme.value)


@cli.command(name="mc-check")
def mc_check(  # noqa: PLR0913
    config: Optional[Path] = typer.Option(None, help="TOML or JSON run configuration"),
    preset: Optional[str] = typer.Option(None, help="Preset: gasket, gasket-smoke or vicsek"),
    output: Optional[Path] = typer.Option(None, help="Directory for the JSON result"),
    cache: Optional[Path] = typer.Option(None, help="Spectrum cache directory"),
    depth: Optional[int] = typer.Option(None, help="Depth n of the lattice"),
    seed: Optional[int] = typer.Option(None, help="Seed of the disorder and the walks"),
    walk_level: Optional[int] = typer.Option(None, help="Level M of the walk"),
    paths: Optional[int] = typer.Option(None, help="Number of paths"),
    horizon: Optional[float] = typer.Option(None, help="Time t in level-0 units"),
    boundary: Optional[enumerations.Boundary] = typer.Option(None, help="Boundary condition"),
    time_change: Optional[enumerations.TimeChange] = typer.Option(
        None, help="Clock of the walk"
    ),
    report: Optional[List[enumerations.ReportType]] = typer.Option(
        None,
        help="Types of reports to generate",
    ),
    debug: bool = typer.Option(False, help="Collect debugging information"),
    fancy: bool = typer.Option(True, help="Display fancy output"),
    syntax_theme: enumerations.Theme = typer.Option(
        enumerations.Theme.ansi_dark, help="Syntax highlighting theme"
    ),
) -> None:
    """Compare Monte Carlo traces with spectral traces, without and with disorder."""
    args = locals()
    reports = shown_reports(report, enumerations.ReportType.montecarlo)
    display_setup(args, reports, fancy, syntax_theme.value)
    error: Optional[BaseException] = None
    try:
        walk = {
            key: value
            for key, value in {
                "level": walk_level,
                "paths": paths,
                "horizon": horizon,
                "boundary": boundary,
                "time_change": time_change,
            }.items()
            if value is not None
        }
        run_config = prepare(
            config,
            preset,
            make_overrides(output=output, cache=cache, depth=depth, seed=seed, monte_carlo=walk),
            debug,
        )
        rows = harness.mc_check(run_config, debug)
        display.display_content(
            console,
            enumerations.ReportType.montecarlo,
            reports,
            to_json(rows),
            "Monte Carlo Check",
            fancy,
            True,
            syntax_theme.value,
            "json",
            True,
        )
    except FractalIdsError as caught:
        error = caught
        explain_exception(console)
    finish(error, reports, fancy, syntax_theme.value)
