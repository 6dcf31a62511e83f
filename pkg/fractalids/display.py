"""Display results from running the fractal-ids tool."""

from typing import Any, Dict, List, Optional, Sequence

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.syntax import Syntax
from rich.table import Table

from . import convert, enumerations

# characters per line of a rendered result table
TABLE_WIDTH = 100


def make_colon_separated_string(arguments: Dict[str, Any]) -> str:
    """Make a colon separated string from a dictionary."""
    return "\n" + "".join(
        [f"- {key}: {value}\n" for key, value in arguments.items()]
    )


def make_table(rows: Sequence[Dict[str, Any]], limit: int = 12) -> Table:
    """Build a rich table from the first rows of a result."""
    table = Table(box=box.SIMPLE_HEAD, show_edge=False)
    columns = list(rows[0].keys()) if rows else []
    for column in columns:
        table.add_column(column, justify="right")
    for row in rows[:limit]:
        table.add_row(*(_render(row.get(column, "")) for column in columns))
    # say how much was left out instead of printing long spectra
    if len(rows) > limit:
        table.caption = f"... {len(rows) - limit} more rows"
    return table


def make_table_string(rows: Sequence[Dict[str, Any]], limit: int = 12) -> str:
    """Render the first rows of a result as text for a panel."""
    if not rows:
        return "\n(no rows)\n"
    console = Console(width=TABLE_WIDTH, color_system=None)
    with console.capture() as capture:
        console.print(make_table(rows, limit))
    return "\n" + capture.get()


def _render(value: Any) -> str:
    """Format one table cell."""
    value = convert.to_serializable(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def get_display_return_code(return_code: int, fancy: bool) -> str:
    """Describe the outcome of a command from its return code."""
    message = "\n"
    # the command finished and every gate passed
    if return_code == 0:
        message += "[green]✔ All checks passed."
    # an assumption gate failed before any ensemble ran
    elif return_code == 2:  # noqa: PLR2004
        message += "[red]✘ An assumption gate failed."
    # the configuration or the computation could not proceed
    else:
        message += "[red]✘ The run could not be completed."
    if fancy:
        message += "\n"
    return message


def display_tldr(console: Console) -> None:
    """Display a list of example commands and their descriptions."""
    console.print(
        "[bold yellow]Too Lazy; Didn't Read: Example Commands[/bold yellow]\n"
    )
    commands = {
        "run": {
            "command": "fractal-ids run --preset gasket-smoke --output results",
            "description": "Check the assumptions, run the ensemble and write every output with a manifest.",
        },
        "glp-check": {
            "command": "fractal-ids glp-check --preset gasket --level 1",
            "description": "Search for a good labeling of order M and export the rotation table.",
        },
        "spectrum": {
            "command": "fractal-ids spectrum --preset gasket --level 0 --depth 1 --boundary dirichlet",
            "description": "Write the eigenvalues of one discrete Laplacian as a CSV of (k, mu_k).",
        },
        "ids": {
            "command": "fractal-ids ids --config run.toml",
            "description": "Write the ensemble counting functions and Laplace transforms.",
        },
        "lifschitz": {
            "command": "fractal-ids lifschitz --config run.toml",
            "description": "Fit the normalized tail ratios and report a verdict.",
        },
        "mc-check": {
            "command": "fractal-ids mc-check --preset gasket-smoke --paths 10000",
            "description": "Compare Monte Carlo traces with spectral traces.",
        },
        "report": {
            "command": "fractal-ids run --preset gasket-smoke --report all",
            "description": "Display the chosen report types, or 'all' of them.",
        },
        "debug": {
            "command": "fractal-ids run --preset gasket-smoke --debug/--no-debug",
            "description": "Collect a message at every stage of the pipeline.",
        },
        "fancy": {
            "command": "fractal-ids run --preset gasket-smoke --fancy/--no-fancy",
            "description": "Toggle panels. Disable for plain-text environments.",
        },
    }
    # display the TLDR information for each of the commands, ensuring
    # that the final display of the TLDR summary does not display a newline
    command_items = list(commands.items())
    for i, (command_name, command_info) in enumerate(command_items):
        console.print(f"[bold green]{command_name}[/bold green]")
        console.print(
            f"[bold white]Command:[/bold white] [bold cyan]{command_info['command']}[/bold cyan]"
        )
        console.print(
            f"[bold white]Description:[/bold white] {command_info['description']}"
        )
        if i < len(command_items) - 1:
            console.print()
    console.print(
        "\n[bold yellow]help:[/bold yellow] Use [bold yellow]--help[/bold yellow] to see more options."
    )


def display_content(  # noqa: PLR0913
    console: Console,
    display_report_type: enumerations.ReportType,
    report_types: Optional[List[enumerations.ReportType]],
    content: str,
    label: str,
    richtext: bool,
    syntax: bool,
    syntax_theme: str = "ansi_dark",
    syntax_language: str = "json",
    newline: bool = False,
) -> None:
    """Display a diagnostic message using rich or plain text."""
    if report_types is not None and (
        display_report_type in report_types
        or enumerations.ReportType.all in report_types
    ):
        # rich text was chosen and thus the message
        # should appear in a panel with a title
        if richtext:
            if newline:
                console.print()
            # json reports are highlighted inside the panel
            if syntax:
                console.print(
                    Panel(
                        Syntax("\n" + content, syntax_language, theme=syntax_theme),
                        expand=False,
                        title=label,
                    )
                )
            else:
                console.print(
                    Panel(
                        content,
                        expand=False,
                        title=label,
                        highlight=True,
                    )
                )
        # plain text was chosen but the content is
        # structured and thus keeps its highlighting
        elif syntax:
            console.print(f"{label}")
            console.print(Syntax("\n" + content, syntax_language, theme=syntax_theme))
        # plain text without panels or highlighting
        else:
            console.print(f"{label}\n{content}")
