"""Utility functions to record and produce debugging logs."""

from enum import Enum
from typing import List

# list of debugging messages
messages: List[str] = []


class Debug(str, Enum):
    """An enumeration of the various debugging messages."""

    parameter_check_passed = (
        "[green]✔ Validity check passed for the run configuration."
    )
    spec_built = "[green]✔ Built the fractal and verified its axioms."
    lattice_enumerated = "[green]✔ Enumerated the vertex lattice."
    labeling_found = "[green]✔ Found a good labeling and folding map."
    operator_assembled = "[green]✔ Assembled the discrete Laplacian."
    spectrum_computed = "[green]✔ Computed and cached a spectrum."
    spectrum_reused = "[green]✔ Reused a cached spectrum."
    gates_passed = "[green]✔ All assumption gates passed."
    ensemble_finished = "[green]✔ Finished the disorder ensemble."
    walks_finished = "[green]✔ Finished the Monte Carlo walks."
    outputs_written = "[green]✔ Wrote the outputs and the manifest."
    run_reused = "[green]✔ Reused the outputs of an identical earlier run."


def debug(allow: bool, message: str) -> None:
    """Record a debugging message."""
    if allow:
        messages.append(message)


def has_debugging_messages() -> bool:
    """Determine if there are debugging messages."""
    return len(messages) > 0


def get_debugging_messages() -> str:
    """Retrieve a formatted version of the debugging messages."""
    # there are debugging messages; create a single
    # string with newlines at the start and the end
    # of the block of debugging messages
    if messages:
        all_messages = "\n" + "\n".join(messages)
        return all_messages + "\n"
    # there are no debugging messages and thus
    # this function must return an empty string
    return ""


def clear_debugging_messages() -> None:
    """Forget the messages recorded by an earlier command."""
    messages.clear()
