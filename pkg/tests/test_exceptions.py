"""Test Suite for Exceptions Module."""

from unittest.mock import patch

import pytest
from rich.console import Console

from fractalids.exceptions import (
    AxiomViolation,
    ConfigError,
    ConvergenceFailure,
    DomainError,
    FractalIdsError,
    GateFailure,
    ViolatesB,
    explain_exception,
    explanations,
)

# Create a console object for testing
console = Console()


def test_every_exception_has_an_explanation():
    """Confirm that each subclass of the root error is explained."""
    names = {cls.__name__ for cls in FractalIdsError.__subclasses__()}
    assert names <= set(explanations)


def test_exception_fields():
    """Confirm that the structured exceptions keep their fields."""
    assert AxiomViolation("open-set", "overlap").name == "open-set"
    assert ConvergenceFailure(1e-3, 1e-9).residual == 1e-3  # noqa: PLR2004
    assert GateFailure("W", {"W1": False}).assumption == "W"
    assert ViolatesB("slope").detail == "slope"


def test_domain_error_is_a_value_error():
    """Confirm that evaluation errors can be caught as ValueError."""
    with pytest.raises(ValueError):
        raise DomainError("negative")


def test_explain_known_exception():
    """Test that a package error is printed with its explanation."""
    try:
        raise ConfigError("samples: must be at least 2")
    except ConfigError:
        with patch("rich.console.Console.print") as mock_print:
            explain_exception(console)
            mock_print.assert_any_call(
                "[bold red]Exception Type: ConfigError[/bold red]"
            )
            mock_print.assert_any_call(f"Explanation: {explanations['ConfigError']}")
            mock_print.assert_any_call("Error Message: samples: must be at least 2")


def test_explain_unknown_exception():
    """Test that a foreign error falls back to its message."""
    with patch(
        "sys.exc_info",
        return_value=(
            type("MysteryError", (Exception,), {}),
            Exception("something odd"),
            None,
        ),
    ):
        with patch("rich.console.Console.print") as mock_print:
            explain_exception(console)
            assert mock_print.call_count == 2  # noqa: PLR2004
            mock_print.assert_any_call("Error Message: something odd")


def test_explain_without_exception():
    """Test that nothing is printed outside of an exception handler."""
    with patch("sys.exc_info", return_value=(None, None, None)):
        with patch("rich.console.Console.print") as mock_print:
            explain_exception(console)
            mock_print.assert_not_called()
