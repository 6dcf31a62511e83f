"""Test cases for the util.py file."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fractalids.exceptions import ConfigError, GateFailure, SizeLimit
from fractalids.util import (
    canonical_json,
    determine_return_code,
    hash_data,
    hash_file,
    make_generator,
)


def test_determine_return_code_success():
    """Confirm a zero exit code when nothing failed."""
    assert determine_return_code(None) == 0


def test_determine_return_code_gate_failure():
    """Confirm that a failed assumption exits with two."""
    assert determine_return_code(GateFailure("B")) == 2  # noqa: PLR2004


def test_determine_return_code_package_errors():
    """Confirm that other package errors exit with one."""
    assert determine_return_code(ConfigError("bad")) == 1
    assert determine_return_code(SizeLimit("big")) == 1


def test_determine_return_code_foreign_error():
    """Confirm that errors from outside the package do not set the code."""
    assert determine_return_code(KeyError("x")) == 0


def test_make_generator_is_reproducible():
    """Confirm that a seed and a stream always give the same draws."""
    first = make_generator(7, 3, 11).random(5)
    second = make_generator(7, 3, 11).random(5)
    assert np.array_equal(first, second)


def test_make_generator_streams_differ():
    """Confirm that neighboring streams are not the same."""
    first = make_generator(7, 3, 11).random(5)
    second = make_generator(7, 3, 12).random(5)
    assert not np.array_equal(first, second)


def test_canonical_json_sorts_keys():
    """Confirm the canonical form ignores insertion order."""
    assert canonical_json({"b": 1, "a": [1.5, 2]}) == '{"a":[1.5,2],"b":1}'
    assert hash_data({"b": 1, "a": 2}) == hash_data({"a": 2, "b": 1})


@pytest.mark.fuzz
@given(st.dictionaries(st.text(max_size=5), st.integers(), max_size=5))
def test_hash_data_is_deterministic(data):
    """Confirm that hashing twice gives the same digest."""
    assert hash_data(data) == hash_data(dict(data))
    assert len(hash_data(data)) == 64  # noqa: PLR2004


def test_hash_file(tmp_path):
    """Confirm that a file hash follows its content."""
    path = tmp_path / "data.txt"
    path.write_text("alpha", encoding="utf-8")
    digest = hash_file(path)
    path.write_text("beta", encoding="utf-8")
    assert hash_file(path) != digest
