"""Utility functions for the fractalids package."""

import hashlib
import json
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import convert
from .exceptions import FractalIdsError, GateFailure


def determine_return_code(error: Optional[BaseException]) -> int:
    """Determine the exit code for the fractal-ids command by its outcome."""
    return_code = 0
    # gates failing is different from a run that could not start
    if isinstance(error, GateFailure):
        return_code = 2
    elif isinstance(error, FractalIdsError):
        return_code = 1
    return return_code


def make_generator(seed: int, *stream: int) -> np.random.Generator:
    """Create a counter-based generator for one keyed stream of a seed."""
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(stream))
    return np.random.Generator(np.random.Philox(sequence))


def canonical_json(data: Any) -> str:
    """Serialize data with sorted keys and no optional whitespace."""
    return json.dumps(
        convert.to_serializable(data), sort_keys=True, separators=(",", ":")
    )


def hash_data(data: Any) -> str:
    """Compute the sha256 digest of the canonical serialization of data."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def hash_file(path: Path) -> str:
    """Compute the sha256 digest of a file's contents."""
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()
