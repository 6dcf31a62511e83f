"""Define, validate and load the configuration of a fractal-ids run."""

import copy
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import toml
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from . import util
from .enumerations import (
    Boundary,
    LawKind,
    PhiKind,
    PotentialMode,
    ProfileKind,
    TimeChange,
)
from .exceptions import ConfigError
from .geometry import DEFAULT_SIZE_CAP, FractalSpec, build_spec, preset_spec
from .ids import EnsembleSettings
from .laplacian import DENSE_CAP
from .oracle import WalkConfig
from .potential import DisorderLaw, SingleSiteProfile
from .subordination import BernsteinFunction

# environment variable that moves the spectrum cache
CACHE_VARIABLE = "FRACTALIDS_CACHE"

# fractals that ship with the package
FRACTALS = ("gasket", "vicsek", "segment")

# keys that change where results go but never what they are
PLACEMENT_KEYS = ("output", "cache", "workers")

Matrix = Tuple[Tuple[float, float], Tuple[float, float]]


class PhiConfig(BaseModel):
    """The Bernstein function that subordinates the walk."""

    model_config = ConfigDict(extra="forbid")

    kind: PhiKind = PhiKind.identity
    exponent: float = 1.0
    mass: float = 1.0
    rate: float = 1.0
    table: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="after")
    def check_parameters(self) -> "PhiConfig":
        """Reject parameters outside the range of the chosen kind."""
        self.to_function()
        return self

    def to_function(self) -> BernsteinFunction:
        """Build the Bernstein function this section describes."""
        try:
            return BernsteinFunction(
                kind=self.kind,
                exponent=self.exponent,
                mass=self.mass,
                rate=self.rate,
                table=tuple(self.table) if self.table else None,
            )
        except ConfigError as error:
            raise ValueError(str(error)) from error


class ProfileConfig(BaseModel):
    """The single-site profile of the alloy potential."""

    model_config = ConfigDict(extra="forbid")

    kind: ProfileKind = ProfileKind.finite_range
    decay: float = 2.0
    table: Optional[List[float]] = None
    zero_at_vertices: bool = False
    base: float = 4.0
    amplitude: float = 1.0
    range_level: int = 1
    floor: Optional[float] = Field(None, gt=0)
    floor_level: int = -1

    @model_validator(mode="after")
    def check_parameters(self) -> "ProfileConfig":
        """Reject parameters outside the range of the chosen kind."""
        self.to_profile()
        return self

    def to_profile(self) -> SingleSiteProfile:
        """Build the profile this section describes."""
        try:
            return SingleSiteProfile(
                kind=self.kind,
                decay=self.decay,
                table=tuple(self.table) if self.table else None,
                zero_at_vertices=self.zero_at_vertices,
                base=self.base,
                amplitude=self.amplitude,
                range_level=self.range_level,
                floor=self.floor,
                floor_level=self.floor_level,
            )
        except ConfigError as error:
            raise ValueError(str(error)) from error


class LawConfig(BaseModel):
    """The distribution of the site couplings."""

    model_config = ConfigDict(extra="forbid")

    kind: LawKind = LawKind.bernoulli
    atom: float = 0.5
    value: float = 1.0
    upper: float = 1.0
    rate: float = 1.0
    table: Optional[List[Tuple[float, float]]] = None
    lambda_0: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def check_parameters(self) -> "LawConfig":
        """Reject parameters outside the range of the chosen kind."""
        self.to_law()
        return self

    def to_law(self) -> DisorderLaw:
        """Build the law this section describes."""
        try:
            return DisorderLaw(
                kind=self.kind,
                atom=self.atom,
                value=self.value,
                upper=self.upper,
                rate=self.rate,
                table=tuple(self.table) if self.table else None,
            )
        except ConfigError as error:
            raise ValueError(str(error)) from error


class MonteCarloConfig(BaseModel):
    """The walks that cross-check the spectral traces."""

    model_config = ConfigDict(extra="forbid")

    level: int = Field(1, ge=0)
    horizon: float = Field(1.0, gt=0)
    paths: int = Field(10_000, ge=100)
    batches: int = Field(20, ge=20)
    seed: Optional[int] = Field(None, ge=0)
    time_change: TimeChange = TimeChange.none
    alpha_exp: float = 0.5
    time_steps: int = Field(64, ge=1)
    boundary: Boundary = Boundary.neumann

    @model_validator(mode="after")
    def check_clock(self) -> "MonteCarloConfig":
        """The stable clock needs an exponent strictly inside (0, 1)."""
        if self.time_change == TimeChange.stable and not 0 < self.alpha_exp < 1:
            raise ValueError(f"the stable exponent {self.alpha_exp} is not in (0, 1)")
        return self

    def to_walk(self, depth: int, seed: int) -> WalkConfig:
        """Build the walk configuration at a depth, seeded by the run unless overridden."""
        return WalkConfig(
            level=self.level,
            depth=depth,
            horizon=self.horizon,
            paths=self.paths,
            seed=seed if self.seed is None else self.seed,
            time_change=self.time_change,
            alpha_exp=self.alpha_exp,
            boundary=self.boundary,
            batches=self.batches,
            time_steps=self.time_steps,
        )


class CapsConfig(BaseModel):
    """Limits on lattice sizes and on dense eigenproblems."""

    model_config = ConfigDict(extra="forbid")

    size: int = Field(DEFAULT_SIZE_CAP, gt=0)
    dense: int = Field(DENSE_CAP, gt=0)


class GateConfig(BaseModel):
    """Grids on which the assumptions are verified before a run."""

    model_config = ConfigDict(extra="forbid")

    phi_lambda_0: float = Field(1.0, gt=0)
    w_max_level: int = Field(3, ge=1)
    w_depth: int = Field(1, ge=0)


class RunConfig(BaseModel):
    """One reproducible experiment: the fractal, the operators, the disorder and the grids."""

    model_config = ConfigDict(extra="forbid")

    fractal: str = "gasket"
    similitudes: Optional[List[Tuple[float, Matrix, Tuple[float, float]]]] = None
    tau: Optional[float] = Field(None, gt=1)
    levels: List[int] = Field(default_factory=lambda: [1])
    depth: int = Field(3, ge=0)
    phi: PhiConfig = Field(default_factory=PhiConfig)
    profile: ProfileConfig = Field(default_factory=ProfileConfig)
    law: LawConfig = Field(default_factory=LawConfig)
    samples: int = Field(8, ge=2)
    seed: int = Field(0, ge=0)
    t_grid: List[float] = Field(
        default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
    )
    lambda_grid: List[float] = Field(
        default_factory=lambda: [0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 5.0]
    )
    boundaries: List[Boundary] = Field(
        default_factory=lambda: [Boundary.dirichlet, Boundary.neumann]
    )
    modes: List[PotentialMode] = Field(
        default_factory=lambda: [PotentialMode.periodized]
    )
    temple_samples: int = Field(10, ge=0)
    workers: int = Field(1, ge=1)
    output: Path = Path("fractal-ids-output")
    cache: Optional[Path] = None
    monte_carlo: MonteCarloConfig = Field(default_factory=MonteCarloConfig)
    caps: CapsConfig = Field(default_factory=CapsConfig)
    gates: GateConfig = Field(default_factory=GateConfig)

    @field_validator("levels")
    @classmethod
    def check_levels(cls, levels: List[int]) -> List[int]:
        """Levels are nonnegative and strictly increasing."""
        if not levels:
            raise ValueError("at least one level M is needed")
        if levels[0] < 0 or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"levels must be nonnegative and strictly increasing, got {levels}")
        return levels

    @field_validator("t_grid", "lambda_grid")
    @classmethod
    def check_grid(cls, grid: List[float]) -> List[float]:
        """Grids are positive and strictly increasing."""
        if not grid:
            raise ValueError("a grid needs at least one point")
        if grid[0] <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError(f"grids must be positive and strictly increasing, got {grid}")
        return grid

    @field_validator("boundaries", "modes")
    @classmethod
    def check_distinct(cls, values: List[Any]) -> List[Any]:
        """Selections are nonempty and free of repeats."""
        if not values or len(set(values)) != len(values):
            raise ValueError("selections must be nonempty and distinct")
        return values

    @model_validator(mode="after")
    def check_fractal(self) -> "RunConfig":
        """A named fractal must be shipped unless similitudes are given."""
        if self.similitudes is None and self.fractal not in FRACTALS:
            raise ValueError(f"unknown fractal {self.fractal!r}; choose one of {', '.join(FRACTALS)}")
        return self

    def fractal_spec(self) -> FractalSpec:
        """Build and verify the fractal of this run."""
        if self.similitudes is not None:
            return build_spec(self.similitudes, name=self.fractal, tau=self.tau)
        return preset_spec(self.fractal, tau=self.tau)

    def ensemble_settings(self, spec: FractalSpec) -> EnsembleSettings:
        """The ensemble that this run samples."""
        return EnsembleSettings(
            spec=spec,
            levels=tuple(self.levels),
            depth=self.depth,
            phi=self.phi.to_function(),
            profile=self.profile.to_profile(),
            law=self.law.to_law(),
            samples=self.samples,
            seed=self.seed,
            t_grid=tuple(self.t_grid),
            lambda_grid=tuple(self.lambda_grid),
            boundaries=tuple(self.boundaries),
            modes=tuple(self.modes),
            workers=self.workers,
            cap=self.caps.size,
            dense_cap=self.caps.dense,
        )

    def cache_directory(self) -> Path:
        """The spectrum cache: the config value, then the environment, then the output."""
        if self.cache is not None:
            return self.cache
        if os.environ.get(CACHE_VARIABLE):
            return Path(os.environ[CACHE_VARIABLE])
        return self.output / "cache"

    def echo(self) -> Dict[str, Any]:
        """The whole configuration as plain JSON values."""
        return self.model_dump(mode="json")

    def fingerprint(self) -> str:
        """Hash of every key that changes a result."""
        content = self.echo()
        for key in PLACEMENT_KEYS:
            content.pop(key, None)
        return util.hash_data(content)


# named starting points; file values and flags are merged over them
PRESETS: Dict[str, Dict[str, Any]] = {
    "gasket": {
        "fractal": "gasket",
        "levels": [1, 2, 3],
        "depth": 3,
        "samples": 64,
        "temple_samples": 100,
    },
    "gasket-smoke": {
        "fractal": "gasket",
        "levels": [1],
        "depth": 3,
        "samples": 8,
        "temple_samples": 4,
        "monte_carlo": {"paths": 2_000},
    },
    "vicsek": {
        "fractal": "vicsek",
        "levels": [1, 2],
        "depth": 1,
        "samples": 16,
        "gates": {"w_max_level": 2},
    },
}


def merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    """Merge nested dictionaries; values in the update win."""
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def read_config_file(path: Path) -> Dict[str, Any]:
    """Read a TOML or JSON configuration file by its suffix."""
    if not path.is_file():
        raise ConfigError(f"configuration file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".toml":
            return dict(toml.loads(text))
        if path.suffix == ".json":
            loaded = json.loads(text)
            if not isinstance(loaded, dict):
                raise ConfigError(f"{path} must hold a JSON object")
            return loaded
    except (toml.TomlDecodeError, json.JSONDecodeError) as error:
        raise ConfigError(f"cannot parse {path}: {error}") from error
    raise ConfigError(f"{path} is neither .toml nor .json")


def describe_validation(error: ValidationError) -> str:
    """One line per invalid field."""
    return "; ".join(
        f"{'.'.join(str(part) for part in item['loc']) or 'config'}: {item['msg']}"
        for item in error.errors()
    )


def load_config(
    path: Optional[Path] = None,
    preset: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Merge a preset, a file and command-line overrides into a validated config."""
    data: Dict[str, Any] = {}
    from_file = read_config_file(path) if path is not None else {}
    # a preset named on the command line wins over one named in the file
    chosen = preset or from_file.pop("preset", None)
    from_file.pop("preset", None)
    if chosen is not None:
        if chosen not in PRESETS:
            raise ConfigError(f"unknown preset {chosen!r}; choose one of {', '.join(PRESETS)}")
        data = merge(data, PRESETS[chosen])
    data = merge(data, from_file)
    data = merge(
        data, {key: value for key, value in (overrides or {}).items() if value is not None}
    )
    try:
        return RunConfig.model_validate(data)
    except ValidationError as error:
        raise ConfigError(describe_validation(error)) from error
