"""Test cases for the config.py file."""

import json

import pytest

from fractalids.config import (
    CACHE_VARIABLE,
    PRESETS,
    RunConfig,
    load_config,
    merge,
)
from fractalids.enumerations import Boundary, PhiKind, TimeChange
from fractalids.exceptions import AxiomViolation, ConfigError
from fractalids.ids import EnsembleSettings


def test_defaults_validate():
    """Confirm that an empty configuration is a valid run."""
    config = load_config()
    assert config.fractal == "gasket"
    assert config.levels == [1]
    assert config.boundaries == [Boundary.dirichlet, Boundary.neumann]
    assert config.phi.kind == PhiKind.identity


def test_presets():
    """Confirm that every preset loads and the smoke preset stays small."""
    for name in PRESETS:
        assert load_config(preset=name).fractal in ("gasket", "vicsek")
    smoke = load_config(preset="gasket-smoke")
    assert smoke.levels == [1]
    assert smoke.samples == 8  # noqa: PLR2004
    assert smoke.monte_carlo.paths == 2000  # noqa: PLR2004
    assert smoke.monte_carlo.batches == 20  # noqa: PLR2004


def test_unknown_preset():
    """Confirm that an unknown preset raises ConfigError."""
    with pytest.raises(ConfigError):
        load_config(preset="carpet")


def test_overrides_win_and_none_is_skipped():
    """Confirm that flags override presets and unset flags do not."""
    config = load_config(preset="gasket", overrides={"samples": 4, "seed": None})
    assert config.samples == 4  # noqa: PLR2004
    assert config.seed == 0
    assert config.levels == [1, 2, 3]


def test_merge_is_nested():
    """Confirm that nested sections merge key by key."""
    merged = merge({"monte_carlo": {"paths": 10, "batches": 20}}, {"monte_carlo": {"paths": 5}})
    assert merged == {"monte_carlo": {"paths": 5, "batches": 20}}


def test_toml_file(tmp_path):
    """Confirm that a TOML file names its preset and its sections."""
    path = tmp_path / "run.toml"
    path.write_text(
        'preset = "gasket-smoke"\nseed = 9\n\n[phi]\nkind = "stable"\nexponent = 0.5\n',
        encoding="utf-8",
    )
    config = load_config(path)
    assert config.seed == 9  # noqa: PLR2004
    assert config.samples == 8  # noqa: PLR2004
    assert config.phi.to_function().exponent == 0.5  # noqa: PLR2004
    assert load_config(path, preset="gasket").samples == 64  # noqa: PLR2004


def test_json_file(tmp_path):
    """Confirm that a JSON object is read the same way."""
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"levels": [0, 1], "law": {"kind": "uniform"}}), encoding="utf-8")
    config = load_config(path)
    assert config.levels == [0, 1]
    assert config.law.to_law().upper == 1.0


@pytest.mark.parametrize(
    ("name", "content"),
    [
        ("missing.toml", None),
        ("run.yaml", "seed: 1"),
        ("broken.toml", "seed = = 1"),
        ("list.json", "[1, 2]"),
    ],
)
def test_unreadable_files(tmp_path, name, content):
    """Confirm that unreadable files raise ConfigError."""
    path = tmp_path / name
    if content is not None:
        path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


@pytest.mark.parametrize(
    ("overrides", "field"),
    [
        ({"samples": 1}, "samples"),
        ({"levels": [2, 1]}, "levels"),
        ({"t_grid": [-1.0, 1.0]}, "t_grid"),
        ({"phi": {"kind": "stable", "exponent": 0.0}}, "phi"),
        ({"boundaries": ["neumann", "neumann"]}, "boundaries"),
        ({"fractal": "carpet"}, "config"),
        ({"colour": "blue"}, "colour"),
        ({"monte_carlo": {"time_change": "stable", "alpha_exp": 1.0}}, "monte_carlo"),
    ],
)
def test_invalid_values_name_the_field(overrides, field):
    """Confirm that validation errors say which field is wrong."""
    with pytest.raises(ConfigError) as error:
        load_config(overrides=overrides)
    assert field in str(error.value)


def test_fingerprint_ignores_placement(tmp_path):
    """Confirm that output, cache and workers do not change the fingerprint."""
    base = load_config(preset="gasket-smoke")
    moved = load_config(
        preset="gasket-smoke",
        overrides={"output": str(tmp_path), "workers": 4, "cache": str(tmp_path / "c")},
    )
    reseeded = load_config(preset="gasket-smoke", overrides={"seed": 1})
    assert base.fingerprint() == moved.fingerprint()
    assert base.fingerprint() != reseeded.fingerprint()


def test_cache_directory(tmp_path, monkeypatch):
    """Confirm the order config value, environment, output."""
    monkeypatch.delenv(CACHE_VARIABLE, raising=False)
    config = RunConfig(output=tmp_path / "out")
    assert config.cache_directory() == tmp_path / "out" / "cache"
    monkeypatch.setenv(CACHE_VARIABLE, str(tmp_path / "env"))
    assert config.cache_directory() == tmp_path / "env"
    explicit = RunConfig(output=tmp_path / "out", cache=tmp_path / "mine")
    assert explicit.cache_directory() == tmp_path / "mine"


def test_fractal_spec():
    """Confirm that the named fractal is built and verified."""
    assert load_config(preset="vicsek").fractal_spec().num_maps == 5  # noqa: PLR2004
    assert load_config(overrides={"tau": 4.5}).fractal_spec().tau_source == "config"
    with pytest.raises(AxiomViolation):
        load_config(overrides={"fractal": "segment"}).fractal_spec()


def test_custom_similitudes():
    """Confirm that explicit similitudes build a fractal under their own name."""
    identity = ((1.0, 0.0), (0.0, 1.0))
    similitudes = [
        (0.5, identity, (0.0, 0.0)),
        (0.5, identity, (0.5, 0.0)),
        (0.5, identity, (0.25, 3**0.5 / 4)),
    ]
    config = load_config(overrides={"fractal": "triangle", "similitudes": similitudes})
    spec = config.fractal_spec()
    assert spec.name == "triangle"
    assert spec.tau_source == "network-reduction"
    assert spec.time_scale == pytest.approx(5.0)


def test_ensemble_settings():
    """Confirm that a config turns into ensemble settings."""
    config = load_config(preset="gasket-smoke")
    settings = config.ensemble_settings(config.fractal_spec())
    assert isinstance(settings, EnsembleSettings)
    assert settings.levels == (1,)
    assert settings.samples == 8  # noqa: PLR2004
    assert settings.boundaries == (Boundary.dirichlet, Boundary.neumann)


def test_walk_from_monte_carlo_section():
    """Confirm that the run seed is used unless the section sets its own."""
    config = load_config(overrides={"seed": 3})
    walk = config.monte_carlo.to_walk(depth=2, seed=config.seed)
    assert walk.seed == 3  # noqa: PLR2004
    assert walk.depth == 2  # noqa: PLR2004
    assert walk.time_change == TimeChange.none
    seeded = load_config(overrides={"monte_carlo": {"seed": 7}})
    assert seeded.monte_carlo.to_walk(depth=1, seed=0).seed == 7  # noqa: PLR2004
