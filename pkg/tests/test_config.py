import pytest

from ditherlab.config import (
    build_source,
    default_config,
    dump_config,
    load_config_file,
    load_config_text,
)
from ditherlab.errors import ConfigError


def test_defaults_round_trip_through_ini():
    config = default_config()
    text = dump_config(config)
    assert load_config_text(text) == config


def test_non_default_round_trip():
    config = default_config().with_overrides(
        source_kind="discrete-grid",
        source_params={"halfwidth": 1.0, "atoms": [(1.0, 1.0, 0.5), (-1.0, -1.0, 0.5)]},
        distortion1=0.125,
        trials=7,
        stats_mode="oracle",
    )
    assert load_config_text(dump_config(config)) == config


def test_load_config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(dump_config(default_config().with_overrides(seed=99)))
    assert load_config_file(str(path)).seed == 99
    with pytest.raises(ConfigError):
        load_config_file(str(tmp_path / "missing.ini"))


def test_unknown_section_and_key_are_rejected():
    base = dump_config(default_config())
    with pytest.raises(ConfigError):
        load_config_text(base + "\n[extras]\nfoo = 1\n")
    with pytest.raises(ConfigError):
        load_config_text(base.replace("[run]", "[run]\nbogus = 1"))
    # A source key belonging to a different kind is unknown for this one.
    with pytest.raises(ConfigError):
        load_config_text(base.replace("tilt = 0.75", "sigma1 = 1.0"))


def test_bad_values_are_config_errors():
    base = dump_config(default_config())
    with pytest.raises(ConfigError):
        load_config_text(base.replace("trials = 200", "trials = many"))
    with pytest.raises(ConfigError):
        load_config_text(base.replace("trials = 200", "trials = 0"))
    with pytest.raises(ConfigError):
        load_config_text("[source]\nkind = nonesuch\nhalfwidth = 1\n")
    with pytest.raises(ConfigError):
        default_config().with_overrides(distortion1=-1.0)
    with pytest.raises(ConfigError):
        default_config().with_overrides(stats_mode="psychic")


def test_atoms_parse_both_separators():
    text = """
[source]
kind = discrete-grid
halfwidth = 1.0
atoms = 1 1 0.5; -1, -1, 0.5
"""
    config = load_config_text(text)
    assert config.source_params["atoms"] == [(1.0, 1.0, 0.5), (-1.0, -1.0, 0.5)]
    with pytest.raises(ConfigError):
        load_config_text(text.replace("atoms = 1 1 0.5; -1, -1, 0.5", "atoms = 1 1"))


def test_build_source_kinds():
    assert build_source(default_config()).kind == "uniform-square"
    gauss = default_config().with_overrides(
        source_kind="truncated-gaussian",
        source_params={"halfwidth": 2.0, "sigma1": 1.0, "sigma2": 1.0, "rho": 0.5},
    )
    source = build_source(gauss)
    assert source.kind == "truncated-gaussian"
    # Numerics settings flow into the quadrature-backed source.
    assert source.quad_rel_tol == gauss.quad_rel_tol
