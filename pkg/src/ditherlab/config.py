"""Experiment configuration: a typed dataclass with an INI file format.

The file format uses four sections. Unknown sections or keys are rejected
rather than ignored so that typos surface as configuration errors instead
of silently running with defaults.

    [source]
    kind = uniform-square
    halfwidth = 1.0
    tilt = 0.75

    [coding]
    distortion1 = 0.3333333333333333
    distortion2 = 0.3333333333333333
    block_length = 8
    margin1 = 0.5
    margin2 = 0.5
    trials = 200

    [numerics]
    dither_grid = 32
    quad_rel_tol = 1e-9
    quad_max_nodes = 1024
    sampler_attempt_cap = 1000
    enumeration_cap = 268435456
    pair_eval_cap = 100000000
    estimator_samples = 200000

    [run]
    seed = 1
    threads = 1
    stats_mode = universal
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .sources import JointSource, make_source

__all__ = [
    "ExperimentConfig",
    "default_config",
    "load_config_text",
    "load_config_file",
    "dump_config",
    "build_source",
]

_SOURCE_KEYS = {
    "uniform-square": {"kind", "halfwidth", "tilt"},
    "truncated-gaussian": {"kind", "halfwidth", "sigma1", "sigma2", "rho"},
    "discrete-grid": {"kind", "halfwidth", "atoms"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    source_kind: str = "uniform-square"
    source_params: dict = field(default_factory=lambda: {"halfwidth": 1.0, "tilt": 0.75})
    distortion1: float = 1.0 / 3.0
    distortion2: float = 1.0 / 3.0
    block_length: int = 8
    margin1: float = 0.5
    margin2: float = 0.5
    trials: int = 200
    dither_grid: int = 32
    quad_rel_tol: float = 1e-9
    quad_max_nodes: int = 1024
    sampler_attempt_cap: int = 1000
    enumeration_cap: int = 1 << 28
    pair_eval_cap: int = 10**8
    estimator_samples: int = 200_000
    seed: int = 1
    threads: int = 1
    stats_mode: str = "universal"

    def __post_init__(self) -> None:
        if self.source_kind not in _SOURCE_KEYS:
            raise ConfigError(f"unknown source kind {self.source_kind!r}")
        if self.distortion1 <= 0.0 or self.distortion2 <= 0.0:
            raise ConfigError("distortions must be positive")
        if self.block_length < 1:
            raise ConfigError("block_length must be at least 1")
        if self.margin1 < 0.0 or self.margin2 < 0.0:
            raise ConfigError("margins must be nonnegative")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.dither_grid < 1:
            raise ConfigError("dither_grid must be at least 1")
        if self.quad_rel_tol <= 0.0:
            raise ConfigError("quad_rel_tol must be positive")
        if self.quad_max_nodes < 8:
            raise ConfigError("quad_max_nodes must be at least 8")
        if self.sampler_attempt_cap < 1:
            raise ConfigError("sampler_attempt_cap must be at least 1")
        if self.enumeration_cap < 1 or self.pair_eval_cap < 1:
            raise ConfigError("search caps must be positive")
        if self.estimator_samples < 2:
            raise ConfigError("estimator_samples must be at least 2")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.stats_mode not in ("universal", "oracle"):
            raise ConfigError(
                f"stats_mode must be 'universal' or 'oracle', got {self.stats_mode!r}"
            )

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def _parse_atoms(text: str) -> list[tuple[float, float, float]]:
    atoms = []
    for piece in text.replace(",", " ").split(";"):
        piece = piece.strip()
        if not piece:
            continue
        parts = piece.split()
        if len(parts) != 3:
            raise ConfigError(f"atom entry {piece!r} is not an 'x1 x2 weight' triple")
        try:
            atoms.append((float(parts[0]), float(parts[1]), float(parts[2])))
        except ValueError:
            raise ConfigError(f"atom entry {piece!r} has a non-numeric field") from None
    if not atoms:
        raise ConfigError("atoms list is empty")
    return atoms


def _format_atoms(atoms) -> str:
    return "; ".join(f"{x1!r} {x2!r} {w!r}" for x1, x2, w in atoms)


def _get(parser: configparser.ConfigParser, section: str, key: str, cast, fallback):
    if not parser.has_option(section, key):
        return fallback
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid value") from None


def load_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"malformed configuration: {err}") from None

    known_sections = {"source", "coding", "numerics", "run"}
    for section in parser.sections():
        if section not in known_sections:
            raise ConfigError(f"unknown section [{section}]")

    kind = _get(parser, "source", "kind", str, "uniform-square")
    if kind not in _SOURCE_KEYS:
        raise ConfigError(f"unknown source kind {kind!r}")
    if parser.has_section("source"):
        for key in parser.options("source"):
            if key not in _SOURCE_KEYS[kind]:
                raise ConfigError(f"[source] key {key!r} does not apply to kind {kind!r}")
    params: dict = {"halfwidth": _get(parser, "source", "halfwidth", float, 1.0)}
    if kind == "uniform-square":
        params["tilt"] = _get(parser, "source", "tilt", float, 0.0)
    elif kind == "truncated-gaussian":
        params["sigma1"] = _get(parser, "source", "sigma1", float, 1.0)
        params["sigma2"] = _get(parser, "source", "sigma2", float, 1.0)
        params["rho"] = _get(parser, "source", "rho", float, 0.0)
    else:
        raw_atoms = _get(parser, "source", "atoms", str, None)
        if raw_atoms is None:
            raise ConfigError("discrete-grid sources need an atoms entry")
        params["atoms"] = _parse_atoms(raw_atoms)

    known_keys = {
        "coding": {
            "distortion1",
            "distortion2",
            "block_length",
            "margin1",
            "margin2",
            "trials",
        },
        "numerics": {
            "dither_grid",
            "quad_rel_tol",
            "quad_max_nodes",
            "sampler_attempt_cap",
            "enumeration_cap",
            "pair_eval_cap",
            "estimator_samples",
        },
        "run": {"seed", "threads", "stats_mode"},
    }
    for section, keys in known_keys.items():
        if parser.has_section(section):
            for key in parser.options(section):
                if key not in keys:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")

    defaults = ExperimentConfig.__dataclass_fields__
    return ExperimentConfig(
        source_kind=kind,
        source_params=params,
        distortion1=_get(parser, "coding", "distortion1", float, defaults["distortion1"].default),
        distortion2=_get(parser, "coding", "distortion2", float, defaults["distortion2"].default),
        block_length=_get(parser, "coding", "block_length", int, defaults["block_length"].default),
        margin1=_get(parser, "coding", "margin1", float, defaults["margin1"].default),
        margin2=_get(parser, "coding", "margin2", float, defaults["margin2"].default),
        trials=_get(parser, "coding", "trials", int, defaults["trials"].default),
        dither_grid=_get(parser, "numerics", "dither_grid", int, defaults["dither_grid"].default),
        quad_rel_tol=_get(parser, "numerics", "quad_rel_tol", float, defaults["quad_rel_tol"].default),
        quad_max_nodes=_get(parser, "numerics", "quad_max_nodes", int, defaults["quad_max_nodes"].default),
        sampler_attempt_cap=_get(
            parser, "numerics", "sampler_attempt_cap", int, defaults["sampler_attempt_cap"].default
        ),
        enumeration_cap=_get(
            parser, "numerics", "enumeration_cap", int, defaults["enumeration_cap"].default
        ),
        pair_eval_cap=_get(
            parser, "numerics", "pair_eval_cap", int, defaults["pair_eval_cap"].default
        ),
        estimator_samples=_get(
            parser, "numerics", "estimator_samples", int, defaults["estimator_samples"].default
        ),
        seed=_get(parser, "run", "seed", int, defaults["seed"].default),
        threads=_get(parser, "run", "threads", int, defaults["threads"].default),
        stats_mode=_get(parser, "run", "stats_mode", str, defaults["stats_mode"].default),
    )


def load_config_file(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as err:
        raise ConfigError(f"cannot read configuration file {path}: {err}") from None
    return load_config_text(text)


def dump_config(config: ExperimentConfig) -> str:
    """Serialize a config to INI text that round-trips through the loader."""
    parser = configparser.ConfigParser()
    source: dict[str, str] = {"kind": config.source_kind}
    for key, value in config.source_params.items():
        if key == "atoms":
            source[key] = _format_atoms(value)
        else:
            source[key] = repr(float(value))
    parser["source"] = source
    parser["coding"] = {
        "distortion1": repr(config.distortion1),
        "distortion2": repr(config.distortion2),
        "block_length": str(config.block_length),
        "margin1": repr(config.margin1),
        "margin2": repr(config.margin2),
        "trials": str(config.trials),
    }
    parser["numerics"] = {
        "dither_grid": str(config.dither_grid),
        "quad_rel_tol": repr(config.quad_rel_tol),
        "quad_max_nodes": str(config.quad_max_nodes),
        "sampler_attempt_cap": str(config.sampler_attempt_cap),
        "enumeration_cap": str(config.enumeration_cap),
        "pair_eval_cap": str(config.pair_eval_cap),
        "estimator_samples": str(config.estimator_samples),
    }
    parser["run"] = {
        "seed": str(config.seed),
        "threads": str(config.threads),
        "stats_mode": config.stats_mode,
    }
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def build_source(config: ExperimentConfig) -> JointSource:
    params = dict(config.source_params)
    if config.source_kind == "truncated-gaussian":
        params["quad_rel_tol"] = config.quad_rel_tol
        params["quad_max_nodes"] = config.quad_max_nodes
    return make_source(config.source_kind, **params)
