"""Run configuration: a versioned JSON document mapped onto dataclasses.

Every key is optional; missing keys take the defaults below, unknown keys
are rejected with the offending path. ``write_config`` emits a canonical
form (sorted keys, all defaults spelled out) whose reload compares equal.
"""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field

from decaf.errors import DecafError, SchemaError

CONFIG_VERSION = 1


@dataclass
class GridConfig:
    radial_order: int = 3
    angular_counts: list[int] = field(default_factory=lambda: [14, 26, 38])
    #: radius of the outermost shell; None means 0.8 * cutoff
    outer_radius: typing.Optional[float] = None
    keep_scale_factor: bool = True


@dataclass
class SpeciesConfig:
    amplitude: float = 1.0
    sigma0: float = 1.0
    slope: float = 0.0


def _default_species():
    return {
        "H": SpeciesConfig(0.75, 0.9, 0.15),
        "C": SpeciesConfig(1.0, 1.2, 0.2),
        "N": SpeciesConfig(1.0, 1.2, 0.2),
        "O": SpeciesConfig(1.0, 1.5, 0.25),
    }


@dataclass
class ScalingConfig:
    kind: str = "tent"  # tent | bell | unit
    t: float = 3.0
    a: float = 6.0
    b: float = 4.0


@dataclass
class WeightConfig:
    kind: str = "bell"  # bell | tent | laplacian | constant
    a: float = 6.0
    b: float = 4.0
    t: float = 3.0
    length: float = 1.0


@dataclass
class MinisumConfig:
    kernel: str = "sa"  # sa | ec
    weighting: str = "scaling"  # scaling | constant
    tolerance: float = 1e-14
    max_iterations: int = 64
    bootstrap_step: float = 0.01
    max_restarts: int = 8
    pole_clip: float = 1e-12
    n_starts: int = 32
    n_circle_starts: int = 16


@dataclass
class GPConfig:
    n_starts: int = 8
    sigma_bounds: list[float] = field(default_factory=lambda: [1e-3, 1e3])
    length_bounds: list[float] = field(default_factory=lambda: [1e-2, 1e2])
    jitter: float = 1e-8
    acquisition: str = "variance"  # variance | variance+error
    max_uncertainty: float = 0.1
    max_samples: int = 50


@dataclass
class RunConfig:
    version: int = CONFIG_VERSION
    cutoff: float = 6.0
    grid: GridConfig = field(default_factory=GridConfig)
    species: dict[str, SpeciesConfig] = field(default_factory=_default_species)
    #: power of sigma in the species Gaussian prefactor
    species_exponent: float = 1.0
    #: "single" sums all species into one density; "per-species" concatenates channels
    channels: str = "single"
    scaling: ScalingConfig = field(default_factory=ScalingConfig)
    weight: WeightConfig = field(default_factory=WeightConfig)
    minisum: MinisumConfig = field(default_factory=MinisumConfig)
    gp: GPConfig = field(default_factory=GPConfig)
    seed: int = 0

    @property
    def outer_radius(self) -> float:
        r = self.grid.outer_radius
        return 0.8 * self.cutoff if r is None else r


_CHOICES = {
    "channels": {"single", "per-species"},
    "scaling.kind": {"tent", "bell", "unit"},
    "weight.kind": {"bell", "tent", "laplacian", "constant"},
    "minisum.kernel": {"sa", "ec"},
    "minisum.weighting": {"scaling", "constant"},
    "gp.acquisition": {"variance", "variance+error"},
}


def _convert(value, tp, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _convert(value, inner[0], path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise SchemaError(path, "expected an object")
        return _from_dict(tp, value, path)
    if origin is list:
        if not isinstance(value, list):
            raise SchemaError(path, "expected a list")
        return [_convert(v, args[0], f"{path}[{i}]") for i, v in enumerate(value)]
    if origin is dict:
        if not isinstance(value, dict):
            raise SchemaError(path, "expected an object")
        return {str(k): _convert(v, args[1], f"{path}.{k}") for k, v in value.items()}
    if tp is bool:
        if not isinstance(value, bool):
            raise SchemaError(path, "expected true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(path, "expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(path, "expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise SchemaError(path, "expected a string")
        return value
    raise SchemaError(path, f"unsupported type {tp}")


def _from_dict(cls, data, path):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            where = f"{path}.{key}" if path else key
            raise SchemaError(where, "unknown key")
    kwargs = {}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        kwargs[key] = _convert(value, hints[key], where)
    return cls(**kwargs)


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.version != CONFIG_VERSION:
        raise SchemaError("version", f"unsupported config version {cfg.version}")
    for path, allowed in _CHOICES.items():
        obj = cfg
        for part in path.split("."):
            obj = getattr(obj, part)
        if obj not in allowed:
            raise SchemaError(path, f"must be one of {sorted(allowed)}, got {obj!r}")
    if not cfg.cutoff > 0:
        raise SchemaError("cutoff", "must be positive")
    if len(cfg.grid.angular_counts) != cfg.grid.radial_order:
        raise SchemaError("grid.angular_counts", "needs one entry per radial layer")
    if not 0 < cfg.outer_radius <= cfg.cutoff:
        raise SchemaError("grid.outer_radius", "must lie in (0, cutoff]")
    for name, bounds in (("gp.sigma_bounds", cfg.gp.sigma_bounds), ("gp.length_bounds", cfg.gp.length_bounds)):
        if len(bounds) != 2 or not 0 < bounds[0] < bounds[1]:
            raise SchemaError(name, "needs two increasing positive numbers")
    if not cfg.gp.jitter > 0:
        raise SchemaError("gp.jitter", "must be positive")
    if cfg.gp.n_starts < 1 or cfg.gp.max_samples < 1:
        raise SchemaError("gp", "n_starts and max_samples must be >= 1")
    # building the numerical objects runs their own range checks
    from decaf.fingerprint import Featurizer

    try:
        Featurizer.from_config(cfg)
    except SchemaError:
        raise
    except DecafError as exc:
        raise SchemaError("<config>", str(exc)) from None
    return cfg


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise SchemaError("<root>", "expected an object")
    return _validate(_from_dict(RunConfig, data, ""))


def load_config(text: str) -> RunConfig:
    if not text.strip():
        return _validate(RunConfig())
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"<line {exc.lineno}>", exc.msg) from None
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def write_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"
