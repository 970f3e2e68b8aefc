from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Mapping, Union

from .coefficients import CoefficientMode
from .hyperreal import GeneratorRegistry, rational
from .mucalc import ProbeConfig


class ConfigError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class Config:
    generators: tuple[str, ...] = ("eps", "delta")
    mode: CoefficientMode = CoefficientMode.RATIONAL
    exp_bound: int = 16
    max_terms: int = 64
    zero_tol: float = 1e-9
    max_order: int = 8
    grid_points: int = 64
    delta_exponent: Fraction = Fraction(8)
    max_taylor_order: int = 8
    random_directions: int = 4
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.generators, str):
            object.__setattr__(self, "generators", tuple(n.strip() for n in self.generators.split(",") if n.strip()))
        elif isinstance(self.generators, list):
            object.__setattr__(self, "generators", tuple(self.generators))
        try:
            object.__setattr__(self, "mode", CoefficientMode(self.mode))
        except ValueError:
            raise ConfigError(f"mode must be one of {[m.value for m in CoefficientMode]}. Got {self.mode}") from None
        object.__setattr__(self, "delta_exponent", rational(self.delta_exponent))
        for name in ("exp_bound", "max_terms", "max_order", "grid_points", "max_taylor_order"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"{name} must be a positive int. Got {value!r}")
        if self.max_order < 2:
            raise ConfigError(f"max_order must be >= 2. Got {self.max_order}")
        if self.grid_points < 2:
            raise ConfigError(f"grid_points must be >= 2. Got {self.grid_points}")
        if not isinstance(self.zero_tol, (int, float)) or self.zero_tol <= 0:
            raise ConfigError(f"zero_tol must be a positive number. Got {self.zero_tol!r}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown config keys: {sorted(unknown)}. Known keys: {sorted(known)}")
        values = dict(data)
        if isinstance(values.get("delta_exponent"), str):
            values["delta_exponent"] = Fraction(values["delta_exponent"])
        return cls(**values)

    @classmethod
    def from_toml(cls, path: Union[str, Path]) -> "Config":
        try:
            with open(path, "rb") as file:
                data = tomllib.load(file)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Invalid config file {path}: {e}") from e
        return cls.from_mapping(data)

    def updated(self, **overrides) -> "Config":
        """Copy with the given fields replaced; None values are ignored."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def registry(self) -> GeneratorRegistry:
        return GeneratorRegistry(self.generators, self.mode, self.exp_bound, self.max_terms, self.zero_tol)

    def probe_config(self) -> ProbeConfig:
        return ProbeConfig(delta_exponent=self.delta_exponent, max_taylor_order=self.max_taylor_order,
                           random_directions=self.random_directions, seed=self.seed)
