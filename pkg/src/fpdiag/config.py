"""Run configuration: defaults, YAML files and command-line overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import FPDiagError
from .ingest import PopulationGroup


class ConfigError(FPDiagError):
    pass


@dataclass
class Paths:
    survey_csv: str = "survey.csv"
    estimates_csv: str = "estimates.csv"
    groups_csv: str = "groups.csv"
    out_dir: str = "out"


@dataclass
class Filters:
    min_year: int = 1990
    population_group: str = PopulationGroup.MARRIED_IN_UNION.value
    focus_only: bool = True
    # "survey": model series cut to [min_year, latest survey year]; "full": no cut
    model_window: str = "survey"


@dataclass
class Numeric:
    span: float = 0.75
    min_decomp_points: int = 5
    min_overlap_years: int = 1
    label_k_ratio: int = 10
    label_k_sil: int = 3
    residual_label_radius: float = 0.015
    residual_scale: float = 0.01
    sil_aggregation: str = "mean"


@dataclass
class Figures:
    palette: Optional[list] = None
    # per-figure overrides, e.g. {"fig3_trajectories": {"width_px": 900, "scaling": "SHARED"}}
    overrides: dict = field(default_factory=dict)
    residual_extra_countries: list = field(default_factory=list)


@dataclass
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    filters: Filters = field(default_factory=Filters)
    numeric: Numeric = field(default_factory=Numeric)
    figures: Figures = field(default_factory=Figures)

    def validate(self) -> "RunConfig":
        n, f = self.numeric, self.filters
        if not 0 < n.span <= 1:
            raise ConfigError(f"numeric.span must be in (0, 1], got {n.span}")
        if n.min_decomp_points < 3:
            raise ConfigError("numeric.min_decomp_points must be at least 3")
        if n.min_overlap_years < 1:
            raise ConfigError("numeric.min_overlap_years must be at least 1")
        if n.label_k_ratio < 0 or n.label_k_sil < 0:
            raise ConfigError("label counts must be non-negative")
        if n.residual_label_radius < 0 or n.residual_scale <= 0:
            raise ConfigError("residual radius must be >= 0 and scale > 0")
        if n.sil_aggregation not in ("mean", "median"):
            raise ConfigError(f"numeric.sil_aggregation must be mean or median, got {n.sil_aggregation!r}")
        if f.model_window not in ("survey", "full"):
            raise ConfigError(f"filters.model_window must be survey or full, got {f.model_window!r}")
        try:
            PopulationGroup(f.population_group)
        except ValueError:
            raise ConfigError(f"unknown population group {f.population_group!r}") from None
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def section(self, *names: str) -> dict:
        return {n: dataclasses.asdict(getattr(self, n)) for n in names}

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "RunConfig":
        cfg = cls()
        for sec, values in (data or {}).items():
            if not hasattr(cfg, sec) or sec.startswith("_"):
                raise ConfigError(f"unknown config section {sec!r}")
            if not isinstance(values, dict):
                raise ConfigError(f"config section {sec!r} must be a mapping")
            for key, value in values.items():
                set_value(cfg, f"{sec}.{key}", value)
        return cfg.validate()

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def resolve_paths(self, base: Path) -> "RunConfig":
        """Make relative input and output paths relative to ``base``."""
        for f in dataclasses.fields(Paths):
            p = Path(getattr(self.paths, f.name))
            if not p.is_absolute():
                setattr(self.paths, f.name, str(base / p))
        return self


def _coerce(current: Any, value: Any, key: str) -> Any:
    if isinstance(value, str) and not isinstance(current, str):
        # values from the command line arrive as text
        value = yaml.safe_load(value)
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
        return value
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(value)
    if isinstance(current, str):
        return str(value)
    return value


def set_value(cfg: RunConfig, dotted: str, value: Any) -> None:
    """Set ``section.key`` on ``cfg`` with type checking."""
    sec, _, key = dotted.partition(".")
    obj = getattr(cfg, sec, None)
    if obj is None or not dataclasses.is_dataclass(obj) or sec.startswith("_"):
        raise ConfigError(f"unknown config section {sec!r}")
    names = {f.name for f in dataclasses.fields(obj)}
    if key not in names:
        raise ConfigError(f"unknown config key {dotted!r}")
    setattr(obj, key, _coerce(getattr(obj, key), value, dotted))


def load(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return RunConfig.from_dict(data).resolve_paths(path.parent)


def build(config_path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then the config file, then ``overrides`` (``"section.key" -> value``)."""
    cfg = load(config_path) if config_path else RunConfig()
    for k, v in (overrides or {}).items():
        set_value(cfg, k, v)
    return cfg.validate()
