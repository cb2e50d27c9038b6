"""Experiment configuration for the benchmark harness."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..student import compatibility_value, is_compatible

SCENARIOS = ("vi_exact", "vi_mala", "vi_scaled_mala", "mle_online", "em_mixture", "fig1")
VI_SCENARIOS = ("vi_exact", "vi_mala", "vi_scaled_mala")

DESK_REPLICATES = 10
DESK_ITERS = 100
FULL_REPLICATES = 100
FULL_ITERS = 1000


class ConfigError(ValueError):
    pass


def parse_nu(value) -> float:
    """Degrees of freedom from a config value; ``"inf"`` selects the Gaussian branch."""
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("inf", "+inf", "infinity"):
            return math.inf
        value = float(v)
    value = float(value)
    if not value > 0:
        raise ConfigError(f"degrees of freedom must be positive, got {value}")
    return value


def format_nu(nu: float) -> str | float:
    return "inf" if math.isinf(nu) else nu


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    d: int = 1
    nu_target: float = 3.0
    nu_family: float = 3.0
    kappa: float = 10.0
    n_iters: int = DESK_ITERS
    n_per_iter: int | None = None
    n_replicates: int = DESK_REPLICATES
    seed: int = 0
    output_path: str | None = None
    name: str | None = None
    n_data: int = 200
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        object.__setattr__(self, "nu_target", parse_nu(self.nu_target))
        object.__setattr__(self, "nu_family", parse_nu(self.nu_family))
        for name in ("d", "n_iters", "n_replicates", "n_data", "seed"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.n_iters < 0 or self.n_replicates < 1:
            raise ConfigError("n_iters must be >= 0 and n_replicates >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "kappa", float(self.kappa))
        if not self.kappa >= 1:
            raise ConfigError("kappa must be >= 1")
        if self.scenario == "em_mixture" and self.d < 2:
            raise ConfigError("em_mixture needs d >= 2")

    @property
    def per_iter(self) -> int:
        return 10 * self.d if self.n_per_iter is None else int(self.n_per_iter)

    @property
    def compatibility(self) -> float:
        return compatibility_value(self.nu_target, self.nu_family, self.d)

    @property
    def compatible(self) -> bool:
        return is_compatible(self.nu_target, self.nu_family, self.d)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return (f"{self.scenario}_d{self.d}_k{self.kappa:g}_nupi{format_nu(self.nu_target)}"
                f"_nu{format_nu(self.nu_family)}")

    def check(self):
        """Reject VI configurations whose target escort lacks second moments."""
        if self.scenario in VI_SCENARIOS and not self.compatible:
            raise ConfigError(
                f"incompatible configuration {self.label}: nu_pi + 2(nu_pi + d)/(nu + d) = "
                f"{self.compatibility:.6g} <= 2"
            )

    def to_json(self) -> dict:
        out = asdict(self)
        out["nu_target"] = format_nu(self.nu_target)
        out["nu_family"] = format_nu(self.nu_family)
        return out

    def with_overrides(self, **kw) -> ExperimentConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def config_from_dict(raw: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
    if "scenario" not in raw:
        raise ConfigError("config needs a 'scenario'")
    return ExperimentConfig(**raw)


def load_configs(path: str | Path) -> list[ExperimentConfig]:
    """Read a JSON object or a list of objects.

    An entry may carry a ``"grid"`` mapping of field names to value lists; it
    expands to the Cartesian product.  Dict-valued grid items set several
    fields at once.
    """
    with open(path) as fh:
        raw = json.load(fh)
    items = raw if isinstance(raw, list) else [raw]
    out = []
    for item in items:
        if not isinstance(item, dict):
            raise ConfigError("each config entry must be a JSON object")
        out.extend(_expand(item))
    return out


def _expand(item: dict) -> list[ExperimentConfig]:
    grid = item.get("grid")
    base = {k: v for k, v in item.items() if k != "grid"}
    if not grid:
        return [config_from_dict(base)]
    combos = [base]
    for key, values in grid.items():
        if not isinstance(values, list):
            raise ConfigError(f"grid entry {key!r} must be a list")
        # dict values set several fields together, e.g. {"d": 5, "kappa": 1000}
        combos = [{**c, **v} if isinstance(v, dict) else {**c, key: v} for c in combos for v in values]
    return [config_from_dict(c) for c in combos]
