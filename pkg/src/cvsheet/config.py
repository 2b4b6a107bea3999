"""Run configuration: a flat JSON object with validated fields.

See ``docs/config.md`` for the reference syntax.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .scenarios import SCENARIOS


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


@dataclass
class RunConfig:
    n1: int = 32
    n2: int = 32
    n3: int = 17
    dt: float | None = None
    cfl: float = 0.5
    t_end: float = 0.1
    scenario: str = "current-sheet"
    params: dict = field(default_factory=dict)
    delta0: float = 0.5
    eps0: float = 0.05
    output_dir: str = "out"
    sample_every: int = 1
    checkpoint_every: int = 0
    reproducible: bool = False
    chi_support: float = 2.0
    energy_order: int = 3
    check_hypotheses: bool = True
    strict_hypotheses: bool = False
    plots: bool = True
    csv: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("n1", "n2"):
            n = getattr(self, name)
            if not isinstance(n, int) or n <= 0 or n % 2:
                raise ConfigError(f"{name} must be a positive even integer, got {n!r}")
        if not isinstance(self.n3, int) or self.n3 < 3:
            raise ConfigError(f"n3 must be an integer >= 3, got {self.n3!r}")
        if self.dt is not None and not self.dt > 0.0:
            raise ConfigError("dt must be positive")
        if not self.cfl > 0.0:
            raise ConfigError("cfl must be positive")
        if not self.t_end > 0.0:
            raise ConfigError("t_end must be positive")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose one of {', '.join(SCENARIOS)}")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be an object")
        if not 0.0 < self.delta0 <= 0.5:
            raise ConfigError("delta0 must lie in (0, 1/2]")
        if not self.eps0 > 0.0:
            raise ConfigError("eps0 must be positive")
        if not isinstance(self.sample_every, int) or self.sample_every < 1:
            raise ConfigError("sample_every must be a positive integer")
        if not isinstance(self.checkpoint_every, int) or self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be a nonnegative integer")
        if not self.chi_support > 1.0:
            raise ConfigError("chi_support must exceed 1")
        if self.energy_order not in (0, 1, 2, 3):
            raise ConfigError("energy_order must be 0, 1, 2 or 3")

    @property
    def shape(self):
        return (self.n1, self.n2, self.n3)

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def replace(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return RunConfig.from_dict({**self.to_dict(), **kw})


def load_configs(path):
    """Read a config file holding one object or a list of objects."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if isinstance(data, list):
        return [RunConfig.from_dict(d) for d in data]
    return [RunConfig.from_dict(data)]


def save_config(cfg, path):
    Path(path).write_text(cfg.to_json() + "\n", encoding="utf-8")
