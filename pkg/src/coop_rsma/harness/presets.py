"""Figure presets at desk scale and scenario-file loading for custom sweeps."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..scenario import SystemConfig
from .trial import ALGORITHMS

# short sweep names used in figure captions -> SystemConfig fields
SWEEP_FIELDS = {"K": "n_mues", "s": "eco_s", "T": "n_blocks", "p": "blockage_p", "N": "n_antennas"}
PRESET_NAMES = ("fig3", "fig4", "fig5", "fig6", "fig7", "custom")
PRESET_KEYS = ("sweep", "grid", "trials", "algorithms", "variants")

DESK = {"n_antennas": 8, "n_blocks": 10}


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    sweep: str
    grid: tuple
    fixed: dict = field(default_factory=dict)
    trials: int = 30
    algorithms: tuple = ("genie", "eco", "edt", "crs")
    # variant label -> extra config overrides ("" is the plain scenario)
    variants: dict = field(default_factory=lambda: {"": {}})

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        self.validate()

    @property
    def field_name(self) -> str:
        return SWEEP_FIELDS.get(self.sweep, self.sweep)

    def validate(self) -> None:
        if not self.grid:
            raise ValueError(f"preset {self.name!r}: empty sweep grid")
        if self.trials < 1:
            raise ValueError(f"preset {self.name!r}: trials must be positive")
        if not self.algorithms:
            raise ValueError(f"preset {self.name!r}: no algorithms selected")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"preset {self.name!r}: unknown algorithms {sorted(bad)}")
        known = {f.name for f in dataclasses.fields(SystemConfig)}
        if self.field_name not in known:
            raise ValueError(f"preset {self.name!r}: unknown sweep variable {self.sweep!r}")
        if not self.variants:
            raise ValueError(f"preset {self.name!r}: no variants")
        # every grid point must complete a valid config
        for value in self.grid:
            for variant in self.variants:
                self.config(value, variant)

    def config(self, value, variant: str = "") -> SystemConfig:
        data = dict(self.fixed)
        data.update(self.variants[variant])
        data[self.field_name] = value
        return SystemConfig(**data)

    def with_overrides(self, trials: int | None = None, seed: int | None = None, algorithms=None,
                       fixed: dict | None = None) -> "ExperimentPreset":
        changes = {}
        if trials is not None:
            changes["trials"] = int(trials)
        new_fixed = dict(self.fixed)
        if fixed:
            new_fixed.update(fixed)
        if seed is not None:
            new_fixed["seed"] = int(seed)
        changes["fixed"] = new_fixed
        if algorithms is not None:
            changes["algorithms"] = tuple(algorithms)
        return dataclasses.replace(self, **changes)

    @property
    def seed(self) -> int:
        return int(self.fixed.get("seed", 0))


def _builtin(name: str) -> ExperimentPreset:
    base = {**DESK, "throughput_mue": 10.0, "throughput_due": 2.0, "eco_s": 0.7}
    if name == "fig3":
        return ExperimentPreset("fig3", "K", (2, 3, 4), base,
                                variants={"": {}, "DEP": {"blockage_mode": "distance_dependent"}})
    if name == "fig4":
        return ExperimentPreset("fig4", "s", (0.1, 0.2, 0.3, 0.5, 0.7, 0.9), {**base, "n_mues": 4},
                                algorithms=("eco",))
    if name == "fig5":
        return ExperimentPreset("fig5", "T", (6, 10, 14), {**base, "n_mues": 4})
    if name == "fig6":
        return ExperimentPreset("fig6", "p", (0.1, 0.3, 0.5), {**base, "n_mues": 4})
    if name == "fig7":
        return ExperimentPreset(
            "fig7", "K", (2, 3, 4), {**DESK, "throughput_mue": 20.0, "throughput_due": 5.0},
            algorithms=("genie", "decrs"),
            variants={"": {}, "MA": {"throughput_due": 0.0}, "RE": {"throughput_mue": 0.0}},
        )
    raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


def _read(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text) or {}
    import yaml

    return yaml.safe_load(text) or {}


def load_preset(name: str, scenario=None) -> ExperimentPreset:
    """Built-in preset, optionally overridden by a scenario file.

    The file holds SystemConfig keys plus the optional preset keys ``sweep``,
    ``grid``, ``trials``, ``algorithms`` and ``variants``.  ``custom`` needs a
    file that names at least ``sweep`` and ``grid``.
    """
    data = _read(scenario) if scenario is not None else {}
    if not isinstance(data, dict):
        raise ValueError("scenario file must hold a mapping")
    extra = {k: data.pop(k) for k in PRESET_KEYS if k in data}
    known = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    if name == "custom":
        if "sweep" not in extra or "grid" not in extra:
            raise ValueError("custom preset needs 'sweep' and 'grid' in the scenario file")
        preset = ExperimentPreset("custom", str(extra["sweep"]), tuple(extra["grid"]), {**DESK, **data})
    else:
        preset = _builtin(name)
        if data:
            preset = preset.with_overrides(fixed=data)
    changes = {k: extra[k] for k in PRESET_KEYS if k in extra}
    if changes:
        preset = dataclasses.replace(preset, **changes)
    return preset
