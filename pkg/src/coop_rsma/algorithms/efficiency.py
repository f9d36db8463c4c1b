"""Calibrated energy efficiency and the ECO energy bound."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rate_model import verify_plan
from ..scenario import make_realization
from .genie import InfeasibleRealizationError, genie_solve


@dataclass(frozen=True)
class EfficiencyProfile:
    delta: float  # bits/s/Hz per joule
    s: float
    total_demand: float
    n_trials: int = 0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    @property
    def energy_bound(self) -> float:
        return self.total_demand / (self.s * self.delta)


def total_demand(config) -> float:
    return config.n_mues * config.throughput_mue + config.throughput_due


def delta_from_energies(config, energies) -> float:
    energies = np.asarray(energies, dtype=float)
    if energies.size == 0:
        raise RuntimeError("no feasible calibration trial")
    return total_demand(config) / float(np.mean(energies))


def calibration_seeds(config, n_trials: int) -> list[int]:
    """Seeds disjoint from the trial seeds of the same master seed."""
    ss = np.random.SeedSequence([int(config.seed) & 0xFFFFFFFF, 0xCA11B])
    return [int(c.generate_state(1)[0]) for c in ss.spawn(n_trials)]


def compute_delta(config, n_calibration_trials: int | None = None) -> EfficiencyProfile:
    """Mean GENIE efficiency over calibration realizations.

    With ``config.delta_source == 'fixed'`` the configured ``delta_value`` is
    used instead (e.g. the efficiency of a previous transmission).
    """
    if config.delta_source == "fixed":
        return EfficiencyProfile(float(config.delta_value), config.eco_s, total_demand(config), 0)
    n = config.calibration_trials if n_calibration_trials is None else n_calibration_trials
    energies = []
    for seed in calibration_seeds(config, n):
        ch = make_realization(config, seed)
        if config.clear_last_block:
            ch = ch.with_clear_block(config.n_blocks - 1)
        try:
            plan, _ = genie_solve(ch, config)
        except InfeasibleRealizationError:
            continue
        report = verify_plan(plan, ch, config)
        if report.feasible:
            energies.append(report.total_energy)
    return EfficiencyProfile(delta_from_energies(config, energies), config.eco_s, total_demand(config), len(energies))


def eco_energy_bound(config, profile: EfficiencyProfile, s: float | None = None) -> float:
    """``(sum_k D_k + D_d) / (s * delta)`` in joules."""
    s = profile.s if s is None else s
    return total_demand(config) / (s * profile.delta)
