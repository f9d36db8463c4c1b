"""One Monte Carlo trial: realization, algorithm, verification, metrics."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..algorithms.efficiency import EfficiencyProfile, compute_delta
from ..algorithms.genie import InfeasibleRealizationError, genie_solve
from ..algorithms.init import InfeasibleTargetsError
from ..algorithms.online import run_online
from ..rate_model import verify_plan
from ..sca import InitializationError
from ..scenario import SystemConfig, make_realization

ALGORITHMS = ("genie", "eco", "edt", "crs", "decrs")
# delivered >= demanded - FEASIBILITY_TOL for a trial to count as feasible
FEASIBILITY_TOL = 1e-5


@dataclass
class TrialResult:
    seed: int
    algorithm: str
    energy: float  # joules
    delivered_mue: np.ndarray
    delivered_due: float
    feasible: bool
    flush_share: float
    sca_iterations: list = field(default_factory=list)
    wall_time: float = 0.0
    error: str = ""

    def row(self) -> dict:
        """Deterministic CSV fields (wall time is left out)."""
        return {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "energy": repr(float(self.energy)),
            "feasible": int(self.feasible),
            "flush_share": repr(float(self.flush_share)),
            "min_delivered_mue": repr(float(np.min(self.delivered_mue, initial=np.inf))),
            "delivered_due": repr(float(self.delivered_due)),
            "sca_iterations": int(np.sum(self.sca_iterations)),
            "error": self.error,
        }


def trial_realization(config: SystemConfig, seed: int):
    """Channel realization shared by every algorithm of one trial."""
    ch = make_realization(config, seed)
    if config.clear_last_block:
        ch = ch.with_clear_block(config.n_blocks - 1)
    return ch


def _failed(config, algorithm, seed, start, message) -> TrialResult:
    return TrialResult(seed, algorithm, float("nan"), np.zeros(config.n_mues), 0.0, False, float("nan"),
                       [], time.perf_counter() - start, message)


def run_trial(config: SystemConfig, algorithm: str, seed: int, profile: EfficiencyProfile | None = None,
              channels=None) -> TrialResult:
    """Run one algorithm on the realization of ``seed`` and verify its plan.

    ECO needs an efficiency profile; it is calibrated on the spot when not given.
    Infeasible realizations and solver breakdowns come back flagged.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    start = time.perf_counter()
    ch = trial_realization(config, seed) if channels is None else channels
    try:
        if algorithm == "genie":
            plan, trace = genie_solve(ch, config)
            iters = [len(trace.objective)]
        elif algorithm == "decrs":
            plan, trace = genie_solve(ch, config, framework="decrs")
            iters = [len(trace.objective)]
        else:
            delta = None
            if algorithm == "eco":
                profile = compute_delta(config) if profile is None else profile
                delta = profile.delta
            plan, steps = run_online(ch, config, algorithm, delta=delta, s=config.eco_s)
            iters = [st.trace.iterations for st in steps]
    except InfeasibleRealizationError as exc:
        return _failed(config, algorithm, seed, start, f"infeasible: {exc}")
    except (InitializationError, InfeasibleTargetsError, ArithmeticError) as exc:
        return _failed(config, algorithm, seed, start, f"{type(exc).__name__}: {exc}")
    report = verify_plan(plan, ch, config, tol=FEASIBILITY_TOL)
    total = report.total_energy
    share = float(report.energy[-1] / total) if total > 0 else 0.0
    return TrialResult(seed, algorithm, total, report.delivered_mue, report.delivered_due, report.feasible,
                       share, iters, time.perf_counter() - start,
                       "" if report.feasible else f"verification: {report.max_violation:.3g}")
