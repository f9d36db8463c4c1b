"""Sweep execution, paired seeding, aggregation and CSV output."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..algorithms.efficiency import EfficiencyProfile, calibration_seeds, delta_from_energies, eco_energy_bound
from ..algorithms.efficiency import total_demand
from ..algorithms.genie import InfeasibleRealizationError, genie_solve
from ..rate_model import verify_plan
from ..sca import InitializationError
from .presets import ExperimentPreset
from .trial import run_trial, trial_realization

WORKERS_ENV = "COOP_RSMA_WORKERS"

RAW_FIELDS = ("sweep", "value", "variant", "algorithm", "seed", "energy", "feasible", "flush_share",
              "min_delivered_mue", "delivered_due", "sca_iterations", "error")
AGG_FIELDS = ("sweep", "value", "variant", "algorithm", "n_trials", "n_feasible", "exclusion_rate",
              "mean_energy", "std_energy", "median_energy", "iqr_energy", "mean_flush_share", "eco_bound")
CDF_FIELDS = ("value", "variant", "algorithm", "rank", "probability", "energy")


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, n)


def trial_seeds(master_seed: int, n: int) -> list[int]:
    """Per-trial realization seeds; grid points and algorithms share them."""
    ss = np.random.SeedSequence(int(master_seed))
    return [int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(n)]


def _pool_map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=1))


def _calibration_energy(job):
    config, seed = job
    ch = trial_realization(config, seed)
    try:
        plan, _ = genie_solve(ch, config)
    except (InfeasibleRealizationError, InitializationError, ArithmeticError):
        return None
    report = verify_plan(plan, ch, config)
    return report.total_energy if report.feasible else None


def _delta_key(config):
    # the efficiency does not depend on s
    return config.replace(eco_s=0.7)


def calibrate(configs, workers: int = 1) -> dict:
    """Efficiency profiles for a set of configs, keyed by ``_delta_key``."""
    keys = []
    for c in configs:
        k = _delta_key(c)
        if k not in keys and k.delta_source == "genie":
            keys.append(k)
    jobs = [(k, s) for k in keys for s in calibration_seeds(k, k.calibration_trials)]
    energies = _pool_map(_calibration_energy, jobs, workers)
    out = {}
    for k in keys:
        e = [en for (kk, _), en in zip(jobs, energies) if kk == k and en is not None]
        out[k] = EfficiencyProfile(delta_from_energies(k, e), k.eco_s, total_demand(k), len(e))
    return out


def profile_for(config, profiles: dict) -> EfficiencyProfile:
    if config.delta_source == "fixed":
        return EfficiencyProfile(float(config.delta_value), config.eco_s, total_demand(config), 0)
    p = profiles[_delta_key(config)]
    return EfficiencyProfile(p.delta, config.eco_s, p.total_demand, p.n_trials)


def _trial_job(job):
    config, algorithm, seed, profile = job
    return run_trial(config, algorithm, seed, profile)


@dataclass
class RunTable:
    raw: list = field(default_factory=list)
    agg: list = field(default_factory=list)
    cdf: list = field(default_factory=list)
    timing: list = field(default_factory=list)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "raw.csv", RAW_FIELDS, self.raw)
        write_csv(out / "agg.csv", AGG_FIELDS, self.agg)
        if self.cdf:
            write_csv(out / "cdf.csv", CDF_FIELDS, self.cdf)


def write_csv(path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in fields})


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _value_str(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def aggregate(raw: list[dict], bounds: dict | None = None) -> tuple[list[dict], list[dict]]:
    """Means over feasible trials plus empirical CDF samples of the s-sweep.

    Groups keep their first-appearance order in ``raw``.
    """
    bounds = bounds or {}
    groups: dict = {}
    for r in raw:
        groups.setdefault((r["sweep"], r["value"], r["variant"], r["algorithm"]), []).append(r)
    agg, cdf = [], []
    for (sweep, value, variant, algo), rows in groups.items():
        e = np.array([float(r["energy"]) for r in rows if int(r["feasible"])])
        share = np.array([float(r["flush_share"]) for r in rows if int(r["feasible"])])
        n = len(rows)
        row = {
            "sweep": sweep, "value": value, "variant": variant, "algorithm": algo,
            "n_trials": n, "n_feasible": e.size, "exclusion_rate": repr((n - e.size) / n),
            "mean_energy": repr(float(np.mean(e))) if e.size else "",
            "std_energy": repr(float(np.std(e))) if e.size else "",
            "median_energy": repr(float(np.median(e))) if e.size else "",
            "iqr_energy": repr(float(np.subtract(*np.percentile(e, [75, 25])))) if e.size else "",
            "mean_flush_share": repr(float(np.mean(share))) if e.size else "",
            "eco_bound": repr(bounds[(value, variant)]) if algo == "eco" and (value, variant) in bounds else "",
        }
        agg.append(row)
        if sweep == "s" and e.size:
            srt = np.sort(e)
            for i, en in enumerate(srt):
                cdf.append({"value": value, "variant": variant, "algorithm": algo, "rank": i + 1,
                            "probability": repr((i + 1) / srt.size), "energy": repr(float(en))})
    return agg, cdf


def run_preset(preset: ExperimentPreset, out_dir=None, workers: int | None = None) -> RunTable:
    """Every grid point x variant x trial x algorithm, in a deterministic order.

    Rows are ordered by (grid value, variant, seed, algorithm) whatever the
    pool completion order.
    """
    workers = worker_count() if workers is None else workers
    seeds = trial_seeds(preset.seed, preset.trials)
    points = [(v, var, preset.config(v, var)) for v in preset.grid for var in preset.variants]
    profiles = {}
    if "eco" in preset.algorithms:
        profiles = calibrate([c for _, _, c in points], workers)
    jobs, labels = [], []
    for value, variant, config in points:
        prof = profile_for(config, profiles) if "eco" in preset.algorithms else None
        for seed in seeds:
            for algo in preset.algorithms:
                jobs.append((config, algo, seed, prof if algo == "eco" else None))
                labels.append((value, variant))
    results = _pool_map(_trial_job, jobs, workers)
    table = RunTable()
    for (value, variant), res in zip(labels, results):
        row = {"sweep": preset.sweep, "value": _value_str(value), "variant": variant}
        row.update(res.row())
        table.raw.append(row)
        table.timing.append((value, variant, res.algorithm, res.seed, res.wall_time))
    bounds = {}
    if "eco" in preset.algorithms:
        for value, variant, config in points:
            bounds[(_value_str(value), variant)] = eco_energy_bound(config, profile_for(config, profiles))
    table.agg, table.cdf = aggregate(table.raw, bounds)
    if out_dir is not None:
        table.write(out_dir)
    return table
