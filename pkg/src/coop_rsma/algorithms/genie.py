"""Joint all-block energy minimization with full-horizon CSI (GENIE)."""
from __future__ import annotations

import numpy as np

from ..conic import Affine, ConicProgram, vstack
from ..plan import BlockPlan, TransmitPlan
from ..sca import ScaTrace, Surrogate, sca_drive
from .init import block_init, genie_targets
from .surrogate import BlockBuilder, BlockLocal, to_physical


class InfeasibleRealizationError(RuntimeError):
    """Some UE with positive demand has no usable link in any block."""


def internal_unit(channels) -> float:
    """Power unit (watts) that puts the strongest channel gain at one."""
    gains = np.concatenate([np.sum(np.abs(channels.h_los) ** 2, axis=-1).ravel(), np.abs(channels.g_los).ravel() ** 2])
    gmax = float(np.max(gains, initial=0.0))
    return 1.0 / gmax if gmax > 0 else 1.0


def genie_solve(channels, config, framework: str = "idecrs", d_mue: float | None = None,
                d_due: float | None = None) -> tuple[TransmitPlan, ScaTrace]:
    """Minimize total energy over all blocks subject to the end-of-horizon
    throughput targets.  ``d_mue``/``d_due`` override the config demands."""
    D_k = config.throughput_mue if d_mue is None else d_mue
    D_d = config.throughput_due if d_due is None else d_due
    T, K, N = channels.h_los.shape
    unit = internal_unit(channels)
    ap, due = channels.ap_mask, channels.due_mask
    hs = channels.h * np.sqrt(unit)
    gs = channels.g * np.sqrt(unit)
    mue_t, due_t, feasible = genie_targets(ap, due, D_k, D_d)
    if not feasible:
        raise InfeasibleRealizationError("a UE with positive demand is blocked in every block")
    meta = {"algorithm": "genie", "unit": unit, "noise_scale": channels.noise_scale}
    if D_k <= 0 and D_d <= 0:
        zero = [BlockPlan.zeros(K, N, framework) for _ in range(T)]
        trace = ScaTrace(objective=[0.0], residual=[0.0], solver_iterations=[0], termination="trivial")
        return TransmitPlan(framework, zero, meta), trace
    init = [block_init(framework, hs[t], gs[t], ap[t], due[t], mue_t[t], due_t[t], unit) for t in range(T)]
    locals0 = [BlockLocal.from_plan(b) for b in init]

    def build(local):
        prog = ConicProgram()
        blocks = [
            BlockBuilder(prog, framework, hs[t], gs[t], ap[t], due[t], local[t], f"t{t}.", relay_content=D_d > 0)
            for t in range(T)
        ]
        if D_k > 0:
            for k in range(K):
                terms = [b.mue_rate[k] for b in blocks if k in b.mue_rate]
                prog.add_nonneg(vstack(terms).sum() - D_k, f"mue-demand k={k}")
        if D_d > 0:
            prog.add_nonneg(vstack([b.due_rate for b in blocks]).sum() - D_d, "due-demand")
        powers = [Affine.var(b.power) for b in blocks if b.power is not None]
        prog.set_objective(vstack(powers).sum(), "min")

        def extract(x):
            out = [b.extract(x) for b in blocks]
            return [o[0] for o in out], [o[1] for o in out]

        return Surrogate(prog, extract)

    sol, trace = sca_drive(build, locals0, config.sca_epsilon, config.sca_max_iter, config.solver_accuracy)
    # solver objective is internal power; report energy in joules
    trace.objective = [o * config.block_duration * unit for o in trace.objective]
    plan = TransmitPlan(framework, [to_physical(b, unit) for b in sol], meta)
    return plan, trace


def decrs_genie_solve(channels, config, scenario: str = "full") -> tuple[TransmitPlan, ScaTrace]:
    """GENIE under the DeCRS 2K-stream model.  ``scenario`` is ``full``,
    ``ma`` (no dUE demand) or ``re`` (no mUE demand)."""
    d_mue, d_due = scenario_demands(config, scenario)
    return genie_solve(channels, config, "decrs", d_mue, d_due)


def scenario_demands(config, scenario: str) -> tuple[float, float]:
    if scenario == "full":
        return config.throughput_mue, config.throughput_due
    if scenario == "ma":
        return config.throughput_mue, 0.0
    if scenario == "re":
        return 0.0, config.throughput_due
    raise ValueError(f"unknown scenario {scenario!r}")
