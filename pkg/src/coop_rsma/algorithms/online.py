"""Instantaneous-CSI schedulers: ECO, EDT and the CRS baseline, block by block."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..conic import Affine, ConicProgram, vstack
from ..plan import BlockPlan, TransmitPlan
from ..rate_model import block_report
from ..sca import InitializationError, ScaTrace, Surrogate, sca_drive
from .genie import internal_unit
from .init import EfficiencyInfeasibleError, InfeasibleTargetsError, block_init, eco_feasible_init
from .surrogate import BlockBuilder, BlockLocal, to_physical

# residuals at or below this many bits/s/Hz count as delivered; a UE is
# snapped once, so the shortfall stays far inside the verification tolerance
RESIDUAL_SNAP = 1e-7
# once every residual cap binds, all powers up to the efficiency floor give the
# same weighted rate; this small reward settles on the floor (efficiency
# exactly s*delta) instead of an arbitrary interior point
ECO_TIE_BREAK = 1e-4
# the floor is enforced with this relative margin so solver tolerance never
# pushes the realized energy past sum(D) / (s * delta)
ECO_FLOOR_MARGIN = 1e-6


@dataclass
class ResidualState:
    """Data still owed to each mUE and to the dUE (bits/s/Hz)."""

    mue: np.ndarray
    due: float
    demand_mue: np.ndarray
    demand_due: float

    @classmethod
    def start(cls, n_mues: int, d_mue: float, d_due: float) -> "ResidualState":
        return cls(np.full(n_mues, float(d_mue)), float(d_due), np.full(n_mues, float(d_mue)), float(d_due))

    @property
    def weights_mue(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.demand_mue > 0, self.mue / np.where(self.demand_mue > 0, self.demand_mue, 1.0), 0.0)

    @property
    def weight_due(self) -> float:
        return self.due / self.demand_due if self.demand_due > 0 else 0.0

    @property
    def done(self) -> bool:
        return bool(np.all(self.mue <= 0) and self.due <= 0)

    def after(self, mue_rates: np.ndarray, due_rate: float) -> "ResidualState":
        mue = self.mue - mue_rates
        due = self.due - due_rate
        # leftovers this small only ill-condition later solves
        mue[mue <= RESIDUAL_SNAP] = 0.0
        return ResidualState(mue, due if due > RESIDUAL_SNAP else 0.0, self.demand_mue, self.demand_due)


@dataclass
class StepResult:
    plan: BlockPlan  # physical units
    residual: ResidualState
    trace: ScaTrace
    info: dict = field(default_factory=dict)


def _zero_step(K, N, framework, residual, reason) -> StepResult:
    tr = ScaTrace(objective=[0.0], residual=[0.0], solver_iterations=[0], termination=reason)
    return StepResult(BlockPlan.zeros(K, N, framework), residual, tr, {"skipped": reason})


def _scaled(block, unit):
    return block.h * np.sqrt(unit), block.g * np.sqrt(unit)


def _finish(framework, block, plan_int, unit, residual, trace, info) -> StepResult:
    plan = to_physical(plan_int, unit)
    mue, due = block_report(framework, block.h, block.g, plan, block.ap_mask, block.due_mask, {})
    return StepResult(plan, residual.after(mue, due), trace, info)


def min_energy_step(block, residual: ResidualState, divisor: float, config, unit: float,
                    framework: str = "idecrs") -> StepResult:
    """Minimize block energy with per-block targets ``residual / divisor``.

    Targets of UEs unreachable in this block are dropped and reported in
    ``info['unserved']``.
    """
    K, N = block.h.shape
    active, relays = block.active, block.relays
    mue_target = np.where(block.ap_mask, residual.mue / divisor, 0.0)
    due_target = residual.due / divisor if relays.size else 0.0
    unserved = {"mue": np.flatnonzero(~block.ap_mask & (residual.mue > 0)).tolist(),
                "due": bool(residual.due > 0 and not relays.size)}
    if not active.size or (not np.any(mue_target > 0) and due_target <= 0):
        out = _zero_step(K, N, framework, residual, "no-demand" if active.size else "no-links")
        out.info["unserved"] = unserved
        return out
    h, g = _scaled(block, unit)
    init = block_init(framework, h, g, block.ap_mask, block.due_mask, mue_target, due_target, unit)

    def build(local):
        prog = ConicProgram()
        b = BlockBuilder(prog, framework, h, g, block.ap_mask, block.due_mask, local, relay_content=due_target > 0)
        for k in active:
            if mue_target[k] > 0:
                prog.add_nonneg(b.mue_rate[k] - mue_target[k], "mue-target")
        if due_target > 0:
            prog.add_nonneg(b.due_rate - due_target, "due-target")
        prog.set_objective(Affine.var(b.power), "min")
        return Surrogate(prog, lambda x: b.extract(x))

    info = {"divisor": divisor, "unserved": unserved, "mue_target": mue_target, "due_target": due_target}
    try:
        sol, trace = sca_drive(build, BlockLocal.from_plan(init), config.sca_epsilon, config.sca_max_iter,
                               config.solver_accuracy)
    except InitializationError as exc:
        # the initial point meets every target by construction; keep it
        sol = init
        trace = ScaTrace(objective=[init.power], residual=[0.0], solver_iterations=[0], termination="init-only")
        info["error"] = str(exc)
    trace.objective = [o * config.block_duration * unit for o in trace.objective]
    return _finish(framework, block, sol, unit, residual, trace, info)


def edt_step(block, residual: ResidualState, blocks_remaining: int, config, unit: float,
             framework: str = "idecrs") -> StepResult:
    """Even data transmission: spread the residual over the remaining blocks;
    inside the final ``edt_buffer`` blocks ask for the whole residual."""
    if blocks_remaining < 1:
        raise ValueError("blocks_remaining must be at least 1")
    t = config.n_blocks - blocks_remaining + 1  # 1-based block index
    divisor = 1 if t >= config.n_blocks - config.edt_buffer else blocks_remaining
    return min_energy_step(block, residual, divisor, config, unit, framework)


def crs_step(block, residual, blocks_remaining, config, unit) -> StepResult:
    return edt_step(block, residual, blocks_remaining, config, unit, framework="crs")


def final_flush(block, residual, config, unit, framework: str = "idecrs") -> StepResult:
    """Deliver every residual bit in one (unblocked) block."""
    return min_energy_step(block, residual, 1.0, config, unit, framework)


def eco_step(block, residual: ResidualState, delta: float, s: float, blocks_remaining: int, config,
             unit: float) -> StepResult:
    """Weighted residual-rate maximization under the efficiency floor ``s * delta``.

    ``delta`` is in bits/s/Hz per joule.
    """
    K, N = block.h.shape
    active = block.active
    if not active.size:
        return _zero_step(K, N, "idecrs", residual, "no-links")
    if residual.done:
        return _zero_step(K, N, "idecrs", residual, "no-demand")
    h, g = _scaled(block, unit)
    relays = block.relays
    due_cap = residual.due if relays.size else 0.0
    w_mue, w_due = residual.weights_mue, residual.weight_due
    # rates >= s * delta * tau * unit * P_internal
    floor = s * delta * config.block_duration * unit * (1.0 + ECO_FLOOR_MARGIN)
    mue_target = np.where(block.ap_mask, residual.mue / blocks_remaining, 0.0)
    due_target = due_cap / blocks_remaining
    if not np.any(mue_target > 0) and due_target <= 0:
        return _zero_step(K, N, "idecrs", residual, "no-demand")
    try:
        init = block_init("idecrs", h, g, block.ap_mask, block.due_mask, mue_target, due_target, unit)
        init, omega = eco_feasible_init("idecrs", h, g, init, block.ap_mask, block.due_mask, floor,
                                        mue_cap=residual.mue, due_cap=due_cap)
    except (EfficiencyInfeasibleError, InfeasibleTargetsError) as exc:
        out = _zero_step(K, N, "idecrs", residual, "efficiency-infeasible")
        out.info["error"] = str(exc)
        return out

    def build(local):
        prog = ConicProgram()
        b = BlockBuilder(prog, "idecrs", h, g, block.ap_mask, block.due_mask, local, relay_content=due_cap > 0)
        total = [b.due_rate]
        obj = [b.due_rate * w_due]
        for k in active:
            prog.add_nonneg(residual.mue[k] - b.mue_rate[k], "mue-cap")
            total.append(b.mue_rate[k])
            obj.append(b.mue_rate[k] * w_mue[k])
        if due_cap > 0:
            prog.add_nonneg(due_cap - b.due_rate, "due-cap")
        prog.add_nonneg(vstack(total).sum() - Affine.var(b.power) * floor, "efficiency-floor")
        # the true power (not its epigraph slack) must grow, via its tangent minorant
        obj.append(b.power_minorant() * (ECO_TIE_BREAK * floor))
        prog.set_objective(vstack(obj).sum(), "max")
        return Surrogate(prog, lambda x: b.extract(x))

    try:
        sol, trace = sca_drive(build, BlockLocal.from_plan(init), config.sca_epsilon, config.sca_max_iter,
                               config.solver_accuracy)
    except InitializationError as exc:
        out = _zero_step(K, N, "idecrs", residual, "init-infeasible")
        out.info["error"] = str(exc)
        return out
    return _finish("idecrs", block, sol, unit, residual, trace, {"omega": omega, "floor": floor})


ONLINE_ALGORITHMS = ("eco", "edt", "crs")


def run_online(channels, config, algorithm: str, delta: float | None = None, s: float | None = None):
    """Run ECO, EDT or CRS over all blocks; the last block flushes every residual.

    Returns ``(TransmitPlan, [StepResult, ...])``.
    """
    if algorithm not in ONLINE_ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ONLINE_ALGORITHMS}")
    if algorithm == "eco" and delta is None:
        raise ValueError("ECO needs a calibrated efficiency delta")
    s = config.eco_s if s is None else s
    framework = "crs" if algorithm == "crs" else "idecrs"
    T, K, N = channels.h_los.shape
    unit = internal_unit(channels)
    residual = ResidualState.start(K, config.throughput_mue, config.throughput_due)
    steps = []
    for t in range(T):
        block = channels.block(t)
        remaining = T - t
        if t == T - 1:
            step = final_flush(block, residual, config, unit, framework)
        elif algorithm == "eco":
            step = eco_step(block, residual, delta, s, remaining, config, unit)
        else:
            step = edt_step(block, residual, remaining, config, unit, framework)
        step.info["residual_before"] = (residual.mue.copy(), residual.due)
        residual = step.residual
        steps.append(step)
    meta = {"algorithm": algorithm, "unit": unit, "s": s if algorithm == "eco" else None, "delta": delta}
    return TransmitPlan(framework, [st.plan for st in steps], meta), steps
