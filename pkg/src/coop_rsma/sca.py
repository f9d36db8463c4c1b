"""Linearized quadratic-over-linear terms and the SCA driver."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .conic import DEFAULT_ACCURACY, DEFAULT_MAX_ITER, ConicProgram


class InitializationError(RuntimeError):
    """The first surrogate is infeasible, so the initial point was not admissible."""


@dataclass(frozen=True)
class QolLinearization:
    """Affine under-estimator ``coef_f . [Re f, Im f] + coef_gamma * gamma``
    of ``|h^H f|^2 / gamma`` around a local point."""

    coef_f: np.ndarray
    coef_gamma: float
    base_value: float

    def __call__(self, f, gamma: float) -> float:
        f = np.atleast_1d(np.asarray(f, dtype=complex))
        x = np.concatenate([f.real, f.imag])
        return float(self.coef_f @ x + self.coef_gamma * gamma)


def taylor_qol(h, f_local, gamma_local: float) -> QolLinearization:
    """First-order expansion of ``|h^H f|^2 / gamma`` at ``(f_local, gamma_local)``.

    ``2 Re{f_l^H h h^H f} / gamma_l - |h^H f_l|^2 / gamma_l^2 * gamma``.
    The function is jointly convex for ``gamma > 0``, so the result is a
    global under-estimator that is exact at the base point.
    """
    if not gamma_local > 0:
        raise ValueError(f"gamma_local must be positive, got {gamma_local}")
    h = np.atleast_1d(np.asarray(h, dtype=complex))
    f_local = np.atleast_1d(np.asarray(f_local, dtype=complex))
    inner = np.vdot(h, f_local)  # h^H f_l
    c = h * inner  # h h^H f_l
    coef_f = (2.0 / gamma_local) * np.concatenate([c.real, c.imag])
    base = float(np.abs(inner) ** 2)
    return QolLinearization(coef_f, -base / gamma_local**2, base / gamma_local)


def qol(h, f, gamma: float) -> float:
    h = np.atleast_1d(np.asarray(h, dtype=complex))
    f = np.atleast_1d(np.asarray(f, dtype=complex))
    return float(np.abs(np.vdot(h, f)) ** 2 / gamma)


@dataclass
class ScaTrace:
    objective: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    solver_iterations: list = field(default_factory=list)
    termination: str = ""
    sense: str = "min"
    wall_time: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.objective)

    def is_monotone(self, slack: float = 1e-6) -> bool:
        obj = np.asarray(self.objective, dtype=float)
        if obj.size < 2:
            return True
        step = np.diff(obj)
        scale = np.maximum(1.0, np.abs(obj[:-1]))
        if self.sense == "min":
            return bool(np.all(step <= slack * scale))
        return bool(np.all(step >= -slack * scale))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "residual", "solver_iterations"])
            for i, (o, r, s) in enumerate(zip(self.objective, self.residual, self.solver_iterations)):
                w.writerow([i, repr(float(o)), repr(float(r)), s])
            fh.write(f"# termination={self.termination}\n")


@dataclass
class Surrogate:
    """One convex surrogate: the program and a decoder from solver output to
    ``(solution, next_local_point)``."""

    program: ConicProgram
    extract: Callable[[np.ndarray], tuple[Any, Any]]
    exact: bool = False  # no linearized terms: one solve is the answer


def _worse(value: float, ref: float, sense: str) -> bool:
    return value > ref if sense == "min" else value < ref


def sca_drive(
    builder: Callable[[Any], Surrogate],
    init: Any,
    epsilon: float = 1e-3,
    max_iter: int = 50,
    accuracy: float = DEFAULT_ACCURACY,
    solver_max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[Any, ScaTrace]:
    """Iterate build -> solve -> re-linearize until the relative objective
    change drops below ``epsilon``.  A step that worsens the objective is
    discarded and ends the loop, so the recorded trace is monotone."""
    trace = ScaTrace()
    start = time.perf_counter()
    local = init
    best = None
    for it in range(max_iter):
        surrogate = builder(local)
        trace.sense = surrogate.program.sense
        outcome = surrogate.program.solve(accuracy, solver_max_iter)
        if not outcome.optimal:
            if it == 0:
                raise InitializationError(f"first surrogate returned {outcome.status} ({outcome.raw_status})")
            trace.termination = outcome.status
            break
        prev = trace.objective[-1] if trace.objective else None
        if prev is not None and _worse(outcome.objective, prev, trace.sense):
            # exact SCA never worsens; a worse step is solver noise at the
            # fixed point, so keep the previous iterate
            change = abs(outcome.objective - prev)
            trace.termination = "converged" if change <= epsilon * max(abs(prev), 1e-12) else "no-improvement"
            break
        solution, local = surrogate.extract(outcome.x)
        best = solution
        trace.objective.append(outcome.objective)
        trace.residual.append(outcome.max_residual)
        trace.solver_iterations.append(outcome.iterations)
        if surrogate.exact:
            trace.termination = "exact"
            break
        if prev is not None:
            change = abs(outcome.objective - prev)
            if change <= epsilon * max(abs(prev), 1e-12) or change <= 1e-12:
                trace.termination = "converged"
                break
    else:
        trace.termination = "max_iter"
    trace.wall_time = time.perf_counter() - start
    return best, trace
