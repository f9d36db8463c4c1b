"""Canonical cone programs and a Clarabel-backed solver adapter.

A :class:`ConicProgram` holds a linear objective over a registry of named
real variables plus a list of cone blocks.  Each block constrains an affine
expression ``G x + g`` to lie in one of

* ``zero``          : ``G x + g == 0``
* ``nonneg``        : ``G x + g >= 0``
* ``soc``           : ``(t, w)`` with ``||w|| <= t``
* ``rsoc``          : ``(u, v, w)`` with ``2 u v >= ||w||^2``, ``u, v >= 0``
* ``exp``           : ``(x, y, z)`` with ``y exp(x / y) <= z``, ``y > 0``

Complex model quantities enter through :func:`lift_inner`, which maps
``h^H f`` to a real ``(re, im)`` pair acting on ``[Re f, Im f]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import clarabel
import numpy as np
import scipy.sparse as sp

CONE_KINDS = ("zero", "nonneg", "soc", "rsoc", "exp")

DEFAULT_ACCURACY = 1e-7
DEFAULT_MAX_ITER = 200


class Affine:
    """Sparse affine vector expression ``A x + c`` over program variables.

    The column space is the global variable index space of the program the
    expression is used in, so expressions can be built before all variables
    exist.
    """

    __slots__ = ("rows", "cols", "vals", "const")

    def __init__(self, rows, cols, vals, const):
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=float)
        self.const = np.atleast_1d(np.asarray(const, dtype=float))

    @property
    def size(self) -> int:
        return self.const.size

    @classmethod
    def var(cls, idx) -> "Affine":
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        return cls(np.arange(idx.size), idx, np.ones(idx.size), np.zeros(idx.size))

    @classmethod
    def constant(cls, value) -> "Affine":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls([], [], [], value)

    @classmethod
    def linear(cls, matrix, idx, const=None) -> "Affine":
        """Expression ``matrix @ x[idx] + const`` for a dense ``matrix``."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        idx = np.asarray(idx, dtype=np.int64)
        if matrix.shape[1] != idx.size:
            raise ValueError(
                f"matrix has {matrix.shape[1]} columns but {idx.size} variables given"
            )
        r, c = np.nonzero(matrix)
        if const is None:
            const = np.zeros(matrix.shape[0])
        return cls(r, idx[c], matrix[r, c], const)

    def __add__(self, other) -> "Affine":
        if not isinstance(other, Affine):
            other = Affine.constant(np.broadcast_to(other, self.const.shape))
        if other.size != self.size:
            if other.size == 1 and not other.rows.size:
                other = Affine.constant(np.full(self.size, other.const[0]))
            elif self.size == 1 and not self.rows.size:
                return other + self
            else:
                raise ValueError(f"size mismatch: {self.size} vs {other.size}")
        return Affine(
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.vals, other.vals]),
            self.const + other.const,
        )

    __radd__ = __add__

    def __neg__(self) -> "Affine":
        return Affine(self.rows, self.cols, -self.vals, -self.const)

    def __sub__(self, other) -> "Affine":
        return self + (-other if isinstance(other, Affine) else -np.asarray(other))

    def __rsub__(self, other) -> "Affine":
        return (-self) + other

    def __mul__(self, scalar) -> "Affine":
        scalar = float(scalar)
        return Affine(self.rows, self.cols, self.vals * scalar, self.const * scalar)

    __rmul__ = __mul__

    def sum(self) -> "Affine":
        return Affine(np.zeros_like(self.rows), self.cols, self.vals, [self.const.sum()])

    def __getitem__(self, key) -> "Affine":
        picks = np.arange(self.size)[key]
        picks = np.atleast_1d(picks)
        remap = -np.ones(self.size, dtype=np.int64)
        remap[picks] = np.arange(picks.size)
        keep = np.isin(self.rows, picks)
        # duplicated picks are not supported by the remap; keep it simple
        if np.unique(picks).size != picks.size:
            raise ValueError("duplicate row selection")
        return Affine(remap[self.rows[keep]], self.cols[keep], self.vals[keep], self.const[picks])

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        out = self.const.copy()
        np.add.at(out, self.rows, self.vals * x[self.cols])
        return out

    def to_sparse(self, n: int) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.size, n))


def vstack(exprs: Iterable[Affine]) -> Affine:
    rows, cols, vals, const = [], [], [], []
    offset = 0
    for e in exprs:
        rows.append(e.rows + offset)
        cols.append(e.cols)
        vals.append(e.vals)
        const.append(e.const)
        offset += e.size
    if not const:
        return Affine([], [], [], np.zeros(0))
    return Affine(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), np.concatenate(const))


def lift_inner(h: np.ndarray) -> np.ndarray:
    """Real ``2 x 2N`` matrix mapping ``[Re f, Im f]`` to ``(Re h^H f, Im h^H f)``."""
    h = np.asarray(h, dtype=complex)
    return np.block([[h.real[None, :], h.imag[None, :]], [-h.imag[None, :], h.real[None, :]]])


def lift(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    return np.concatenate([f.real, f.imag])


def unlift(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.size // 2
    return x[:n] + 1j * x[n:]


@dataclass
class ConeBlock:
    kind: str
    expr: Affine
    label: str = ""

    def residual(self, x: np.ndarray) -> float:
        """Distance-like violation of the cone membership at ``x`` (0 when inside)."""
        v = self.expr.evaluate(x)
        return cone_violation(self.kind, v)


def cone_violation(kind: str, v: np.ndarray) -> float:
    if kind == "zero":
        return float(np.max(np.abs(v), initial=0.0))
    if kind == "nonneg":
        return float(max(0.0, -np.min(v, initial=0.0)))
    if kind == "soc":
        return float(max(0.0, np.linalg.norm(v[1:]) - v[0]))
    if kind == "rsoc":
        u, w, rest = v[0], v[1], v[2:]
        return float(max(0.0, -u, -w, np.linalg.norm(np.concatenate([[u - w], np.sqrt(2.0) * rest])) - (u + w)))
    if kind == "exp":
        x, y, z = v
        if y <= 0:
            # closure of the cone at y = 0 is {x <= 0, z >= 0}
            return float(max(0.0, -y) + max(0.0, x) + max(0.0, -z))
        return float(max(0.0, y * np.exp(min(x / y, 700.0)) - z))
    raise ValueError(f"unknown cone kind {kind!r}")


@dataclass
class SolveOutcome:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    max_residual: float
    raw_status: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class ConicProgram:
    """Linear objective over named real variables with cone constraint blocks."""

    n: int = 0
    names: dict = field(default_factory=dict)
    blocks: list = field(default_factory=list)
    objective: Affine = field(default_factory=lambda: Affine.constant([0.0]))
    sense: str = "min"

    def add_variable(self, name: str, size: int = 1) -> np.ndarray:
        if name in self.names:
            raise KeyError(f"variable {name!r} already registered")
        idx = np.arange(self.n, self.n + size)
        self.names[name] = idx
        self.n += size
        return idx

    def var(self, name: str) -> Affine:
        return Affine.var(self.names[name])

    def add_cone(self, kind: str, expr: Affine, label: str = "") -> int:
        if kind not in CONE_KINDS:
            raise ValueError(f"unknown cone kind {kind!r}")
        if expr.cols.size and expr.cols.max() >= self.n:
            raise ValueError(f"constraint {label!r} references an unregistered variable")
        if kind == "exp" and expr.size != 3:
            raise ValueError("exponential cone blocks have dimension 3")
        if kind == "soc" and expr.size < 1:
            raise ValueError("second-order cone needs at least the bound coordinate")
        if kind == "rsoc" and expr.size < 2:
            raise ValueError("rotated cone needs both bound coordinates")
        self.blocks.append(ConeBlock(kind, expr, label))
        return len(self.blocks) - 1

    def add_nonneg(self, expr: Affine, label: str = "") -> int:
        return self.add_cone("nonneg", expr, label)

    def add_equal(self, expr: Affine, label: str = "") -> int:
        return self.add_cone("zero", expr, label)

    def set_objective(self, expr: Affine, sense: str = "min") -> None:
        if expr.size != 1:
            raise ValueError("objective must be scalar")
        if sense not in ("min", "max"):
            raise ValueError(sense)
        self.objective = expr
        self.sense = sense

    def value(self, x: np.ndarray, name: str) -> np.ndarray:
        return x[self.names[name]]

    def max_residual(self, x: np.ndarray) -> float:
        return max((b.residual(x) for b in self.blocks), default=0.0)

    def solve(self, accuracy: float = DEFAULT_ACCURACY, max_iter: int = DEFAULT_MAX_ITER) -> SolveOutcome:
        return solve(self, accuracy, max_iter)

    def dump_cbf(self, path) -> None:
        """Write the program in the Conic Benchmark Format (CBF v3)."""
        write_cbf(self, path)


def add_quadratic_epigraph(program: ConicProgram, expr: Affine, bound) -> int:
    """Encode ``||expr||^2 <= bound`` as a rotated second-order cone.

    ``bound`` is either a registered variable name, an index array of size one,
    or a scalar :class:`Affine`.
    """
    if isinstance(bound, str):
        bound = program.var(bound)
    elif not isinstance(bound, Affine):
        bound = Affine.var(bound)
    if bound.size != 1:
        raise ValueError("epigraph bound must be scalar")
    # 2 * (bound) * (1/2) >= ||expr||^2
    half = Affine.constant([0.5])
    return program.add_cone("rsoc", vstack([bound, half, expr]), "quad-epigraph")


def add_exp_rate_constraint(program: ConicProgram, rate, rhs: Affine, label: str = "rate") -> int:
    """Encode ``2**rate - 1 <= rhs`` as ``exp(rate ln 2) <= 1 + rhs``."""
    if isinstance(rate, str):
        rate = program.var(rate)
    elif not isinstance(rate, Affine):
        rate = Affine.var(rate)
    if not isinstance(rhs, Affine):
        rhs = Affine.constant(np.atleast_1d(rhs))
    return program.add_cone(
        "exp", vstack([rate * np.log(2.0), Affine.constant([1.0]), rhs + 1.0]), label
    )


_STATUS_MAP = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
}


def _assemble(program: ConicProgram):
    """Clarabel data: rotated cones are rewritten as plain second-order cones."""
    n = program.n
    mats, rhs, cones = [], [], []
    zero = [b for b in program.blocks if b.kind == "zero"]
    nonneg = [b for b in program.blocks if b.kind == "nonneg"]
    others = [b for b in program.blocks if b.kind not in ("zero", "nonneg")]
    for group, cone in ((zero, clarabel.ZeroConeT), (nonneg, clarabel.NonnegativeConeT)):
        if group:
            e = vstack(b.expr for b in group)
            mats.append(e.to_sparse(n))
            rhs.append(e.const)
            cones.append(cone(e.size))
    for b in others:
        e = b.expr
        if b.kind == "rsoc":
            # 2uv >= ||w||^2  <=>  ||(u - v, sqrt2 w)|| <= u + v
            u, v, w = e[0], e[1], e[2:] if e.size > 2 else None
            parts = [u + v, u - v]
            if w is not None:
                parts.append(w * np.sqrt(2.0))
            e = vstack(parts)
            cones.append(clarabel.SecondOrderConeT(e.size))
        elif b.kind == "soc":
            cones.append(clarabel.SecondOrderConeT(e.size))
        else:
            cones.append(clarabel.ExponentialConeT())
        mats.append(e.to_sparse(n))
        rhs.append(e.const)
    if mats:
        G = sp.vstack(mats).tocsc()
        g = np.concatenate(rhs)
    else:
        G = sp.csc_matrix((0, n))
        g = np.zeros(0)
    # cone membership of G x + g  <=>  s = b - A x with A = -G, b = g
    return -G, g, cones


# interior-point runs that stall at tight tolerances are retried this many
# times, each with the tolerances loosened tenfold
RELAX_STEPS = 2


def _clarabel(program: ConicProgram, A, b, cones, q, accuracy: float, max_iter: int):
    n = program.n
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = accuracy * 1e-1
    settings.tol_gap_rel = accuracy * 1e-1
    settings.tol_feas = accuracy * 1e-1
    settings.presolve_enable = False
    P = sp.csc_matrix((n, n))
    return clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()


def solve(program: ConicProgram, accuracy: float = DEFAULT_ACCURACY, max_iter: int = DEFAULT_MAX_ITER) -> SolveOutcome:
    n = program.n
    q = np.zeros(n)
    np.add.at(q, program.objective.cols, program.objective.vals)
    sign = 1.0 if program.sense == "min" else -1.0
    A, b, cones = _assemble(program)
    iterations = 0
    for step in range(RELAX_STEPS + 1):
        sol = _clarabel(program, A, b, cones, sign * q, accuracy * 10.0**step, max_iter)
        iterations += int(sol.iterations)
        raw = str(sol.status)
        status = _STATUS_MAP.get(raw, "numerical_limit")
        if status != "numerical_limit":
            break
    if status != "optimal":
        return SolveOutcome(status, None, float("nan"), iterations, float("nan"), raw)
    x = np.asarray(sol.x, dtype=float)
    obj = float(program.objective.evaluate(x)[0])
    return SolveOutcome(status, x, obj, iterations, program.max_residual(x), raw)


def write_cbf(program: ConicProgram, path) -> None:
    """Dump to CBF text.  Rotated cones use the native ``Q``/``QR`` keys and the
    exponential cone is written as ``EXP`` with CBF's ``(z, y, x)`` ordering."""
    kind_key = {"zero": "L=", "nonneg": "L+", "soc": "Q", "rsoc": "QR", "exp": "EXP"}
    rows_a, rows_b, cones = [], [], []
    offset = 0
    for blk in program.blocks:
        e = blk.expr
        order = np.arange(e.size)
        if blk.kind == "exp":
            order = np.array([2, 1, 0])
        inv = np.empty_like(order)
        inv[order] = np.arange(order.size)
        for r, c, v in zip(e.rows, e.cols, e.vals):
            rows_a.append((offset + inv[r], c, v))
        for r in range(e.size):
            if e.const[order[r]] != 0.0:
                rows_b.append((offset + r, e.const[order[r]]))
        cones.append((kind_key[blk.kind], e.size))
        offset += e.size
    lines = ["VER", "3", "", "OBJSENSE", program.sense.upper(), "", "VAR", f"{program.n} 1", f"F {program.n}", ""]
    lines += ["CON", f"{offset} {len(cones)}"] + [f"{k} {m}" for k, m in cones] + [""]
    obj = program.objective
    q = np.zeros(program.n)
    np.add.at(q, obj.cols, obj.vals)
    nz = np.nonzero(q)[0]
    lines += ["OBJACOORD", str(nz.size)] + [f"{j} {q[j]!r}" for j in nz] + [""]
    if obj.const[0] != 0.0:
        lines += ["OBJBCOORD", repr(float(obj.const[0])), ""]
    lines += ["ACOORD", str(len(rows_a))] + [f"{r} {c} {v!r}" for r, c, v in rows_a] + [""]
    lines += ["BCOORD", str(len(rows_b))] + [f"{r} {v!r}" for r, v in rows_b] + [""]
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
