"""Per-block convex surrogates for the three cooperative frameworks.

Everything here works in *internal units*: channels are multiplied by
``sqrt(unit)`` and precoders divided by it, so ``h^H f`` is unchanged while
the solver sees powers of order one.  :func:`to_physical` converts back.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..conic import (
    Affine,
    ConicProgram,
    add_exp_rate_constraint,
    add_quadratic_epigraph,
    lift,
    lift_inner,
    unlift,
    vstack,
)
from ..plan import BlockPlan
from ..sca import taylor_qol


@dataclass
class BlockLocal:
    """Local point of one block: precoders in internal units."""

    f_common: np.ndarray
    f_private: np.ndarray
    f_relay: np.ndarray
    f_layer2: np.ndarray | None = None

    @classmethod
    def from_plan(cls, block: BlockPlan, unit: float = 1.0) -> "BlockLocal":
        s = 1.0 / np.sqrt(unit)
        return cls(
            block.f_common * s,
            block.f_private * s,
            block.f_relay * s,
            None if block.f_layer2 is None else block.f_layer2 * s,
        )


@dataclass
class LocalPoint:
    """Local points of all blocks in scope with their refreshed gamma slacks."""

    blocks: list
    gammas: list = field(default_factory=list)


def _gain(h, f) -> float:
    return float(np.abs(np.vdot(h, f)) ** 2)


def exact_gammas(framework: str, h, g, local: BlockLocal, active, relays) -> dict:
    """Interference-plus-noise values realized by the local precoders."""
    K = h.shape[0]
    out = {name: np.ones(K) for name in ("c", "p", "d", "l1", "l2")}
    for k in active:
        if framework == "decrs":
            others = sum(_gain(h[k], local.f_private[i]) + _gain(h[k], local.f_layer2[i]) for i in active if i != k)
            out["l1"][k] = 1.0 + others + _gain(h[k], local.f_layer2[k])
            out["l2"][k] = 1.0 + others
        else:
            inter = [_gain(h[k], local.f_private[i]) for i in active]
            out["c"][k] = 1.0 + sum(inter)
            out["p"][k] = 1.0 + sum(inter) - _gain(h[k], local.f_private[k])
    rp = np.abs(g * local.f_relay) ** 2
    for k in relays:
        out["d"][k] = 1.0 + rp[relays].sum() - rp[k]
    return out


class BlockBuilder:
    """Adds one block's variables and surrogate constraints to a program.

    After construction, ``mue_rate[k]`` and ``due_rate`` are affine
    expressions of the delivered rates and ``power`` is the epigraph
    variable of the block's transmit power.
    """

    def __init__(
        self,
        prog: ConicProgram,
        framework: str,
        h: np.ndarray,
        g: np.ndarray,
        ap_mask,
        due_mask,
        local: BlockLocal,
        tag: str = "",
        relay_content: bool = True,
    ):
        self.prog = prog
        self.framework = framework
        self.h = h
        self.g = g
        self.K, self.N = h.shape
        self.active = np.flatnonzero(ap_mask)
        self.relays = np.flatnonzero(np.asarray(ap_mask) & np.asarray(due_mask))
        if not relay_content:
            self.relays = self.relays[:0]
        self.local = local
        self.tag = tag
        self.gam = exact_gammas(framework, h, g, local, self.active, self.relays)
        self.mue_rate: dict = {}
        self.due_rate = Affine.constant([0.0])
        self.power = None
        self._vars: dict = {}
        if self.active.size:
            getattr(self, f"_build_{framework}")()

    # helpers -----------------------------------------------------------
    def _v(self, name: str, size: int = 1) -> np.ndarray:
        idx = self.prog.add_variable(f"{self.tag}{name}", size)
        self._vars[name] = idx
        return idx

    def _nonneg(self, idx) -> None:
        self.prog.add_nonneg(Affine.var(idx), "split>=0")

    def _inner(self, h, f_idx) -> Affine:
        return Affine.linear(lift_inner(h), f_idx)

    def _rate(self, rate_idx, h, f_idx, f_local, gamma_idx, gamma_local, label) -> None:
        lin = taylor_qol(h, f_local, gamma_local)
        rhs = Affine.linear(np.concatenate([lin.coef_f, [lin.coef_gamma]])[None, :], np.concatenate([f_idx, gamma_idx]))
        add_exp_rate_constraint(self.prog, rate_idx, rhs, label)

    def _interference(self, gamma_idx, terms: list) -> None:
        # sum of |h^H f|^2 over terms <= gamma - 1
        expr = vstack(terms) if terms else Affine.constant(np.zeros(0))
        bound = Affine.var(gamma_idx) - 1.0
        self.prog.add_cone("rsoc", vstack([bound, Affine.constant([0.5]), expr]), "interference")

    def _power(self, f_indices: list) -> None:
        p = self._v("P")
        self.power = p
        self._power_f = list(f_indices)
        allf = np.concatenate(f_indices) if f_indices else np.zeros(0, dtype=np.int64)
        add_quadratic_epigraph(self.prog, Affine.var(allf), p)

    def _local_value(self, idx) -> np.ndarray:
        """Local-point precoder stored in the variable block ``idx``."""
        name = next(n for n, v in self._vars.items() if v is idx)
        loc = self.local
        if name == "fc":
            return np.atleast_1d(loc.f_common)
        if name == "fd":
            return loc.f_relay[self.relays]
        head, k = name.rstrip("0123456789"), int(name[len(name.rstrip("0123456789")):])
        if head in ("fp", "f1_"):
            return loc.f_private[k]
        if head == "f2_":
            return loc.f_layer2[k]
        return np.atleast_1d(loc.f_relay[k])  # fd{k}

    def power_minorant(self) -> Affine:
        """First-order under-estimator of the true precoder power, tight at the local point."""
        if self.power is None or not self._power_f:
            return Affine.constant([0.0])
        idx = np.concatenate(self._power_f)
        base = np.concatenate([lift(self._local_value(i)) for i in self._power_f])
        return Affine.linear(2.0 * base[None, :], idx) - float(base @ base)

    def _relay_phase(self, beta_of) -> list:
        """Treat-as-noise relaying (iDeCRS and DeCRS).  Returns relay precoder indices."""
        R = self.relays
        if not R.size:
            return []
        fd = {k: self._v(f"fd{k}", 2) for k in R}
        r2 = {k: self._v(f"R2_{k}") for k in R}
        gd = {k: self._v(f"gd{k}") for k in R}
        mu = {k: self._v(f"mu{k}") for k in R}
        due_terms = []
        for k in R:
            hk = np.array([np.conj(self.g[k])])
            self._rate(r2[k], hk, fd[k], self.local.f_relay[k], gd[k], self.gam["d"][k], "relay")
            terms = [self._inner(np.array([np.conj(self.g[i])]), fd[i]) for i in R if i != k]
            self._interference(gd[k], terms)
            self.prog.add_nonneg(beta_of(k) - Affine.var(mu[k]), "mu<=beta")
            self.prog.add_nonneg(Affine.var(r2[k]) - Affine.var(mu[k]), "mu<=R2")
            self.prog.add_nonneg(Affine.var(mu[k]), "mu>=0")
            due_terms.append(Affine.var(mu[k]))
        self.due_rate = vstack(due_terms).sum()
        return [fd[k] for k in R]

    # frameworks --------------------------------------------------------
    def _build_idecrs(self):
        A, h, loc = self.active, self.h, self.local
        fc = self._v("fc", 2 * self.N)
        fp = {k: self._v(f"fp{k}", 2 * self.N) for k in A}
        ac = {k: self._v(f"ac{k}") for k in A}
        ap = {k: self._v(f"ap{k}") for k in A}
        bc = {k: self._v(f"bc{k}") for k in self.relays}
        bp = {k: self._v(f"bp{k}") for k in self.relays}
        for d in (ac, ap, bc, bp):
            for idx in d.values():
                self._nonneg(idx)
        load = vstack([Affine.var(ac[k]) for k in A] + [Affine.var(bc[k]) for k in self.relays]).sum()
        for k in A:
            rc, rp = self._v(f"Rc{k}"), self._v(f"Rp{k}")
            gc, gp = self._v(f"gc{k}"), self._v(f"gp{k}")
            self.prog.add_nonneg(Affine.var(rc) - load, "common-rate")
            priv = Affine.var(ap[k]) + (Affine.var(bp[k]) if k in bp else 0.0)
            self.prog.add_nonneg(Affine.var(rp) - priv, "private-rate")
            self._rate(rc, h[k], fc, loc.f_common, gc, self.gam["c"][k], "common")
            self._interference(gc, [self._inner(h[k], fp[i]) for i in A])
            self._rate(rp, h[k], fp[k], loc.f_private[k], gp, self.gam["p"][k], "private")
            self._interference(gp, [self._inner(h[k], fp[i]) for i in A if i != k])
            self.mue_rate[k] = Affine.var(ac[k]) + Affine.var(ap[k])
        fds = self._relay_phase(lambda k: Affine.var(bc[k]) + Affine.var(bp[k]))
        self._power([fc, *fp.values(), *fds])

    def _build_decrs(self):
        A, h, loc = self.active, self.h, self.local
        f1 = {k: self._v(f"f1_{k}", 2 * self.N) for k in A}
        f2 = {k: self._v(f"f2_{k}", 2 * self.N) for k in A}
        a1 = {k: self._v(f"a1_{k}") for k in A}
        a2 = {k: self._v(f"a2_{k}") for k in A}
        b1 = {k: self._v(f"b1_{k}") for k in self.relays}
        for d in (a1, a2, b1):
            for idx in d.values():
                self._nonneg(idx)
        for k in A:
            r1, r2 = self._v(f"R1_{k}"), self._v(f"R2l_{k}")
            g1, g2 = self._v(f"g1_{k}"), self._v(f"g2_{k}")
            lay1 = Affine.var(a1[k]) + (Affine.var(b1[k]) if k in b1 else 0.0)
            self.prog.add_nonneg(Affine.var(r1) - lay1, "layer1")
            self.prog.add_nonneg(Affine.var(r2) - Affine.var(a2[k]), "layer2")
            others = []
            for i in A:
                if i != k:
                    others += [self._inner(h[k], f1[i]), self._inner(h[k], f2[i])]
            self._rate(r1, h[k], f1[k], loc.f_private[k], g1, self.gam["l1"][k], "layer1")
            self._interference(g1, [self._inner(h[k], f2[k])] + others)
            self._rate(r2, h[k], f2[k], loc.f_layer2[k], g2, self.gam["l2"][k], "layer2")
            self._interference(g2, others)
            self.mue_rate[k] = Affine.var(a1[k]) + Affine.var(a2[k])
        fds = self._relay_phase(lambda k: Affine.var(b1[k]))
        self._power([*f1.values(), *f2.values(), *fds])

    def _build_crs(self):
        A, h, loc, R = self.active, self.h, self.local, self.relays
        fc = self._v("fc", 2 * self.N)
        fp = {k: self._v(f"fp{k}", 2 * self.N) for k in A}
        ac = {k: self._v(f"ac{k}") for k in A}
        ap = {k: self._v(f"ap{k}") for k in A}
        for d in (ac, ap):
            for idx in d.values():
                self._nonneg(idx)
        terms = [Affine.var(ac[k]) for k in A]
        if R.size:
            b = self._v("bc")
            self._nonneg(b)
            terms.append(Affine.var(b))
        content = vstack(terms).sum()
        for k in A:
            rc, rp = self._v(f"Rc{k}"), self._v(f"Rp{k}")
            gc, gp = self._v(f"gc{k}"), self._v(f"gp{k}")
            self.prog.add_nonneg(Affine.var(rc) - content, "common-rate")
            self.prog.add_nonneg(Affine.var(rp) - Affine.var(ap[k]), "private-rate")
            self._rate(rc, h[k], fc, loc.f_common, gc, self.gam["c"][k], "common")
            self._interference(gc, [self._inner(h[k], fp[i]) for i in A])
            self._rate(rp, h[k], fp[k], loc.f_private[k], gp, self.gam["p"][k], "private")
            self._interference(gp, [self._inner(h[k], fp[i]) for i in A if i != k])
            self.mue_rate[k] = Affine.var(ac[k]) + Affine.var(ap[k])
        fds = []
        if R.size:
            fd = self._v("fd", 2 * R.size)
            rr = self._v("Rrelay")
            # whole common codeword must reach the dUE through the coherent relay sum
            self.prog.add_nonneg(Affine.var(rr) - content, "relay-codeword")
            heff = np.conj(self.g[R])
            lin = taylor_qol(heff, loc.f_relay[R], 1.0)
            rhs = Affine.linear(lin.coef_f[None, :], fd, [lin.coef_gamma])
            add_exp_rate_constraint(self.prog, rr, rhs, "coherent-relay")
            self.due_rate = Affine.var(b)
            fds = [fd]
        self._power([fc, *fp.values(), *fds])

    # decoding ----------------------------------------------------------
    def _cplx(self, x, name) -> np.ndarray:
        return unlift(x[self._vars[name]])

    def _scalar(self, x, name) -> float:
        idx = self._vars.get(name)
        return 0.0 if idx is None else float(x[idx][0])

    def extract(self, x: np.ndarray) -> tuple[BlockPlan, BlockLocal]:
        """Block plan in internal units and the next local point."""
        K, N = self.K, self.N
        fw = self.framework
        plan = BlockPlan.zeros(K, N, fw)
        slacks = {}
        if not self.active.size:
            return plan, BlockLocal(plan.f_common, plan.f_private, plan.f_relay, plan.f_layer2)
        s = lambda n: self._scalar(x, n)
        if fw == "decrs":
            for k in self.active:
                plan.f_private[k] = self._cplx(x, f"f1_{k}")
                plan.f_layer2[k] = self._cplx(x, f"f2_{k}")
                plan.alpha_c[k] = s(f"a1_{k}")
                plan.alpha_p[k] = s(f"a2_{k}")
                plan.beta_c[k] = s(f"b1_{k}")
            names = {"R1": "R1_", "R2l": "R2l_", "gamma1": "g1_", "gamma2": "g2_"}
        else:
            plan.f_common = self._cplx(x, "fc")
            for k in self.active:
                plan.f_private[k] = self._cplx(x, f"fp{k}")
                plan.alpha_c[k] = s(f"ac{k}")
                plan.alpha_p[k] = s(f"ap{k}")
                if fw == "idecrs":
                    plan.beta_c[k] = s(f"bc{k}")
                    plan.beta_p[k] = s(f"bp{k}")
            names = {"Rc": "Rc", "Rp": "Rp", "gamma_c": "gc", "gamma_p": "gp"}
        for key, pre in names.items():
            slacks[key] = np.array([s(f"{pre}{k}") if k in self.active else 0.0 for k in range(K)])
        if fw == "crs":
            if self.relays.size:
                fd = self._cplx(x, "fd")
                plan.f_relay[self.relays] = fd
                # dUE content sits in the single common codeword; record it on the relays evenly
                plan.beta_c[self.relays] = s("bc") / self.relays.size
                slacks["R_relay"] = np.array([s("Rrelay")])
        else:
            for k in self.relays:
                plan.f_relay[k] = complex(*x[self._vars[f"fd{k}"]])
            slacks["R2"] = np.array([s(f"R2_{k}") for k in range(K)])
            slacks["mu"] = np.array([s(f"mu{k}") for k in range(K)])
            slacks["gamma_d"] = np.array([s(f"gd{k}") for k in range(K)])
        plan.slacks = slacks
        local = BlockLocal(plan.f_common.copy(), plan.f_private.copy(), plan.f_relay.copy(),
                           None if plan.f_layer2 is None else plan.f_layer2.copy())
        return plan, local


def to_physical(block: BlockPlan, unit: float) -> BlockPlan:
    out = block.scaled(np.sqrt(unit))
    return out
