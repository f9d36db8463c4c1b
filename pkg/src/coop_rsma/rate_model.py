"""Achievable rates, block energy and post-hoc plan verification.

Noise variance is one everywhere (channels are noise-normalized).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .plan import BlockPlan, TransmitPlan


def _gain(h: np.ndarray, f: np.ndarray) -> float:
    return float(np.abs(np.vdot(h, f)) ** 2)


def common_rate(h_k, f_c, privates) -> float:
    interference = sum(_gain(h_k, f) for f in privates)
    return float(np.log2(1.0 + _gain(h_k, f_c) / (interference + 1.0)))


def private_rate(h_k, privates, k: int) -> float:
    privates = list(privates)
    interference = sum(_gain(h_k, f) for i, f in enumerate(privates) if i != k)
    return float(np.log2(1.0 + _gain(h_k, privates[k]) / (interference + 1.0)))


def relay_rate(g, f_d, k: int) -> float:
    power = np.abs(np.asarray(g) * np.asarray(f_d)) ** 2
    return float(np.log2(1.0 + power[k] / (power.sum() - power[k] + 1.0)))


def due_block_rate(beta_sums, relay_rates, due_mask=None) -> float:
    terms = np.minimum(np.asarray(beta_sums, dtype=float), np.asarray(relay_rates, dtype=float))
    if due_mask is not None:
        terms = np.where(due_mask, terms, 0.0)
    return float(np.sum(terms))


def block_energy(block: BlockPlan, tau: float) -> float:
    return tau * block.power


def relay_rates(g: np.ndarray, f_d: np.ndarray) -> np.ndarray:
    return np.array([relay_rate(g, f_d, k) for k in range(len(g))])


def idecrs_block_rates(h: np.ndarray, g: np.ndarray, block: BlockPlan, active) -> dict:
    """Common/private/relay rates of one iDeCRS block; blocked mUEs get zeros."""
    K = h.shape[0]
    active = np.asarray(active, dtype=int)
    privates = [block.f_private[i] for i in active]
    r_c = np.zeros(K)
    r_p = np.zeros(K)
    for j, k in enumerate(active):
        r_c[k] = common_rate(h[k], block.f_common, privates)
        r_p[k] = private_rate(h[k], privates, j)
    return {"common": r_c, "private": r_p, "relay": relay_rates(g, block.f_relay)}


def decrs_block_rates(h: np.ndarray, g: np.ndarray, block: BlockPlan, active) -> dict:
    """Two-layer per-mUE rates of DeCRS.

    Layer 1 of mUE ``k`` is decoded against all other ``2K - 1`` streams;
    layer 2 after cancelling only the own layer-1 stream.
    """
    K = h.shape[0]
    active = np.asarray(active, dtype=int)
    layer2 = block.f_layer2 if block.f_layer2 is not None else np.zeros_like(block.f_private)
    r1 = np.zeros(K)
    r2 = np.zeros(K)
    for k in active:
        others = sum(_gain(h[k], block.f_private[i]) + _gain(h[k], layer2[i]) for i in active if i != k)
        s1 = _gain(h[k], block.f_private[k])
        s2 = _gain(h[k], layer2[k])
        r1[k] = np.log2(1.0 + s1 / (s2 + others + 1.0))
        r2[k] = np.log2(1.0 + s2 / (others + 1.0))
    return {"layer1": r1, "layer2": r2, "relay": relay_rates(g, block.f_relay)}


def coherent_relay_rate(g: np.ndarray, f_d: np.ndarray, relays) -> float:
    relays = np.asarray(relays, dtype=int)
    return float(np.log2(1.0 + np.abs(np.sum(g[relays] * f_d[relays])) ** 2))


def crs_block_rates(h: np.ndarray, g: np.ndarray, block: BlockPlan, active, relays) -> dict:
    """Phase 1 is 1-layer RSMA; phase 2 relays the whole common codeword.

    Relays retransmit one shared codeword, so the dUE combines them
    coherently.  dUE goodput is its share of the common content times the
    bottleneck rate of the common codeword over both phases.
    """
    rates = idecrs_block_rates(h, g, block, active)
    active = np.asarray(active, dtype=int)
    relays = np.asarray(relays, dtype=int)
    content = float(np.sum(block.alpha_c) + np.sum(block.beta_c))
    phase1 = float(np.min(rates["common"][active])) if active.size else 0.0
    phase2 = coherent_relay_rate(g, block.f_relay, relays) if relays.size else 0.0
    share = float(np.sum(block.beta_c)) / content if content > 0 else 0.0
    rates["phase1"] = phase1
    rates["phase2"] = phase2
    rates["content"] = content
    rates["due"] = share * min(phase1, phase2) if relays.size else 0.0
    return rates


@dataclass
class RateReport:
    mue_rates: np.ndarray  # (T, K)
    due_rates: np.ndarray  # (T,)
    energy: np.ndarray  # (T,) joules
    delivered_mue: np.ndarray  # (K,)
    delivered_due: float
    violations: dict = field(default_factory=dict)
    max_violation: float = 0.0
    feasible: bool = True

    @property
    def total_energy(self) -> float:
        return float(np.sum(self.energy))


def _record(viol: dict, name: str, value: float) -> None:
    viol[name] = max(viol.get(name, 0.0), float(value))


def block_report(framework: str, h, g, block: BlockPlan, ap_mask, due_mask, viol: dict) -> tuple[np.ndarray, float]:
    """Delivered per-mUE rates and dUE rate of one block, recording violations."""
    K = h.shape[0]
    ap_mask = np.asarray(ap_mask, dtype=bool)
    due_mask = np.asarray(due_mask, dtype=bool)
    active = np.flatnonzero(ap_mask)
    relays = np.flatnonzero(ap_mask & due_mask)
    for name in ("alpha_c", "alpha_p", "beta_c", "beta_p"):
        _record(viol, "nonneg", max(0.0, -np.min(getattr(block, name))))
    mue = block.alpha_c + block.alpha_p
    if framework == "idecrs":
        r = idecrs_block_rates(h, g, block, active)
        load = np.sum(block.alpha_c + block.beta_c)
        for k in range(K):
            if k in active:
                _record(viol, "common", load - r["common"][k])
                _record(viol, "private", block.alpha_p[k] + block.beta_p[k] - r["private"][k])
            else:
                _record(viol, "blocked", mue[k] + block.beta_c[k] + block.beta_p[k])
        if active.size == 0:
            _record(viol, "common", load)
        due = due_block_rate(block.beta_c + block.beta_p, r["relay"], ap_mask & due_mask)
    elif framework == "decrs":
        r = decrs_block_rates(h, g, block, active)
        for k in range(K):
            if k in active:
                _record(viol, "layer1", block.alpha_c[k] + block.beta_c[k] - r["layer1"][k])
                _record(viol, "layer2", block.alpha_p[k] + block.beta_p[k] - r["layer2"][k])
            else:
                _record(viol, "blocked", mue[k] + block.beta_c[k] + block.beta_p[k])
        due = due_block_rate(block.beta_c + block.beta_p, r["relay"], ap_mask & due_mask)
    elif framework == "crs":
        r = crs_block_rates(h, g, block, active, relays)
        content = r["content"]
        for k in range(K):
            if k in active:
                _record(viol, "common", content - r["common"][k])
                _record(viol, "private", block.alpha_p[k] + block.beta_p[k] - r["private"][k])
            else:
                _record(viol, "blocked", mue[k] + block.beta_p[k])
        if active.size == 0:
            _record(viol, "common", content)
        due_content = float(np.sum(block.beta_c))
        if due_content > 0:
            if relays.size == 0:
                _record(viol, "relay", due_content)
            else:
                _record(viol, "relay", content - r["phase2"])
        # dUE receives its allocated content when both phases carry the codeword
        due = float(np.sum(block.beta_c)) if relays.size else 0.0
    else:
        raise ValueError(framework)
    mue = np.where(ap_mask, mue, 0.0)
    return mue, due


def verify_plan(plan: TransmitPlan, channels, config, tol: float = 1e-5, throughput: bool = True) -> RateReport:
    """Recompute every original constraint from the primal plan variables."""
    T, K, N = channels.h_los.shape
    if plan.n_blocks != T:
        raise ValueError(f"plan has {plan.n_blocks} blocks, channels have {T}")
    for b in plan.blocks:
        if b.f_private.shape != (K, N) or b.f_common.shape != (N,) or b.f_relay.shape != (K,):
            raise ValueError("plan block dimensions do not match the channel realization")
    h_all, g_all = channels.h, channels.g
    viol: dict = {}
    mue_rates = np.zeros((T, K))
    due_rates = np.zeros(T)
    energy = np.zeros(T)
    for t, block in enumerate(plan.blocks):
        mue_rates[t], due_rates[t] = block_report(
            plan.framework, h_all[t], g_all[t], block, channels.ap_mask[t], channels.due_mask[t], viol
        )
        energy[t] = block_energy(block, config.block_duration)
    delivered_mue = mue_rates.sum(axis=0)
    delivered_due = float(due_rates.sum())
    if throughput:
        _record(viol, "throughput_mue", np.max(config.throughput_mue - delivered_mue, initial=0.0))
        _record(viol, "throughput_due", config.throughput_due - delivered_due)
    max_violation = max([0.0, *viol.values()])
    return RateReport(mue_rates, due_rates, energy, delivered_mue, delivered_due, viol, max_violation, max_violation <= tol)
