"""Feasible starting points for the SCA runs.

Private streams start from the SDMA minimum-power beamformers, the common
stream from the dominant left singular vector of the block channel matrix,
and relays from 0 dBm (raised by scalar power control when that is not
enough to carry the assigned dUE share).
"""
from __future__ import annotations

import numpy as np

from ..plan import BlockPlan
from ..rate_model import block_report
from .surrogate import BlockLocal

RELAY_INIT_POWER = 1e-3  # 0 dBm in watts
# init targets are inflated by this factor so solver tolerance never makes
# the first surrogate marginally infeasible
TARGET_MARGIN = 1e-7
# an idle common beam only costs power; keep it faint but nonzero so its
# linearized rate can grow
COMMON_INIT_FRACTION = 1e-2


class InfeasibleTargetsError(ValueError):
    pass


def sdma_init(h: np.ndarray, xi: np.ndarray, tol: float = 1e-12, max_iter: int = 20000):
    """Minimum-power SDMA beamformers meeting SINR targets ``xi``.

    ``h`` is ``(K_t, N)``.  Returns unit-norm directions ``(K_t, N)`` and
    powers ``(K_t,)``; users with a zero target get zero power.
    """
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    xi = np.asarray(xi, dtype=float)
    K, N = h.shape
    directions = np.zeros((K, N), dtype=complex)
    powers = np.zeros(K)
    on = np.flatnonzero(xi > 0)
    if not on.size:
        return directions, powers
    hs, xs = h[on], xi[on]
    lam = xs / np.sum(np.abs(hs) ** 2, axis=1)
    eye = np.eye(N)
    converged = False
    for _ in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            A = eye + (hs.T * lam) @ hs.conj()
            if not np.all(np.isfinite(A)):
                raise InfeasibleTargetsError("fixed-point iteration diverged")
            Ainv_h = np.linalg.solve(A, hs.T)  # columns: A^-1 h_k
            quad = np.real(np.sum(hs.conj().T * Ainv_h, axis=0))
            new = 1.0 / ((1.0 + 1.0 / xs) * quad)
        if not np.all(np.isfinite(new)):
            raise InfeasibleTargetsError("fixed-point iteration diverged")
        done = np.max(np.abs(new - lam) / np.maximum(lam, 1e-300)) < tol
        lam = new
        if done:
            converged = True
            break
    A = eye + (hs.T * lam) @ hs.conj()
    d = np.linalg.solve(A, hs.T).T
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    G = np.abs(hs.conj() @ d.T) ** 2  # G[i, j] = |h_i^H d_j|^2
    M = -G.copy()
    np.fill_diagonal(M, np.diag(G) / xs)
    try:
        p = np.linalg.solve(M, np.ones(on.size))
    except np.linalg.LinAlgError as exc:
        raise InfeasibleTargetsError("power matrix is singular") from exc
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise InfeasibleTargetsError("SINR targets are not jointly achievable")
    if not converged:
        # a slowly converging fixed point still gives usable beams as long
        # as the power step meets every target
        rx = G * p[None, :]
        sinr = np.diag(rx) / (rx.sum(axis=1) - np.diag(rx) + 1.0)
        if np.any(sinr < xs * (1.0 - 1e-9)):
            raise ArithmeticError("Lagrange multiplier fixed point did not converge")
    directions[on] = d
    powers[on] = p
    return directions, powers


def common_init(h: np.ndarray, private_powers: np.ndarray, fraction: float = 1.0) -> np.ndarray:
    """Common precoder along the dominant left singular vector of ``[h_1 ... h_K]``
    with ``fraction`` of the mean private power."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    if h.shape[0] == 0:
        raise ValueError("no active mUEs in this block")
    u, _, _ = np.linalg.svd(h.T, full_matrices=False)
    return np.sqrt(fraction * np.mean(private_powers)) * u[:, 0]


def genie_targets(ap_mask: np.ndarray, due_mask: np.ndarray, d_mue: float, d_due: float):
    """Per-block mUE targets ``D_k/T_k`` and dUE totals ``D_d/T_d`` from full-horizon masks.

    Returns ``(mue (T, K), due (T,), feasible)``.
    """
    ap_mask = np.asarray(ap_mask, dtype=bool)
    path = ap_mask & np.asarray(due_mask, dtype=bool)
    T_k = ap_mask.sum(axis=0)
    has_path = path.any(axis=1)
    T_d = int(has_path.sum())
    feasible = bool(np.all((T_k > 0) | (d_mue <= 0)) and (T_d > 0 or d_due <= 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        per_k = np.where(T_k > 0, d_mue / np.maximum(T_k, 1), 0.0)
    mue = np.where(ap_mask, per_k[None, :], 0.0)
    due = np.where(has_path, d_due / max(T_d, 1), 0.0) if d_due > 0 else np.zeros(ap_mask.shape[0])
    return mue, due, feasible


def initial_rate_split(mue_target: np.ndarray, due_target: float, ap_mask, due_mask):
    """Private-only split for one block: ``alpha_p`` = mUE target and the dUE
    total divided evenly over the complete AP-mUE-dUE paths."""
    ap_mask = np.asarray(ap_mask, dtype=bool)
    relays = np.flatnonzero(ap_mask & np.asarray(due_mask, dtype=bool))
    K = ap_mask.size
    alpha_p = np.where(ap_mask, mue_target, 0.0)
    beta_p = np.zeros(K)
    if due_target > 0 and relays.size:
        beta_p[relays] = due_target / relays.size
    return np.zeros(K), alpha_p, np.zeros(K), beta_p


def relay_power_control(g: np.ndarray, targets: np.ndarray) -> np.ndarray | None:
    """Minimum relay powers for treat-as-noise rates ``targets`` at the dUE, or
    ``None`` when the targets are jointly infeasible."""
    xi = 2.0 ** np.asarray(targets) - 1.0
    n = xi.size
    if n == 0:
        return np.zeros(0)
    # q_k = |g_k|^2 p_k  solves  q_k - xi_k sum_{i != k} q_i = xi_k
    M = np.eye(n) + np.diag(xi) - np.outer(xi, np.ones(n))
    try:
        q = np.linalg.solve(M, xi)
    except np.linalg.LinAlgError:
        return None
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        return None
    return q / np.abs(g) ** 2


def relay_init(g: np.ndarray, relays: np.ndarray, beta: np.ndarray, unit: float):
    """Relay precoders (internal units) carrying ``beta`` over treat-as-noise
    relaying.  Moves the whole dUE share to the strongest relay when the even
    split is not jointly achievable or costs more; returns ``(f_relay, beta)``."""
    K = g.size
    f = np.zeros(K, dtype=complex)
    beta = beta.copy()
    if not relays.size:
        return f, beta
    base = np.full(relays.size, RELAY_INIT_POWER / unit)
    gr = g[relays]
    need = beta[relays] * (1.0 + TARGET_MARGIN)
    rx = np.abs(gr) ** 2 * base
    sinr = rx / (rx.sum() - rx + 1.0)
    if np.all(np.log2(1.0 + sinr) >= need):
        f[relays] = np.sqrt(base)
        return f, beta
    p = relay_power_control(gr, need)
    single_p, single_beta = _single_relay(gr, beta[relays])
    # near the treat-as-noise boundary the even split needs unbounded power;
    # one relay carrying everything is then far cheaper
    if p is None or single_p.sum() < p.sum():
        p = single_p
        beta[relays] = single_beta
    f[relays] = np.sqrt(p)
    return f, beta


def _single_relay(gr: np.ndarray, beta: np.ndarray):
    """Whole dUE share on the strongest relay; weak relays keep a received
    power well below the noise floor.  Returns ``(powers, beta)``."""
    total = beta.sum()
    best = int(np.argmax(np.abs(gr)))
    out = np.zeros_like(beta)
    out[best] = total
    rx = np.full(gr.size, 1e-2)
    rx[best] = 0.0
    xi = 2.0 ** (total * (1.0 + TARGET_MARGIN)) - 1.0
    rx[best] = xi * (1.0 + rx.sum())
    return rx / np.abs(gr) ** 2, out


def idecrs_block_init(h, g, ap_mask, due_mask, mue_target, due_target, unit: float, framework: str = "idecrs"):
    """Feasible block plan (internal units) for the iDeCRS or DeCRS surrogate."""
    ap_mask = np.asarray(ap_mask, dtype=bool)
    K, N = h.shape
    plan = BlockPlan.zeros(K, N, framework)
    active = np.flatnonzero(ap_mask)
    if not active.size:
        return plan
    relays = np.flatnonzero(ap_mask & np.asarray(due_mask, dtype=bool))
    a_c, a_p, b_c, b_p = initial_rate_split(mue_target, due_target, ap_mask, due_mask)
    f_relay, b_p = relay_init(g, relays, b_p, unit)
    total = (a_p + b_p)[active]
    xi = (2.0 ** (total * (1.0 + TARGET_MARGIN)) - 1.0)
    dirs, powers = sdma_init(h[active], xi)
    plan.f_relay = f_relay
    if framework == "decrs":
        _decrs_split(plan, h, active, dirs, powers, a_p, b_p)
    else:
        plan.f_private[active] = dirs * np.sqrt(powers)[:, None]
        if np.any(powers > 0):
            plan.f_common = common_init(h[active], powers, COMMON_INIT_FRACTION)
        plan.alpha_c, plan.alpha_p, plan.beta_c, plan.beta_p = a_c, a_p, b_c, b_p
    return plan


def _decrs_split(plan, h, active, dirs, powers, a_p, b_p):
    """Split each SDMA beam into two superposed layers along one direction.

    Layer 2 carries half of the mUE part; by the chain rule the two layers
    together keep the SDMA rate.
    """
    for j, k in enumerate(active):
        d, P = dirs[j], powers[j]
        if P <= 0:
            continue
        others = sum(np.abs(np.vdot(h[k], dirs[i])) ** 2 * powers[i] for i in range(len(active)) if i != j)
        gain = np.abs(np.vdot(h[k], d)) ** 2
        r2 = 0.5 * a_p[k] if a_p[k] > 0 else 1e-3 * (a_p[k] + b_p[k])
        P2 = min((2.0**r2 - 1.0) * (others + 1.0) / gain, 0.5 * P)
        r2 = np.log2(1.0 + gain * P2 / (others + 1.0))
        plan.f_private[k] = np.sqrt(P - P2) * d
        plan.f_layer2[k] = np.sqrt(P2) * d
        plan.alpha_p[k] = min(r2, a_p[k]) if a_p[k] > 0 else 0.0
        plan.alpha_c[k] = max(a_p[k] - plan.alpha_p[k], 0.0)
        plan.beta_c[k] = b_p[k]
    plan.beta_p[:] = 0.0


def crs_block_init(h, g, ap_mask, due_mask, mue_target, due_target, unit: float):
    """Feasible CRS block: privates carry mUE data, the common codeword carries
    the dUE total and is relayed coherently."""
    ap_mask = np.asarray(ap_mask, dtype=bool)
    K, N = h.shape
    plan = BlockPlan.zeros(K, N, "crs")
    active = np.flatnonzero(ap_mask)
    if not active.size:
        return plan
    relays = np.flatnonzero(ap_mask & np.asarray(due_mask, dtype=bool))
    a_p = np.where(ap_mask, mue_target, 0.0)
    xi = 2.0 ** (a_p[active] * (1.0 + TARGET_MARGIN)) - 1.0
    dirs, powers = sdma_init(h[active], xi)
    plan.f_private[active] = dirs * np.sqrt(powers)[:, None]
    plan.alpha_p = a_p
    if due_target > 0 and relays.size:
        xi_c = 2.0 ** (due_target * (1.0 + TARGET_MARGIN)) - 1.0
        u = common_init(h[active], np.ones(1))
        need = 0.0
        for k in active:
            inter = sum(np.abs(np.vdot(h[k], plan.f_private[i])) ** 2 for i in active)
            need = max(need, xi_c * (inter + 1.0) / max(np.abs(np.vdot(h[k], u)) ** 2, 1e-300))
        plan.f_common = np.sqrt(need) * u
        amp = np.abs(g[relays])
        c = np.sqrt(xi_c) / amp.sum()
        plan.f_relay[relays] = c * np.conj(g[relays]) / amp
        plan.beta_c[relays] = due_target / relays.size
    elif np.any(powers > 0):
        plan.f_common = common_init(h[active], powers, COMMON_INIT_FRACTION)
        if relays.size:
            amp = np.abs(g[relays])
            plan.f_relay[relays] = np.sqrt(RELAY_INIT_POWER / unit) * np.conj(g[relays]) / amp
    return plan


def block_init(framework, h, g, ap_mask, due_mask, mue_target, due_target, unit):
    if framework == "crs":
        return crs_block_init(h, g, ap_mask, due_mask, mue_target, due_target, unit)
    return idecrs_block_init(h, g, ap_mask, due_mask, mue_target, due_target, unit, framework)


def fit_rates(framework: str, h, g, block: BlockPlan, ap_mask, due_mask) -> BlockPlan:
    """Shrink the rate splits of ``block`` (internal units) to what its precoders
    actually support, keeping the mUE/dUE proportions of each stream."""
    from ..rate_model import crs_block_rates, decrs_block_rates, idecrs_block_rates

    out = block.scaled(1.0)
    active = np.flatnonzero(ap_mask)
    relays = np.flatnonzero(np.asarray(ap_mask) & np.asarray(due_mask))
    if framework == "idecrs":
        r = idecrs_block_rates(h, g, block, active)
        for k in active:
            cap = r["private"][k]
            tot = block.alpha_p[k] + block.beta_p[k]
            if tot > cap and tot > 0:
                out.alpha_p[k] *= cap / tot
                out.beta_p[k] *= cap / tot
        out.alpha_c[:] = 0.0
        out.beta_c[:] = 0.0
    elif framework == "decrs":
        r = decrs_block_rates(h, g, block, active)
        for k in active:
            tot = block.alpha_c[k] + block.beta_c[k]
            if tot > r["layer1"][k] and tot > 0:
                out.alpha_c[k] *= r["layer1"][k] / tot
                out.beta_c[k] *= r["layer1"][k] / tot
            out.alpha_p[k] = min(block.alpha_p[k], r["layer2"][k])
    else:
        r = crs_block_rates(h, g, block, active, relays)
        for k in active:
            out.alpha_p[k] = min(block.alpha_p[k], r["private"][k])
        out.alpha_c[:] = 0.0
        cap = min(r["phase1"], r["phase2"]) if relays.size else 0.0
        tot = out.beta_c.sum()
        if tot > cap and tot > 0:
            out.beta_c *= cap / tot
    return out


def delivered(framework, h, g, block: BlockPlan, ap_mask, due_mask) -> tuple[np.ndarray, float]:
    return block_report(framework, h, g, block, ap_mask, due_mask, {})


def mrt_init(h, ap_mask, mue_cap, framework: str = "idecrs", common_fraction: float = 1e-2) -> BlockPlan:
    """Unit-power matched filter towards the strongest active mUE, with a
    faint common beam so the linearized common rate is not pinned at zero."""
    ap_mask = np.asarray(ap_mask, dtype=bool)
    K, N = h.shape
    plan = BlockPlan.zeros(K, N, framework)
    active = np.flatnonzero(ap_mask)
    if not active.size:
        return plan
    norms = np.linalg.norm(h, axis=1)
    k = active[int(np.argmax(norms[active]))]
    return _matched(plan, h, k, mue_cap[k], common_fraction)


def _matched(plan, h, k, alpha, common_fraction):
    d = h[k] / np.linalg.norm(h[k])
    plan.f_private[k] = d
    plan.f_common = np.sqrt(common_fraction) * d
    plan.alpha_p[k] = alpha  # trimmed to capacity by fit_rates
    return plan


def relay_mrt_init(h, g, relay: int, mue_cap, due_cap: float, framework: str = "idecrs",
                   common_fraction: float = 1e-2) -> BlockPlan:
    """Matched beam towards ``relay`` carrying its own residual plus the dUE
    share, with the relay hop at the same SNR as the AP hop."""
    K, N = h.shape
    plan = _matched(BlockPlan.zeros(K, N, framework), h, relay, mue_cap[relay], common_fraction)
    plan.beta_p[relay] = due_cap
    plan.f_relay[relay] = np.linalg.norm(h[relay]) / abs(g[relay])
    return plan


def eco_feasible_init(framework, h, g, block: BlockPlan, ap_mask, due_mask, eff_floor: float,
                      mue_cap=None, due_cap: float = 0.0, max_doublings: int = 60):
    """Divide the precoders by omega = 1, 2, 4, ... until the block reaches
    ``rates >= eff_floor * power``.  Returns ``(block, omega)``.

    ``eff_floor`` is in bits/s/Hz per unit of internal power.
    """
    try:
        return _scale_to_floor(framework, h, g, block, ap_mask, due_mask, eff_floor, max_doublings)
    except EfficiencyInfeasibleError:
        if mue_cap is None:
            raise
    # the even-split point wastes power on weak links; a single matched beam
    # has the best efficiency at low power.  Relays get their own candidate so
    # a block where only dUE content is owed does not start from a dead beam.
    candidates = []
    if np.any(np.asarray(mue_cap)[np.asarray(ap_mask, dtype=bool)] > 0):
        candidates.append(mrt_init(h, ap_mask, mue_cap, framework))
    if due_cap > 0:
        for k in np.flatnonzero(np.asarray(ap_mask, dtype=bool) & np.asarray(due_mask, dtype=bool)):
            candidates.append(relay_mrt_init(h, g, k, mue_cap, due_cap, framework))
    best, best_rate = None, -1.0
    for cand in candidates:
        try:
            scaled, omega = _scale_to_floor(framework, h, g, cand, ap_mask, due_mask, eff_floor, max_doublings)
        except EfficiencyInfeasibleError:
            continue
        mue, due = delivered(framework, h, g, scaled, ap_mask, due_mask)
        if mue.sum() + due > best_rate:
            best, best_rate = (scaled, omega), mue.sum() + due
    if best is None:
        raise EfficiencyInfeasibleError(f"efficiency floor {eff_floor:g} not reachable from any initial point")
    return best


def _scale_to_floor(framework, h, g, block, ap_mask, due_mask, eff_floor, max_doublings):
    omega = 1.0
    for _ in range(max_doublings + 1):
        cand = fit_rates(framework, h, g, block.scaled(1.0 / omega), ap_mask, due_mask)
        mue, due = delivered(framework, h, g, cand, ap_mask, due_mask)
        power = cand.power
        if power <= 0:
            break
        if mue.sum() + due >= eff_floor * power:
            return cand, omega
        omega *= 2.0
    raise EfficiencyInfeasibleError(
        f"efficiency floor {eff_floor:g} not reachable by scaling the initial point"
    )


class EfficiencyInfeasibleError(RuntimeError):
    pass
