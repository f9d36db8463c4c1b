import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coop_rsma.algorithms.efficiency import (
    EfficiencyProfile,
    compute_delta,
    delta_from_energies,
    eco_energy_bound,
)
from coop_rsma.algorithms.genie import InfeasibleRealizationError, decrs_genie_solve, genie_solve, internal_unit
from coop_rsma.algorithms.init import (
    EfficiencyInfeasibleError,
    InfeasibleTargetsError,
    block_init,
    common_init,
    eco_feasible_init,
    genie_targets,
    initial_rate_split,
    relay_init,
    sdma_init,
)
from coop_rsma.algorithms.online import ResidualState, eco_step, edt_step, final_flush, run_online
from coop_rsma.plan import BlockPlan
from coop_rsma.rate_model import block_report, relay_rate, verify_plan
from coop_rsma.scenario import ChannelRealization, SystemConfig, make_realization

TAU = SystemConfig().block_duration


def awgn_realization(T=1, K=1, N=1, gain=1.0, g_gain=1.0):
    """Unblocked channels with ``||h||^2 = gain`` and ``|g|^2 = g_gain``."""
    h = np.zeros((T, K, N), dtype=complex)
    for k in range(K):
        h[:, k, k % N] = np.sqrt(gain)
    g = np.full((T, K), np.sqrt(g_gain), dtype=complex)
    mask = np.ones((T, K), dtype=bool)
    return ChannelRealization(h, g, mask, mask.copy())


def sinr(h, dirs, p):
    G = np.abs(h.conj() @ dirs.T) ** 2 * p[None, :]
    return np.diag(G) / (G.sum(axis=1) - np.diag(G) + 1.0)


# ---- initializers -----------------------------------------------------------

def test_sdma_single_user_closed_form():
    h = np.array([[1.0 + 1j, 2.0, -0.5j]])
    d, p = sdma_init(h, np.array([3.0]))
    assert np.allclose(np.abs(d[0]), np.abs(h[0]) / np.linalg.norm(h[0]))
    assert p[0] == pytest.approx(3.0 / np.linalg.norm(h[0]) ** 2)


def test_sdma_orthogonal_users_decouple():
    h = np.array([[2.0, 0.0], [0.0, 1.0]])
    d, p = sdma_init(h, np.array([1.0, 3.0]))
    assert p == pytest.approx([0.25, 3.0])


def test_sdma_small_targets_vanish():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4))
    _, p = sdma_init(h, np.full(2, 1e-12))
    assert np.all(p < 1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_sdma_meets_targets(seed, K):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(K, 6)) + 1j * rng.normal(size=(K, 6))
    xi = rng.uniform(0.1, 10.0, size=K)
    d, p = sdma_init(h, xi)
    assert np.all(np.abs(sinr(h, d, p) - xi) <= 1e-6 * np.maximum(1.0, xi))


def test_sdma_rejects_overloaded_targets():
    h = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises((InfeasibleTargetsError, ArithmeticError)):
        sdma_init(h, np.array([10.0, 10.0]))


def test_common_init():
    h = np.array([[1.0, 2.0j]])
    f = common_init(h, np.array([4.0]))
    assert np.abs(np.vdot(h[0] / np.linalg.norm(h[0]), f)) == pytest.approx(2.0)
    same = np.array([[1.0, 1.0], [1.0, 1.0]])
    f = common_init(same, np.array([2.0, 2.0]))
    assert np.allclose(np.abs(f), 1.0)
    rng = np.random.default_rng(1)
    p = rng.uniform(size=3)
    f = common_init(rng.normal(size=(3, 5)) + 0j, p)
    assert np.linalg.norm(f) ** 2 == pytest.approx(p.mean())
    with pytest.raises(ValueError):
        common_init(np.zeros((0, 3)), np.zeros(0))


def test_initial_rate_split():
    ap = np.array([True, True, True])
    due = np.array([True, False, True])
    a_c, a_p, b_c, b_p = initial_rate_split(np.array([1.0, 1.0, 1.0]), 2.0 / 5, ap, due)
    assert np.all(a_c == 0) and np.all(b_c == 0)
    assert b_p == pytest.approx([0.2, 0.0, 0.2])
    assert a_p == pytest.approx([1.0, 1.0, 1.0])


def test_genie_targets():
    ap = np.ones((4, 2), dtype=bool)
    ap[1, 0] = False
    due = np.ones((4, 2), dtype=bool)
    mue, dd, ok = genie_targets(ap, due, 6.0, 2.0)
    assert ok and mue[0, 0] == pytest.approx(2.0) and mue[1, 0] == 0.0 and mue[0, 1] == pytest.approx(1.5)
    assert dd == pytest.approx([0.5] * 4)
    ap[:, 1] = False
    assert not genie_targets(ap, due, 6.0, 2.0)[2]


def test_eco_init_scaling():
    ch = awgn_realization()
    b = ch.block(0)
    init = block_init("idecrs", b.h, b.g, b.ap_mask, b.due_mask, np.array([1.0]), 0.0, 1.0)
    out, omega = eco_feasible_init("idecrs", b.h, b.g, init, b.ap_mask, b.due_mask, 1e-3)
    assert omega == 1.0
    # at most 1/ln2 bits per unit power are reachable on a unit-gain link
    with pytest.raises(EfficiencyInfeasibleError):
        eco_feasible_init("idecrs", b.h, b.g, init, b.ap_mask, b.due_mask, 10.0)
    # efficiency grows as the scaled point shrinks in the low-power regime
    effs = []
    for w in (1.0, 4.0, 16.0, 64.0):
        mue, due = block_report("idecrs", b.h, b.g, _fit(init.scaled(1 / w), b), b.ap_mask, b.due_mask, {})
        effs.append((mue.sum() + due) / init.scaled(1 / w).power)
    assert np.all(np.diff(effs) > 0)


def test_relay_init_prefers_single_relay_near_boundary():
    g = np.array([1.0, 0.9])
    relays = np.array([0, 1])
    # two 1-bit shares under treat-as-noise sit on the feasibility boundary
    f, beta = relay_init(g, relays, np.array([0.999999, 0.999999]), 1e6)
    assert beta == pytest.approx([1.999998, 0.0])
    assert np.sum(np.abs(f) ** 2) < 10.0
    assert relay_rate(g, f, 0) >= 1.999998
    # small shares keep the even split
    f, beta = relay_init(g, relays, np.array([0.01, 0.01]), 1e6)
    assert beta == pytest.approx([0.01, 0.01])
    assert all(relay_rate(g, f, k) >= 0.01 for k in (0, 1))


def test_eco_relay_candidate_when_only_due_is_owed():
    # the only active mUE is a relay with no own demand left
    ch = awgn_realization(K=1, N=1, gain=1.0, g_gain=1.0)
    b = ch.block(0)
    init = block_init("idecrs", b.h, b.g, b.ap_mask, b.due_mask, np.zeros(1), 1.0, 1.0)
    out, omega = eco_feasible_init("idecrs", b.h, b.g, init, b.ap_mask, b.due_mask, 0.3,
                                   mue_cap=np.zeros(1), due_cap=1.0)
    mue, due = block_report("idecrs", b.h, b.g, out, b.ap_mask, b.due_mask, {})
    assert due > 0 and due >= 0.3 * out.power * (1 - 1e-9)


def test_residual_snap():
    r = ResidualState.start(2, 1.0, 1.0).after(np.array([1.0 - 1e-9, 0.5]), 1.0 - 1e-8)
    assert r.mue[0] == 0.0 and r.due == 0.0 and r.mue[1] == pytest.approx(0.5)


def _fit(block, b):
    from coop_rsma.algorithms.init import fit_rates

    return fit_rates("idecrs", b.h, b.g, block, b.ap_mask, b.due_mask)


# ---- GENIE ------------------------------------------------------------------

def test_genie_shannon_inversion():
    cfg = SystemConfig(n_antennas=1, n_mues=1, n_blocks=1, throughput_mue=2.0, throughput_due=0.0)
    plan, trace = genie_solve(awgn_realization(), cfg)
    rep = verify_plan(plan, awgn_realization(), cfg)
    assert rep.feasible
    assert rep.total_energy == pytest.approx(3.0 * TAU, rel=1e-4)
    assert trace.is_monotone()


def test_genie_zero_demand_and_infeasible():
    cfg = SystemConfig(n_antennas=4, n_mues=2, n_blocks=3, throughput_mue=0.0, throughput_due=0.0)
    ch = make_realization(cfg, 1)
    plan, _ = genie_solve(ch, cfg)
    assert verify_plan(plan, ch, cfg).total_energy == 0.0
    cfg = cfg.replace(throughput_mue=1.0)
    blocked = ChannelRealization(ch.h_los, ch.g_los, np.zeros((3, 2), bool), ch.due_mask)
    with pytest.raises(InfeasibleRealizationError):
        genie_solve(blocked, cfg)


def test_decrs_matches_idecrs_for_single_user():
    # tight SCA tolerance so both runs reach the shared optimum
    cfg = SystemConfig(n_antennas=4, n_mues=1, n_blocks=3, blockage_p=0.0, throughput_mue=3.0, throughput_due=1.0,
                       sca_epsilon=1e-7, sca_max_iter=200)
    ch = make_realization(cfg, 2)
    a = verify_plan(genie_solve(ch, cfg)[0], ch, cfg)
    b = verify_plan(decrs_genie_solve(ch, cfg)[0], ch, cfg)
    assert a.feasible and b.feasible
    assert b.total_energy == pytest.approx(a.total_energy, rel=1e-4)


def test_decrs_scenarios():
    cfg = SystemConfig(n_antennas=4, n_mues=2, n_blocks=3, throughput_mue=2.0, throughput_due=1.0)
    ch = make_realization(cfg, 4).with_clear_block(2)
    plan, _ = decrs_genie_solve(ch, cfg, "ma")
    # no dUE demand: the relays stay silent
    assert all(b.relay_power == 0.0 for b in plan.blocks)
    with pytest.raises(ValueError):
        decrs_genie_solve(ch, cfg, "both")


# ---- online schedulers ------------------------------------------------------

def test_residual_recursion_and_weights():
    r = ResidualState.start(2, 10.0, 0.0)
    r = r.after(np.array([4.0, 12.0]), 1.0)
    assert r.mue == pytest.approx([6.0, 0.0]) and r.due == 0.0
    assert r.weights_mue == pytest.approx([0.6, 0.0]) and r.weight_due == 0.0
    assert not r.done and r.after(np.array([6.0, 0.0]), 0.0).done


def test_even_split_oracle_edt():
    cfg = SystemConfig(n_antennas=1, n_mues=1, n_blocks=2, throughput_mue=2.0, throughput_due=0.0)
    ch = awgn_realization(T=2)
    unit = internal_unit(ch)
    res = ResidualState.start(1, 2.0, 0.0)
    s1 = edt_step(ch.block(0), res, 2, cfg, unit)
    s2 = edt_step(ch.block(1), s1.residual, 1, cfg, unit)
    assert s1.plan.power == pytest.approx(1.0, rel=1e-4) and s2.plan.power == pytest.approx(1.0, rel=1e-4)
    assert s2.residual.mue[0] <= 1e-6


def test_edt_buffer_requests_full_residual():
    cfg = SystemConfig(n_antennas=1, n_mues=1, n_blocks=4, throughput_mue=2.0, throughput_due=0.0, edt_buffer=3)
    ch = awgn_realization(T=4)
    step = edt_step(ch.block(0), ResidualState.start(1, 2.0, 0.0), 4, cfg, internal_unit(ch))
    assert step.info["divisor"] == 1
    assert step.residual.mue[0] <= 1e-6


def test_zero_residuals_give_zero_plans():
    cfg = SystemConfig(n_antennas=1, n_mues=1, n_blocks=2, throughput_mue=0.0, throughput_due=0.0)
    ch = awgn_realization(T=2)
    res = ResidualState.start(1, 0.0, 0.0)
    assert edt_step(ch.block(0), res, 2, cfg, 1.0).plan.power == 0.0
    assert final_flush(ch.block(1), res, cfg, 1.0).plan.power == 0.0
    assert eco_step(ch.block(0), res, 1.0, 0.7, 2, cfg, 1.0).plan.power == 0.0


def test_flush_shannon_inversion():
    cfg = SystemConfig(n_antennas=1, n_mues=1, n_blocks=1, throughput_mue=2.0, throughput_due=0.0)
    step = final_flush(awgn_realization().block(0), ResidualState.start(1, 2.0, 0.0), cfg, 1.0)
    assert step.plan.power == pytest.approx(3.0, rel=1e-4)


def test_edt_never_blocked_spreads_evenly():
    cfg = SystemConfig(n_antennas=4, n_mues=2, n_blocks=3, blockage_p=0.0, throughput_mue=3.0, throughput_due=0.6)
    ch = make_realization(cfg, 6)
    plan, steps = run_online(ch, cfg, "edt")
    rep = verify_plan(plan, ch, cfg)
    assert rep.feasible
    assert np.allclose(rep.mue_rates, 1.0, atol=1e-4)
    assert np.allclose(rep.due_rates, 0.2, atol=1e-4)


def test_crs_single_user_without_due_matches_edt():
    cfg = SystemConfig(n_antennas=4, n_mues=1, n_blocks=3, throughput_mue=3.0, throughput_due=0.0)
    ch = make_realization(cfg, 8).with_clear_block(2)
    e_edt = verify_plan(run_online(ch, cfg, "edt")[0], ch, cfg).total_energy
    e_crs = verify_plan(run_online(ch, cfg, "crs")[0], ch, cfg).total_energy
    assert e_crs == pytest.approx(e_edt, rel=1e-4)


def test_eco_tiny_floor_delivers_residual_caps():
    cfg = SystemConfig(n_antennas=1, n_mues=1, n_blocks=2, throughput_mue=2.0, throughput_due=0.0)
    ch = awgn_realization(T=2)
    step = eco_step(ch.block(0), ResidualState.start(1, 2.0, 0.0), 1.0, 1e-3, 2, cfg, 1.0)
    assert step.residual.mue[0] == pytest.approx(0.0, abs=1e-5)
    assert step.trace.is_monotone()


def test_eco_settles_on_floor_when_caps_bind():
    # 1 bit needs power 1 on a unit-gain link; the floor 0.25 bit per unit allows up to 4
    cfg = SystemConfig(n_antennas=1, n_mues=1, n_blocks=2, throughput_mue=1.0, throughput_due=0.0)
    ch = awgn_realization(T=2)
    delta = 0.25 / (0.5 * TAU)
    step = eco_step(ch.block(0), ResidualState.start(1, 1.0, 0.0), delta, 0.5, 2, cfg, 1.0)
    assert step.residual.mue[0] == pytest.approx(0.0, abs=1e-6)
    assert step.plan.power == pytest.approx(4.0, rel=1e-4)
    assert step.plan.power <= 4.0


def test_eco_blocks_meet_efficiency_floor():
    cfg = SystemConfig(n_antennas=4, n_mues=2, n_blocks=5, throughput_mue=4.0, throughput_due=1.0)
    ch = make_realization(cfg, 3).with_clear_block(4)
    delta = 5.0 / verify_plan(genie_solve(ch, cfg)[0], ch, cfg).total_energy
    plan, steps = run_online(ch, cfg, "eco", delta=delta, s=0.5)
    rep = verify_plan(plan, ch, cfg)
    assert rep.feasible
    for t in range(cfg.n_blocks - 1):
        assert steps[t].trace.is_monotone()
        bits = rep.mue_rates[t].sum() + rep.due_rates[t]
        assert bits >= 0.5 * delta * rep.energy[t] - 1e-6


def test_run_online_validation():
    cfg = SystemConfig(n_antennas=1, n_mues=1, n_blocks=2)
    with pytest.raises(ValueError):
        run_online(awgn_realization(T=2), cfg, "eco")
    with pytest.raises(ValueError):
        run_online(awgn_realization(T=2), cfg, "greedy")


# ---- efficiency -------------------------------------------------------------

def test_delta_and_bound_arithmetic():
    cfg = SystemConfig(n_mues=4, throughput_mue=10.0, throughput_due=2.0)
    assert delta_from_energies(cfg, [42.0, 42.0]) == pytest.approx(1.0)
    assert delta_from_energies(cfg, [84.0]) == pytest.approx(0.5)
    with pytest.raises(RuntimeError):
        delta_from_energies(cfg, [])
    prof = EfficiencyProfile(1.0, 0.2, 42.0)
    assert prof.energy_bound == pytest.approx(210.0)
    assert eco_energy_bound(cfg, prof, s=0.4) == pytest.approx(105.0)
    with pytest.raises(ValueError):
        EfficiencyProfile(0.0, 0.2, 42.0)


def test_fixed_delta_source():
    cfg = SystemConfig(delta_source="fixed", delta_value=3.5)
    assert compute_delta(cfg).delta == 3.5


def test_compute_delta_from_genie():
    cfg = SystemConfig(n_antennas=4, n_mues=2, n_blocks=3, throughput_mue=2.0, throughput_due=1.0)
    prof = compute_delta(cfg, 2)
    assert prof.delta > 0 and prof.n_trials >= 1
