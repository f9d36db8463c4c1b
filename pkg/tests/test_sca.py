import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coop_rsma.conic import Affine, ConicProgram, add_quadratic_epigraph
from coop_rsma.sca import InitializationError, ScaTrace, Surrogate, qol, sca_drive, taylor_qol


def _cvec(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def test_hand_evaluated_expansion():
    lin = taylor_qol(np.array([1.0]), np.array([2.0]), 4.0)
    # 2 Re{f_l h h f}/gamma_l - |h f_l|^2 gamma / gamma_l^2 = f - gamma/4
    assert lin(np.array([2.0]), 4.0) == pytest.approx(1.0)
    assert lin(np.array([2.0]), 4.0) == pytest.approx(qol([1.0], [2.0], 4.0))
    assert lin(np.array([3.0 + 1j]), 8.0) == pytest.approx(3.0 - 2.0)
    assert lin.coef_gamma == pytest.approx(-0.25)


def test_zero_base_point_gives_zero_map():
    lin = taylor_qol(np.array([1.0, 2.0j]), np.zeros(2), 3.0)
    assert np.all(lin.coef_f == 0) and lin.coef_gamma == 0.0
    assert lin(np.array([5.0, 1j]), 7.0) == 0.0


@pytest.mark.parametrize("gamma", [0.0, -1.0])
def test_nonpositive_gamma_rejected(gamma):
    with pytest.raises(ValueError):
        taylor_qol(np.ones(2), np.ones(2), gamma)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_exact_at_base_and_global_underestimator(n, seed, gamma_l, gamma):
    rng = np.random.default_rng(seed)
    h, f_l, f = _cvec(rng, n), _cvec(rng, n), _cvec(rng, n)
    lin = taylor_qol(h, f_l, gamma_l)
    base = qol(h, f_l, gamma_l)
    assert abs(lin(f_l, gamma_l) - base) <= 1e-9 * max(1.0, base)
    assert lin(f, gamma) <= qol(h, f, gamma) + 1e-9 * max(1.0, qol(h, f, gamma))


def _exact_builder(local):
    prog = ConicProgram()
    prog.add_variable("t")
    add_quadratic_epigraph(prog, Affine.constant([1.0, 2.0]), "t")
    prog.set_objective(prog.var("t"))
    return Surrogate(prog, lambda x: (x[0], local), exact=True)


def test_exact_surrogate_converges_in_one_iteration():
    sol, trace = sca_drive(_exact_builder, None)
    assert trace.iterations == 1 and trace.termination == "exact"
    assert sol == pytest.approx(5.0, rel=1e-6)


def test_infeasible_first_surrogate_raises():
    def build(local):
        prog = ConicProgram()
        prog.add_variable("x")
        prog.add_nonneg(prog.var("x") - 1.0)
        prog.add_nonneg(-prog.var("x"))
        prog.set_objective(prog.var("x"))
        return Surrogate(prog, lambda x: (x, local))

    with pytest.raises(InitializationError):
        sca_drive(build, None)


def test_later_failure_returns_best_so_far():
    # fixed point x >= 1 + local/2 from local = 3: 2.5, 2.25, 2.125, then infeasible
    def build(local):
        prog = ConicProgram()
        prog.add_variable("x")
        if local < 2.2:
            prog.add_nonneg(-prog.var("x") - 1.0)  # infeasible
        prog.add_nonneg(prog.var("x") - (1.0 + local / 2))
        prog.set_objective(prog.var("x"))
        return Surrogate(prog, lambda x: (float(x[0]), float(x[0])))

    sol, trace = sca_drive(build, 3.0, epsilon=1e-9)
    assert trace.termination == "infeasible"
    assert sol == pytest.approx(trace.objective[-1])
    assert sol == pytest.approx(2.125, rel=1e-6)


def test_worsening_step_is_discarded():
    calls = []

    def build(local):
        prog = ConicProgram()
        prog.add_variable("x")
        # the third surrogate's optimum is worse than the second
        floor = {0: 3.0, 1: 2.0}.get(len(calls), 2.5)
        calls.append(floor)
        prog.add_nonneg(prog.var("x") - floor)
        prog.set_objective(prog.var("x"))
        return Surrogate(prog, lambda x: (float(x[0]), float(x[0])))

    sol, trace = sca_drive(build, 0.0, epsilon=1e-9)
    assert len(calls) == 3 and trace.termination == "no-improvement"
    assert trace.objective == pytest.approx([3.0, 2.0], rel=1e-6) and trace.is_monotone(0.0)
    assert sol == pytest.approx(2.0, rel=1e-6)


def test_max_iter_termination():
    def build(local):
        prog = ConicProgram()
        prog.add_variable("x")
        prog.add_nonneg(prog.var("x") - (1.0 + local / 2))
        prog.set_objective(prog.var("x"))
        return Surrogate(prog, lambda x: (float(x[0]), float(x[0])))

    sol, trace = sca_drive(build, 3.0, epsilon=1e-15, max_iter=3)
    assert trace.termination == "max_iter" and trace.iterations == 3


def test_trace_monotonicity_check_and_csv(tmp_path):
    t = ScaTrace(objective=[3.0, 2.0, 2.0 + 1e-7], sense="min")
    assert t.is_monotone(slack=1e-6)
    assert not ScaTrace(objective=[3.0, 2.0, 2.1], sense="min").is_monotone()
    assert ScaTrace(objective=[1.0, 2.0, 2.0], sense="max").is_monotone()
    t.residual = [0.0] * 3
    t.solver_iterations = [1, 2, 3]
    path = tmp_path / "trace.csv"
    t.to_csv(path)
    assert path.read_text().startswith("iteration,objective")
