import numpy as np
import pytest

from nudgefem import fem, strategies
from nudgefem.analysis import (DEFAULT_WINDOW_START, DecayFit, accumulated_error,
                               error_norms, fit_exponential_rate,
                               nudged_elliptic_projection, project_exact,
                               roc_table, window_index, window_start)
from nudgefem.fem import QuadratureConfig, assemble_operators, l2_project
from nudgefem.mesh import build_mesh
from nudgefem.problems import make_problem
from nudgefem.timestepper import RunRecord, SchemeConfig, run

QUAD = QuadratureConfig()


def _record(times, errs):
    times = np.asarray(times, dtype=float)
    errs = np.asarray(errs, dtype=float)
    return RunRecord(config={}, times=times, err_l2=errs, err_h1=errs.copy())


# ---------------------------------------------------------------- error norms

def test_error_norms_zero_for_exact_nodal_constant():
    mesh = build_mesh(3)
    p = make_problem("smooth", 0.0)
    # u identically equal to the exact solution is impossible (quadratic),
    # but u = 0 against the zero solution at t where cos = 0 is exact
    p_osc = make_problem("smooth", np.pi)
    l2, h1 = error_norms(mesh, np.zeros(mesh.n_nodes), p_osc, 0.5, QUAD)
    assert l2 <= 1e-14 and h1 <= 1e-14


def test_error_norms_of_zero_equal_solution_norms():
    mesh = build_mesh(4)
    p = make_problem("smooth", 0.0)
    l2, h1 = error_norms(mesh, np.zeros(mesh.n_nodes), p, 0.0, QUAD)
    # ||Phi||_L2^2 = int ((x-.5)^2 + (y-.5)^2)^2 over the square:
    # with a = int (x-.5)^2 dx = 7/6 and b = int (x-.5)^4 dx = 61/40,
    # the integral is 2*(2b) + 2*a*a
    a, b = 7.0 / 6.0, 61.0 / 40.0
    assert l2 ** 2 == pytest.approx(4.0 * b + 2.0 * a * a, rel=1e-12)
    # |Phi|_H1^2 = int 4|x - x0|^2 = 4 * (7/6*2 + 7/6*2) = 56/3
    assert h1 ** 2 == pytest.approx(56.0 / 3.0, rel=1e-12)


def test_error_norms_projection_rate():
    p = make_problem("dirac", 0.0)
    errs = {}
    for level in (4, 5):
        mesh = build_mesh(level)
        ops = assemble_operators(mesh, None, QUAD)
        proj = l2_project(ops.mass, mesh, p.spatial, QUAD,
                          singular_point=p.singular_point)
        errs[level] = error_norms(mesh, proj, p, 0.0, QUAD)[0]
    # the projection error of the log potential is dominated by the elements
    # at the singular point, where the local best error scales like h: rate 1
    assert 1.8 <= errs[4] / errs[5] <= 2.5


def test_error_norms_rejects_low_order():
    mesh = build_mesh(2)
    p = make_problem("smooth", 0.0)
    with pytest.raises(ValueError):
        error_norms(mesh, np.zeros(mesh.n_nodes), p, 0.0,
                    QuadratureConfig(q_err=3))


# -------------------------------------------------------- accumulated errors

def test_accumulated_error_constant_sequence():
    n, tau, e = 16, 0.125, 0.7
    rec = _record(np.arange(n + 1) * tau, np.full(n + 1, e))
    for m in (1, 5, n):
        # sum over k = m..n of tau * e^2 = (n - m + 1) * tau * e^2
        expect = e * np.sqrt((n - m + 1) * tau)
        assert accumulated_error(rec, m) == pytest.approx(expect, rel=1e-14)


def test_accumulated_error_last_step_only():
    rec = _record([0.0, 0.5, 1.0], [3.0, 2.0, 1.5])
    assert accumulated_error(rec, 2) == pytest.approx(1.5 * np.sqrt(0.5))


def test_accumulated_error_monotone_in_start():
    rng = np.random.default_rng(0)
    errs = rng.uniform(0.1, 1.0, 33)
    rec = _record(np.arange(33) * 0.1, errs)
    vals = [accumulated_error(rec, m) for m in range(1, 33)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_accumulated_error_range_check():
    rec = _record([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        accumulated_error(rec, 0)
    with pytest.raises(ValueError):
        accumulated_error(rec, 2)


def test_window_index():
    rec = _record(np.arange(9) * 0.375, np.ones(9))
    assert window_index(rec, 0.4) == 2          # t_2 = 0.75 first >= 0.4
    assert window_index(rec, 0.75) == 2         # exact hit
    assert window_index(rec, 0.0) == 0


def test_window_start_defaults():
    assert window_start("fe_projection", "smooth") == 0.4
    assert window_start("mean_value", "smooth") == 2.8
    assert window_start("mean_value", "dirac") == 1.8
    assert window_start("mean_value", "kellogg") == 0.8
    assert window_start("mean_value", "smooth", override=1.1) == 1.1
    assert set(k[0] for k in DEFAULT_WINDOW_START) == {
        "fe_projection", "boundary_projection", "mean_value"}


# ------------------------------------------------------------------ roc table

def test_roc_exact_power():
    errs = {l: 0.37 * 4.0 ** (-l) for l in (3, 4, 5, 6)}
    table = roc_table(errs)
    assert table.levels == (3, 4, 5, 6)
    assert np.allclose(table.rates, 2.0, atol=1e-12)
    rows = table.rows()
    assert rows[0][2] is None and rows[1][2] == pytest.approx(2.0)


def test_roc_single_level():
    table = roc_table({4: 0.5})
    assert table.rates == ()
    assert table.rows() == [(4, 0.5, None)]


def test_roc_rejects_gaps_and_nonpositive():
    with pytest.raises(ValueError):
        roc_table({3: 1.0, 5: 0.1})
    with pytest.raises(ValueError):
        roc_table({3: 1.0, 4: 0.0})
    with pytest.raises(ValueError):
        roc_table({})


# ------------------------------------------------------------------ decay fit

def test_fit_exact_exponential():
    t = np.linspace(0, 3, 97)
    rec = _record(t, 2.0 * np.exp(-3.0 * t))
    fit = fit_exponential_rate(rec, window=(0.0, 3.0))
    assert fit.gamma == pytest.approx(3.0, rel=1e-12)
    assert fit.decayed and fit.n_samples == 97


def test_fit_auto_window_with_plateau():
    t = np.linspace(0, 3, 513)
    e = np.maximum(2.0 * np.exp(-5.0 * t), 1e-4)
    rng = np.random.default_rng(1)
    rec = _record(t, e)
    fit = fit_exponential_rate(rec)
    assert fit.decayed
    assert fit.gamma == pytest.approx(5.0, rel=0.01)


def test_fit_scale_invariance():
    t = np.linspace(0, 3, 97)
    base = _record(t, np.exp(-2.0 * t))
    scaled = _record(t, 1e6 * np.exp(-2.0 * t))
    f0 = fit_exponential_rate(base, window=(0.5, 2.5))
    f1 = fit_exponential_rate(scaled, window=(0.5, 2.5))
    assert f0.gamma == pytest.approx(f1.gamma, rel=1e-12)


def test_fit_no_decay_phase():
    t = np.linspace(0, 3, 65)
    rec = _record(t, np.full(65, 0.3))
    fit = fit_exponential_rate(rec)
    assert not fit.decayed
    assert str(fit) == "no decay phase"


def test_fit_rejects_tiny_window():
    t = np.linspace(0, 3, 97)
    rec = _record(t, np.exp(-t))
    with pytest.raises(ValueError):
        fit_exponential_rate(rec, window=(1.0, 1.05))


def test_fit_string_format():
    fit = DecayFit(gamma=2.3456, window=(0.0, 1.0), n_samples=10, decayed=True)
    assert str(fit) == "2.3"


# ----------------------------------------------------------- nudged projection

def test_projection_rejects_zero_mu():
    mesh = build_mesh(3)
    ops = assemble_operators(mesh, None, QUAD)
    strat = strategies.build_strategy("fe_projection", 2, mesh, QUAD)
    with pytest.raises(ValueError):
        nudged_elliptic_projection(ops, strat, 0.0, np.zeros(mesh.n_nodes),
                                   np.zeros(strat.dim))


def test_projection_rejects_inert_strategy():
    mesh = build_mesh(3)
    ops = assemble_operators(mesh, None, QUAD)
    strat = strategies.build_strategy("none", 2, mesh, QUAD)
    with pytest.raises(ValueError):
        nudged_elliptic_projection(ops, strat, 1.0, np.zeros(mesh.n_nodes),
                                   np.zeros(0))


def test_projection_reproduces_constants():
    # target = 1: zero stiffness pairing, observation pairing of the constant
    mesh = build_mesh(3)
    ops = assemble_operators(mesh, None, QUAD)
    strat = strategies.build_strategy("mean_value", 2, mesh, QUAD)
    q = nudged_elliptic_projection(ops, strat, 16.0, np.zeros(mesh.n_nodes),
                                   np.array([4.0]))
    assert np.allclose(q, 1.0, atol=1e-10)


def test_projection_reproduces_discrete_functions():
    # if the target is itself a fine FE function, the projection returns it
    mesh = build_mesh(3)
    p = make_problem("smooth", 0.0)
    ops = assemble_operators(mesh, None, QUAD)
    strat = strategies.build_strategy("fe_projection", 2, mesh, QUAD)
    rng = np.random.default_rng(2)
    v = rng.standard_normal(mesh.n_nodes)
    k_pair = ops.stiffness @ v
    b = strat.coupling.T @ v
    q = nudged_elliptic_projection(ops, strat, 64.0, k_pair, b)
    assert np.allclose(q, v, atol=1e-9)


def test_project_exact_rate_smooth():
    p = make_problem("smooth", 0.0)
    errs = {}
    for level in (4, 5):
        mesh = build_mesh(level)
        ops = assemble_operators(mesh, None, QUAD)
        strat = strategies.build_strategy("fe_projection", 2, mesh, QUAD)
        q = project_exact(mesh, ops, strat, 64.0, p, 0.0, QUAD)
        errs[level] = error_norms(mesh, q, p, 0.0, QUAD)[0]
    assert 3.5 <= errs[4] / errs[5] <= 4.5


def test_projection_agrees_with_long_time_limit():
    # the time stepper driven by steady data converges to a state close to
    # the nudged elliptic projection of the exact solution
    cfg = SchemeConfig(level=4, problem="smooth", strategy="fe_projection",
                       mu=64.0, omega=0.0)
    rec = run(cfg)
    mesh = build_mesh(4)
    p = make_problem("smooth", 0.0)
    ops = assemble_operators(mesh, None, QUAD)
    strat = strategies.build_strategy("fe_projection", 2, mesh, QUAD)
    q = project_exact(mesh, ops, strat, 64.0, p, 0.0, QUAD)
    mass = ops.mass
    diff = rec.final - q
    dist = np.sqrt(diff @ (mass @ diff))
    ql2 = error_norms(mesh, q, p, 0.0, QUAD)[0]
    # the gap between the two discrete objects is at most a few times the
    # projection's own error level
    assert dist <= 5.0 * ql2
