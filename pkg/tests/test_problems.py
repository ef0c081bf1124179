import numpy as np
import pytest

import oracles
from nudgefem.mesh import build_mesh
from nudgefem.problems import (KELLOGG_ALPHA, KELLOGG_CONTRAST,
                               TestProblem as Problem,
                               evaluate_exact, make_problem,
                               solve_kellogg_parameters, _interface_residuals,
                               _angular_mean)


def test_smooth_example_values():
    p = make_problem("smooth", 0.0)
    # |(-1,-1) - (0.5,0.5)|^2 = 2 * 1.5^2 = 4.5
    assert evaluate_exact(p, (-1.0, -1.0), 0.0) == pytest.approx(4.5, rel=1e-14)
    assert evaluate_exact(p, (0.5, 0.5), 1.7) == 0.0
    p_osc = make_problem("smooth", np.pi)
    assert evaluate_exact(p_osc, (-1.0, -1.0), 1.0) == pytest.approx(-4.5, rel=1e-12)


def test_dirac_vanishes_on_unit_circle():
    p = make_problem("dirac", 0.0)
    for angle in np.linspace(0, 2 * np.pi, 7):
        x = np.asarray(p.x0) + np.array([np.cos(angle), np.sin(angle)])
        assert abs(float(p.spatial(np.atleast_2d(x))[0])) <= 1e-14


def test_dirac_gradient_magnitude():
    p = make_problem("dirac", np.pi)
    rng = np.random.default_rng(0)
    t = 0.37
    for _ in range(10):
        d = rng.uniform(-0.2, 0.2, 2)
        x = np.asarray(p.x0) + d
        _, grad = evaluate_exact(p, x, t, want_gradient=True)
        r = np.linalg.norm(d)
        assert np.linalg.norm(grad) == pytest.approx(
            abs(np.cos(np.pi * t)) / (2 * np.pi * r), rel=1e-12)


def test_kellogg_conductivity_values():
    p = make_problem("kellogg", 0.0)
    vals = p.conductivity(np.array([[0.5, -0.5], [0.5, 0.5],
                                    [-0.5, -0.5], [-0.5, 0.5]]))
    assert vals[0] == 1.0
    assert vals[1] == pytest.approx(KELLOGG_CONTRAST)
    assert vals[2] == pytest.approx(KELLOGG_CONTRAST)
    assert vals[3] == 1.0


def test_kellogg_parameters_residuals():
    ang = solve_kellogg_parameters()
    res = _interface_residuals(ang)
    assert np.max(np.abs(res)) <= 1e-12
    assert abs(_angular_mean(ang)) <= 1e-12


def test_kellogg_contrast_rederived_from_flux():
    # at theta = pi/2 the flux balance ties the contrast to the two
    # adjacent angular derivatives: b * mu0'(pi/2) = mu1'(pi/2)
    ang = solve_kellogg_parameters()
    half_pi = np.pi / 2
    d0 = float(ang.piece_derivative(0, half_pi))
    d1 = float(ang.piece_derivative(1, half_pi))
    assert d1 / d0 == pytest.approx(KELLOGG_CONTRAST, rel=1e-12)


def test_kellogg_angular_continuity_everywhere():
    ang = solve_kellogg_parameters()
    theta = np.linspace(0, 2 * np.pi, 2001)
    vals = ang.value(theta)
    assert np.max(np.abs(np.diff(vals))) <= 2e-3  # no jumps at the kinks


def test_kellogg_antisymmetry_and_zero_domain_mean():
    p = make_problem("kellogg", 0.0)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, (200, 2))
    # point antisymmetry value(-x) = -value(x) and symmetry across y = x
    assert np.allclose(p.spatial(-pts), -p.spatial(pts), atol=1e-13)
    assert np.allclose(p.spatial(pts[:, ::-1]), p.spatial(pts), atol=1e-13)
    mesh = build_mesh(4)
    total = oracles.integrate_domain(mesh, p.spatial, p.singular_point)
    assert abs(total) <= 1e-10


def test_solve_kellogg_rejects_bad_inputs():
    with pytest.raises(ValueError):
        solve_kellogg_parameters(alpha=0.0)
    with pytest.raises(ValueError):
        solve_kellogg_parameters(contrast=-1.0)


def test_make_problem_rejects_unknown_kind():
    with pytest.raises(ValueError):
        make_problem("cubic", 0.0)


def test_evaluate_exact_rejects_gradient_at_singularity():
    for kind in ("dirac", "kellogg"):
        p = make_problem(kind, 0.0)
        with pytest.raises(ValueError):
            evaluate_exact(p, p.singular_point, 0.0, want_gradient=True)


def test_boundary_flux_totals():
    # divergence theorem: the total conormal flux balances the interior source
    mesh = build_mesh(4)
    smooth = make_problem("smooth", 0.0)
    flux = oracles.integrate_boundary(
        mesh, lambda p, n: smooth.neumann(p, n, 0.0))
    assert flux == pytest.approx(16.0, rel=1e-12)        # = -forcing integral

    kellogg = make_problem("kellogg", 0.0)
    flux = oracles.integrate_boundary(
        mesh, lambda p, n: kellogg.neumann(p, n, 0.0))
    assert abs(flux) <= 1e-10                            # coefficient-harmonic

    dirac = make_problem("dirac", 0.0)
    flux = oracles.integrate_boundary(
        mesh, lambda p, n: dirac.neumann(p, n, 0.0))
    # outward flux of the log potential equals the negative point mass
    assert flux == pytest.approx(-1.0, rel=1e-12)


@pytest.mark.parametrize("kind", ("smooth", "dirac", "kellogg"))
@pytest.mark.parametrize("omega", (0.0, np.pi))
@pytest.mark.parametrize("t", (0.0, 0.37, 1.5))
def test_weak_residual_vanishes(kind, omega, t):
    p = make_problem(kind, omega)
    funcs = oracles.random_smooth_test_functions(3, seed=17)
    for v, grad_v in funcs:
        res = oracles.weak_residual(p, v, grad_v, t)
        assert abs(res) <= 1e-8


def test_weak_residual_many_test_functions():
    p = make_problem("dirac", np.pi)
    for v, grad_v in oracles.random_smooth_test_functions(20, seed=99):
        assert abs(oracles.weak_residual(p, v, grad_v, 0.37)) <= 1e-8


def test_weak_residual_detects_wrong_forcing():
    # sanity: the oracle is not identically zero
    p = make_problem("smooth", 0.0)
    broken = Problem(kind=p.kind, omega=p.omega, x0=p.x0,
                         spatial=p.spatial, spatial_gradient=p.spatial_gradient,
                         conductivity=p.conductivity, forcing_steady=0.0,
                         dirac_strength=0.0, singular_point=None,
                         regularity=p.regularity)
    v, grad_v = oracles.random_smooth_test_functions(1, seed=3)[0]
    assert abs(oracles.weak_residual(broken, v, grad_v, 0.0)) > 1e-3
