"""Manufactured test problems: smooth, Dirac point source, and the Kellogg
checkerboard interface problem.

Every exact solution separates as value(x, t) = cos(omega*t) * spatial(x),
which the assembly and error paths exploit by caching the time-independent
spatial pairings. The forcing likewise splits into
f = cos(omega*t) * (steady field + dirac_strength * delta(x0))
    + sin(omega*t) * (-omega * spatial).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

PROBLEM_KINDS = ("smooth", "dirac", "kellogg")
FINAL_TIME = 3.0
KELLOGG_ALPHA = 0.25
KELLOGG_CONTRAST = 25.27414236908818


@dataclass(frozen=True)
class TestProblem:
    kind: str
    omega: float
    x0: tuple[float, float]
    spatial: Callable                 # (n, 2) -> (n,)
    spatial_gradient: Callable        # (n, 2) -> (n, 2)
    conductivity: Callable | None     # (n, 2) -> (n,); None means identity
    forcing_steady: float             # constant field part of the cos component
    dirac_strength: float             # coefficient of cos(omega t) * delta(x0)
    singular_point: tuple[float, float] | None
    regularity: float                 # H^{1+s} exponent label for reports
    T: float = FINAL_TIME

    def time_factor(self, t: float) -> float:
        return math.cos(self.omega * t)

    def exact(self, pts: np.ndarray, t: float) -> np.ndarray:
        return self.time_factor(t) * self.spatial(pts)

    def exact_gradient(self, pts: np.ndarray, t: float) -> np.ndarray:
        return self.time_factor(t) * self.spatial_gradient(pts)

    def forcing_oscillatory(self, pts: np.ndarray) -> np.ndarray:
        """Spatial factor multiplying sin(omega t) in the forcing."""
        return -self.omega * self.spatial(pts)

    def neumann(self, pts: np.ndarray, normals: np.ndarray, t: float) -> np.ndarray:
        """Conormal boundary data g = (A grad value) . n."""
        grad = self.exact_gradient(pts, t)
        flux = np.einsum("nd,nd->n", grad, normals)
        if self.conductivity is not None:
            flux = flux * self.conductivity(pts)
        return flux


@dataclass(frozen=True)
class KelloggAngular:
    """Piecewise-cosine angular factor of the checkerboard singular solution.

    Each quadrant piece has the form amplitude * cos(alpha*(theta - phase));
    the pieces match continuously at the four interface angles and the
    coefficient-weighted angular flux is continuous there as well.
    """

    alpha: float
    contrast: float                   # conductivity on the quadrants with xy >= 0
    rho: float
    sigma: float
    amplitudes: np.ndarray            # (4,)
    phases: np.ndarray                # (4,)

    def _pieces(self, theta: np.ndarray) -> np.ndarray:
        theta = np.mod(theta, 2.0 * np.pi)
        return np.minimum((theta / (np.pi / 2)).astype(int), 3)

    def value(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        q = self._pieces(theta)
        tm = np.mod(theta, 2.0 * np.pi)
        return self.amplitudes[q] * np.cos(self.alpha * (tm - self.phases[q]))

    def derivative(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        q = self._pieces(theta)
        tm = np.mod(theta, 2.0 * np.pi)
        return -self.alpha * self.amplitudes[q] * np.sin(self.alpha * (tm - self.phases[q]))

    def piece_value(self, q: int, theta) -> np.ndarray:
        """Evaluate piece q without folding theta into its quadrant."""
        return self.amplitudes[q] * np.cos(self.alpha * (np.asarray(theta, float) - self.phases[q]))

    def piece_derivative(self, q: int, theta) -> np.ndarray:
        return -self.alpha * self.amplitudes[q] * np.sin(
            self.alpha * (np.asarray(theta, float) - self.phases[q]))


def _kellogg_family(alpha: float, rho: float, sigma: float,
                    contrast: float) -> KelloggAngular:
    half_pi = np.pi / 2
    amplitudes = np.array([
        np.cos((half_pi - sigma) * alpha),
        np.cos(rho * alpha),
        np.cos(sigma * alpha),
        np.cos((half_pi - rho) * alpha),
    ])
    phases = np.array([
        half_pi - rho,
        np.pi - sigma,
        np.pi + rho,
        1.5 * np.pi + sigma,
    ])
    return KelloggAngular(alpha=alpha, contrast=contrast, rho=rho, sigma=sigma,
                          amplitudes=amplitudes, phases=phases)


def _interface_residuals(angular: KelloggAngular) -> np.ndarray:
    """Continuity and coefficient-weighted flux residuals at the four kinks."""
    b = angular.contrast
    coeff = [b, 1.0, b, 1.0]          # conductivity per quadrant
    kinks = [(np.pi / 2,) * 2, (np.pi,) * 2, (1.5 * np.pi,) * 2,
             (2.0 * np.pi, 0.0)]      # wrap point: piece 0 evaluated at 0
    res = []
    for k, (t_left, t_right) in enumerate(kinks):
        left, right = k, (k + 1) % 4
        res.append(float(angular.piece_value(left, t_left)
                         - angular.piece_value(right, t_right)))
        res.append(float(coeff[left] * angular.piece_derivative(left, t_left)
                         - coeff[right] * angular.piece_derivative(right, t_right)))
    return np.array(res)


def solve_kellogg_parameters(alpha: float = KELLOGG_ALPHA,
                             contrast: float = KELLOGG_CONTRAST,
                             max_iter: int = 100) -> KelloggAngular:
    """Recover the angular parameters (rho, sigma) by a damped Newton solve.

    The interface system consists of continuity of the angular function and
    continuity of the coefficient-weighted angular flux at the four kinks;
    the piece amplitudes are tied to (rho, sigma) so that continuity holds
    by construction, which leaves a 2x2 nonlinear system.
    """
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    if contrast <= 0:
        raise ValueError("contrast must be positive")

    def residual(u):
        ang = _kellogg_family(alpha, u[0], u[1], contrast)
        r = _interface_residuals(ang)
        return r[[1, 3]]              # flux residuals at theta = pi/2 and pi

    # start inside the admissible window for this family
    u = np.array([np.pi / 4, np.pi / 4 - np.pi / (2 * alpha)])
    for _ in range(max_iter):
        r = residual(u)
        if np.max(np.abs(r)) < 1e-13:
            break
        eps = 1e-7
        jac = np.empty((2, 2))
        for j in range(2):
            du = np.zeros(2)
            du[j] = eps
            jac[:, j] = (residual(u + du) - residual(u - du)) / (2 * eps)
        step = np.linalg.solve(jac, -r)
        lam = 1.0
        base = np.linalg.norm(r)
        while lam > 1e-8:
            trial = u + lam * step
            if np.linalg.norm(residual(trial)) < base:
                break
            lam *= 0.5
        u = u + lam * step
    angular = _kellogg_family(alpha, u[0], u[1], contrast)
    full = _interface_residuals(angular)
    if np.max(np.abs(full)) > 1e-12:
        raise RuntimeError(
            "Newton solve for the angular interface system did not converge: "
            f"max residual {np.max(np.abs(full)):.3e} (inconsistent alpha/contrast?)")
    mean = _angular_mean(angular)
    if abs(mean) > 1e-12:
        raise RuntimeError(f"angular factor is not mean-free: {mean:.3e}")
    return angular


def _angular_mean(angular: KelloggAngular) -> float:
    """Exact integral of the angular factor over one period."""
    total = 0.0
    half_pi = np.pi / 2
    for q in range(4):
        a, bnd = q * half_pi, (q + 1) * half_pi
        c, t0 = angular.amplitudes[q], angular.phases[q]
        total += c / angular.alpha * (np.sin(angular.alpha * (bnd - t0))
                                      - np.sin(angular.alpha * (a - t0)))
    return float(total)


def _kellogg_spatial(angular: KelloggAngular):
    alpha = angular.alpha

    def spatial(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        out = np.zeros(len(pts))
        mask = rho > 0
        out[mask] = rho[mask] ** alpha * angular.value(theta[mask])
        return out

    def gradient(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        if np.any(rho == 0):
            raise ValueError("gradient requested at the singular point")
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        mu = angular.value(theta)
        dmu = angular.derivative(theta)
        dr = alpha * rho ** (alpha - 1) * mu
        dt = rho ** (alpha - 1) * dmu
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        gx = dr * cos_t - dt * sin_t
        gy = dr * sin_t + dt * cos_t
        return np.column_stack([gx, gy])

    return spatial, gradient


def make_problem(kind: str, omega: float) -> TestProblem:
    """Construct one of the three manufactured test problems."""
    if kind not in PROBLEM_KINDS:
        raise ValueError(f"unknown problem kind {kind!r}")

    if kind == "smooth":
        x0 = np.array([0.5, 0.5])

        def spatial(pts):
            pts = np.atleast_2d(pts)
            d = pts - x0
            return np.einsum("nd,nd->n", d, d)

        def gradient(pts):
            return 2.0 * (np.atleast_2d(pts) - x0)

        return TestProblem(kind=kind, omega=omega, x0=(0.5, 0.5),
                           spatial=spatial, spatial_gradient=gradient,
                           conductivity=None, forcing_steady=-4.0,
                           dirac_strength=0.0, singular_point=None,
                           regularity=1.0)

    if kind == "dirac":
        x0 = np.array([1.0 / 3.0, 1.0 / 3.0])
        scale = 1.0 / (2.0 * np.pi)

        def spatial(pts):
            pts = np.atleast_2d(pts)
            r = np.hypot(pts[:, 0] - x0[0], pts[:, 1] - x0[1])
            out = np.zeros(len(pts))
            mask = r > 0
            out[mask] = -scale * np.log(r[mask])
            return out

        def gradient(pts):
            pts = np.atleast_2d(pts)
            d = pts - x0
            r2 = np.einsum("nd,nd->n", d, d)
            if np.any(r2 == 0):
                raise ValueError("gradient requested at the singular point")
            return -scale * d / r2[:, None]

        return TestProblem(kind=kind, omega=omega, x0=(x0[0], x0[1]),
                           spatial=spatial, spatial_gradient=gradient,
                           conductivity=None, forcing_steady=0.0,
                           dirac_strength=1.0,
                           singular_point=(x0[0], x0[1]), regularity=0.0)

    angular = solve_kellogg_parameters()
    spatial, gradient = _kellogg_spatial(angular)
    contrast = angular.contrast

    def conductivity(pts):
        pts = np.atleast_2d(pts)
        return np.where(pts[:, 0] * pts[:, 1] >= 0, contrast, 1.0)

    return TestProblem(kind=kind, omega=omega, x0=(0.0, 0.0),
                       spatial=spatial, spatial_gradient=gradient,
                       conductivity=conductivity, forcing_steady=0.0,
                       dirac_strength=0.0, singular_point=(0.0, 0.0),
                       regularity=KELLOGG_ALPHA)


def evaluate_exact(problem: TestProblem, x, t: float,
                   want_gradient: bool = False):
    """Point evaluation of the exact solution (and optionally its gradient)."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    value = problem.exact(pts, t)
    value = value[0] if value.shape == (1,) else value
    if not want_gradient:
        return value
    if problem.singular_point is not None:
        d = pts - np.asarray(problem.singular_point)
        if np.any(np.einsum("nd,nd->n", d, d) == 0):
            raise ValueError("gradient requested at the singular point")
    grad = problem.exact_gradient(pts, t)
    grad = grad[0] if grad.shape == (1, 2) else grad
    return value, grad
