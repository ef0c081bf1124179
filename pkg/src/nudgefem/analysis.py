"""Error norms, accumulated space-time errors, convergence-rate tables,
exponential-decay fitting, and the nudged elliptic projection diagnostic."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem, linalg, strategies
from .fem import QuadratureConfig
from .mesh import Mesh
from .problems import TestProblem
from .timestepper import RunRecord

# accumulated-error window start per (strategy, problem); measurements begin
# once the nudging transient has decayed below the discretization level
DEFAULT_WINDOW_START = {
    ("fe_projection", "smooth"): 0.4,
    ("fe_projection", "dirac"): 0.4,
    ("fe_projection", "kellogg"): 0.4,
    ("boundary_projection", "smooth"): 0.4,
    ("boundary_projection", "dirac"): 0.4,
    ("boundary_projection", "kellogg"): 0.4,
    ("mean_value", "smooth"): 2.8,
    ("mean_value", "dirac"): 1.8,
    ("mean_value", "kellogg"): 0.8,
}


def window_start(strategy: str, problem: str, override: float | None = None) -> float:
    if override is not None:
        return override
    return DEFAULT_WINDOW_START.get((strategy, problem), 0.4)


def error_norms(mesh: Mesh, u: np.ndarray, problem: TestProblem, t: float,
                quad: QuadratureConfig = QuadratureConfig()) -> tuple[float, float]:
    """L2 and H1-seminorm errors of the FE function u against the exact
    solution at time t, by element-wise Gauss quadrature.

    Elements touching a singular point are dyadically subdivided for the L2
    integrand only; the gradient integrand uses the fixed rule everywhere
    (the reported convention for solutions whose gradient is not square
    integrable).
    """
    if quad.q_err < 4:
        raise ValueError("error quadrature order must be >= 4")
    h = mesh.h
    pts, wts = fem.gauss_rule_2d(quad.q_err)
    nvals = fem.shape_values(pts)
    gvals = fem.shape_gradients(pts)
    origins = mesh.element_origin()
    phys = (origins[:, None, :] + h * pts[None, :, :]).reshape(-1, 2)
    coeffs = u[mesh.elements]                               # (nE, 4)

    exact = problem.exact(phys, t).reshape(mesh.n_elements, -1)
    uh = np.einsum("ei,qi->eq", coeffs, nvals)
    l2_sq_per_elem = h * h * ((uh - exact) ** 2 @ wts)

    exact_grad = problem.exact_gradient(phys, t).reshape(mesh.n_elements, -1, 2)
    uh_grad = np.einsum("ei,qid->eqd", coeffs, gvals) / h
    diff = uh_grad - exact_grad
    h1_sq_per_elem = h * h * (np.einsum("eqd,eqd->eq", diff, diff) @ wts)

    sing = problem.singular_point
    if sing is not None and quad.k_sing > 0:
        from .mesh import elements_touching
        elems = elements_touching(mesh, sing)
        spts, swts = fem.subdivided_rule(quad.q_err, quad.k_sing)
        snvals = fem.shape_values(spts)
        sphys = (origins[elems][:, None, :] + h * spts[None, :, :]).reshape(-1, 2)
        sexact = problem.exact(sphys, t).reshape(len(elems), -1)
        suh = np.einsum("ei,qi->eq", coeffs[elems], snvals)
        l2_sq_per_elem[elems] = h * h * ((suh - sexact) ** 2 @ swts)

    return (float(np.sqrt(l2_sq_per_elem.sum())),
            float(np.sqrt(h1_sq_per_elem.sum())))


def accumulated_error(record: RunRecord, start_index: int) -> float:
    """Discrete space-time error (sum over k >= start_index of tau*e_k^2)^{1/2}."""
    n = len(record.times) - 1
    if not 0 < start_index <= n:
        raise ValueError(f"start index {start_index} out of range (0, {n}]")
    tau = record.times[1] - record.times[0]
    return float(np.sqrt(np.sum(tau * record.err_l2[start_index:] ** 2)))


def window_index(record: RunRecord, t_start: float) -> int:
    """Smallest step index k with t_k >= t_start."""
    return int(np.searchsorted(record.times, t_start - 1e-12))


@dataclass(frozen=True)
class RateTable:
    levels: tuple[int, ...]
    errors: tuple[float, ...]
    rates: tuple[float, ...]     # rates[i] pairs levels[i+1] with levels[i]

    def rows(self):
        """(level, error, rate-or-None) rows; the first row has no rate."""
        out = [(self.levels[0], self.errors[0], None)]
        for lvl, err, rate in zip(self.levels[1:], self.errors[1:], self.rates):
            out.append((lvl, err, rate))
        return out


def roc_table(errors_by_level: dict[int, float]) -> RateTable:
    """Rates of convergence log2(e_{l-1}/e_l) for dyadically refined levels."""
    if len(errors_by_level) < 1:
        raise ValueError("at least one level required")
    levels = sorted(errors_by_level)
    if any(b - a != 1 for a, b in zip(levels, levels[1:])):
        raise ValueError(f"levels must be consecutive, got {levels}")
    errs = [errors_by_level[l] for l in levels]
    if any(e <= 0 for e in errs):
        raise ValueError("errors must be positive")
    rates = [float(np.log2(a / b)) for a, b in zip(errs, errs[1:])]
    return RateTable(levels=tuple(levels), errors=tuple(float(e) for e in errs),
                     rates=tuple(rates))


@dataclass(frozen=True)
class DecayFit:
    gamma: float
    window: tuple[float, float]
    n_samples: int
    decayed: bool                # False when no decay phase was found

    def __str__(self) -> str:
        if not self.decayed:
            return "no decay phase"
        return f"{self.gamma:.2g}"


def fit_exponential_rate(record: RunRecord,
                         window: tuple[float, float] | None = None,
                         floor_factor: float = 10.0) -> DecayFit:
    """Exponential decay rate gamma: minus the least-squares slope of
    ln e(t_k) over the window.

    With window=None the window is chosen automatically: the longest run of
    strictly decreasing errors staying above floor_factor times the final
    plateau level.
    """
    t, e = np.asarray(record.times), np.asarray(record.err_l2)
    if window is None:
        window = _auto_window(t, e, floor_factor)
        if window is None:
            return DecayFit(gamma=0.0, window=(t[0], t[-1]), n_samples=0,
                            decayed=False)
    mask = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12) & (e > 0)
    if mask.sum() < 5:
        raise ValueError("window must contain at least 5 positive samples")
    slope = np.polyfit(t[mask], np.log(e[mask]), 1)[0]
    return DecayFit(gamma=float(-slope), window=(float(window[0]), float(window[1])),
                    n_samples=int(mask.sum()), decayed=True)


def _auto_window(t: np.ndarray, e: np.ndarray,
                 floor_factor: float) -> tuple[float, float] | None:
    plateau = np.median(e[max(len(e) - max(len(e) // 10, 2), 1):])
    lo = floor_factor * plateau
    ok = np.zeros(len(e), dtype=bool)
    ok[:-1] = (e[1:] < e[:-1]) & (e[:-1] > lo) & (e[:-1] > 0)
    ok[-1] = False
    best, cur_start, best_span = None, None, -1
    for k in range(len(ok) + 1):
        if k < len(ok) and ok[k]:
            if cur_start is None:
                cur_start = k
        elif cur_start is not None:
            end = k          # include the sample the last decrease landed on
            if end - cur_start > best_span:
                best, best_span = (cur_start, end), end - cur_start
            cur_start = None
    if best is None or best_span < 4:
        return None
    return float(t[best[0]]), float(t[best[1]])


def nudged_elliptic_projection(operators: fem.AssembledOperators,
                               strategy: strategies.ObservationStrategy,
                               mu: float, stiffness_pairing: np.ndarray,
                               observation_pairing: np.ndarray) -> np.ndarray:
    """Solve (K + mu C G^{-1} C^T) q = k_pair + mu C G^{-1} b.

    stiffness_pairing holds a(target, phi_i); observation_pairing holds the
    target's observation pairings (target, psi_j). Diagnostic companion of
    the time stepper: the energy-plus-observation best approximation.
    """
    if mu <= 0:
        raise ValueError("the projection requires mu > 0 "
                         "(the pure-Neumann stiffness is singular on constants)")
    if not strategy.is_active:
        raise ValueError("projection undefined for the inert strategy")
    corr = strategies.nudging_correction(strategy, mu)
    rhs = stiffness_pairing + mu * (strategy.coupling
                                    @ strategy.gram_solve(observation_pairing))
    # K alone is singular on constants, so Woodbury on K is unavailable;
    # solve the equivalent symmetric saddle-point form instead
    n, r = strategy.fine_mesh.n_nodes, strategy.dim
    system = sp.bmat([
        [operators.stiffness, sp.csr_matrix(corr.u_block)],
        [sp.csr_matrix(corr.u_block.T), sp.csr_matrix(-corr.core_inverse)],
    ]).tocsc()
    full_rhs = np.concatenate([rhs, np.zeros(r)])
    sol = linalg.factorize(system).solve(full_rhs)
    return sol[:n]


def project_exact(mesh: Mesh, operators: fem.AssembledOperators,
                  strategy: strategies.ObservationStrategy, mu: float,
                  problem: TestProblem, t: float,
                  quad: QuadratureConfig = QuadratureConfig()) -> np.ndarray:
    """Nudged elliptic projection of the exact solution at time t."""
    k_pair = problem.time_factor(t) * fem.integrate_gradient_against_basis(
        mesh, problem.spatial_gradient, quad.q_err,
        coefficient=problem.conductivity)
    b = strategies.observe_exact(strategy, problem, t, quad)
    return nudged_elliptic_projection(operators, strategy, mu, k_pair, b)
