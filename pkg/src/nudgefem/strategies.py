"""Observation strategies: the coupling data that realizes nudging by a
coarse FE projection, by piecewise constants on the boundary mesh, or by
the domain mean value.

A strategy is stored as (C, G): C pairs fine basis functions with coarse
test objects and G is the Gram matrix of the observation inner product, so
the induced nudging operator is mu * C G^{-1} C^T and the discrete nudger
can be recovered as mu * G^{-1} (C^T u - b) for observation pairings b.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import fem
from .fem import QuadratureConfig, gauss_rule_1d, gauss_rule_2d, shape_values
from .linalg import LowRankCorrection
from .mesh import Mesh, NestingMap, build_mesh, build_nesting
from .problems import TestProblem

STRATEGY_KINDS = ("fe_projection", "boundary_projection", "mean_value", "none")
MEAN_SCALINGS = ("y_norm", "eq420")
DOMAIN_AREA = 4.0

# advisory saturated-parameter estimate for the mean value: the inverse
# Poincare constant of the square, i.e. the first nonzero Neumann
# eigenvalue (pi/2)^2 of the Laplacian on [-1, 1]^2
MEAN_VALUE_MU_SATURATED = (np.pi / 2.0) ** 2


@dataclass
class ObservationStrategy:
    kind: str
    dim: int                           # observation space dimension r
    coupling: sp.csr_matrix            # (n_fine, r): fine-basis pairings
    gram: np.ndarray                   # (r, r) SPD Gram of the Y pairing
    mu_saturated: float                # advisory saturation estimate
    fine_mesh: Mesh
    coarse_mesh: Mesh | None = None
    nesting: NestingMap | None = None
    mean_scaling: str = "y_norm"
    _pair_cache: dict = field(default_factory=dict, repr=False)

    @property
    def is_active(self) -> bool:
        return self.kind != "none"

    def gram_solve(self, rhs: np.ndarray) -> np.ndarray:
        return sla.solve(self.gram, rhs, assume_a="pos")

    def observation_pairing(self, problem: TestProblem,
                            quad: QuadratureConfig) -> np.ndarray:
        """Time-independent pairing vector b0 with entries (spatial, psi_j).

        Exact observations at time t are cos(omega t) * b0. Cached per
        problem since the time stepper queries it every step.
        """
        key = (problem.kind, problem.omega, quad)
        if key not in self._pair_cache:
            self._pair_cache[key] = self._pairing(problem, quad)
        return self._pair_cache[key]

    def _pairing(self, problem: TestProblem, quad: QuadratureConfig) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(0)
        if self.kind == "fe_projection":
            return _pair_with_coarse_basis(self.fine_mesh, self.nesting,
                                           self.coarse_mesh, problem.spatial,
                                           quad)
        if self.kind == "boundary_projection":
            return _pair_with_coarse_edges(self.fine_mesh, self.coarse_mesh,
                                           problem.spatial, quad.q_err)
        total = fem.integrate_scalar(self.fine_mesh, problem.spatial, quad.q_err,
                                     singular_point=problem.singular_point,
                                     k_sing=quad.k_sing)
        return np.array([total])


def build_strategy(kind: str, coarse_level: int, fine_mesh: Mesh,
                   quad: QuadratureConfig = QuadratureConfig(),
                   mean_scaling: str = "y_norm") -> ObservationStrategy:
    if kind not in STRATEGY_KINDS:
        raise ValueError(f"unknown strategy kind {kind!r}")
    if mean_scaling not in MEAN_SCALINGS:
        raise ValueError(f"unknown mean scaling {mean_scaling!r}")
    n = fine_mesh.n_nodes

    if kind == "none":
        return ObservationStrategy(kind=kind, dim=0,
                                   coupling=sp.csr_matrix((n, 0)),
                                   gram=np.zeros((0, 0)), mu_saturated=0.0,
                                   fine_mesh=fine_mesh)

    if kind == "mean_value":
        mass = fem.assemble_operators(fine_mesh, None, quad).mass
        coupling = sp.csr_matrix(mass @ np.ones(n)).T
        area = DOMAIN_AREA
        gram = np.array([[area if mean_scaling == "y_norm" else area**2]])
        return ObservationStrategy(kind=kind, dim=1, coupling=coupling,
                                   gram=gram, mu_saturated=MEAN_VALUE_MU_SATURATED,
                                   fine_mesh=fine_mesh, mean_scaling=mean_scaling)

    if coarse_level > fine_mesh.level:
        raise ValueError("coarse level must not exceed the fine level")
    coarse = build_mesh(coarse_level)

    if kind == "fe_projection":
        nesting = build_nesting(coarse, fine_mesh)
        coupling = _assemble_domain_coupling(fine_mesh, nesting, coarse)
        gram = fem.assemble_operators(coarse, None, quad).mass.toarray()
        return ObservationStrategy(kind=kind, dim=coarse.n_nodes,
                                   coupling=coupling, gram=gram,
                                   mu_saturated=float(4.0 ** coarse_level),
                                   fine_mesh=fine_mesh, coarse_mesh=coarse,
                                   nesting=nesting)

    # boundary projection onto piecewise constants on the coarse boundary mesh
    coupling = _assemble_boundary_coupling(fine_mesh, coarse)
    n_edges = len(coarse.boundary_edges)
    gram = np.diag(coarse.boundary_edges.lengths)
    return ObservationStrategy(kind=kind, dim=n_edges, coupling=coupling,
                               gram=gram, mu_saturated=1.0,
                               fine_mesh=fine_mesh, coarse_mesh=coarse)


def _assemble_domain_coupling(fine: Mesh, nesting: NestingMap,
                              coarse: Mesh) -> sp.csr_matrix:
    """C with C_ij = (phi_i, psi_j): fine x coarse mass coupling.

    Integrands are polynomial on each fine element (nested meshes), so a
    fixed order-3 Gauss rule is exact.
    """
    pts, wts = gauss_rule_2d(3)
    fine_vals = shape_values(pts)                          # (nq, 4)
    elems = np.arange(fine.n_elements)
    coarse_pts = nesting.to_coarse_local(elems, pts)       # (nE, nq, 2)
    coarse_vals = shape_values(coarse_pts)                 # (nE, nq, 4)
    local = fine.h**2 * np.einsum("q,qi,eqj->eij", wts, fine_vals, coarse_vals)
    rows = np.repeat(fine.elements, 4, axis=1).ravel()
    cols = np.tile(coarse.elements[nesting.coarse_element], (1, 4)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)),
                        shape=(fine.n_nodes, coarse.n_nodes))
    return mat.tocsr()


def _coarse_edge_of_fine_edges(fine: Mesh, coarse: Mesh) -> np.ndarray:
    """Index of the coarse boundary edge containing each fine boundary edge.

    Both edge tables are side-major (bottom, right, top, left) and traversed
    in increasing coordinate, so the mapping is pure index arithmetic.
    """
    ratio = fine.cells_per_side // coarse.cells_per_side
    m_f = fine.cells_per_side
    idx = np.arange(4 * m_f)
    side, offset = np.divmod(idx, m_f)
    return side * coarse.cells_per_side + offset // ratio


def _assemble_boundary_coupling(fine: Mesh, coarse: Mesh) -> sp.csr_matrix:
    """C with C_ij = integral of phi_i over coarse boundary edge j."""
    be = fine.boundary_edges
    coarse_edge = _coarse_edge_of_fine_edges(fine, coarse)
    # integral of each P1 trace over its fine edge: h/2 per edge node
    vals = np.repeat(be.lengths / 2.0, 2)
    rows = be.nodes.ravel()
    cols = np.repeat(coarse_edge, 2)
    mat = sp.coo_matrix((vals, (rows, cols)),
                        shape=(fine.n_nodes, len(coarse.boundary_edges)))
    return mat.tocsr()


def _pair_with_coarse_basis(fine: Mesh, nesting: NestingMap, coarse: Mesh,
                            func, quad: QuadratureConfig) -> np.ndarray:
    """Vector with entries (func, psi_j) for the coarse Q1 basis."""
    h = fine.h
    pts, wts = gauss_rule_2d(quad.q_err)
    origins = fine.element_origin()
    phys = origins[:, None, :] + h * pts[None, :, :]
    fvals = np.asarray(func(phys.reshape(-1, 2))).reshape(fine.n_elements, -1)
    elems = np.arange(fine.n_elements)
    cvals = shape_values(nesting.to_coarse_local(elems, pts))
    contrib = h**2 * np.einsum("eq,q,eqj->ej", fvals, wts, cvals)
    out = np.zeros(coarse.n_nodes)
    np.add.at(out, coarse.elements[nesting.coarse_element], contrib)
    return out


def _pair_with_coarse_edges(fine: Mesh, coarse: Mesh, func,
                            order: int) -> np.ndarray:
    """Vector with entries (func, 1)_edge for each coarse boundary edge."""
    be = fine.boundary_edges
    coarse_edge = _coarse_edge_of_fine_edges(fine, coarse)
    x, w = gauss_rule_1d(order)
    a = fine.nodes[be.nodes[:, 0]]
    b = fine.nodes[be.nodes[:, 1]]
    pts = a[:, None, :] + x[None, :, None] * (b - a)[:, None, :]
    fvals = np.asarray(func(pts.reshape(-1, 2))).reshape(len(be), -1)
    per_edge = be.lengths * (fvals @ w)
    out = np.zeros(len(coarse.boundary_edges))
    np.add.at(out, coarse_edge, per_edge)
    return out


def observe_exact(strategy: ObservationStrategy, problem: TestProblem,
                  t: float, quad: QuadratureConfig = QuadratureConfig()) -> np.ndarray:
    """Exact-solution observation pairings (nu(t), psi_j) in the Y pairing."""
    if not strategy.is_active:
        return np.zeros(0)
    return problem.time_factor(t) * strategy.observation_pairing(problem, quad)


def nudging_correction(strategy: ObservationStrategy,
                       mu: float) -> LowRankCorrection:
    """Low-rank operator mu * C G^{-1} C^T induced by the nudging term."""
    if mu < 0:
        raise ValueError("nudging parameter mu must be nonnegative")
    n = strategy.fine_mesh.n_nodes
    if not strategy.is_active or mu == 0.0:
        return LowRankCorrection.empty(n)
    u_block = np.asarray(strategy.coupling.todense())
    core = mu * sla.inv(strategy.gram)
    core = 0.5 * (core + core.T)
    return LowRankCorrection(u_block=u_block, core=core, sign=1,
                             core_inverse=strategy.gram / mu)


def recover_nudger(strategy: ObservationStrategy, mu: float, u: np.ndarray,
                   observations: np.ndarray) -> np.ndarray:
    """Coarse nudger z = mu * G^{-1} (C^T u - b)."""
    if not strategy.is_active:
        raise ValueError("cannot recover a nudger for the inert strategy")
    return mu * strategy.gram_solve(strategy.coupling.T @ u - observations)
