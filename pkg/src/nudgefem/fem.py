"""Q1 reference element, quadrature, and assembly on uniform quad meshes.

All assembly routines are vectorized over elements and deterministic: the
scatter order is fixed by the element numbering.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, elements_touching, locate_point


# ---------------------------------------------------------------------------
# reference element and quadrature

def shape_values(pts: np.ndarray) -> np.ndarray:
    """Bilinear shape functions on [0,1]^2 at pts (..., 2) -> (..., 4).

    Node order: counter-clockwise from the lower-left corner.
    """
    xi, eta = pts[..., 0], pts[..., 1]
    return np.stack([(1 - xi) * (1 - eta), xi * (1 - eta),
                     xi * eta, (1 - xi) * eta], axis=-1)


def shape_gradients(pts: np.ndarray) -> np.ndarray:
    """Reference gradients at pts (..., 2) -> (..., 4, 2)."""
    xi, eta = pts[..., 0], pts[..., 1]
    dxi = np.stack([-(1 - eta), (1 - eta), eta, -eta], axis=-1)
    deta = np.stack([-(1 - xi), -xi, xi, (1 - xi)], axis=-1)
    return np.stack([dxi, deta], axis=-1)


@lru_cache(maxsize=None)
def gauss_rule_1d(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [0, 1]."""
    if not 1 <= order <= 64:
        raise ValueError(f"unsupported Gauss order {order}")
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_rule_2d(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule on [0,1]^2: points (nq, 2), weights (nq,)."""
    x, w = gauss_rule_1d(order)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    wts = np.outer(w, w).ravel()
    return pts, wts


@dataclass(frozen=True)
class QuadratureConfig:
    """Quadrature orders for assembly and error evaluation.

    k_sing is the dyadic subdivision depth applied to elements touching a
    problem's singular point when integrating non-polynomial data.
    """

    q_bulk: int = 3
    q_err: int = 5
    k_sing: int = 4

    def __post_init__(self):
        if self.q_bulk < 2:
            raise ValueError("q_bulk must be >= 2")
        if self.q_err < self.q_bulk:
            raise ValueError("q_err must be >= q_bulk")
        if self.k_sing < 0:
            raise ValueError("k_sing must be >= 0")


@lru_cache(maxsize=None)
def subdivided_rule(order: int, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule on [0,1]^2 refined onto a uniform 2**depth grid of subcells."""
    pts, wts = gauss_rule_2d(order)
    if depth == 0:
        return pts, wts
    n = 2 ** depth
    scale = 1.0 / n
    offs = np.arange(n) * scale
    ox, oy = np.meshgrid(offs, offs, indexing="ij")
    origins = np.column_stack([ox.ravel(), oy.ravel()])      # (n*n, 2)
    all_pts = (origins[:, None, :] + scale * pts[None, :, :]).reshape(-1, 2)
    all_wts = np.tile(wts * scale**2, n * n)
    return all_pts, all_wts


# ---------------------------------------------------------------------------
# operators

@dataclass(frozen=True)
class AssembledOperators:
    """Mass, stiffness and fine boundary mass matrices (CSR, symmetric)."""

    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    boundary_mass: sp.csr_matrix


def _as_coefficient(conductivity, pts: np.ndarray) -> np.ndarray:
    if conductivity is None:
        return np.ones(pts.shape[0])
    if np.isscalar(conductivity):
        return np.full(pts.shape[0], float(conductivity))
    return np.asarray(conductivity(pts), dtype=float)


def assemble_operators(mesh: Mesh, conductivity=None,
                       quad: QuadratureConfig = QuadratureConfig()) -> AssembledOperators:
    """Assemble M, K (for the form (A grad u, grad v)) and the boundary mass.

    The conductivity is a scalar multiple of the identity, sampled once per
    element at the centroid; meshes are assumed aligned with any
    discontinuity lines, which makes centroid sampling exact for the
    piecewise-constant coefficients used here.
    """
    h = mesh.h
    pts, wts = gauss_rule_2d(quad.q_bulk)
    nvals = shape_values(pts)                     # (nq, 4)
    gvals = shape_gradients(pts)                  # (nq, 4, 2)

    mass_ref = np.einsum("q,qi,qj->ij", wts, nvals, nvals) * h**2
    stiff_ref = np.einsum("q,qid,qjd->ij", wts, gvals, gvals)  # h-independent

    centroids = mesh.element_origin() + 0.5 * h
    coeff = _as_coefficient(conductivity, centroids)

    conn = mesh.elements
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    n = mesh.n_nodes
    mass_vals = np.tile(mass_ref.ravel(), mesh.n_elements)
    stiff_vals = (coeff[:, None] * stiff_ref.ravel()[None, :]).ravel()
    mass = sp.coo_matrix((mass_vals, (rows, cols)), shape=(n, n)).tocsr()
    stiffness = sp.coo_matrix((stiff_vals, (rows, cols)), shape=(n, n)).tocsr()

    be = mesh.boundary_edges
    edge_mass = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    brows = np.repeat(be.nodes, 2, axis=1).ravel()
    bcols = np.tile(be.nodes, (1, 2)).ravel()
    bvals = (be.lengths[:, None] * edge_mass.ravel()[None, :]).ravel()
    boundary_mass = sp.coo_matrix((bvals, (brows, bcols)), shape=(n, n)).tocsr()

    mass.sum_duplicates()
    stiffness.sum_duplicates()
    boundary_mass.sum_duplicates()
    return AssembledOperators(mass=mass, stiffness=stiffness,
                              boundary_mass=boundary_mass)


# ---------------------------------------------------------------------------
# integration of data against the basis

def _singular_elements(mesh: Mesh, singular_point) -> np.ndarray:
    if singular_point is None:
        return np.empty(0, dtype=int)
    return elements_touching(mesh, singular_point)


def integrate_against_basis(mesh: Mesh, func, order: int,
                            singular_point=None, k_sing: int = 0) -> np.ndarray:
    """Load vector b with b_i = integral of func * phi_i over the domain.

    func maps an (n, 2) array of points to (n,) values. Elements touching
    singular_point are integrated on a 4**k_sing dyadic subdivision.
    """
    h = mesh.h
    pts, wts = gauss_rule_2d(order)
    nvals = shape_values(pts)
    origins = mesh.element_origin()
    phys = origins[:, None, :] + h * pts[None, :, :]
    fvals = np.asarray(func(phys.reshape(-1, 2))).reshape(mesh.n_elements, -1)
    contrib = h**2 * np.einsum("eq,q,qi->ei", fvals, wts, nvals)

    sing = _singular_elements(mesh, singular_point)
    if len(sing) and k_sing > 0:
        spts, swts = subdivided_rule(order, k_sing)
        snvals = shape_values(spts)
        sphys = origins[sing][:, None, :] + h * spts[None, :, :]
        sf = np.asarray(func(sphys.reshape(-1, 2))).reshape(len(sing), -1)
        contrib[sing] = h**2 * np.einsum("eq,q,qi->ei", sf, swts, snvals)

    b = np.zeros(mesh.n_nodes)
    np.add.at(b, mesh.elements, contrib)
    return b


def integrate_gradient_against_basis(mesh: Mesh, grad_func, order: int,
                                     coefficient=None) -> np.ndarray:
    """Vector q with q_i = integral of A * grad_func . grad phi_i.

    grad_func maps (n, 2) points to (n, 2) gradients. No singular
    subdivision: gradient integrands are evaluated with the fixed rule.
    """
    h = mesh.h
    pts, wts = gauss_rule_2d(order)
    gvals = shape_gradients(pts)                  # reference gradients
    origins = mesh.element_origin()
    phys = origins[:, None, :] + h * pts[None, :, :]
    g = np.asarray(grad_func(phys.reshape(-1, 2))).reshape(mesh.n_elements, -1, 2)
    if coefficient is not None:
        centroids = origins + 0.5 * h
        g = g * _as_coefficient(coefficient, centroids)[:, None, None]
    # physical grad phi = ref grad / h; jacobian h^2
    contrib = h * np.einsum("eqd,q,qid->ei", g, wts, gvals)
    q = np.zeros(mesh.n_nodes)
    np.add.at(q, mesh.elements, contrib)
    return q


def integrate_scalar(mesh: Mesh, func, order: int,
                     singular_point=None, k_sing: int = 0) -> float:
    """Integral of func over the domain with optional singular subdivision."""
    h = mesh.h
    pts, wts = gauss_rule_2d(order)
    origins = mesh.element_origin()
    phys = origins[:, None, :] + h * pts[None, :, :]
    fvals = np.asarray(func(phys.reshape(-1, 2))).reshape(mesh.n_elements, -1)
    per_elem = h**2 * (fvals @ wts)

    sing = _singular_elements(mesh, singular_point)
    if len(sing) and k_sing > 0:
        spts, swts = subdivided_rule(order, k_sing)
        sphys = origins[sing][:, None, :] + h * spts[None, :, :]
        sf = np.asarray(func(sphys.reshape(-1, 2))).reshape(len(sing), -1)
        per_elem[sing] = h**2 * (sf @ swts)
    return float(per_elem.sum())


def boundary_load(mesh: Mesh, neumann, order: int) -> np.ndarray:
    """Vector with entries <g, phi_i> over the boundary.

    neumann maps (points (n, 2), normals (n, 2)) to (n,) flux values.
    """
    be = mesh.boundary_edges
    x, w = gauss_rule_1d(order)
    a = mesh.nodes[be.nodes[:, 0]]
    bpt = mesh.nodes[be.nodes[:, 1]]
    pts = a[:, None, :] + x[None, :, None] * (bpt - a)[:, None, :]
    normals = np.repeat(be.normals, len(x), axis=0)
    gvals = np.asarray(neumann(pts.reshape(-1, 2), normals)).reshape(len(be), -1)
    lin = np.column_stack([1.0 - x, x])           # P1 trace on the edge
    contrib = be.lengths[:, None] * np.einsum("eq,q,qi->ei", gvals, w, lin)
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, be.nodes, contrib)
    return out


def point_load(mesh: Mesh, x0) -> np.ndarray:
    """Load vector of a unit Dirac mass at x0: entries phi_i(x0)."""
    elem, local = locate_point(mesh, x0)
    out = np.zeros(mesh.n_nodes)
    out[mesh.elements[elem]] = shape_values(local)
    return out


def l2_project(mass: sp.csr_matrix, mesh: Mesh, func,
               quad: QuadratureConfig = QuadratureConfig(),
               singular_point=None) -> np.ndarray:
    """Discrete L2 projection: solve M c = (func, phi_i)."""
    from .linalg import factorize

    b = integrate_against_basis(mesh, func, quad.q_err,
                                singular_point=singular_point, k_sing=quad.k_sing)
    c = factorize(mass, spd=True).solve(b)
    return c
