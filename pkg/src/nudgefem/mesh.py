"""Uniform quadrilateral meshes on the square [-1, 1]^2.

Node numbering is lexicographic with x running fastest; element (i, j) in
column i, row j has id ``j * cells_per_side + i`` and lists its four nodes
counter-clockwise starting from the lower-left corner.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DOMAIN_MIN = -1.0
DOMAIN_MAX = 1.0
DOMAIN_AREA = 4.0

# local face ids: 0 bottom, 1 right, 2 top, 3 left
_FACE_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
_FACE_NODES = np.array([[0, 1], [1, 2], [3, 2], [0, 3]])  # in +x / +y order


@dataclass(frozen=True)
class BoundaryEdges:
    """Boundary edge table, ordered side-major: bottom, right, top, left."""

    element: np.ndarray      # (n_edges,) element ids
    local_face: np.ndarray   # (n_edges,) face id within the element
    nodes: np.ndarray        # (n_edges, 2) node ids along +x / +y direction
    normals: np.ndarray      # (n_edges, 2) outward unit normals
    lengths: np.ndarray      # (n_edges,) edge lengths

    def __len__(self) -> int:
        return len(self.element)


@dataclass(frozen=True)
class Mesh:
    level: int
    h: float
    cells_per_side: int
    nodes_per_side: int
    nodes: np.ndarray        # (n_nodes, 2)
    elements: np.ndarray     # (n_elements, 4)
    boundary_edges: BoundaryEdges

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def element_origin(self, elems=None) -> np.ndarray:
        """Lower-left corner coordinates of the given (or all) elements."""
        conn = self.elements if elems is None else self.elements[elems]
        return self.nodes[conn[..., 0]]


def build_mesh(level: int) -> Mesh:
    """Build the uniform quad mesh with mesh size h = 2**-level."""
    if level < 2:
        raise ValueError(f"mesh level must be >= 2, got {level}")
    m = 2 ** (level + 1)          # cells per side
    nps = m + 1                   # nodes per side
    h = 2.0 ** (-level)

    coords_1d = DOMAIN_MIN + h * np.arange(nps)
    coords_1d[-1] = DOMAIN_MAX
    xx, yy = np.meshgrid(coords_1d, coords_1d, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    jj, ii = np.divmod(np.arange(m * m), m)
    n0 = jj * nps + ii
    elements = np.column_stack([n0, n0 + 1, n0 + nps + 1, n0 + nps])

    boundary = _build_boundary(m, nps, h)
    return Mesh(level=level, h=h, cells_per_side=m, nodes_per_side=nps,
                nodes=nodes, elements=elements, boundary_edges=boundary)


def _build_boundary(m: int, nps: int, h: float) -> BoundaryEdges:
    k = np.arange(m)
    # element ids per side, traversed in increasing coordinate
    sides = [
        (k, 0),                       # bottom row
        ((k + 1) * m - 1, 1),         # right column
        ((m - 1) * m + k, 2),         # top row
        (k * m, 3),                   # left column
    ]
    elems, faces = [], []
    for ids, face in sides:
        elems.append(ids)
        faces.append(np.full(m, face))
    element = np.concatenate(elems)
    local_face = np.concatenate(faces)
    n0 = (element % m) + (element // m) * nps
    all_conn = np.column_stack([n0, n0 + 1, n0 + nps + 1, n0 + nps])
    nodes = all_conn[np.arange(len(element))[:, None], _FACE_NODES[local_face]]
    normals = _FACE_NORMALS[local_face]
    lengths = np.full(len(element), h)
    return BoundaryEdges(element=element, local_face=local_face, nodes=nodes,
                         normals=normals, lengths=lengths)


def locate_point(mesh: Mesh, p) -> tuple[int, np.ndarray]:
    """Find the element containing p and its local coordinates in [0, 1]^2.

    Points on shared edges or nodes are assigned to the adjacent element
    with the lowest id.
    """
    x, y = float(p[0]), float(p[1])
    if not (DOMAIN_MIN <= x <= DOMAIN_MAX and DOMAIN_MIN <= y <= DOMAIN_MAX):
        raise ValueError(f"point {p} lies outside the domain [-1, 1]^2")
    m = mesh.cells_per_side

    def cell_index(coord: float) -> int:
        s = (coord - DOMAIN_MIN) / mesh.h
        i = int(np.floor(s))
        if i == s and i > 0:      # on a grid line: take the lower cell
            i -= 1
        return min(i, m - 1)

    i, j = cell_index(x), cell_index(y)
    elem = j * m + i
    origin = mesh.nodes[mesh.elements[elem, 0]]
    local = (np.array([x, y]) - origin) / mesh.h
    return elem, local


def elements_touching(mesh: Mesh, p) -> np.ndarray:
    """Ids of all elements whose closure contains p (1, 2 or 4 elements)."""
    x, y = float(p[0]), float(p[1])
    m = mesh.cells_per_side
    ids = []
    for di in (0, 1):
        for dj in (0, 1):
            sx = (x - DOMAIN_MIN) / mesh.h
            sy = (y - DOMAIN_MIN) / mesh.h
            i = int(np.floor(sx)) - di if sx == np.floor(sx) else int(np.floor(sx))
            j = int(np.floor(sy)) - dj if sy == np.floor(sy) else int(np.floor(sy))
            if 0 <= i < m and 0 <= j < m:
                ids.append(j * m + i)
    return np.unique(np.array(ids, dtype=int))


@dataclass(frozen=True)
class NestingMap:
    """Maps each fine element into its containing coarse element."""

    coarse_level: int
    fine_level: int
    coarse_element: np.ndarray   # (n_fine_elements,)
    local_offset: np.ndarray     # (n_fine_elements, 2) in coarse local coords
    local_scale: float           # fine local -> coarse local scaling

    def to_coarse_local(self, fine_elems: np.ndarray, fine_local: np.ndarray) -> np.ndarray:
        """Coarse local coordinates for points given in fine local coords.

        fine_elems: (n,) element ids; fine_local: broadcastable (..., 2).
        """
        return self.local_offset[fine_elems][..., None, :] + self.local_scale * fine_local


def build_nesting(coarse: Mesh, fine: Mesh) -> NestingMap:
    if fine.level < coarse.level:
        raise ValueError(
            f"fine level {fine.level} must be >= coarse level {coarse.level}")
    d = fine.level - coarse.level
    ratio = 2 ** d
    mf = fine.cells_per_side
    jj, ii = np.divmod(np.arange(fine.n_elements), mf)
    ci, cj = ii // ratio, jj // ratio
    coarse_element = cj * coarse.cells_per_side + ci
    local_offset = np.column_stack([(ii % ratio), (jj % ratio)]) / float(ratio)
    return NestingMap(coarse_level=coarse.level, fine_level=fine.level,
                      coarse_element=coarse_element, local_offset=local_offset,
                      local_scale=1.0 / ratio)
