"""Uniform simplicial meshes of the unit square/cube with HDG connectivity.

2D: each grid square is split into two triangles by the diagonal from the
lower-left to the upper-right corner. 3D: each grid cube is split into six
tetrahedra sharing the main diagonal (Kuhn split). Both splits are conforming
and deterministic.
"""

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ElementGeometry:
    measure: float
    h: float
    origin: np.ndarray
    jacobian: np.ndarray


@dataclass(frozen=True)
class Mesh:
    dim: int
    subdivisions: int
    vertices: np.ndarray          # (nv, dim)
    elements: np.ndarray          # (ne, dim+1), positively oriented
    faces: np.ndarray             # (nf, dim), canonically sorted vertex ids
    face_is_boundary: np.ndarray  # (nf,) bool
    elem_to_faces: np.ndarray     # (ne, dim+1); local face i is opposite local vertex i
    elem_face_perm: np.ndarray    # (ne, dim+1, dim); local slot of each canonical face vertex
    h_K: np.ndarray               # (ne,) element diameters (longest edge)
    h_e: np.ndarray               # (nf,) face diameters
    normals: np.ndarray           # (ne, dim+1, dim) outward unit normals

    @property
    def num_elements(self):
        return self.elements.shape[0]

    @property
    def num_faces(self):
        return self.faces.shape[0]

    def interior_faces(self):
        return np.flatnonzero(~self.face_is_boundary)

    def face_vertices(self, face):
        return self.vertices[self.faces[face]]

    def face_measures(self):
        coords = self.vertices[self.faces]
        if self.dim == 2:
            return np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1)
        cross = np.cross(coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)


def _grid_vertices(dim, M):
    axes = [np.linspace(0.0, 1.0, M + 1)] * dim
    grids = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


def _vertex_index(dim, M, idx):
    # idx: (..., dim) integer lattice coordinates, 'ij' raveling
    out = idx[..., 0]
    for c in range(1, dim):
        out = out * (M + 1) + idx[..., c]
    return out


def _triangles(M):
    elems = []
    for i in range(M):
        for j in range(M):
            ll = (i, j)
            lr = (i + 1, j)
            ur = (i + 1, j + 1)
            ul = (i, j + 1)
            elems.append((ll, lr, ur))
            elems.append((ll, ur, ul))
    idx = np.array(elems, dtype=int)
    return _vertex_index(2, M, idx)


def _tetrahedra(M):
    # Kuhn split: one tet per permutation of the axes, all sharing the
    # main diagonal of the cube; odd permutations are reordered for a
    # positive orientation.
    elems = []
    perms = list(itertools.permutations(range(3)))
    for i in range(M):
        for j in range(M):
            for k in range(M):
                base = np.array([i, j, k])
                for perm in perms:
                    corners = [base.copy()]
                    step = base.copy()
                    for axis in perm:
                        step = step.copy()
                        step[axis] += 1
                        corners.append(step)
                    elems.append(corners)
    idx = np.array(elems, dtype=int)
    verts = _grid_vertices(3, M)
    conn = _vertex_index(3, M, idx)
    coords = verts[conn]
    det = np.linalg.det(coords[:, 1:] - coords[:, :1])
    flip = det < 0
    conn[flip, 2], conn[flip, 3] = conn[flip, 3].copy(), conn[flip, 2].copy()
    return conn


def _build_faces(dim, elements):
    ne = elements.shape[0]
    nloc = dim + 1
    local_faces = []
    for i in range(nloc):
        local_faces.append([v for v in range(nloc) if v != i])
    local_faces = np.array(local_faces, dtype=int)  # (dim+1, dim)

    all_faces = elements[:, local_faces]            # (ne, dim+1, dim)
    all_sorted = np.sort(all_faces, axis=2).reshape(ne * nloc, dim)
    faces, inverse, counts = np.unique(
        all_sorted, axis=0, return_inverse=True, return_counts=True
    )
    if not np.all((counts == 1) | (counts == 2)):
        raise ValueError("non-manifold connectivity: face shared by >2 elements")
    elem_to_faces = inverse.reshape(ne, nloc)
    boundary = counts == 1

    # local slot (within the element's vertex tuple) of each canonical face vertex
    perm = np.empty((ne, nloc, dim), dtype=int)
    for f in range(nloc):
        canon = faces[elem_to_faces[:, f]]          # (ne, dim)
        match = elements[:, :, None] == canon[:, None, :]
        perm[:, f] = np.argmax(match, axis=1)
    return faces, boundary, elem_to_faces, perm


def _element_diameters(vertices, elements):
    coords = vertices[elements]
    nloc = elements.shape[1]
    pairs = list(itertools.combinations(range(nloc), 2))
    edges = np.stack(
        [np.linalg.norm(coords[:, a] - coords[:, b], axis=1) for a, b in pairs], axis=1
    )
    return edges.max(axis=1)


def _face_diameters(vertices, faces):
    coords = vertices[faces]
    if faces.shape[1] == 2:
        return np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1)
    pairs = [(0, 1), (0, 2), (1, 2)]
    edges = np.stack(
        [np.linalg.norm(coords[:, a] - coords[:, b], axis=1) for a, b in pairs], axis=1
    )
    return edges.max(axis=1)


def _outward_normals(dim, vertices, elements):
    ne = elements.shape[0]
    coords = vertices[elements]
    normals = np.empty((ne, dim + 1, dim))
    for f in range(dim + 1):
        keep = [v for v in range(dim + 1) if v != f]
        fverts = coords[:, keep]
        if dim == 2:
            t = fverts[:, 1] - fverts[:, 0]
            n = np.column_stack([t[:, 1], -t[:, 0]])
        else:
            n = np.cross(fverts[:, 1] - fverts[:, 0], fverts[:, 2] - fverts[:, 0])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        outward = np.einsum(
            "ed,ed->e", n, fverts.mean(axis=1) - coords[:, f]
        )
        n[outward < 0] *= -1.0
        normals[:, f] = n
    return normals


def build_uniform_mesh(dim, M):
    """Uniform simplicial mesh of [0,1]^dim with M subdivisions per side."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    vertices = _grid_vertices(dim, M)
    elements = _triangles(M) if dim == 2 else _tetrahedra(M)
    coords = vertices[elements]
    det = np.linalg.det(coords[:, 1:] - coords[:, :1])
    if np.any(det <= 0):
        raise ValueError("negative element orientation")
    faces, boundary, elem_to_faces, perm = _build_faces(dim, elements)
    mesh = Mesh(
        dim=dim,
        subdivisions=M,
        vertices=vertices,
        elements=elements,
        faces=faces,
        face_is_boundary=boundary,
        elem_to_faces=elem_to_faces,
        elem_face_perm=perm,
        h_K=_element_diameters(vertices, elements),
        h_e=_face_diameters(vertices, faces),
        normals=_outward_normals(dim, vertices, elements),
    )
    if np.any(mesh.h_e[mesh.elem_to_faces] > mesh.h_K[:, None] + 1e-14):
        raise ValueError("face diameter exceeds element diameter")
    return mesh


def element_geometry(mesh, elem):
    """Measure, diameter and reference-to-physical affine map of one element."""
    if not 0 <= elem < mesh.num_elements:
        raise IndexError(f"element index {elem} out of range")
    coords = mesh.vertices[mesh.elements[elem]]
    origin = coords[0]
    jac = (coords[1:] - origin).T
    det = np.linalg.det(jac)
    if det <= 1e-300:
        raise ValueError(f"degenerate element {elem}")
    ref_measure = 0.5 if mesh.dim == 2 else 1.0 / 6.0
    return ElementGeometry(
        measure=det * ref_measure,
        h=float(mesh.h_K[elem]),
        origin=origin.copy(),
        jacobian=jac.copy(),
    )


def dump_mesh(mesh):
    """Plain-text mesh dump for debugging; not a stable format."""
    lines = [
        f"{mesh.dim} {mesh.subdivisions} {len(mesh.vertices)} "
        f"{mesh.num_elements} {mesh.num_faces}"
    ]
    for v in mesh.vertices:
        lines.append(" ".join(f"{x:.17g}" for x in v))
    for e in mesh.elements:
        lines.append(" ".join(str(int(i)) for i in e))
    return "\n".join(lines) + "\n"
