"""Element-local dense blocks of the hybridized scheme.

Per element the discretization needs: the flux-space mass block, the
divergence coupling between flux and scalar unknowns, the trace coupling on
faces, the tau-weighted trace-penalty blocks (tau = inverse shortest edge
per element) and the transport blocks linear in a frozen advecting state. A
`Discretization`
precomputes everything that does not depend on the transport state, batched
over elements; the per-element builders below are thin views into those
tables.

Face integrals are evaluated at quadrature points of the face's canonical
(sorted-vertex) parametrization, pulled back through each adjacent element's
affine map, so both sides of a shared face agree without sign bookkeeping.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .basis import make_basis, make_quadrature, simplex_measure


def volume_rule_degree(k):
    # 3k+2 covers the transport trilinear term; k+7 keeps the polynomial
    # forcing of the smooth verification cases exact against P_k tests
    return max(3 * k + 2, k + 7)


def face_rule_degree(k):
    return 3 * k + 2


class Discretization:
    """Precomputed geometry, basis tables and local blocks for one (mesh, k, l)."""

    def __init__(self, mesh, k, l):
        if k < 1:
            raise ValueError(f"scalar degree k must be >= 1, got {k}")
        if l not in (k, k - 1):
            raise ValueError(f"face degree l must be k or k-1, got l={l} for k={k}")
        self.mesh = mesh
        self.k = k
        self.l = l
        d = mesh.dim
        self.basis_u = make_basis(d, k)
        self.basis_q = make_basis(d, k - 1)
        self.basis_face = make_basis(d - 1, l)
        self.n_u = self.basis_u.size
        self.n_qs = self.basis_q.size
        self.n_q = d * self.n_qs
        self.n_l = self.basis_face.size

        self._setup_geometry()
        self._setup_volume_tables()
        self._setup_face_tables()
        self._setup_trace_dofs()
        self._step_cache = {}

    # -- geometry ---------------------------------------------------------

    def _setup_geometry(self):
        mesh = self.mesh
        coords = mesh.vertices[mesh.elements]
        self.origins = coords[:, 0].copy()
        self.jac = np.transpose(coords[:, 1:] - coords[:, :1], (0, 2, 1))
        self.det_j = np.linalg.det(self.jac)
        if np.any(self.det_j <= 0):
            raise ValueError("non-positive element Jacobian")
        self.jac_inv = np.linalg.inv(self.jac)
        # penalty weight: inverse of the element's shortest edge, i.e. the
        # inverse grid spacing on the uniform meshes built here (the diameter
        # variant overdamps the scalar field and misses the reference tables)
        pairs = list(itertools.combinations(range(mesh.dim + 1), 2))
        edges = np.stack(
            [np.linalg.norm(coords[:, a] - coords[:, b], axis=1) for a, b in pairs],
            axis=1,
        )
        self.shortest_edge = edges.min(axis=1)
        self.tau = 1.0 / self.shortest_edge
        ref_face = simplex_measure(mesh.dim - 1)
        self.face_scale = mesh.face_measures() / ref_face

    # -- volume tables ----------------------------------------------------

    def _setup_volume_tables(self):
        d = self.mesh.dim
        self.vol_rule = make_quadrature(d, volume_rule_degree(self.k))
        pts, w = self.vol_rule.points, self.vol_rule.weights
        self.vol_weights = w
        self.phi_u = self.basis_u.eval(pts)                      # (Q, nu)
        grad_u_ref = self.basis_u.eval_grad(pts)                 # (Q, nu, d)
        grad_q_ref = self.basis_q.eval_grad(pts)                 # (Q, nqs, d)
        self.grad_u_phys = np.einsum("qim,emc->eqic", grad_u_ref, self.jac_inv)
        grad_q_phys = np.einsum("qim,emc->eqic", grad_q_ref, self.jac_inv)

        self.vol_points = self.origins[:, None, :] + np.einsum(
            "ecm,qm->eqc", self.jac, pts
        )

        # divergence coupling: rows (component c, flux basis i), cols scalar basis j
        cu = np.einsum(
            "q,qj,eqic->ecij", w, self.phi_u, grad_q_phys
        ) * self.det_j[:, None, None, None]
        E = self.mesh.num_elements
        self.cu = cu.reshape(E, self.n_q, self.n_u)

        # transport volume tensor, antisymmetric in the last two axes
        su = self.grad_u_phys.sum(axis=3)                        # (E, Q, nu)
        term = np.einsum("q,qs,eqj,qi->esij", w, self.phi_u, su, self.phi_u)
        self.t_vol = (term - np.transpose(term, (0, 1, 3, 2))) * (
            self.det_j[:, None, None, None] / 3.0
        )

    # -- face tables ------------------------------------------------------

    def _setup_face_tables(self):
        mesh = self.mesh
        d = mesh.dim
        E = mesh.num_elements
        F = d + 1
        self.face_rule = make_quadrature(d - 1, face_rule_degree(self.k))
        fpts, fw = self.face_rule.points, self.face_rule.weights
        Qf = len(fw)
        self.chi_face = self.basis_face.eval(fpts)               # (Qf, nl)

        fverts = mesh.vertices[mesh.faces[mesh.elem_to_faces]]   # (E, F, d, d)
        v0 = fverts[:, :, 0]
        edges = fverts[:, :, 1:] - v0[:, :, None, :]             # (E, F, d-1, d)
        phys = v0[:, :, None, :] + np.einsum("qm,efmc->efqc", fpts, edges)
        self.face_points = phys
        ref = np.einsum(
            "emc,efqc->efqm", self.jac_inv, phys - self.origins[:, None, None, :]
        )
        flat = ref.reshape(E * F * Qf, d)
        self.phi_u_face = self.basis_u.eval(flat).reshape(E, F, Qf, self.n_u)
        phi_q_face = self.basis_q.eval(flat).reshape(E, F, Qf, self.n_qs)

        scale = self.face_scale[mesh.elem_to_faces]              # (E, F)
        nsum = mesh.normals.sum(axis=2)                          # (E, F)

        # trace coupling: <chi_m, psi_i n_c> per local face
        chat = np.einsum(
            "q,qm,efqi,efc->efcim", fw, self.chi_face, phi_q_face, mesh.normals
        ) * scale[:, :, None, None, None]
        self.chat = chat.reshape(E, F, self.n_q, self.n_l)

        # trace projection of element functions (face mass is scale * I)
        self.proj_face = np.einsum("q,qm,efqj->efmj", fw, self.chi_face, self.phi_u_face)

        # face mass is scale * identity, so the projection matrix is the
        # scale-free moment table and the penalty blocks carry tau * scale
        tau_scale = self.tau[:, None] * scale                    # (E, F)
        self.s_uhat = tau_scale[:, :, None, None] * np.transpose(
            self.proj_face, (0, 1, 3, 2)
        )
        self.s_hh = tau_scale                                    # times identity on the face
        self.s_uu = np.einsum(
            "ef,efmi,efmj->eij", tau_scale, self.proj_face, self.proj_face
        )

        # transport face tensor: (1/3) <phi_s phi_j chi_m (n . ones)>
        self.t_face = np.einsum(
            "q,efqs,efqj,qm->efsjm", fw, self.phi_u_face, self.phi_u_face, self.chi_face
        ) * (scale * nsum / 3.0)[:, :, None, None, None]

    # -- trace dof numbering ------------------------------------------------

    def _setup_trace_dofs(self):
        mesh = self.mesh
        F = mesh.dim + 1
        E = mesh.num_elements
        nl = self.n_l
        interior = mesh.interior_faces()
        self.face_rank = np.full(mesh.num_faces, -1, dtype=int)
        self.face_rank[interior] = np.arange(len(interior))
        self.n_trace_dofs = len(interior) * nl

        start = self.face_rank[mesh.elem_to_faces] * nl          # (E, F), -nl for boundary
        local = start[:, :, None] + np.arange(nl)[None, None, :]
        local = np.where(start[:, :, None] < 0, -1, local)       # (E, F, nl)
        self.trace_index = local
        flat = local.reshape(E, F * nl)
        rows = np.broadcast_to(flat[:, :, None], (E, F * nl, F * nl))
        cols = np.broadcast_to(flat[:, None, :], (E, F * nl, F * nl))
        valid = (rows >= 0) & (cols >= 0)
        self._coo_rows = rows[valid]
        self._coo_cols = cols[valid]
        self._coo_mask = valid.reshape(-1)
        vec_valid = flat >= 0
        self._vec_rows = flat[vec_valid]
        self._vec_mask = vec_valid.reshape(-1)

    # -- helpers used by the solvers and norms ------------------------------

    def scatter_matrix_entries(self, blocks):
        """COO data for element blocks (E, F*nl, F*nl), boundary rows dropped."""
        return blocks.reshape(-1)[self._coo_mask], self._coo_rows, self._coo_cols

    def scatter_vector(self, vecs):
        data = vecs.reshape(-1)[self._vec_mask]
        return np.bincount(self._vec_rows, weights=data, minlength=self.n_trace_dofs)

    def gather_trace(self, trace, boundary_values=None):
        """Per-element local trace values (E, F, nl); boundary slots are zero
        unless `boundary_values` supplies known face data (nf, nl)."""
        trace = np.asarray(trace, dtype=float).reshape(-1)
        if trace.shape[0] != self.n_trace_dofs:
            raise ValueError("trace vector has the wrong length")
        padded = np.concatenate([trace, [0.0]])
        idx = np.where(self.trace_index < 0, len(trace), self.trace_index)
        local = padded[idx]
        if boundary_values is not None:
            e2f = self.mesh.elem_to_faces
            bmask = self.face_rank[e2f] < 0
            local = np.where(bmask[:, :, None], boundary_values[e2f], local)
        return local

    def lifting(self, u, trace_local):
        """Flux-space field defined by the moment conditions of the pair
        (u, trace): per element solve against the flux mass block."""
        moments = -np.einsum("eij,ej->ei", self.cu, u)
        moments += np.einsum("efim,efm->ei", self.chat, trace_local)
        coeffs = moments / self.det_j[:, None]
        return coeffs.reshape(-1, self.mesh.dim, self.n_qs)

    def transport_blocks(self, v):
        """Convection blocks for frozen transport coefficients v (E, nu)."""
        n_uu = np.einsum("es,esij->eij", v, self.t_vol)
        n_uhat = np.einsum("es,efsjm->efjm", v, self.t_face)
        return n_uu, n_uhat

    def load_vector(self, f, t):
        """Moment vector (f(., t), phi_i) per element."""
        E, Q, d = self.vol_points.shape
        vals = np.asarray(f(self.vol_points.reshape(E * Q, d), t), dtype=float)
        vals = vals.reshape(E, Q) * self.vol_weights[None, :]
        return np.einsum("eq,qi->ei", vals, self.phi_u) * self.det_j[:, None]

    def scalar_l2_norm(self, u):
        return float(np.sqrt(np.sum(self.det_j * np.sum(u * u, axis=1))))

    def function_l2_norm_sq(self, f, t):
        E, Q, d = self.vol_points.shape
        vals = np.asarray(f(self.vol_points.reshape(E * Q, d), t), dtype=float)
        vals = vals.reshape(E, Q) ** 2
        return float(np.sum(self.det_j * (vals @ self.vol_weights)))

    def flux_l2_norm_sq(self, q):
        coeffs = q.reshape(self.mesh.num_elements, self.n_q)
        return float(np.sum(self.det_j * np.sum(coeffs * coeffs, axis=1)))

    def trace_jump_sq(self, u, trace_local):
        """Sum over element boundaries of tau * || proj(u) - trace ||^2."""
        proj = np.einsum("efmj,ej->efm", self.proj_face, u)
        diff = proj - trace_local
        scale = self.s_hh  # tau * face_scale, (E, F)
        return float(np.sum(scale * np.sum(diff * diff, axis=2)))


@dataclass(frozen=True)
class LocalElementSystem:
    """Dense blocks of one element, with viscosity folded into the penalty."""

    elem: int
    mass_q: np.ndarray          # (d*nqs, d*nqs), SPD
    div_coupling: np.ndarray    # (d*nqs, nu)
    trace_coupling: np.ndarray  # (F, d*nqs, nl)
    mass_u: np.ndarray          # (nu, nu), SPD
    stab_uu: np.ndarray         # (nu, nu), PSD
    stab_u_trace: np.ndarray    # (F, nu, nl)
    stab_trace: np.ndarray      # (F, nl, nl), PSD per face
    load: np.ndarray | None = None


@dataclass(frozen=True)
class ConvectionBlocks:
    """Transport blocks for one element and a frozen advecting state."""

    elem: int
    volume: np.ndarray       # (nu, nu), antisymmetric
    u_to_trace: np.ndarray   # (F, nu, nl): trace unknown tested against volume
    trace_to_u: np.ndarray   # (F, nl, nu): volume unknown tested against trace


def build_discretization(mesh, k, l):
    return Discretization(mesh, k, l)


def build_local_linear(disc, elem, viscosity, load=None):
    """Transport-independent blocks of one element."""
    if viscosity <= 0:
        raise ValueError("viscosity must be positive")
    if not 0 <= elem < disc.mesh.num_elements:
        raise IndexError(f"element index {elem} out of range")
    det = disc.det_j[elem]
    F = disc.mesh.dim + 1
    eye_l = np.eye(disc.n_l)
    return LocalElementSystem(
        elem=elem,
        mass_q=det * np.eye(disc.n_q),
        div_coupling=disc.cu[elem].copy(),
        trace_coupling=disc.chat[elem].copy(),
        mass_u=det * np.eye(disc.n_u),
        stab_uu=viscosity * disc.s_uu[elem],
        stab_u_trace=viscosity * disc.s_uhat[elem],
        stab_trace=viscosity * disc.s_hh[elem][:, None, None] * eye_l[None, :, :],
        load=None if load is None else np.asarray(load, dtype=float),
    )


def build_local_convection(disc, elem, v):
    """Transport blocks of one element for P_k coefficients v."""
    v = np.asarray(v, dtype=float)
    if v.shape != (disc.n_u,):
        raise ValueError(f"transport coefficients must have shape ({disc.n_u},)")
    volume = np.einsum("s,sij->ij", v, disc.t_vol[elem])
    u_to_trace = np.einsum("s,fsjm->fjm", v, disc.t_face[elem])
    trace_to_u = -np.transpose(u_to_trace, (0, 2, 1))
    return ConvectionBlocks(elem, volume, u_to_trace, trace_to_u)


def apply_lifting(disc, u, trace, boundary_values=None):
    """Evaluate the lifting of (u, trace) into the flux space.

    `trace` is the global interior-face coefficient vector; boundary faces
    carry zero (or `boundary_values` when supplied).
    """
    local = disc.gather_trace(np.asarray(trace, dtype=float), boundary_values)
    return disc.lifting(np.asarray(u, dtype=float), local)
