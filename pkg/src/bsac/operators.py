"""Sparse operator assembly on the finite-volume meshes.

Every operator is stored at the bilinear-form level: a symmetric sparse
matrix S together with a diagonal quadrature mass m, so that

    x' S y   approximates the continuous form (Dirichlet integral, boundary
             penalty, linearized quadratic form, ...),
    S x / m  is the strong (pointwise) action.

Storing the form keeps symmetry exact entrywise; the pointwise polar
Laplacian is only self-adjoint against the weighted inner product, so
symmetry must live at the form level. The same pairs feed the generalized
eigenproblems directly.

Joint operators act on the concatenation [bulk values, surface values].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, NumericalError, ShapeError
from .mesh import Mesh, boundary_trace, trace_weights
from .nonlinearity import NonlinearitySpec


@dataclass
class DiscreteOperator:
    """Symmetric form matrix with its diagonal quadrature companion."""

    matrix: sp.csr_matrix
    mass: np.ndarray            # diagonal quadrature weights, same dimension
    tag: str                    # which continuous operator this discretizes
    K: float | None
    geometry_hash: str

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def form(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(x @ (self.matrix @ y))

    def strong_action(self, x: np.ndarray) -> np.ndarray:
        return (self.matrix @ x) / self.mass

    def symmetry_defect(self) -> float:
        d = self.matrix - self.matrix.T
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0

    def to_triplets(self) -> np.ndarray:
        coo = self.matrix.tocoo()
        return np.column_stack([coo.row, coo.col, coo.data])

    def dump(self, path) -> None:
        """Text triplet table (row, col, value) for offline inspection."""
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# {self.tag} dimension={self.dimension}\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {v!r}\n")


@dataclass
class DualVector:
    """Coefficient representation of a functional: pairing = plain dot product.

    Components are quadrature-weighted, so pairing with a direction needs no
    extra mass factors.
    """

    bulk: np.ndarray
    surface: np.ndarray

    def pair(self, bulk_dir: np.ndarray, surface_dir: np.ndarray) -> float:
        if bulk_dir.shape != self.bulk.shape or surface_dir.shape != self.surface.shape:
            raise ShapeError("direction shapes do not match the functional")
        return float(self.bulk @ bulk_dir + self.surface @ surface_dir)

    def joint(self) -> np.ndarray:
        return np.concatenate([self.bulk, self.surface])

    def norm_raw(self) -> float:
        return float(np.sqrt(self.bulk @ self.bulk + self.surface @ self.surface))


def _sym_from_faces(n: int, rows, cols, coefs) -> sp.csr_matrix:
    """Graph Laplacian of weighted faces: exact entrywise symmetry."""
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    coefs = np.asarray(coefs, dtype=float)
    i = np.concatenate([rows, cols, rows, cols])
    j = np.concatenate([rows, cols, cols, rows])
    v = np.concatenate([coefs, coefs, -coefs, -coefs])
    return sp.coo_matrix((v, (i, j)), shape=(n, n)).tocsr()


def bulk_face_table(mesh: Mesh):
    """Interior faces of the bulk grid as (i, j, coefficient) arrays.

    The Dirichlet form is sum_faces coef * (x_i - x_j)^2; evaluating it in
    this factored shape keeps energies exactly nonnegative in floating point.
    """
    key = ("bulk_faces",)
    if key in mesh.cache:
        return mesh.cache[key]
    if mesh.geometry == "disk":
        n_r, n_t = mesh.shape
        h_r, h_t = mesh.spacings["h_r"], mesh.spacings["h_theta"]
        rows, cols, coefs = [], [], []
        # radial faces at radius (i+1) h_r; the r=0 face has zero measure
        for i in range(n_r - 1):
            rf = (i + 1) * h_r
            base = i * n_t
            rows.append(base + np.arange(n_t))
            cols.append(base + n_t + np.arange(n_t))
            coefs.append(np.full(n_t, rf * h_t / h_r))
        # angular faces, periodic in j
        r = (np.arange(n_r) + 0.5) * h_r
        for i in range(n_r):
            base = i * n_t
            jj = np.arange(n_t)
            rows.append(base + jj)
            cols.append(base + (jj + 1) % n_t)
            coefs.append(np.full(n_t, h_r / (r[i] * h_t)))
        # outermost half-cell band [R - h_r/2, R]: without it the Dirichlet
        # form drops an O(h_r) chunk wherever the normal derivative is
        # nonzero on the boundary, degrading Robin-type eigenvalues and
        # boundary-driven energies to first order
        rim = mesh.extent - 0.25 * h_r
        rows.append(mesh.boundary_map[:, 0])
        cols.append(mesh.boundary_map[:, 1])
        coefs.append(np.full(n_t, rim * h_t / (2.0 * h_r)))
        table = (np.concatenate(rows), np.concatenate(cols), np.concatenate(coefs))
    else:
        n = mesh.shape[0]
        h = mesh.spacings["h"]
        idx = np.arange(n - 1)
        rows = [idx, mesh.boundary_map[:, 0]]
        cols = [idx + 1, mesh.boundary_map[:, 1]]
        # same half-cell closure at both endpoints
        coefs = [np.full(n - 1, 1.0 / h), np.full(2, 0.5 / h)]
        table = (np.concatenate(rows), np.concatenate(cols),
                 np.concatenate(coefs))
    mesh.cache[key] = table
    return table


def surface_face_table(mesh: Mesh):
    """Faces of the boundary grid; empty in interval mode."""
    key = ("surface_faces",)
    if key in mesh.cache:
        return mesh.cache[key]
    if mesh.geometry == "disk":
        n_s = mesh.n_surface
        jj = np.arange(n_s)
        h_t = mesh.spacings["h_theta"]
        table = (jj, (jj + 1) % n_s, np.full(n_s, 1.0 / (mesh.extent * h_t)))
    else:
        empty = np.array([], dtype=int)
        table = (empty, empty, np.array([]))
    mesh.cache[key] = table
    return table


def dirichlet_form_value(table, x: np.ndarray) -> float:
    """Nonnegative evaluation of a face-table Dirichlet form at x."""
    i, j, w = table
    if i.size == 0:
        return 0.0
    d = x[i] - x[j]
    return float(w @ (d * d))


def bulk_dirichlet_stiffness(mesh: Mesh) -> DiscreteOperator:
    """Pure-diffusion Dirichlet form of the bulk Laplacian (no boundary terms)."""
    key = ("bulk_dirichlet",)
    if key in mesh.cache:
        return mesh.cache[key]
    rows, cols, coefs = bulk_face_table(mesh)
    mat = _sym_from_faces(mesh.n_bulk, rows, cols, coefs)
    op = DiscreteOperator(mat, mesh.bulk_weights.copy(), "bulk_dirichlet",
                          None, mesh.content_hash())
    mesh.cache[key] = op
    return op


def surface_stiffness(mesh: Mesh) -> DiscreteOperator:
    """Dirichlet form of the boundary Laplacian (zero in interval mode)."""
    key = ("surface_dirichlet",)
    if key in mesh.cache:
        return mesh.cache[key]
    n_s = mesh.n_surface
    if mesh.geometry == "disk":
        rows, cols, coefs = surface_face_table(mesh)
        mat = _sym_from_faces(n_s, rows, cols, coefs)
    else:
        mat = sp.csr_matrix((n_s, n_s))
    op = DiscreteOperator(mat, mesh.surface_weights.copy(), "surface_dirichlet",
                          None, mesh.content_hash())
    mesh.cache[key] = op
    return op


def trace_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Sparse boundary trace: (n_surface, n_bulk), rows are extrapolation stencils."""
    key = ("trace",)
    if key in mesh.cache:
        return mesh.cache[key]
    outer, inner, (c_out, c_in) = trace_weights(mesh)
    n_s = mesh.n_surface
    rows = np.repeat(np.arange(n_s), 2)
    cols = np.column_stack([outer, inner]).ravel()
    vals = np.tile([c_out, c_in], n_s)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n_s, mesh.n_bulk)).tocsr()
    mesh.cache[key] = mat
    return mat


def _robin_trace_block(mesh: Mesh, K: float) -> sp.csr_matrix:
    """K^-1 * Tr' D_s Tr on the bulk space, assembled entrywise symmetric."""
    outer, inner, (c_out, c_in) = trace_weights(mesh)
    s_w = mesh.surface_weights / K
    n = mesh.n_bulk
    rows, cols, vals = [], [], []
    rows += [outer, inner, outer, inner]
    cols += [outer, inner, inner, outer]
    cross = s_w * (c_out * c_in)
    vals += [s_w * c_out * c_out, s_w * c_in * c_in, cross, cross]
    return sp.coo_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n)).tocsr()


def assemble_bulk_laplacian(mesh: Mesh, K: float) -> DiscreteOperator:
    """Bulk diffusion form closed by the Robin boundary flux.

    The matrix is S_bulk + K^-1 Tr' D_s Tr. The coupling to the surface
    variable through h(phi) is not part of the matrix: callers add
    K^-1 Tr' D_s h(phi) as a source, which keeps this operator linear and
    symmetric for every coupling family.
    """
    if K <= 0:
        raise ConfigurationError("K must be positive")
    key = ("bulk_laplacian", float(K))
    if key in mesh.cache:
        return mesh.cache[key]
    mat = bulk_dirichlet_stiffness(mesh).matrix + _robin_trace_block(mesh, K)
    op = DiscreteOperator(mat.tocsr(), mesh.bulk_weights.copy(), "bulk_laplacian_robin",
                          K, mesh.content_hash())
    mesh.cache[key] = op
    return op


def assemble_surface_laplacian(mesh: Mesh) -> DiscreteOperator:
    return surface_stiffness(mesh)


def assemble_wentzell_robin_pair(mesh: Mesh, K: float):
    """Generalized pair for the eigenproblem with the eigenvalue in the flux.

    stiffness  = bulk Dirichlet form + K^-1 boundary trace mass,
    weighted mass = bulk quadrature mass + K^-1 boundary trace mass.

    The boundary term removes the constant kernel from the stiffness, so the
    smallest eigenvalue is strictly positive; the weighted mass is positive
    definite.
    """
    if K <= 0:
        raise ConfigurationError("K must be positive")
    key = ("wentzell_robin", float(K))
    if key in mesh.cache:
        return mesh.cache[key]
    robin = _robin_trace_block(mesh, K)
    stiff = bulk_dirichlet_stiffness(mesh).matrix + robin
    wmass = sp.diags(mesh.bulk_weights).tocsr() + robin
    ghash = mesh.content_hash()
    pair = (DiscreteOperator(stiff.tocsr(), mesh.bulk_weights.copy(),
                             "wentzell_robin_stiffness", K, ghash),
            DiscreteOperator(wmass.tocsr(), mesh.bulk_weights.copy(),
                             "wentzell_robin_mass", K, ghash))
    mesh.cache[key] = pair
    return pair


def assemble_surface_shifted_pair(mesh: Mesh):
    """Shifted boundary pair: stiffness = boundary Dirichlet form + boundary mass.

    In interval mode the boundary Laplacian vanishes and the pair degenerates
    to (mass, mass), whose spectrum is identically 1.
    """
    key = ("surface_shifted",)
    if key in mesh.cache:
        return mesh.cache[key]
    mass_mat = sp.diags(mesh.surface_weights).tocsr()
    stiff = surface_stiffness(mesh).matrix + mass_mat
    ghash = mesh.content_hash()
    pair = (DiscreteOperator(stiff.tocsr(), mesh.surface_weights.copy(),
                             "surface_shifted_stiffness", None, ghash),
            DiscreteOperator(mass_mat, mesh.surface_weights.copy(),
                             "surface_mass", None, ghash))
    mesh.cache[key] = pair
    return pair


def joint_mass(mesh: Mesh) -> np.ndarray:
    return np.concatenate([mesh.bulk_weights, mesh.surface_weights])


def assemble_linearized(mesh: Mesh, spec: NonlinearitySpec, state, K: float) -> DiscreteOperator:
    """Second variation of the energy at the given state, on the joint space.

    Block structure (form level, all weighted by quadrature):

        [ S_bulk + M diag(f'(u)) + K^-1 Tr' D_s Tr   |  -K^-1 Tr' D_s diag(h'(phi)) ]
        [ (transpose)                                |  S_surf + D_s diag(f_G'(phi))
                                                        + K^-1 D_s diag(h'(phi)^2)
                                                        + K^-1 D_s diag(h''(phi) (h(phi) - u|_G)) ]

    This is the exact Jacobian of the energy gradient, including the
    second-derivative coupling term that appears for nonaffine h.
    """
    if K <= 0:
        raise ConfigurationError("K must be positive")
    u = mesh.check_bulk(state.bulk)
    phi = mesh.check_surface(state.surface)
    n_b, n_s = mesh.n_bulk, mesh.n_surface

    hp = spec.eval("h'", phi)
    hpp = spec.eval("h''", phi)
    hval = spec.eval("h", phi)
    tr_u = boundary_trace(mesh, u)
    s_w = mesh.surface_weights

    bulk_block = (assemble_bulk_laplacian(mesh, K).matrix
                  + sp.diags(mesh.bulk_weights * spec.eval("f'", u)))
    surf_react = (s_w * spec.eval("f_G'", phi)
                  + s_w * hp * hp / K
                  + s_w * hpp * (hval - tr_u) / K)
    surf_block = surface_stiffness(mesh).matrix + sp.diags(surf_react)

    outer, inner, (c_out, c_in) = trace_weights(mesh)
    coef = -s_w * hp / K
    rows = np.concatenate([outer, inner])
    cols = np.concatenate([n_b + np.arange(n_s), n_b + np.arange(n_s)])
    vals = np.concatenate([coef * c_out, coef * c_in])
    coupling = sp.coo_matrix(
        (np.concatenate([vals, vals]),
         (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(n_b + n_s, n_b + n_s)).tocsr()

    mat = sp.block_diag([bulk_block, surf_block], format="csr") + coupling
    return DiscreteOperator(mat.tocsr(), joint_mass(mesh), "linearized", K,
                            mesh.content_hash())


class RieszMap:
    """Identifies functionals with fields through the block H1 inner product.

    The inner product is (grad u, grad w) + (u, w) on the bulk plus the same
    on the surface, block diagonal with unit weights. Factorizations are kept
    for reuse across many dual-norm evaluations.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        b = bulk_dirichlet_stiffness(mesh)
        s = surface_stiffness(mesh)
        self._bulk_mat = (b.matrix + sp.diags(mesh.bulk_weights)).tocsc()
        self._surf_mat = (s.matrix + sp.diags(mesh.surface_weights)).tocsc()
        self._bulk_solve = spla.factorized(self._bulk_mat)
        self._surf_solve = spla.factorized(self._surf_mat)

    def representative(self, functional: DualVector):
        rb = self._bulk_solve(self.mesh.check_bulk(functional.bulk))
        rs = self._surf_solve(self.mesh.check_surface(functional.surface))
        return rb, rs

    def dual_norm(self, functional: DualVector) -> float:
        rb, rs = self.representative(functional)
        val = functional.bulk @ rb + functional.surface @ rs
        if not np.isfinite(val):
            raise NumericalError("Riesz solve produced non-finite pairing",
                                 residuals={"pairing": val})
        return float(np.sqrt(max(val, 0.0)))

    def v_norm(self, bulk: np.ndarray, surface: np.ndarray) -> float:
        q = (bulk @ (self._bulk_mat @ bulk)) + (surface @ (self._surf_mat @ surface))
        return float(np.sqrt(max(q, 0.0)))


def riesz_dual_norm(mesh: Mesh, functional: DualVector) -> float:
    key = ("riesz",)
    if key not in mesh.cache:
        mesh.cache[key] = RieszMap(mesh)
    return mesh.cache[key].dual_norm(functional)
