"""Stationary states, generalized eigenproblems, and coercivity constants.

The stationary solver is damped Newton on the energy gradient with the exact
second variation as Jacobian; the line search halves the step until the dual
norm of the gradient decreases. The eigen solver handles both generalized
pairs (bulk with boundary-weighted mass, surface with shifted stiffness) by
shift-invert Lanczos, falling back to a dense solve for small pencils, and
reports per-pair residuals and the mass Gram defect.

The coercivity report evaluates the stability constant c_* nodewise at a
converged equilibrium and scans the two spectra for the first index m whose
weighted spectral gap theta_m = min(1, 1/K) * min(lambda_m, mu_m) clears
8 c_*.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, InputError, NumericalError
from .mesh import Mesh, boundary_trace, normal_derivative
from .nonlinearity import NonlinearitySpec
from .energy import FieldPair, compute_gradient
from .operators import (DiscreteOperator, RieszMap, assemble_linearized,
                        assemble_surface_shifted_pair,
                        assemble_wentzell_robin_pair, joint_mass)


@dataclass
class EquilibriumState:
    state: FieldPair
    residual_dual_norm: float
    newton_iterations: int
    converged: bool
    stability_tag: float = np.nan   # smallest eigenvalue of the linearized operator

    @property
    def is_stable(self) -> bool:
        return bool(np.isfinite(self.stability_tag) and self.stability_tag > 0)


@dataclass
class EigenResult:
    values: np.ndarray
    fields: np.ndarray          # columns are eigenfields
    residuals: np.ndarray       # ||S y - lam M y|| / ||y|| per pair
    gram_defect: float          # max deviation of the weighted Gram matrix from I


@dataclass
class SpectralReport:
    lambda_values: np.ndarray
    lambda_fields: np.ndarray
    mu_values: np.ndarray
    mu_fields: np.ndarray
    c_star: float
    chosen_m: int               # 0 when the scan failed
    theta_m: float
    margin: float
    K: float

    def succeeded(self) -> bool:
        return self.chosen_m > 0 and self.margin > 0

    def serialize(self) -> str:
        lines = [
            "spectral report",
            f"K = {self.K!r}",
            f"c_star = {self.c_star!r}",
            f"chosen_m = {self.chosen_m}",
            f"theta_m = {self.theta_m!r}",
            f"margin = {self.margin!r}",
            f"scan = {'ok' if self.succeeded() else 'failed'}",
            "bulk spectrum:",
        ]
        lines += [f"  lambda[{i + 1}] = {v!r}"
                  for i, v in enumerate(self.lambda_values)]
        lines.append("surface spectrum:")
        lines += [f"  mu[{j + 1}] = {v!r}" for j, v in enumerate(self.mu_values)]
        return "\n".join(lines) + "\n"


def _as_matrix(op) -> sp.csr_matrix:
    if isinstance(op, DiscreteOperator):
        return op.matrix
    return sp.csr_matrix(op)


def _pencil_lower_bound(stiff: sp.csr_matrix, mass_diag: np.ndarray) -> float:
    # Gershgorin for the symmetrically scaled pencil: centers S_ii / m_i,
    # radii sum_j |S_ij| / sqrt(m_i m_j).
    inv_sqrt = 1.0 / np.sqrt(mass_diag)
    absrow = np.abs(stiff) @ inv_sqrt
    centers = stiff.diagonal() / mass_diag
    radii = absrow * inv_sqrt - np.abs(stiff.diagonal()) / mass_diag
    return float(np.min(centers - radii))


def eigen_solve(pair, count: int, *, sigma: float | None = None) -> EigenResult:
    """Smallest `count` eigenpairs of a symmetric pencil, mass-orthonormal.

    Shift-invert Lanczos with the mass as weight (mass-orthogonal deflation
    happens inside the iteration); small pencils or near-full requests go
    through a dense solve. Residuals above 1e-8 raise NumericalError.
    """
    stiff_in, mass_in = pair
    stiff = _as_matrix(stiff_in)
    if isinstance(mass_in, DiscreteOperator):
        mass = mass_in.matrix
    elif isinstance(mass_in, np.ndarray) and mass_in.ndim == 1:
        mass = sp.diags(mass_in).tocsr()
    else:
        mass = sp.csr_matrix(mass_in)
    n = stiff.shape[0]
    if count < 1:
        raise ConfigurationError("count must be positive")
    if count > n:
        raise ConfigurationError(f"requested {count} eigenpairs of a {n}-pencil")

    mass_diag = mass.diagonal()
    diag_only = (mass.nnz == np.count_nonzero(mass_diag)) and np.all(mass_diag > 0)

    if sigma is None:
        if diag_only:
            lb = _pencil_lower_bound(stiff, mass_diag)
            sigma = lb - 0.01 * (1.0 + abs(lb))
        else:
            # positive-definite stiffness expected; shift slightly negative so
            # the factorization never lands on an exact eigenvalue
            sigma = -1e-8

    use_dense = n < 400 or count >= n - 1
    if not use_dense:
        try:
            vals, vecs = spla.eigsh(stiff, k=count, M=mass, sigma=sigma,
                                    which="LM", tol=0)
        except (RuntimeError, spla.ArpackError, ValueError):
            use_dense = True
    if use_dense:
        vals, vecs = scipy.linalg.eigh(stiff.toarray(), mass.toarray(),
                                       subset_by_index=[0, count - 1])

    order = np.argsort(vals)
    vals = np.ascontiguousarray(vals[order])
    vecs = np.ascontiguousarray(vecs[:, order])

    # enforce the weighted normalization exactly and fix the sign convention
    for j in range(count):
        y = vecs[:, j]
        nrm = float(np.sqrt(y @ (mass @ y)))
        if nrm <= 0:
            raise NumericalError("eigenfield with nonpositive weighted norm",
                                 residuals=vals)
        y /= nrm
        lead = np.argmax(np.abs(y))
        if y[lead] < 0:
            y *= -1
        vecs[:, j] = y

    res = np.empty(count)
    for j in range(count):
        y = vecs[:, j]
        r = stiff @ y - vals[j] * (mass @ y)
        res[j] = float(np.linalg.norm(r) / np.linalg.norm(y))
    gram = vecs.T @ (mass @ vecs)
    gram_defect = float(np.max(np.abs(gram - np.eye(count))))
    if np.max(res) >= 1e-8:
        raise NumericalError(
            f"eigen residuals not converged (max {np.max(res):.3g})",
            residuals=res)
    return EigenResult(vals, vecs, res, gram_defect)


def solve_stationary_newton(mesh: Mesh, spec: NonlinearitySpec, K: float,
                            guess: FieldPair, tolerance: float, *,
                            max_iter: int = 50, max_halvings: int = 30,
                            compute_stability: bool = True) -> EquilibriumState:
    """Damped Newton for the stationary system; residual measured in V'.

    The line search halves the update until the dual norm of the gradient
    decreases. Hitting the iteration cap returns a non-converged state
    carrying the last residual instead of raising.
    """
    if tolerance <= 0:
        raise ConfigurationError("tolerance must be positive")
    riesz = RieszMap(mesh)
    n_b = mesh.n_bulk
    x = guess.joint().copy()

    def dual_res(vec):
        g = compute_gradient(mesh, spec, FieldPair(vec[:n_b], vec[n_b:]), K)
        return riesz.dual_norm(g), g

    rho, grad = dual_res(x)
    iters = 0
    converged = rho < tolerance
    while not converged and iters < max_iter:
        iters += 1
        jac = assemble_linearized(mesh, spec,
                                  FieldPair(x[:n_b], x[n_b:]), K).matrix.tocsc()
        try:
            direction = spla.splu(jac).solve(-grad.joint())
        except RuntimeError as exc:
            raise NumericalError(f"singular linearized operator: {exc}",
                                 residuals=np.array([rho])) from exc
        step = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            trial = x + step * direction
            if np.all(np.isfinite(trial)):
                rho_trial, grad_trial = dual_res(trial)
                if rho_trial < rho:
                    x, rho, grad = trial, rho_trial, grad_trial
                    accepted = True
                    break
            step /= 2.0
        if not accepted:
            break
        converged = rho < tolerance
    tag = np.nan
    if converged and compute_stability:
        lin = assemble_linearized(mesh, spec, FieldPair(x[:n_b], x[n_b:]), K)
        tag = float(eigen_solve((lin.matrix, joint_mass(mesh)), 1).values[0])
    return EquilibriumState(FieldPair(x[:n_b], x[n_b:]), float(rho), iters,
                            converged, tag)


def strong_form_residuals(mesh: Mesh, spec: NonlinearitySpec, state: FieldPair,
                          K: float) -> dict:
    """Nodewise stationary residuals: bulk equation, boundary balance law
    (one-sided normal derivative), surface equation."""
    g = compute_gradient(mesh, spec, state, K)
    dnu = normal_derivative(mesh, state.bulk, state.surface, spec, K, "one_sided")
    robin = K * dnu + boundary_trace(mesh, state.bulk) - spec.eval("h", state.surface)
    return {
        "bulk": g.bulk / mesh.bulk_weights,
        "robin": robin,
        "surface": g.surface / mesh.surface_weights,
    }


def compute_coercivity_margin(mesh: Mesh, spec: NonlinearitySpec, K: float,
                              equilibrium: EquilibriumState,
                              max_m: int) -> SpectralReport:
    """Spectral gap scan at a converged equilibrium.

    c_* collects the nodewise suprema of the linearization coefficients; the
    scan looks for the first m with theta_m = min(1,1/K) min(lambda_m, mu_m)
    above 8 c_*. A failed scan reports chosen_m = 0 and a nonpositive margin.
    """
    if not equilibrium.converged:
        raise InputError("coercivity margin needs a converged equilibrium")
    if max_m < 1:
        raise ConfigurationError("max_m must be positive")
    u = equilibrium.state.bulk
    phi = equilibrium.state.surface
    tr_u = boundary_trace(mesh, u)

    sup_fp = float(np.max(np.abs(spec.eval("f'", u))))
    sup_hp2 = float(np.max(np.abs(spec.eval("h'", phi)) ** 2))
    sup_fgp = float(np.max(np.abs(spec.eval("f_G'", phi))))
    sup_cross = float(np.max(np.abs(spec.eval("h''", phi)
                                    * (spec.eval("h", phi) - tr_u))))
    c_star = max(sup_fp, 0.5 + sup_hp2 / K + sup_fgp + sup_cross / K)

    k_bulk = min(max_m, mesh.n_bulk)
    k_surf = min(max_m, mesh.n_surface)
    wr = eigen_solve(assemble_wentzell_robin_pair(mesh, K), k_bulk)
    surf = eigen_solve(assemble_surface_shifted_pair(mesh), k_surf)

    weight = min(1.0, 1.0 / K)
    chosen = 0
    theta = np.nan
    limit = min(k_bulk, k_surf)
    for m in range(1, limit + 1):
        theta_m = weight * min(wr.values[m - 1], surf.values[m - 1])
        if theta_m > 8.0 * c_star:
            chosen, theta = m, theta_m
            break
    if chosen == 0:
        theta = weight * min(wr.values[limit - 1], surf.values[limit - 1])
    return SpectralReport(wr.values, wr.fields, surf.values, surf.fields,
                          c_star, chosen, float(theta),
                          float(theta - 8.0 * c_star), K)
