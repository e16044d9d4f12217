"""Time integration of the coupled bulk-surface gradient flow.

Two steppers share one adaptive loop:

* fully_implicit: backward Euler solved by Newton with the exact second
  variation as Jacobian. The gold standard; every accepted step dissipates
  the discrete energy.
* stabilized_semi_implicit: diffusion and the linear part of the boundary
  coupling implicit, potentials (and the coupling itself when it is not
  affine) explicit with a stabilization shift S (new - old), S recomputed
  from the current field range each step.

Steps that would raise the energy are rejected and retried with half the
step size; five consecutive acceptances grow the step by 1.2x up to the cap.
The loop is fully deterministic for a fixed configuration and seed, and a
checkpoint (hex-encoded floats) restores the exact loop state for bitwise
resume.

The affine transmission system (trace of the bulk field slaved to the
surface field) is integrated by eliminating the surface unknown: the bulk
vector is the only unknown, the surface update rides along through the trace,
and the normal-derivative term of the surface equation appears as the
constraint flux of the reduced solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, RunAbort, StepFailure
from .mesh import Mesh, build_mesh, normal_derivative
from .nonlinearity import NonlinearitySpec, make_spec
from .energy import (FieldPair, compute_energy, compute_gradient, h_norm)
from .operators import (DualVector, RieszMap, assemble_bulk_laplacian,
                        assemble_linearized, bulk_dirichlet_stiffness,
                        joint_mass, surface_stiffness, trace_matrix)

ENERGY_SLACK = 1e-12    # accepted-step monotonicity allowance, relative


@dataclass
class RunConfig:
    geometry: str = "disk"
    radius: float = 1.0
    length: float = 1.0
    n_r: int = 64
    n_theta: int = 128
    n: int = 64
    K: float = 1.0
    scheme: str = "fully_implicit"
    dt: float = 0.05
    dt_min: float = 1e-7
    dt_max: float = 1.0
    t_final: float = 50.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    reject_energy_increase: bool = True
    adaptive: bool = True
    seed: int = 0
    init_kind: str = "smoothed_noise"
    init_mean: float = 0.4
    init_amplitude: float = 0.2
    init_smoothing: float = 0.02
    sample_every: int = 1
    checkpoint_every: int = 50
    keep_states: bool = False
    spec: NonlinearitySpec | None = None

    def __post_init__(self):
        if self.K <= 0:
            raise ConfigurationError("K must be positive")
        if not (0 < self.dt_min <= self.dt <= self.dt_max):
            raise ConfigurationError("need 0 < dt_min <= dt <= dt_max")
        if self.t_final < 0:
            raise ConfigurationError("t_final must be nonnegative")
        if self.scheme not in ("fully_implicit", "stabilized_semi_implicit"):
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.sample_every < 1 or self.checkpoint_every < 0:
            raise ConfigurationError("sampling cadences must be positive")

    def build_mesh(self) -> Mesh:
        if self.geometry == "disk":
            return build_mesh("disk", radius=self.radius, n_r=self.n_r,
                              n_theta=self.n_theta)
        return build_mesh("interval", length=self.length, n=self.n)

    def get_spec(self) -> NonlinearitySpec:
        if self.spec is None:
            self.spec = make_spec()
        return self.spec


@dataclass
class StepDiagnostics:
    accepted: bool
    reason: str
    energy_old: float
    energy_new: float
    newton_iterations: int = 0
    newton_residual: float = np.nan
    stabilization: float = 0.0


@dataclass
class Checkpoint:
    step: int
    time: float
    dt_policy: float
    accept_streak: int
    state: FieldPair


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    energy_parts: np.ndarray        # (n_samples, 5)
    energy_total: np.ndarray
    dissipation_bulk: np.ndarray
    dissipation_surface: np.ndarray
    dual_norm: np.ndarray
    states: list = dfield(default_factory=list)       # FieldPair per sample if kept
    checkpoints: list = dfield(default_factory=list)  # Checkpoint objects
    diagnostics: dict = dfield(default_factory=dict)

    def n_samples(self) -> int:
        return self.times.size

    def final_state(self) -> FieldPair:
        if self.states:
            return self.states[-1]
        if self.checkpoints:
            return self.checkpoints[-1].state
        raise ConfigurationError("record kept no states")

    def rows(self) -> np.ndarray:
        return np.column_stack([
            self.times, self.energy_parts, self.energy_total,
            self.dissipation_bulk, self.dissipation_surface, self.dual_norm])


ROW_HEADER = ("time,bulk_dirichlet,bulk_potential,surface_dirichlet,"
              "surface_potential,robin_penalty,total,bulk_dissipation,"
              "surface_dissipation,dual_norm")


class _RobinStepper:
    """Stepping engine for the Robin-coupled system on one mesh."""

    def __init__(self, mesh: Mesh, spec: NonlinearitySpec, K: float):
        self.mesh = mesh
        self.spec = spec
        self.K = K
        self.mass = joint_mass(mesh)
        self.n_b = mesh.n_bulk
        self.tr = trace_matrix(mesh)
        self.affine = spec.coupling.kind == "affine"

    def energy(self, state: FieldPair) -> float:
        return compute_energy(self.mesh, self.spec, state, self.K).total

    def residual(self, y: np.ndarray, x: np.ndarray, dt: float) -> np.ndarray:
        g = compute_gradient(self.mesh, self.spec,
                             FieldPair(y[:self.n_b], y[self.n_b:]), self.K)
        return self.mass * (y - x) / dt + g.joint()

    def _residual_norm(self, r: np.ndarray) -> float:
        # L2 norm of the strong-form residual (coefficients divided by mass)
        return float(np.sqrt(np.sum(r * r / self.mass)))

    def implicit_step(self, state: FieldPair, dt: float, tol: float,
                      max_iter: int) -> tuple[FieldPair, int, float]:
        x = state.joint()
        y = x.copy()
        res = self.residual(y, x, dt)
        rnorm = self._residual_norm(res)
        best = rnorm
        for it in range(1, max_iter + 1):
            jac = (assemble_linearized(self.mesh, self.spec,
                                       FieldPair(y[:self.n_b], y[self.n_b:]),
                                       self.K).matrix
                   + sp.diags(self.mass / dt)).tocsc()
            try:
                delta = spla.splu(jac).solve(-res)
            except RuntimeError as exc:
                raise StepFailure(f"implicit solve failed: {exc}") from exc
            y = y + delta
            if not np.all(np.isfinite(y)):
                raise StepFailure("implicit iteration produced non-finite state")
            res = self.residual(y, x, dt)
            rnorm = self._residual_norm(res)
            if rnorm < tol:
                return FieldPair(y[:self.n_b], y[self.n_b:]), it, rnorm
            if rnorm > 1e4 * max(best, tol):
                raise StepFailure(f"implicit iteration diverged (residual {rnorm:.3g})")
            best = min(best, rnorm)
        raise StepFailure(f"implicit iteration cap reached (residual {rnorm:.3g})")

    def stabilization(self, state: FieldPair) -> float:
        sup_fp = float(np.max(self.spec.eval("f'", state.bulk)))
        sup_fgp = float(np.max(self.spec.eval("f_G'", state.surface)))
        return max(self.spec.c4, sup_fp, sup_fgp, 0.0)

    def semi_implicit_step(self, state: FieldPair, dt: float) -> tuple[FieldPair, float]:
        mesh, spec, K = self.mesh, self.spec, self.K
        u, phi = state.bulk, state.surface
        s_stab = self.stabilization(state)
        wb = mesh.bulk_weights
        ws = mesh.surface_weights
        bulk_lhs = (assemble_bulk_laplacian(mesh, K).matrix
                    + sp.diags(wb * (1.0 / dt + s_stab)))
        bulk_rhs = wb * (u / dt + s_stab * u - spec.eval("f", u))
        surf_lhs = (surface_stiffness(mesh).matrix
                    + sp.diags(ws * (1.0 / dt + s_stab)))
        surf_rhs = ws * (phi / dt + s_stab * phi - spec.eval("f_G", phi))
        if self.affine:
            alpha = spec.coupling.alpha
            eta = spec.coupling.eta
            # linear boundary coupling handled implicitly: monolithic solve
            surf_lhs = surf_lhs + sp.diags(ws * alpha * alpha / K)
            coef = -ws * alpha / K
            outer = mesh.boundary_map[:, 0]
            inner = mesh.boundary_map[:, 1]
            n_b, n_s = self.n_b, mesh.n_surface
            rows = np.concatenate([outer, inner])
            cols = np.concatenate([n_b + np.arange(n_s), n_b + np.arange(n_s)])
            vals = np.concatenate([coef * 1.5, coef * -0.5])
            coupling = sp.coo_matrix(
                (np.concatenate([vals, vals]),
                 (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
                shape=(n_b + n_s, n_b + n_s))
            lhs = (sp.block_diag([bulk_lhs, surf_lhs]) + coupling).tocsc()
            rhs = np.concatenate([bulk_rhs + self.tr.T @ (ws * eta / K),
                                  surf_rhs - ws * alpha * eta / K])
            sol = spla.splu(lhs).solve(rhs)
            new = FieldPair(sol[:n_b], sol[n_b:])
        else:
            # nonlinear coupling explicit: two decoupled solves with sources
            hphi = spec.eval("h", phi)
            mism = (self.tr @ u) - hphi
            bulk_rhs = bulk_rhs + self.tr.T @ (ws * hphi / K)
            surf_rhs = surf_rhs + spec.eval("h'", phi) * ws * mism / K
            u_new = spla.splu(bulk_lhs.tocsc()).solve(bulk_rhs)
            phi_new = spla.splu(surf_lhs.tocsc()).solve(surf_rhs)
            new = FieldPair(u_new, phi_new)
        if not (np.all(np.isfinite(new.bulk)) and np.all(np.isfinite(new.surface))):
            raise StepFailure("semi-implicit solve produced non-finite state")
        return new, s_stab


def advance_step(mesh: Mesh, spec: NonlinearitySpec, state: FieldPair, K: float,
                 dt: float, scheme: str = "fully_implicit", *,
                 newton_tol: float = 1e-10, newton_max_iter: int = 50,
                 reject_energy_increase: bool = True,
                 stepper: _RobinStepper | None = None) -> tuple[FieldPair, StepDiagnostics]:
    """One time step; acceptance requires the discrete energy not to increase."""
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    if stepper is None:
        stepper = _get_stepper(mesh, spec, K)
    e_old = stepper.energy(state)
    if scheme == "fully_implicit":
        new, iters, rnorm = stepper.implicit_step(state, dt, newton_tol, newton_max_iter)
        s_stab = 0.0
    elif scheme == "stabilized_semi_implicit":
        new, s_stab = stepper.semi_implicit_step(state, dt)
        iters, rnorm = 1, np.nan
    else:
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    e_new = stepper.energy(new)
    accepted = True
    reason = "ok"
    if reject_energy_increase and e_new > e_old + ENERGY_SLACK * max(1.0, abs(e_old)):
        accepted = False
        reason = f"energy increased by {e_new - e_old:.3g}"
    return new, StepDiagnostics(accepted, reason, e_old, e_new, iters, rnorm, s_stab)


def _get_stepper(mesh: Mesh, spec: NonlinearitySpec, K: float) -> _RobinStepper:
    key = ("stepper", id(spec), float(K))
    if key not in mesh.cache:
        mesh.cache[key] = _RobinStepper(mesh, spec, K)
    return mesh.cache[key]


def smoothed_random_state(mesh: Mesh, seed: int, mean: float = 0.4,
                          amplitude: float = 0.2, smoothing: float = 0.02) -> FieldPair:
    """Low-pass filtered noise: two implicit smoothing solves, then rescale."""
    rng = np.random.default_rng(seed)
    raw_b = rng.standard_normal(mesh.n_bulk)
    raw_s = rng.standard_normal(mesh.n_surface)
    sm_b = (bulk_dirichlet_stiffness(mesh).matrix * smoothing
            + sp.diags(mesh.bulk_weights)).tocsc()
    sm_s = (surface_stiffness(mesh).matrix * smoothing
            + sp.diags(mesh.surface_weights)).tocsc()
    solve_b = spla.factorized(sm_b)
    solve_s = spla.factorized(sm_s)
    for _ in range(2):
        raw_b = solve_b(mesh.bulk_weights * raw_b)
        raw_s = solve_s(mesh.surface_weights * raw_s)
    scale_b = max(np.max(np.abs(raw_b)), 1e-12)
    scale_s = max(np.max(np.abs(raw_s)), 1e-12)
    return FieldPair(mean + amplitude * raw_b / scale_b,
                     mean + amplitude * raw_s / scale_s)


def initial_state(config: RunConfig, mesh: Mesh) -> FieldPair:
    if config.init_kind == "smoothed_noise":
        return smoothed_random_state(mesh, config.seed, config.init_mean,
                                     config.init_amplitude, config.init_smoothing)
    if config.init_kind == "constant":
        return FieldPair.constant(mesh, config.init_mean, config.init_mean)
    raise ConfigurationError(f"unknown init_kind {config.init_kind!r}")


class _Recorder:
    def __init__(self, mesh: Mesh, spec: NonlinearitySpec, K: float,
                 riesz: RieszMap, keep_states: bool):
        self.mesh, self.spec, self.K = mesh, spec, K
        self.riesz = riesz
        self.keep_states = keep_states
        self.times, self.parts, self.total = [], [], []
        self.diss_b, self.diss_s, self.dual = [], [], []
        self.states = []

    def sample(self, t, state, diss_b=0.0, diss_s=0.0):
        rep = compute_energy(self.mesh, self.spec, state, self.K)
        g = compute_gradient(self.mesh, self.spec, state, self.K)
        self.times.append(t)
        self.parts.append(rep.parts())
        self.total.append(rep.total)
        self.diss_b.append(diss_b)
        self.diss_s.append(diss_s)
        self.dual.append(self.riesz.dual_norm(g))
        if self.keep_states:
            self.states.append(state.copy())

    def build(self, checkpoints, diagnostics) -> TrajectoryRecord:
        return TrajectoryRecord(
            np.array(self.times), np.array(self.parts).reshape(len(self.times), 5),
            np.array(self.total), np.array(self.diss_b), np.array(self.diss_s),
            np.array(self.dual), self.states, checkpoints, diagnostics)


def run_trajectory(config: RunConfig, initial: FieldPair | None = None,
                   mesh: Mesh | None = None,
                   resume: Checkpoint | None = None) -> TrajectoryRecord:
    """Integrate to t_final with adaptive step control; fully deterministic.

    With resume, continues the exact loop state of a previous run: the record
    then contains only samples after the checkpoint, and they match the
    original run bitwise.
    """
    mesh = mesh if mesh is not None else config.build_mesh()
    spec = config.get_spec()
    stepper = _RobinStepper(mesh, spec, config.K)
    riesz = RieszMap(mesh)
    rec = _Recorder(mesh, spec, config.K, riesz, config.keep_states)
    checkpoints: list[Checkpoint] = []
    diagnostics: dict = {"accepted": 0, "rejected": 0, "aborted": False}

    if resume is not None:
        state = resume.state.copy()
        t, step = resume.time, resume.step
        dt_policy, streak = resume.dt_policy, resume.accept_streak
    else:
        state = initial if initial is not None else initial_state(config, mesh)
        mesh.check_bulk(state.bulk)
        mesh.check_surface(state.surface)
        t, step = 0.0, 0
        dt_policy, streak = config.dt, 0
        dnu = normal_derivative(mesh, state.bulk, state.surface, spec,
                                config.K, "one_sided")
        mism = (config.K * dnu + (trace_matrix(mesh) @ state.bulk)
                - spec.eval("h", state.surface))
        diagnostics["compatibility_residual"] = float(
            np.sqrt(mesh.surface_weights @ mism**2))
        rec.sample(t, state)

    t_end = config.t_final
    while t < t_end - 1e-12 * max(1.0, t_end):
        dt = min(dt_policy, t_end - t)
        try:
            new, diag = advance_step(
                mesh, spec, state, config.K, dt, config.scheme,
                newton_tol=config.newton_tol, newton_max_iter=config.newton_max_iter,
                reject_energy_increase=config.reject_energy_increase, stepper=stepper)
        except StepFailure as exc:
            diag = StepDiagnostics(False, str(exc), np.nan, np.nan)
            new = None
        if diag.accepted:
            delta_b = h_norm(mesh, (new.bulk - state.bulk) / dt,
                             np.zeros(mesh.n_surface))
            delta_s = h_norm(mesh, np.zeros(mesh.n_bulk),
                             (new.surface - state.surface) / dt)
            state = new
            t += dt
            step += 1
            streak += 1
            diagnostics["accepted"] += 1
            if config.adaptive and streak >= 5:
                dt_policy = min(dt_policy * 1.2, config.dt_max)
                streak = 0
            if step % config.sample_every == 0:
                rec.sample(t, state, delta_b, delta_s)
            if config.checkpoint_every and step % config.checkpoint_every == 0:
                checkpoints.append(Checkpoint(step, t, dt_policy, streak, state.copy()))
        else:
            diagnostics["rejected"] += 1
            if not config.adaptive:
                diagnostics["aborted"] = True
                raise RunAbort(f"step rejected with fixed dt: {diag.reason}",
                               rec.build(checkpoints, diagnostics))
            streak = 0
            dt_policy = dt / 2.0
            if dt_policy < config.dt_min:
                diagnostics["aborted"] = True
                raise RunAbort(f"dt underflow below dt_min: {diag.reason}",
                               rec.build(checkpoints, diagnostics))
    if not rec.times or rec.times[-1] < t - 1e-12 * max(1.0, t_end):
        rec.sample(t, state)    # endpoint always lands in the record
    checkpoints.append(Checkpoint(step, t, dt_policy, streak, state.copy()))
    if not config.keep_states:
        rec.states = [state.copy()]   # keep the endpoint reachable regardless
    record = rec.build(checkpoints, diagnostics)
    return record


class _TransmissionStepper:
    """Backward Euler for the trace-constrained limit system, bulk unknown only.

    The surface field is eliminated through phi = (u|_G - eta) / alpha; the
    reduced metric carries the surface mass through the trace, so testing the
    reduced flow with bulk directions reproduces both equations, with the
    normal derivative entering as the constraint flux.
    """

    def __init__(self, mesh: Mesh, spec: NonlinearitySpec):
        if spec.coupling.kind != "affine":
            raise ConfigurationError("transmission limit requires affine coupling")
        self.alpha = spec.coupling.alpha
        if self.alpha == 0:
            raise ConfigurationError("transmission limit requires alpha != 0")
        self.eta = spec.coupling.eta
        self.mesh = mesh
        self.spec = spec
        self.tr = trace_matrix(mesh)
        self.s_bulk = bulk_dirichlet_stiffness(mesh).matrix
        self.s_surf = surface_stiffness(mesh).matrix
        ws = mesh.surface_weights
        self.metric = (sp.diags(mesh.bulk_weights)
                       + self.tr.T @ sp.diags(ws / self.alpha**2) @ self.tr).tocsr()

    def surface_of(self, u: np.ndarray) -> np.ndarray:
        return ((self.tr @ u) - self.eta) / self.alpha

    def energy(self, u: np.ndarray) -> float:
        state = FieldPair(u, self.surface_of(u))
        # the robin penalty vanishes identically on the constraint manifold
        return compute_energy(self.mesh, self.spec, state, 1.0).total

    def gradient(self, u: np.ndarray) -> np.ndarray:
        mesh, spec = self.mesh, self.spec
        phi = self.surface_of(u)
        surf_part = (self.s_surf @ phi
                     + mesh.surface_weights * spec.eval("f_G", phi))
        return (self.s_bulk @ u + mesh.bulk_weights * spec.eval("f", u)
                + self.tr.T @ (surf_part / self.alpha))

    def hessian(self, u: np.ndarray) -> sp.csr_matrix:
        mesh, spec = self.mesh, self.spec
        phi = self.surface_of(u)
        surf_block = self.s_surf + sp.diags(mesh.surface_weights
                                            * spec.eval("f_G'", phi))
        return (self.s_bulk + sp.diags(mesh.bulk_weights * spec.eval("f'", u))
                + self.tr.T @ (surf_block / self.alpha**2) @ self.tr).tocsr()

    def implicit_step(self, u: np.ndarray, dt: float, tol: float,
                      max_iter: int) -> tuple[np.ndarray, int, float]:
        y = u.copy()
        wb = self.mesh.bulk_weights

        def resid(yv):
            return self.metric @ (yv - u) / dt + self.gradient(yv)

        res = resid(y)
        rnorm = float(np.sqrt(np.sum(res * res / wb)))
        for it in range(1, max_iter + 1):
            jac = (self.metric / dt + self.hessian(y)).tocsc()
            try:
                y = y + spla.splu(jac).solve(-res)
            except RuntimeError as exc:
                raise StepFailure(f"transmission solve failed: {exc}") from exc
            if not np.all(np.isfinite(y)):
                raise StepFailure("transmission iteration produced non-finite state")
            res = resid(y)
            rnorm = float(np.sqrt(np.sum(res * res / wb)))
            if rnorm < tol:
                return y, it, rnorm
        raise StepFailure(f"transmission iteration cap reached (residual {rnorm:.3g})")


def solve_transmission_limit(mesh: Mesh, spec: NonlinearitySpec,
                             initial: FieldPair, t_final: float,
                             dt: float, *, dt_min: float = 1e-9,
                             adaptive: bool = False, newton_tol: float = 1e-11,
                             newton_max_iter: int = 50, sample_every: int = 1,
                             keep_states: bool = True) -> TrajectoryRecord:
    """Integrate the trace-constrained limit flow; surface field derived from u.

    The initial surface value is replaced by the constraint value
    (u|_G - eta)/alpha, mirroring the limit system's derived initial datum.
    """
    stepper = _TransmissionStepper(mesh, spec)
    riesz = RieszMap(mesh)
    u = mesh.check_bulk(initial.bulk).copy()

    times, parts, total = [], [], []
    diss_b, diss_s, dual = [], [], []
    states = []
    diagnostics = {"accepted": 0, "rejected": 0, "aborted": False}

    def sample(t, u_vec, db=0.0, ds=0.0):
        state = FieldPair(u_vec, stepper.surface_of(u_vec))
        rep = compute_energy(mesh, spec, state, 1.0)
        times.append(t)
        parts.append(rep.parts())
        total.append(rep.total)
        diss_b.append(db)
        diss_s.append(ds)
        g = stepper.gradient(u_vec)
        dual.append(riesz.dual_norm(DualVector(g, np.zeros(mesh.n_surface))))
        if keep_states:
            states.append(state)

    sample(0.0, u)
    t = 0.0
    dt_policy = dt
    streak = 0
    step = 0
    while t < t_final - 1e-12 * max(1.0, t_final):
        dt_now = min(dt_policy, t_final - t)
        e_old = stepper.energy(u)
        try:
            y, _, _ = stepper.implicit_step(u, dt_now, newton_tol, newton_max_iter)
            e_new = stepper.energy(y)
            ok = e_new <= e_old + ENERGY_SLACK * max(1.0, abs(e_old))
        except StepFailure:
            ok = False
            y = None
        if ok:
            phi_old = stepper.surface_of(u)
            phi_new = stepper.surface_of(y)
            db = h_norm(mesh, (y - u) / dt_now, np.zeros(mesh.n_surface))
            ds = h_norm(mesh, np.zeros(mesh.n_bulk), (phi_new - phi_old) / dt_now)
            u = y
            t += dt_now
            step += 1
            streak += 1
            diagnostics["accepted"] += 1
            if adaptive and streak >= 5:
                dt_policy = min(dt_policy * 1.2, dt)
                streak = 0
            if step % sample_every == 0:
                sample(t, u, db, ds)
        else:
            diagnostics["rejected"] += 1
            streak = 0
            dt_policy = dt_now / 2.0
            if not adaptive or dt_policy < dt_min:
                diagnostics["aborted"] = True
                raise RunAbort("transmission step rejected",
                               TrajectoryRecord(np.array(times),
                                                np.array(parts).reshape(-1, 5),
                                                np.array(total), np.array(diss_b),
                                                np.array(diss_s), np.array(dual),
                                                states, [], diagnostics))
    if not times or times[-1] < t - 1e-12 * max(1.0, t_final):
        sample(t, u)
    if not keep_states:
        states = [FieldPair(u, stepper.surface_of(u))]
    return TrajectoryRecord(np.array(times), np.array(parts).reshape(-1, 5),
                            np.array(total), np.array(diss_b), np.array(diss_s),
                            np.array(dual), states, [], diagnostics)


def write_checkpoint(path, cp: Checkpoint, config_hash: str = "") -> None:
    """Hex-encoded text snapshot; restores the loop state bit for bit."""
    with open(path, "w") as fh:
        fh.write(f"step = {cp.step}\n")
        fh.write(f"time = {float(cp.time).hex()}\n")
        fh.write(f"dt_policy = {float(cp.dt_policy).hex()}\n")
        fh.write(f"accept_streak = {cp.accept_streak}\n")
        fh.write(f"config_hash = {config_hash}\n")
        fh.write("bulk = " + " ".join(v.hex() for v in cp.state.bulk) + "\n")
        fh.write("surface = " + " ".join(v.hex() for v in cp.state.surface) + "\n")


def read_checkpoint(path) -> tuple[Checkpoint, str]:
    fields = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                key, _, val = line.partition("=")
                fields[key.strip()] = val.strip()
    state = FieldPair(
        np.array([float.fromhex(tok) for tok in fields["bulk"].split()]),
        np.array([float.fromhex(tok) for tok in fields["surface"].split()]))
    cp = Checkpoint(int(fields["step"]), float.fromhex(fields["time"]),
                    float.fromhex(fields["dt_policy"]),
                    int(fields["accept_streak"]), state)
    return cp, fields.get("config_hash", "")
