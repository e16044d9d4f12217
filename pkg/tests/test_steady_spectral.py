"""Stationary Newton solves, generalized eigensolves, coercivity scan."""

import numpy as np
import pytest

from bsac import (
    FieldPair,
    NumericalError,
    RunConfig,
    assemble_linearized,
    assemble_surface_shifted_pair,
    assemble_wentzell_robin_pair,
    build_disk,
    build_interval,
    compute_coercivity_margin,
    compute_gradient,
    eigen_solve,
    joint_mass,
    riesz_dual_norm,
    run_trajectory,
    solve_stationary_newton,
    strong_form_residuals,
)


def uniform_guess(mesh, value):
    return FieldPair(np.full(mesh.n_bulk, value), np.full(mesh.n_surface, value))


def test_newton_finds_both_wells(dw_spec):
    mesh = build_disk(1.0, 12, 24)
    for sign in (1.0, -1.0):
        eq = solve_stationary_newton(mesh, dw_spec, 1.0,
                                     uniform_guess(mesh, 0.9 * sign), 1e-12)
        assert eq.converged
        assert eq.residual_dual_norm < 1e-12
        assert np.max(np.abs(eq.state.bulk - sign)) < 1e-10
        assert np.max(np.abs(eq.state.surface - sign)) < 1e-10


def test_newton_stability_tag_matches_rayleigh_quotient(dw_spec):
    mesh = build_interval(1.0, 32)
    eq = solve_stationary_newton(mesh, dw_spec, 1.0, uniform_guess(mesh, 0.9),
                                 1e-12)
    lin = assemble_linearized(mesh, dw_spec, eq.state, 1.0)
    # recompute the smallest eigenvalue directly from the pair
    mass = joint_mass(mesh)
    got = eigen_solve((lin, mass), 1)
    y = got.fields[:, 0]
    rq = (y @ (lin.matrix @ y)) / (y @ (mass * y))
    assert eq.stability_tag == pytest.approx(rq, rel=1e-8)
    assert eq.stability_tag == pytest.approx(2.0, rel=1e-10)
    assert eq.is_stable


def test_newton_saddle_has_negative_tag(dw_spec):
    # the zero state is a critical point; its linearization opens downward
    mesh = build_interval(1.0, 24)
    eq = solve_stationary_newton(mesh, dw_spec, 1.0, uniform_guess(mesh, 0.0),
                                 1e-12)
    assert eq.converged
    assert eq.residual_dual_norm < 1e-13
    assert eq.stability_tag == pytest.approx(-1.0, abs=1e-9)
    assert not eq.is_stable


def test_newton_nonconvergence_reports_instead_of_raising(dw_spec):
    mesh = build_interval(1.0, 16)
    eq = solve_stationary_newton(mesh, dw_spec, 1.0, uniform_guess(mesh, 30.0),
                                 1e-13, max_iter=1, compute_stability=False)
    assert not eq.converged
    assert np.isfinite(eq.residual_dual_norm)
    assert eq.residual_dual_norm > 1e-13


def test_newton_agrees_with_long_run_endpoint(dw_spec):
    config = RunConfig(geometry="interval", n=32, dt=0.05, dt_max=1.0,
                       t_final=30.0, adaptive=True, keep_states=True,
                       seed=5, checkpoint_every=0, spec=dw_spec)
    mesh = config.build_mesh()
    rec = run_trajectory(config, mesh=mesh)
    endpoint = rec.final_state()
    eq = solve_stationary_newton(mesh, dw_spec, 1.0, endpoint, 1e-11)
    assert eq.converged
    assert eq.residual_dual_norm < 1e-11
    gap = max(np.max(np.abs(eq.state.bulk - endpoint.bulk)),
              np.max(np.abs(eq.state.surface - endpoint.surface)))
    assert gap < 1e-4
    # independent residual recomputation through the dual norm
    g = compute_gradient(mesh, dw_spec, eq.state, 1.0)
    assert riesz_dual_norm(mesh, g) < 1e-11


def test_strong_form_residuals_vanish_at_equilibrium(dw_spec):
    mesh = build_disk(1.0, 16, 32)
    eq = solve_stationary_newton(mesh, dw_spec, 1.0, uniform_guess(mesh, 0.9),
                                 1e-12)
    res = strong_form_residuals(mesh, dw_spec, eq.state, 1.0)
    for key, val in res.items():
        assert np.max(np.abs(val)) < 1e-8, key
    # a perturbed state must not pass
    bent = FieldPair(eq.state.bulk + 0.1, eq.state.surface)
    res2 = strong_form_residuals(mesh, dw_spec, bent, 1.0)
    assert any(np.max(np.abs(v)) > 1e-3 for v in res2.values())


def test_eigen_solve_orthonormality_and_residual_contract():
    mesh = build_disk(1.0, 16, 32)
    pair = assemble_wentzell_robin_pair(mesh, 1.0)
    res = eigen_solve(pair, 8)
    assert res.gram_defect < 1e-8
    assert np.all(res.residuals < 1e-8)
    assert np.all(np.diff(res.values) >= -1e-12)
    # Rayleigh quotient of each returned field reproduces its eigenvalue
    s, m = pair
    for i in range(8):
        y = res.fields[:, i]
        rq = (y @ (s.matrix @ y)) / (y @ (m.matrix @ y))
        assert rq == pytest.approx(res.values[i], rel=1e-8)


def test_eigen_solve_dense_fallback_tiny_pair():
    # the interval surface pair is 2x2 with identical operators: both
    # eigenvalues are exactly 1 and only the dense path can deliver them
    mesh = build_interval(1.0, 16)
    res = eigen_solve(assemble_surface_shifted_pair(mesh), 2)
    assert np.allclose(res.values, [1.0, 1.0], atol=1e-13)


def test_coercivity_constant_closed_form(dw_spec):
    mesh = build_disk(1.0, 24, 48)
    # the uniform well is an exact discrete equilibrium: Newton accepts the
    # guess with zero iterations and the constant is reproduced exactly
    eq = solve_stationary_newton(mesh, dw_spec, 1.0, uniform_guess(mesh, 1.0),
                                 1e-12)
    assert eq.converged
    report = compute_coercivity_margin(mesh, dw_spec, 1.0, eq, max_m=12)
    # max(|f'(1)|, 1/2 + |h'|^2 + |f_G'(1)| + 0) = max(2, 3.5)
    assert report.c_star == 3.5
    # from a nearby guess the constant is recovered to solver accuracy
    near = solve_stationary_newton(mesh, dw_spec, 1.0, uniform_guess(mesh, 0.9),
                                   1e-12)
    rep2 = compute_coercivity_margin(mesh, dw_spec, 1.0, near, max_m=1)
    assert rep2.c_star == pytest.approx(3.5, abs=1e-10)


def test_coercivity_mu_branch_crossing_index(dw_spec):
    # continuum surface branch crosses 8 c* = 28 at the sixth angular mode
    k = np.arange(0, 20)
    mu = 1.0 + k**2
    assert k[np.argmax(mu > 28.0)] == 6


def test_interval_scan_fails_honestly(dw_spec):
    # two boundary points carry no surface diffusion: mu is identically 1,
    # so no m can clear the threshold and the report must say so
    mesh = build_interval(1.0, 32)
    eq = solve_stationary_newton(mesh, dw_spec, 1.0, uniform_guess(mesh, 0.9),
                                 1e-12)
    report = compute_coercivity_margin(mesh, dw_spec, 1.0, eq, max_m=8)
    assert not report.succeeded()
    assert report.chosen_m == 0
    assert report.margin <= 0.0
    assert report.mu_values.size >= 1


def test_scan_outcome_across_robin_strengths(dw_spec):
    """Larger K scales the joint threshold down, smaller K inflates c*;
    either way the reported m can only move up or the scan fails."""
    mesh = build_disk(1.0, 64, 128)
    reports = {}
    for K in (0.1, 1.0, 10.0):
        eq = solve_stationary_newton(mesh, dw_spec, K, uniform_guess(mesh, 0.9),
                                     1e-11)
        assert eq.converged
        reports[K] = compute_coercivity_margin(mesh, dw_spec, K, eq, max_m=96)
    assert reports[1.0].succeeded()
    assert reports[1.0].margin > 0.0
    assert reports[1.0].theta_m > 8 * reports[1.0].c_star
    m_ref = reports[1.0].chosen_m
    for K in (0.1, 10.0):
        rep = reports[K]
        assert (not rep.succeeded()) or rep.chosen_m > m_ref


def test_spectral_report_serializes(dw_spec):
    mesh = build_disk(1.0, 16, 32)
    eq = solve_stationary_newton(mesh, dw_spec, 1.0, uniform_guess(mesh, 0.9),
                                 1e-11)
    report = compute_coercivity_margin(mesh, dw_spec, 1.0, eq, max_m=6)
    text = report.serialize()
    assert "c_star" in text
    assert str(report.K) in text or "1" in text
