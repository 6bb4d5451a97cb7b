"""Arclength reparameterization, contact potentials, jump detection,
switching recovery, and vanishing-parameter sweeps."""

import numpy as np
import pytest

from ribv.constitutive import (
    EnergyParams,
    Operators,
    cell_damage,
    energy_gradients,
    yield_radius,
)
from ribv.discretization import Grid, State, initial_state, tensor_norm
from ribv.dissipation import Rate, d_nu, d_up, dual_diagnostics, norm_z_hm
from ribv.driver import run_viscous
from ribv.problems import (
    ramp_loading,
    reference_material,
    reference_problem,
    zero_loading,
)
from ribv.reparam import (
    ParamTrajectory,
    _normalization_value,
    bv_sweep,
    contact_potential,
    detect_jumps,
    recover_switching,
    reparam_ed,
    reparam_standard,
    stability_check,
)

from conftest import random_state


def ramp_run(n_steps=20, n_side=4, amplitude=0.48, tol_stat=1e-8,
             **ep_over):
    grid, mat, ops, ep, loading, init = reference_problem(
        n_side=n_side, n_steps=n_steps, amplitude=amplitude, **ep_over)
    traj = run_viscous(ops, mat, ep, loading, init, n_steps=n_steps,
                       tol_stat=tol_stat)
    assert traj.aborted_at is None
    return ops, traj


class TestNormalization:
    def test_constant_trajectory_arclength_is_time(self):
        grid = Grid(3)
        mat = reference_material()
        ops = Operators.build(grid, mat)
        ep = EnergyParams(eps=1e-2, nu=1e-2, mu=1e-2, tau=0.1,
                          t_final=1.0)
        traj = run_viscous(ops, mat, ep, zero_loading(grid),
                           initial_state(grid, 0.95), n_steps=10)
        p = reparam_standard(traj, ops)
        assert np.allclose(p.s, traj.times, atol=1e-12)

    def test_unit_normalization_both_arclengths(self):
        ops, traj = ramp_run()
        for p in (reparam_standard(traj, ops), reparam_ed(traj, ops)):
            assert np.all(np.abs(p.normalization[1:] - 1.0) < 1e-8)
            assert np.all(np.diff(p.s) > 0)
            assert np.all(np.diff(p.t) >= 0)

    def test_ed_dnu_pair_variant(self):
        ops, traj = ramp_run(n_steps=10)
        p = reparam_ed(traj, ops, ed_dnu_args="pair")
        assert np.all(np.abs(p.normalization[1:] - 1.0) < 1e-8)

    def test_round_trip_rates_resum(self):
        # rebuild rates from (s, q(s)) alone and re-integrate the
        # normalization: the total must reproduce the final arclength
        ops, traj = ramp_run(n_steps=10)
        p = reparam_standard(traj, ops)
        total = 0.0
        for k in range(1, p.n_knots):
            ds = p.s[k] - p.s[k - 1]
            check = Rate(
                u_rate=(p.states[k].u - p.states[k - 1].u) / ds,
                z_rate=(p.states[k].z - p.states[k - 1].z) / ds,
                p_rate=(p.states[k].p - p.states[k - 1].p) / ds)
            assert np.allclose(check.u_rate, p.u_rate[k], atol=1e-10)
            total += ds * _normalization_value(p, ops, k)
        assert total == pytest.approx(p.s[-1], abs=1e-10)


class TestContactPotential:
    def test_viscous_identity_at_converged_knots(self):
        # at sharply converged steps the dual and primal readings agree:
        # D* = eps D_nu, so the viscous contact value collapses to the
        # rate-independent part plus eps D_nu^2.  The amplitude stays
        # below the yield window: simultaneous plastic flow adds an
        # O(tau) cross term between the damage driving force and the
        # damage-dependent yield radius, which is tested separately at
        # the tau-dependent tolerance.
        ops, traj = ramp_run(n_steps=10, amplitude=0.46, tol_stat=1e-11)
        p = reparam_standard(traj, ops)
        ep = p.ep
        for k in range(1, p.n_knots):
            dn = d_nu(ops, p.rate(k), ep.nu)
            ds = p.diag[k].d_nu_star
            # the stored rate is per unit s; the slow-time rate is a
            # factor 1/t' larger, so eps * D_nu(q') / t' must match D*
            assert abs(ep.eps * dn / p.t_rate[k] - ds) < 1e-8

    def test_viscous_branch_consistency(self):
        ops, traj = ramp_run(n_steps=10, amplitude=0.46, tol_stat=1e-11)
        p = reparam_standard(traj, ops)
        ep, mat = p.ep, p.mat
        from ribv.reparam import _rate_independent_part
        for k in range(1, p.n_knots):
            m = contact_potential("visc", float(p.t_rate[k]),
                                  p.states[k], p.rate(k), p.diag[k],
                                  ops, mat, ep, stab_tol=10 * ep.eps)
            ri = _rate_independent_part(p.states[k], p.rate(k), ops,
                                        mat)
            dn = d_nu(ops, p.rate(k), ep.nu)
            expect = ri + ep.eps * dn ** 2 / p.t_rate[k]
            assert m == pytest.approx(expect, rel=1e-6, abs=1e-10)

    def test_multirate_jump_branch_formula(self, rng):
        # t' = 0, z' = 0 in the nu = eps regime: the value is the
        # product D(u', p') * D^{*,mu}
        grid = Grid(3)
        mat = reference_material()
        ops = Operators.build(grid, mat)
        loading = ramp_loading(grid, amplitude=0.45)
        ep = EnergyParams(eps=1e-2, nu=1e-2, mu=0.1, tau=0.05,
                          t_final=1.0)
        st = random_state(grid, rng)
        u_rate = rng.normal(0, 0.3, (grid.n_nodes, 2))
        u_rate[grid.dirichlet_mask] = 0.0
        p_rate = rng.normal(0, 0.3, (grid.n_cells, 3))
        p_rate[:, 1] = -p_rate[:, 0]
        rate = Rate(u_rate=u_rate, z_rate=np.zeros(grid.n_nodes),
                    p_rate=p_rate)
        diag = dual_diagnostics(0.5, st, ops, mat, ep.mu, ep.nu, loading)
        from ribv.reparam import _rate_independent_part
        m = contact_potential("eps-nu0", 0.0, st, rate, diag, ops, mat,
                              ep, stab_tol=0.1)
        ri = _rate_independent_part(st, rate, ops, mat)
        expect = ri + d_up(ops, u_rate, p_rate) * diag.d_star_mu
        assert m == pytest.approx(expect, rel=1e-12)


class TestJumpsAndStability:
    def test_smooth_run_no_jumps(self):
        ops, traj = ramp_run(n_steps=10)
        p = reparam_standard(traj, ops)
        assert detect_jumps(p) == []
        assert detect_jumps(p, tol_jump=0.0) == []

    def test_frozen_loading_all_stable(self):
        grid = Grid(3)
        mat = reference_material()
        ops = Operators.build(grid, mat)
        ep = EnergyParams(eps=1e-2, nu=1e-2, mu=1e-2, tau=0.1,
                          t_final=1.0)
        traj = run_viscous(ops, mat, ep, zero_loading(grid),
                           initial_state(grid, 0.95), n_steps=5)
        p = reparam_standard(traj, ops)
        ok, _ = stability_check(p, "visc", tol_stab=1e-6)
        assert np.all(ok)

    def test_forced_snap_detected(self):
        # small viscosity and hardening under a load that exceeds the
        # softened capacity: damage and plastic flow run away inside a
        # single time step, freezing the reparameterized time there
        ops, traj = ramp_run(n_steps=20, amplitude=0.48, eps=1e-4,
                             nu=1e-4, mu=1e-4)
        p = reparam_ed(traj, ops)
        jumps = detect_jumps(p)
        assert jumps, "expected at least one near-frozen segment"
        a, b = jumps[0]
        assert b - a > 0.1  # the snap carries O(1) arclength
        # while time stalls, the state still moves at unit speed
        snap_knots = [k for k in range(1, p.n_knots)
                      if p.t_rate[k] < 1e-3]
        assert snap_knots
        assert all(p.normalization[k] == pytest.approx(1.0, abs=1e-8)
                   for k in snap_knots)


def _build_knot_traj(state, rate, t, ops, mat, ep, loading):
    grid = ops.grid
    zeros = State(np.zeros_like(state.u), np.zeros_like(state.z),
                  np.zeros_like(state.p))
    return ParamTrajectory(
        kind="std", s=np.array([0.0, 1.0]), t=np.array([t, t]),
        states=[zeros, state], t_rate=np.array([0.0, 0.0]),
        u_rate=[np.zeros_like(state.u), rate.u_rate],
        z_rate=[np.zeros_like(state.z), rate.z_rate],
        p_rate=[np.zeros_like(state.p), rate.p_rate],
        e_rate=[np.zeros((grid.n_cells, 3))] * 2,
        diag=[None, None], normalization=np.ones(2), ep=ep, mat=mat,
        loading=loading)


def manufactured_rate(lam, lam_z, state, t, ops, mat, ep, loading):
    """Rates satisfying the convex-combination optimality system with
    coefficient lam on the displacement/plastic blocks and lam_z on the
    damage block."""
    grid = ops.grid
    g_u, g_z, g_p = energy_gradients(t, state, ops, mat, ep.mu, loading)

    u_rate = np.zeros(2 * grid.n_nodes)
    u_rate[grid.free_dofs] = -(1 - lam) / (lam * ep.nu) \
        * (ops.K_D_inv @ g_u)
    u_rate = u_rate.reshape(-1, 2)

    if lam_z >= 1.0:
        z_rate = np.zeros(grid.n_nodes)
    else:
        z_rate = np.where(g_z > mat.kappa,
                          (1 - lam_z) * (mat.kappa - g_z) / lam_z, 0.0)

    V = yield_radius(cell_damage(grid, state.z), mat)
    gn = tensor_norm(g_p)
    s = np.where(gn > V, (1 - lam) * (gn - V) / (lam * ep.nu), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        dirs = np.where(gn[:, None] > 0, -g_p / np.where(gn, gn, 1.0)[:, None], 0.0)
    p_rate = s[:, None] * dirs
    return Rate(u_rate=u_rate, z_rate=z_rate, p_rate=p_rate)


class TestSwitchingRecovery:
    def _setup(self, rng):
        grid = Grid(3)
        mat = reference_material()
        ops = Operators.build(grid, mat)
        loading = ramp_loading(grid, amplitude=0.6)
        ep = EnergyParams(eps=1e-2, nu=1e-2, mu=1e-2, tau=0.05,
                          t_final=1.0)
        state = random_state(grid, rng, u_scale=0.2, p_scale=0.2)
        return grid, mat, ops, loading, ep, state

    def test_planted_single_rate(self, rng):
        grid, mat, ops, loading, ep, state = self._setup(rng)
        for lam_true in (0.3, 0.62, 0.85):
            rate = manufactured_rate(lam_true, lam_true, state, 0.8,
                                     ops, mat, ep, loading)
            p = _build_knot_traj(state, rate, 0.8, ops, mat, ep, loading)
            lams, resid = recover_switching(p, ops)
            assert lams[1] == pytest.approx(lam_true, abs=1e-6)
            # bounded-search argument tolerance limits the residual
            assert resid[1] < 1e-7

    def test_planted_multi_rate(self, rng):
        grid, mat, ops, loading, ep, state = self._setup(rng)
        lam_up_true = 0.45
        rate = manufactured_rate(lam_up_true, 1.0, state, 0.8, ops, mat,
                                 ep, loading)
        p = _build_knot_traj(state, rate, 0.8, ops, mat, ep, loading)
        lams, resid = recover_switching(p, ops, multi_rate=True)
        lam_up, lam_z = lams[1]
        assert resid[1] <= 1e-8
        assert lam_up * (1 - lam_z) == pytest.approx(0.0, abs=1e-12)
        assert lam_up == pytest.approx(lam_up_true, abs=1e-6)

    def test_stable_knot_small_residual(self):
        # a relaxed stationary knot satisfies the system with lam = 0
        # up to the solver tolerance, so the best residual is tiny
        grid = Grid(3)
        mat = reference_material()
        ops = Operators.build(grid, mat)
        ep = EnergyParams(eps=1e-2, nu=1e-2, mu=1e-2, tau=0.1,
                          t_final=1.0)
        traj = run_viscous(ops, mat, ep, zero_loading(grid),
                           initial_state(grid, 0.95), n_steps=3,
                           tol_stat=1e-10)
        p = reparam_standard(traj, ops)
        _, resid = recover_switching(p, ops)
        assert np.all(resid[1:] < 1e-7)


class TestSweep:
    def test_trivial_loading_levels_identical(self):
        grid = Grid(3)
        mat = reference_material()
        ops = Operators.build(grid, mat)
        rep = bv_sweep(ops, mat, zero_loading(grid),
                       initial_state(grid, 0.95), "eps0",
                       [(1e-1, 0.1, 0.1), (1e-2, 0.1, 0.1)], n_steps=5)
        assert all(d < 1e-10 for d in rep.pairwise_sup_distance)

    def test_ladder_validation(self):
        grid = Grid(3)
        mat = reference_material()
        ops = Operators.build(grid, mat)
        with pytest.raises(ValueError):
            bv_sweep(ops, mat, zero_loading(grid),
                     initial_state(grid, 0.95), "eps0",
                     [(1e-2, 0.1, 0.1), (1e-1, 0.1, 0.1)], n_steps=5)
        with pytest.raises(ValueError):
            bv_sweep(ops, mat, zero_loading(grid),
                     initial_state(grid, 0.95), "all0",
                     [(1e-1, 0.2, 0.1), (1e-2, 0.02, 0.01)], n_steps=5)

    def test_level_parallelism_matches_serial(self):
        grid = Grid(3)
        mat = reference_material()
        ops = Operators.build(grid, mat)
        loading = ramp_loading(grid, amplitude=0.45)
        ladder = [(1e-1, 0.1, 0.1), (1e-2, 0.1, 0.1)]
        a = bv_sweep(ops, mat, loading, initial_state(grid, 0.95),
                     "eps0", ladder, n_steps=5)
        b = bv_sweep(ops, mat, loading, initial_state(grid, 0.95),
                     "eps0", ladder, n_steps=5, level_parallelism=2)
        for la, lb in zip(a.levels, b.levels):
            assert la.max_stability_nonjump == lb.max_stability_nonjump
            assert la.ed_balance_residual == lb.ed_balance_residual
        assert a.pairwise_sup_distance == b.pairwise_sup_distance
