"""Arclength reparameterizations, contact potentials for the four
parameter regimes, jump detection, stability certification, switching
recovery, and the vanishing-parameter sweep driver.

Conventions.  A reparameterized trajectory keeps one knot per original
time step; rates are backward differences on the nonuniform s-grid with
no smoothing.  The discrete normalization identity (slow-time rate plus
rate norm equals one) then holds at every interior knot by construction.
Regime names: "visc" (all parameters fixed positive), "eps0" (viscosity
scale to zero, rate weights fixed), "eps-nu0" (multi-rate, hardening
fixed), "all0" (everything vanishing).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .constitutive import EnergyParams, MaterialParams, Operators, energy, \
    energy_gradients, yield_radius, cell_damage
from .discretization import LoadingSpec, State, eval_loading, tensor_dot, \
    tensor_norm, total_strain
from .dissipation import (
    DualDiagnostics,
    Rate,
    d_nu,
    d_up,
    dual_diagnostics,
    norm_p_l1,
    norm_p_l2,
    norm_u_h1,
    norm_z_hm,
    norm_z_m,
)
from .driver import Trajectory, _power_integral

TOL_JUMP = 1e-3

REGIMES = ("visc", "eps0", "eps-nu0", "all0")


@dataclass
class ParamTrajectory:
    """Trajectory in arclength parameterization.

    Arrays are indexed by knot; rates at knot k are backward differences
    over (s_{k-1}, s_k], zero at knot 0.
    """

    kind: str                      # "std" or "ed"
    s: np.ndarray                  # (n+1,) strictly increasing
    t: np.ndarray                  # (n+1,) nondecreasing slow time
    states: list[State]
    t_rate: np.ndarray             # (n+1,)
    u_rate: list[np.ndarray]
    z_rate: list[np.ndarray]
    p_rate: list[np.ndarray]
    e_rate: list[np.ndarray]
    diag: list[DualDiagnostics]
    normalization: np.ndarray      # (n+1,), == 1 at interior knots
    ep: EnergyParams
    mat: MaterialParams
    loading: LoadingSpec

    @property
    def n_knots(self) -> int:
        return len(self.s)

    def rate(self, k: int) -> Rate:
        return Rate(u_rate=self.u_rate[k], z_rate=self.z_rate[k],
                    p_rate=self.p_rate[k])


def _trajectory_increments(traj: Trajectory, ops: Operators):
    """Backward-difference rate data per original step (index 1..N)."""
    out = []
    for k in range(1, len(traj.times)):
        tau = traj.times[k] - traj.times[k - 1]
        rate = traj.rate(k)
        w0, _, _, _ = eval_loading(traj.loading, traj.times[k - 1])
        w1, _, _, _ = eval_loading(traj.loading, traj.times[k])
        e0 = total_strain(ops.B, traj.states[k - 1], w0)
        e1 = total_strain(ops.B, traj.states[k], w1)
        out.append((tau, rate, (e1 - e0) / tau))
    return out


def _build_ptraj(kind, traj, ops, ds_list, incs):
    n = len(traj.times)
    s = np.zeros(n)
    s[1:] = np.cumsum(ds_list)
    t_rate = np.zeros(n)
    u_rate = [np.zeros_like(traj.states[0].u)]
    z_rate = [np.zeros_like(traj.states[0].z)]
    p_rate = [np.zeros_like(traj.states[0].p)]
    e_rate = [np.zeros((ops.grid.n_cells, 3))]
    for k in range(1, n):
        ds = ds_list[k - 1]
        if ds <= 0:
            raise ValueError(f"degenerate zero-length step at knot {k}")
        tau, rate, erate = incs[k - 1]
        fac = tau / ds
        t_rate[k] = fac
        u_rate.append(rate.u_rate * fac)
        z_rate.append(rate.z_rate * fac)
        p_rate.append(rate.p_rate * fac)
        e_rate.append(erate * fac)
    diag = list(traj.dual_diag)
    ptraj = ParamTrajectory(
        kind=kind, s=s, t=traj.times.copy(), states=[st.copy() for st in
                                                     traj.states],
        t_rate=t_rate, u_rate=u_rate, z_rate=z_rate, p_rate=p_rate,
        e_rate=e_rate, diag=diag, normalization=np.ones(n),
        ep=traj.ep, mat=traj.mat, loading=traj.loading)
    for k in range(1, n):
        ptraj.normalization[k] = _normalization_value(ptraj, ops, k)
    return ptraj


def _normalization_value(ptraj: ParamTrajectory, ops: Operators,
                         k: int) -> float:
    grid = ops.grid
    if ptraj.kind == "std":
        return (ptraj.t_rate[k] + norm_u_h1(ops, ptraj.u_rate[k])
                + norm_z_hm(ops, ptraj.z_rate[k])
                + norm_p_l2(grid, ptraj.p_rate[k]))
    rmu = np.sqrt(ptraj.ep.mu)
    dn = d_nu(ops, ptraj.rate(k), ptraj.ep.nu)
    return (ptraj.t_rate[k] + rmu * norm_u_h1(ops, ptraj.u_rate[k])
            + norm_z_hm(ops, ptraj.z_rate[k])
            + norm_p_l1(grid, ptraj.p_rate[k])
            + rmu * norm_p_l2(grid, ptraj.p_rate[k])
            + norm_p_l2(grid, ptraj.e_rate[k])
            + dn * ptraj.diag[k].d_nu_star)


def reparam_standard(traj: Trajectory, ops: Operators) -> ParamTrajectory:
    """Arclength with integrand 1 + ||u'||_H1 + ||z'||_Hm + ||p'||_L2."""
    incs = _trajectory_increments(traj, ops)
    ds = []
    for tau, rate, _ in incs:
        integrand = (1.0 + norm_u_h1(ops, rate.u_rate)
                     + norm_z_hm(ops, rate.z_rate)
                     + norm_p_l2(ops.grid, rate.p_rate))
        ds.append(tau * integrand)
    return _build_ptraj("std", traj, ops, ds, incs)


def reparam_ed(traj: Trajectory, ops: Operators,
               ed_dnu_args: str = "triple") -> ParamTrajectory:
    """Energy-dissipation arclength: the integrand additionally carries
    the rate L1 norm, the strain rate, and the product of the primal
    rate functional with its dual counterpart.

    ed_dnu_args selects the rate functional in the product term:
    "triple" (default) includes the damage rate, "pair" drops it.
    """
    if ed_dnu_args not in ("triple", "pair"):
        raise ValueError("ed_dnu_args must be 'triple' or 'pair'")
    ep = traj.ep
    incs = _trajectory_increments(traj, ops)
    rmu = np.sqrt(ep.mu)
    ds = []
    for k, (tau, rate, erate) in enumerate(incs, start=1):
        if ed_dnu_args == "triple":
            dn = d_nu(ops, rate, ep.nu)
        else:
            dn = float(np.sqrt(ep.nu) * np.hypot(
                np.sqrt(max(rate.u_rate.ravel()[ops.grid.free_dofs]
                            @ ops.K_D @
                            rate.u_rate.ravel()[ops.grid.free_dofs], 0.0)),
                norm_p_l2(ops.grid, rate.p_rate)))
        integrand = (1.0 + rmu * norm_u_h1(ops, rate.u_rate)
                     + norm_z_hm(ops, rate.z_rate)
                     + norm_p_l1(ops.grid, rate.p_rate)
                     + rmu * norm_p_l2(ops.grid, rate.p_rate)
                     + norm_p_l2(ops.grid, erate)
                     + dn * traj.dual_diag[k].d_nu_star)
        ds.append(tau * integrand)
    ptraj = _build_ptraj("ed", traj, ops, ds, incs)
    if ed_dnu_args == "pair":
        # recompute the normalization against the two-argument reading
        for k in range(1, ptraj.n_knots):
            rate = ptraj.rate(k)
            uf = rate.u_rate.ravel()[ops.grid.free_dofs]
            dn = float(np.sqrt(ptraj.ep.nu) * np.hypot(
                np.sqrt(max(uf @ ops.K_D @ uf, 0.0)),
                norm_p_l2(ops.grid, rate.p_rate)))
            ptraj.normalization[k] = (
                ptraj.t_rate[k]
                + rmu * norm_u_h1(ops, rate.u_rate)
                + norm_z_hm(ops, rate.z_rate)
                + norm_p_l1(ops.grid, rate.p_rate)
                + rmu * norm_p_l2(ops.grid, rate.p_rate)
                + norm_p_l2(ops.grid, ptraj.e_rate[k])
                + dn * ptraj.diag[k].d_nu_star)
    return ptraj


# ---------------------------------------------------------------------------
# contact potentials
# ---------------------------------------------------------------------------

def _rate_independent_part(state: State, rate: Rate, ops: Operators,
                           mat: MaterialParams) -> float:
    """R(z') + H(z, p'); +inf when z' has a positive component."""
    grid = ops.grid
    if np.any(rate.z_rate > 1e-12):
        return float("inf")
    rz = mat.kappa * np.sum(grid.lump * np.abs(rate.z_rate))
    zc = cell_damage(grid, state.z)
    hp = np.sum(grid.w_cell * yield_radius(zc, mat)
                * tensor_norm(rate.p_rate))
    return float(rz + hp)


def contact_potential(regime: str, t_rate: float, state: State, rate: Rate,
                      diag: DualDiagnostics, ops: Operators,
                      mat: MaterialParams, ep: EnergyParams,
                      stab_tol: float = 0.0) -> float:
    """Regime-dependent contact potential at a knot (per unit s).

    Magnitudes below stab_tol are treated as vanished when selecting
    the piecewise branch, which is how the discrete ladder evaluates
    the limiting formulas.  Returns +inf on the infinite branches.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if t_rate < 0:
        raise ValueError("slow-time rate must be nonnegative")
    ri = _rate_independent_part(state, rate, ops, mat)
    if not np.isfinite(ri):
        return float("inf")
    dn = d_nu(ops, rate, ep.nu)

    if regime == "visc":
        if ep.eps <= 0:
            raise ValueError("regime 'visc' needs eps > 0")
        if t_rate > 0:
            return ri + (ep.eps / (2 * t_rate)) * dn ** 2 \
                + (t_rate / (2 * ep.eps)) * diag.d_nu_star ** 2
        return ri if dn <= stab_tol else float("inf")

    if regime == "eps0":
        if ep.nu <= 0:
            raise ValueError("regime 'eps0' needs nu > 0")
        if t_rate > 0:
            return ri if diag.d_nu_star <= stab_tol else float("inf")
        return ri + dn * diag.d_nu_star

    # multi-rate and all-vanishing regimes share the reduced structure;
    # they differ in which dual surrogate is tested
    dstar = diag.d_star_mu if regime == "eps-nu0" else diag.d_star0
    if t_rate > 0:
        stable = dstar <= stab_tol and diag.dist_z <= stab_tol
        return ri if stable else float("inf")
    zr_norm = norm_z_m(ops.grid, rate.z_rate)
    dup = d_up(ops, rate.u_rate, rate.p_rate)
    if zr_norm <= stab_tol:
        return ri + dup * dstar
    if dstar <= stab_tol:
        return ri + zr_norm * diag.dist_z
    return float("inf")


def detect_jumps(ptraj: ParamTrajectory,
                 tol_jump: float = TOL_JUMP) -> list[tuple[float, float]]:
    """Maximal s-intervals over which the slow time is (numerically)
    frozen: consecutive knots with t_rate < tol_jump."""
    jumps = []
    k = 1
    n = ptraj.n_knots
    while k < n:
        if ptraj.t_rate[k] < tol_jump:
            start = k
            while k < n and ptraj.t_rate[k] < tol_jump:
                k += 1
            jumps.append((float(ptraj.s[start - 1]), float(ptraj.s[k - 1])))
        else:
            k += 1
    return jumps


def _jump_mask(ptraj: ParamTrajectory, tol_jump: float) -> np.ndarray:
    """Boolean per knot: True when the knot lies in a jump segment."""
    mask = np.zeros(ptraj.n_knots, dtype=bool)
    mask[1:] = ptraj.t_rate[1:] < tol_jump
    return mask


def stability_magnitude(regime: str, diag: DualDiagnostics) -> float:
    """The dual quantity that must vanish on non-jump knots."""
    if regime in ("visc", "eps0"):
        return diag.d_nu_star
    if regime == "eps-nu0":
        return diag.d_star_mu + diag.dist_z
    if regime == "all0":
        return diag.d_star0 + diag.dist_z
    raise ValueError(f"unknown regime {regime!r}")


def stability_check(ptraj: ParamTrajectory, regime: str,
                    tol_stab: float, tol_jump: float = TOL_JUMP):
    """Per-knot stability magnitudes and booleans; jump knots are True
    by convention (no requirement there)."""
    mags = np.array([stability_magnitude(regime, d) for d in ptraj.diag])
    jm = _jump_mask(ptraj, tol_jump)
    ok = (mags <= tol_stab) | jm
    return ok, mags


# ---------------------------------------------------------------------------
# switching recovery
# ---------------------------------------------------------------------------

def _switching_residual(lam_up: float, lam_z: float, t: float, state: State,
                        rate: Rate, ops: Operators, mat: MaterialParams,
                        ep: EnergyParams, loading: LoadingSpec) -> float:
    """Least-squares residual of the convex-combination optimality
    system with coefficient lam_up on the displacement/plastic blocks
    and lam_z on the damage block."""
    grid = ops.grid
    g_u, g_z, g_p = energy_gradients(t, state, ops, mat, ep.mu, loading)

    uf = rate.u_rate.ravel()[grid.free_dofs]
    res_u_vec = lam_up * ep.nu * (ops.K_D @ uf) + (1 - lam_up) * g_u
    ru2 = float(res_u_vec @ ops.K_D_inv @ res_u_vec)

    # damage block: 0 in (1-lam) dR(z') + lam z' + (1-lam) chi nodewise;
    # the subdifferential is {-(1-lam) kappa} where z' < 0 and the ray
    # [-(1-lam) kappa, inf) where z' = 0
    lam = lam_z
    target = -(lam * rate.z_rate + (1 - lam) * g_z)
    floor = -(1 - lam) * mat.kappa
    viol = np.where(
        rate.z_rate > 1e-12, np.abs(target) + 1.0,
        np.where(rate.z_rate < -1e-12, np.abs(target - floor),
                 np.maximum(floor - target, 0.0)))
    rz2 = float(np.sum(grid.lump * viol ** 2))

    # plastic block: 0 in (1-lam) dH(z, p') + lam nu p' + (1-lam) g_p
    zc = cell_damage(grid, state.z)
    V = yield_radius(zc, mat)
    xi = -(lam_up * ep.nu * rate.p_rate + (1 - lam_up) * g_p)
    pn = tensor_norm(rate.p_rate)
    moving = pn > 1e-14
    dist = np.empty(grid.n_cells)
    if np.any(moving):
        dirs = rate.p_rate[moving] / pn[moving, None]
        dist[moving] = tensor_norm(
            xi[moving] - (1 - lam_up) * V[moving, None] * dirs)
    nm = ~moving
    dist[nm] = np.maximum(tensor_norm(xi[nm]) - (1 - lam_up) * V[nm], 0.0)
    rp2 = float(np.sum(grid.w_cell * dist ** 2))
    return float(np.sqrt(ru2 + rz2 + rp2))


def recover_switching(ptraj: ParamTrajectory, ops: Operators,
                      multi_rate: bool = False):
    """Per-knot least-squares switching coefficients.

    Single-rate: one lambda per knot shared by all blocks.  Multi-rate:
    (lambda_up, lambda_z) with the switching constraint
    lambda_up (1 - lambda_z) = 0, handled by minimizing both admissible
    branches.  Returns (lambdas, residuals); lambdas has shape (n,) or
    (n, 2).
    """
    n = ptraj.n_knots
    mat, ep, loading = ptraj.mat, ptraj.ep, ptraj.loading
    if multi_rate:
        lams = np.zeros((n, 2))
    else:
        lams = np.zeros(n)
    resid = np.zeros(n)
    for k in range(1, n):
        t, state, rate = ptraj.t[k], ptraj.states[k], ptraj.rate(k)

        def res_single(l):
            return _switching_residual(l, l, t, state, rate, ops, mat,
                                       ep, loading)

        if not multi_rate:
            r = minimize_scalar(res_single, bounds=(0.0, 1.0),
                                method="bounded",
                                options={"xatol": 1e-10})
            best_l, best_r = float(r.x), float(r.fun)
            for cand in (0.0, 1.0):
                rc = res_single(cand)
                if rc < best_r:
                    best_l, best_r = cand, rc
            lams[k], resid[k] = best_l, best_r
        else:
            # branch 1: lam_up = 0, lam_z free
            r1 = minimize_scalar(
                lambda l: _switching_residual(0.0, l, t, state, rate, ops,
                                              mat, ep, loading),
                bounds=(0.0, 1.0), method="bounded",
                options={"xatol": 1e-10})
            # branch 2: lam_z = 1, lam_up free
            r2 = minimize_scalar(
                lambda l: _switching_residual(l, 1.0, t, state, rate, ops,
                                              mat, ep, loading),
                bounds=(0.0, 1.0), method="bounded",
                options={"xatol": 1e-10})
            cands = [((0.0, float(r1.x)), float(r1.fun)),
                     ((float(r2.x), 1.0), float(r2.fun)),
                     ((0.0, 0.0), _switching_residual(0.0, 0.0, t, state,
                                                      rate, ops, mat, ep,
                                                      loading))]
            (lu, lz), rr = min(cands, key=lambda c: c[1])
            lams[k] = (lu, lz)
            resid[k] = rr
    return lams, resid


# ---------------------------------------------------------------------------
# sweep driver
# ---------------------------------------------------------------------------

@dataclass
class LevelReport:
    params: tuple[float, float, float]      # (eps, nu, mu)
    n_steps: int
    max_stability_nonjump: float
    jump_intervals: list[tuple[float, float]]
    contact_integral: float
    ed_balance_residual: float
    total_length: float
    min_z: float
    ptraj: ParamTrajectory = field(repr=False)


@dataclass
class SweepReport:
    regime: str
    ladder: list[tuple[float, float, float]]
    levels: list[LevelReport]
    pairwise_sup_distance: list[float]      # consecutive levels


def _align_z_curves(pa: ParamTrajectory, pb: ParamTrajectory, ops) -> float:
    """Sup (over the finer rescaled s-grid) of the lumped-L2 distance
    between the damage curves of two levels."""
    ref = pa if pa.n_knots >= pb.n_knots else pb
    sig = ref.s / ref.s[-1]
    za = np.array([st.z for st in pa.states])
    zb = np.array([st.z for st in pb.states])
    sa = pa.s / pa.s[-1]
    sb = pb.s / pb.s[-1]
    best = 0.0
    for x in sig:
        zax = np.array([np.interp(x, sa, za[:, i])
                        for i in range(za.shape[1])])
        zbx = np.array([np.interp(x, sb, zb[:, i])
                        for i in range(zb.shape[1])])
        best = max(best, norm_z_m(ops.grid, zax - zbx))
    return float(best)


def ed_balance_residual_bv(ptraj: ParamTrajectory, ops: Operators,
                           regime: str, stab_tol: float,
                           tol_jump: float = TOL_JUMP) -> tuple[float, float]:
    """Energy-dissipation balance residual of a candidate limit curve
    with the regime's contact potential: |E(end) + integral M ds -
    E(0) - integral power|.  Returns (residual, contact_integral).
    Either may be +inf when an infinite branch is hit."""
    ep, mat, loading = ptraj.ep, ptraj.mat, ptraj.loading
    contact = 0.0
    power = 0.0
    for k in range(1, ptraj.n_knots):
        ds = ptraj.s[k] - ptraj.s[k - 1]
        m = contact_potential(regime, float(ptraj.t_rate[k]),
                              ptraj.states[k], ptraj.rate(k),
                              ptraj.diag[k], ops, mat, ep,
                              stab_tol=stab_tol)
        contact += ds * m
        power += _power_integral(ptraj.t[k - 1], ptraj.t[k],
                                 ptraj.states[k - 1], ops, mat, ep.mu,
                                 loading)
    e_end = energy(ptraj.t[-1], ptraj.states[-1], ops, mat, ep.mu, loading)
    e_0 = energy(ptraj.t[0], ptraj.states[0], ops, mat, ep.mu, loading)
    if not np.isfinite(contact):
        return float("inf"), float(contact)
    return float(abs(e_end + contact - e_0 - power)), float(contact)


def _ladder_ok(regime: str, ladder) -> bool:
    eps = [l[0] for l in ladder]
    nus = [l[1] for l in ladder]
    mus = [l[2] for l in ladder]
    dec = all(a > b for a, b in zip(eps, eps[1:]))
    if regime == "eps0":
        return dec and len(set(nus)) == 1 and len(set(mus)) == 1 \
            and nus[0] > 0
    if regime == "eps-nu0":
        ratios = [n / e for n, e in zip(nus, eps)]
        return dec and len(set(mus)) == 1 \
            and max(ratios) - min(ratios) < 1e-12
    if regime == "all0":
        return dec and all(a > b for a, b in zip(mus, mus[1:])) \
            and all(n <= m + 1e-15 for n, m in zip(nus, mus))
    if regime == "visc":
        return True
    return False


def bv_sweep(ops: Operators, mat: MaterialParams, loading: LoadingSpec,
             init_state: State, regime: str, ladder, n_steps: int = 20,
             t_final: float = 1.0, tol_stat: float = 1e-8,
             tol_jump: float = TOL_JUMP, stab_tol_factor: float = 10.0,
             level_parallelism: int = 1) -> SweepReport:
    """Run viscous solves along a vanishing-parameter ladder, reparam-
    eterize (energy-dissipation arclength when everything vanishes,
    standard otherwise), and assemble the cross-level convergence
    evidence."""
    from .driver import run_viscous

    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    ladder = [tuple(float(x) for x in lvl) for lvl in ladder]
    if not _ladder_ok(regime, ladder):
        raise ValueError(f"ladder violates the constraints of regime "
                         f"{regime!r}")

    def run_level(lvl):
        eps, nu, mu = lvl
        ep = EnergyParams(eps=eps, nu=nu, mu=mu, tau=t_final / n_steps,
                          t_final=t_final)
        traj = run_viscous(ops, mat, ep, loading, init_state.copy(),
                           n_steps=n_steps, tol_stat=tol_stat)
        if traj.aborted_at is not None:
            raise RuntimeError(f"viscous run failed at step "
                               f"{traj.aborted_at} for level {lvl}")
        if regime == "all0":
            ptraj = reparam_ed(traj, ops)
        else:
            ptraj = reparam_standard(traj, ops)
        return ptraj

    if level_parallelism > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=level_parallelism) as ex:
            ptrajs = list(ex.map(run_level, ladder))
    else:
        ptrajs = [run_level(lvl) for lvl in ladder]

    levels = []
    for lvl, ptraj in zip(ladder, ptrajs):
        eps = lvl[0]
        stab_tol = stab_tol_factor * eps
        jm = _jump_mask(ptraj, tol_jump)
        mags = np.array([stability_magnitude(regime, d)
                         for d in ptraj.diag])
        nonjump = ~jm
        nonjump[0] = False
        max_stab = float(mags[nonjump].max()) if np.any(nonjump) else 0.0
        resid, contact = ed_balance_residual_bv(ptraj, ops, regime,
                                                stab_tol, tol_jump)
        levels.append(LevelReport(
            params=lvl,
            n_steps=n_steps,
            max_stability_nonjump=max_stab,
            jump_intervals=detect_jumps(ptraj, tol_jump),
            contact_integral=contact,
            ed_balance_residual=resid,
            total_length=float(ptraj.s[-1]),
            min_z=float(min(st.z.min() for st in ptraj.states)),
            ptraj=ptraj,
        ))

    dists = [_align_z_curves(a.ptraj, b.ptraj, ops)
             for a, b in zip(levels, levels[1:])]
    return SweepReport(regime=regime, ladder=list(ladder), levels=levels,
                       pairwise_sup_distance=dists)
