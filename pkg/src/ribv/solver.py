"""One step of the time-incremental minimization scheme.

Each step minimizes

    tau Psi_{eps,nu}(q, (q - q_prev)/tau) + E_mu(t_k, q)

by alternating exact convex subproblem solves in u (SPD linear system)
and p (cellwise proximal map) with a projected-gradient solve in z under
the irreversibility constraint z <= z_prev.  Sweeps start from q_prev,
so the incremental functional decreases monotonically and the one-step
energy estimate holds by construction.  Acceptance is certified through
the stationarity residuals of the three coupled optimality conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .constitutive import (
    EnergyParams,
    MaterialParams,
    Operators,
    cell_damage,
    damage_potential,
    energy,
    stiffness_coeff,
    stiffness_coeff_prime,
    yield_radius,
)
from .discretization import (
    FROB_W,
    LoadingSpec,
    State,
    apply_sym_gradient,
    eval_loading,
    tensor_dev,
    tensor_dot,
    tensor_norm,
)
from .dissipation import Rate, psi_total, prox_plastic_cells

Z_FLOOR = 1e-8


@dataclass
class StepResult:
    new_state: State
    iterations: int
    functional_value: float
    el_residuals: tuple[float, float, float]  # (r_u, r_z, r_p)
    decrease: float
    accepted: bool
    z_floor_active: bool = False


# ---------------------------------------------------------------------------
# subproblem solves
# ---------------------------------------------------------------------------

def _cell_stiffness(grid, mat: MaterialParams, z: np.ndarray) -> np.ndarray:
    """Per-cell 3x3 quadratic forms S_c with Q = 1/2 sum_c e_c S_c e_c
    (component storage xx, yy, xy)."""
    coef = stiffness_coeff(cell_damage(grid, z), mat)
    lam, mu_l = mat.lame_lambda, mat.lame_mu
    S0 = np.array([[2 * mu_l + lam, lam, 0.0],
                   [lam, 2 * mu_l + lam, 0.0],
                   [0.0, 0.0, 4 * mu_l]])
    return (grid.w_cell * coef)[:, None, None] * S0[None, :, :]


def solve_u_step(t: float, state: State, prev_state: State, ops: Operators,
                 mat: MaterialParams, ep: EnergyParams,
                 loading: LoadingSpec) -> np.ndarray:
    """Exact minimization in u with (z, p) frozen: SPD solve of
    ((eps nu / tau) K_D + K(z)) u = rhs on the free dofs."""
    grid = ops.grid
    w, _, F, _ = eval_loading(loading, t)
    S = _cell_stiffness(grid, mat, state.z)
    free = grid.free_dofs
    Bf = ops.B.reshape(grid.n_cells * 3, 2 * grid.n_nodes)
    K_full = np.einsum("cia,cij,cjb->ab", ops.B, S, ops.B)
    visc_fac = ep.eps * ep.nu / ep.tau
    lhs = K_full[np.ix_(free, free)] + visc_fac * ops.K_D
    strain_w = apply_sym_gradient(ops.B, w) - state.p
    rhs_full = F - np.einsum("cia,cij,cj->a", ops.B, S, strain_w)
    rhs = rhs_full[free] + visc_fac * (ops.K_D @ prev_state.u.ravel()[free])
    try:
        c, low = cho_factor(lhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("displacement system is not SPD; "
                           "check grid and material parameters") from exc
    u_free = cho_solve((c, low), rhs)
    u = np.zeros(2 * grid.n_nodes)
    u[free] = u_free
    return u.reshape(grid.n_nodes, 2)


def solve_p_step(t: float, state: State, prev_state: State, ops: Operators,
                 mat: MaterialParams, ep: EnergyParams,
                 loading: LoadingSpec) -> np.ndarray:
    """Exact cellwise plastic update with (u, z) frozen."""
    w, _, _, _ = eval_loading(loading, t)
    e_bar = apply_sym_gradient(ops.B, state.u + w)
    return prox_plastic_cells(ops.grid, state.z, prev_state.p, e_bar,
                              mat, ep.eps, ep.nu, ep.mu, ep.tau)


_DEV_PROJ = np.array([[0.5, -0.5, 0.0],
                      [-0.5, 0.5, 0.0],
                      [0.0, 0.0, 1.0]])
_FROB_G = np.diag(FROB_W)


def solve_up_step(t: float, state: State, prev_state: State, ops: Operators,
                  mat: MaterialParams, ep: EnergyParams, loading: LoadingSpec,
                  tol_dual: float = 1e-12,
                  max_iter: int = 80) -> tuple[np.ndarray, np.ndarray]:
    """Joint minimization in (u, p) with z frozen.

    Alternating u- and p-solves contract slowly once cells yield, so
    instead minimize the envelope F(u) = min_p J(u, p) by a semismooth
    Newton iteration: the inner minimum is the exact cellwise prox, the
    gradient of F needs only the elastic stress at p*(u) (envelope
    theorem), and the Hessian uses the consistent tangent of the prox.
    Terminates when the dual (K_D^-1) norm of the gradient is <=
    tol_dual.
    """
    grid = ops.grid
    w, _, F_ext, _ = eval_loading(loading, t)
    free = grid.free_dofs
    S = _cell_stiffness(grid, mat, state.z)
    zc = cell_damage(grid, state.z)
    V = yield_radius(zc, mat)
    visc_fac = ep.eps * ep.nu / ep.tau
    u_prev_f = prev_state.u.ravel()[free]
    wflat = w.ravel()
    a_c = V
    b_c = visc_fac
    modulus = b_c + ep.mu + 2.0 * mat.lame_mu * stiffness_coeff(zc, mat)
    c_q = 2.0 * mat.lame_mu * stiffness_coeff(zc, mat)

    def split(u_free):
        u_full = np.zeros(2 * grid.n_nodes)
        u_full[free] = u_free
        e_bar = ops.B @ (u_full + wflat)
        p = prox_plastic_cells(grid, state.z, prev_state.p, e_bar, mat,
                               ep.eps, ep.nu, ep.mu, ep.tau)
        return u_full, e_bar, p

    def value_grad(u_free):
        u_full, e_bar, p = split(u_free)
        e = e_bar - p
        val = 0.5 * np.einsum("ci,cij,cj->", e, S, e)
        val -= F_ext @ (u_full + wflat)
        du = u_free - u_prev_f
        val += 0.5 * visc_fac * du @ ops.K_D @ du
        dp = p - prev_state.p
        val += np.sum(grid.w_cell * V * tensor_norm(dp))
        val += 0.5 * visc_fac * np.sum(grid.w_cell * tensor_dot(dp, dp))
        val += 0.5 * ep.mu * np.sum(grid.w_cell * tensor_dot(p, p))
        sigma_w = np.einsum("cij,cj->ci", S, e)  # w_c- and frob-weighted
        grad = np.einsum("cia,ci->a", ops.B, sigma_w)[free] \
            - F_ext[free] + visc_fac * (ops.K_D @ du)
        return float(val), grad, e_bar, p

    def tangent(e_bar):
        """Per-cell consistent tangent S_c (I - dp*/d e_bar)."""
        dev = e_bar @ _DEV_PROJ.T
        d = (c_q[:, None] * dev + b_c * prev_state.p) / modulus[:, None] \
            - prev_state.p
        dn = np.sqrt(np.maximum(tensor_dot(d, d), 0.0))
        shrink = a_c / (modulus * np.maximum(dn, 1e-300))
        J = np.zeros((grid.n_cells, 3, 3))
        yielding = shrink < 1.0
        if np.any(yielding):
            dy = d[yielding] / dn[yielding, None]
            outer = dy[:, :, None] * (dy @ _FROB_G)[:, None, :]
            sh = shrink[yielding][:, None, None]
            J[yielding] = (c_q[yielding, None, None] /
                           modulus[yielding, None, None]) * (
                (1.0 - sh) * _DEV_PROJ[None] + sh * outer @ _DEV_PROJ[None])
        return np.einsum("cij,cjk->cik", S, np.eye(3)[None] - J)

    u_free = state.u.ravel()[free].copy()
    val, grad, e_bar, p = value_grad(u_free)
    for _ in range(max_iter):
        r_dual = np.sqrt(max(grad @ ops.K_D_inv @ grad, 0.0))
        if r_dual <= tol_dual:
            break
        T = tangent(e_bar)
        H = visc_fac * ops.K_D + np.einsum(
            "cia,cij,cjb->ab", ops.B[:, :, free], T, ops.B[:, :, free])
        try:
            step = np.linalg.solve(0.5 * (H + H.T), grad)
        except np.linalg.LinAlgError:
            step = grad
        alpha = 1.0
        accepted = False
        for _bt in range(50):
            trial = u_free - alpha * step
            val_t, grad_t, e_bar_t, p_t = value_grad(trial)
            if val_t <= val - 1e-4 * alpha * (grad @ step) + 1e-15:
                u_free, val, grad, e_bar, p = trial, val_t, grad_t, \
                    e_bar_t, p_t
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # roundoff plateau: keep the full step only if it improves
            # the dual residual
            trial = u_free - step
            val_t, grad_t, e_bar_t, p_t = value_grad(trial)
            if np.sqrt(max(grad_t @ ops.K_D_inv @ grad_t, 0.0)) < r_dual:
                u_free, val, grad, e_bar, p = trial, val_t, grad_t, \
                    e_bar_t, p_t
            else:
                break
    u_full = np.zeros(2 * grid.n_nodes)
    u_full[free] = u_free
    return u_full.reshape(grid.n_nodes, 2), p


def _z_objective_pieces(t, state, prev_state, ops, mat, ep, loading):
    """Precompute the z-independent data of the z subproblem."""
    grid = ops.grid
    w, _, _, _ = eval_loading(loading, t)
    e = apply_sym_gradient(ops.B, state.u + w) - state.p
    lam, mu_l = mat.lame_lambda, mat.lame_mu
    # unit-coefficient elastic density per cell: 1/2 C0 e : e
    tr = e[:, 0] + e[:, 1]
    q0 = 0.5 * (2 * mu_l * tensor_dot(e, e) + lam * tr ** 2)
    dp_norm = tensor_norm(state.p - prev_state.p)
    return q0, dp_norm


def _z_value(z, z_prev, q0, dp_norm, ops, mat, ep):
    grid = ops.grid
    zc = cell_damage(grid, z)
    Wz, _ = damage_potential(z, mat)
    val = 0.5 * z @ ops.A_m @ z
    val += np.sum(grid.lump * Wz)
    val += np.sum(grid.w_cell * stiffness_coeff(zc, mat) * q0)
    val += np.sum(grid.w_cell * yield_radius(zc, mat) * dp_norm)
    dz = z - z_prev
    val += 0.5 * (ep.eps / ep.tau) * np.sum(grid.lump * dz ** 2)
    val -= mat.kappa * np.sum(grid.lump * dz)
    return float(val)


def _z_grad(z, z_prev, q0, dp_norm, ops, mat, ep):
    """Euclidean gradient of the z subproblem objective."""
    grid = ops.grid
    zc = cell_damage(grid, z)
    _, Wp = damage_potential(z, mat)
    g = ops.A_m @ z + grid.lump * Wp
    cell_term = grid.w_cell * (stiffness_coeff_prime(zc, mat) * q0
                               + mat.sigma_y * (1 - mat.m_bar)
                               * (zc < 1.0) * (zc > 0.0) * dp_norm)
    np.add.at(g, grid.cells.ravel(), np.repeat(cell_term / 4.0, 4))
    g += (ep.eps / ep.tau) * grid.lump * (z - z_prev)
    g -= mat.kappa * grid.lump
    return g


def _z_hess(z, q0, ops, mat, ep):
    """Hessian of the z subproblem (a.e.; the yield-radius term is
    piecewise linear and contributes nothing)."""
    grid = ops.grid
    zc = cell_damage(grid, z)
    _, Wp = damage_potential(z, mat)
    Wpp = mat.q_exp * (mat.q_exp + 1.0) * mat.w0 * z ** (-mat.q_exp - 2.0)
    H = ops.A_m + np.diag(grid.lump * (Wpp + ep.eps / ep.tau))
    # damage-elasticity coupling: d/dz of the scattered cell drive
    cell_curv = grid.w_cell * 2.0 * (zc < 1.0) * q0 / 16.0
    for c in range(grid.n_cells):
        idx = grid.cells[c]
        H[np.ix_(idx, idx)] += cell_curv[c]
    return H


def _z_stationarity(z, z_prev, g, m):
    """Mass-norm of the density-form projected gradient on the box."""
    d = g / m
    proj = np.where(z <= Z_FLOOR * (1 + 1e-12), np.minimum(d, 0.0),
                    np.where(z >= z_prev - 1e-15, np.maximum(d, 0.0), d))
    return float(np.sqrt(np.sum(m * proj ** 2)))


def solve_z_step(t: float, state: State, prev_state: State, ops: Operators,
                 mat: MaterialParams, ep: EnergyParams, loading: LoadingSpec,
                 tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Minimize the z subproblem under z_floor <= z <= z_prev by a
    projected Newton iteration with backtracking, falling back to
    mass-preconditioned gradient steps when the Newton direction fails
    to decrease the objective."""
    grid = ops.grid
    z_prev = prev_state.z
    q0, dp_norm = _z_objective_pieces(t, state, prev_state, ops, mat, ep, loading)
    z = np.clip(state.z, Z_FLOOR, z_prev)
    val = _z_value(z, z_prev, q0, dp_norm, ops, mat, ep)
    m = grid.lump
    n = grid.n_nodes
    for _ in range(max_iter):
        g = _z_grad(z, z_prev, q0, dp_norm, ops, mat, ep)
        if _z_stationarity(z, z_prev, g, m) <= tol:
            break
        d = g / m
        lower = z <= Z_FLOOR * (1 + 1e-12)
        upper = z >= z_prev - 1e-15
        active = (lower & (d > 0)) | (upper & (d < 0))
        direction = np.zeros(n)
        free = ~active
        if np.any(free):
            H = _z_hess(z, q0, ops, mat, ep)
            try:
                direction[free] = np.linalg.solve(
                    H[np.ix_(free, free)], g[free])
            except np.linalg.LinAlgError:
                direction[free] = d[free]
        improved = False
        for trial in (direction, d):
            alpha = 1.0
            for _bt in range(50):
                z_new = np.clip(z - alpha * trial, Z_FLOOR, z_prev)
                if np.any(z_new != z):
                    val_new = _z_value(z_new, z_prev, q0, dp_norm, ops,
                                       mat, ep)
                    if val_new <= val - 1e-4 * alpha * max(g @ trial, 0.0):
                        z, val = z_new, val_new
                        improved = True
                        break
                alpha *= 0.5
            if improved:
                break
        if not improved:
            # near the minimizer the objective decrease drowns in
            # roundoff; fall back to accepting by residual decrease
            res = _z_stationarity(z, z_prev, g, m)
            z_try = np.clip(z - direction, Z_FLOOR, z_prev)
            g_try = _z_grad(z_try, z_prev, q0, dp_norm, ops, mat, ep)
            if _z_stationarity(z_try, z_prev, g_try, m) < res:
                z = z_try
                val = _z_value(z, z_prev, q0, dp_norm, ops, mat, ep)
            else:
                break
    return z


# ---------------------------------------------------------------------------
# optimality residuals
# ---------------------------------------------------------------------------

def el_residuals(t: float, state: State, prev_state: State, ops: Operators,
                 mat: MaterialParams, ep: EnergyParams,
                 loading: LoadingSpec) -> tuple[float, float, float]:
    """Residuals of the three coupled optimality conditions of the
    incremental problem at (t, state).

    r_u: dual (K_D^-1) norm of the viscous displacement stationarity.
    r_z: violation of the one-sided variational inequality pair for z.
    r_p: cellwise inclusion residual of the plastic flow condition.
    """
    from .constitutive import energy_gradients
    grid = ops.grid
    g_u, g_z, g_p = energy_gradients(t, state, ops, mat, ep.mu, loading)
    free = grid.free_dofs
    du = (state.u - prev_state.u).ravel()[free]
    res_u = (ep.eps * ep.nu / ep.tau) * (ops.K_D @ du) + g_u
    r_u = float(np.sqrt(max(res_u @ ops.K_D_inv @ res_u, 0.0)))

    z_rate = (state.z - prev_state.z) / ep.tau
    chi = g_z  # density form of the damage driving force
    gv1_viol = np.maximum(ep.eps * z_rate + chi - mat.kappa, 0.0)
    gv1 = np.sqrt(np.sum(grid.lump * gv1_viol ** 2))
    p_rate = (state.p - prev_state.p) / ep.tau
    lhs2 = np.sum(grid.lump * (mat.kappa * np.abs(z_rate)
                               + ep.eps * z_rate ** 2 + chi * z_rate))
    rhs2 = mat.c_k * ep.tau * np.max(np.abs(z_rate), initial=0.0) \
        * np.sum(grid.w_cell * tensor_norm(p_rate))
    gv2 = max(lhs2 - rhs2, 0.0)
    r_z = float(gv1 + gv2)

    xi = -g_p - (ep.eps * ep.nu / ep.tau) * (state.p - prev_state.p)
    zc = cell_damage(grid, state.z)
    V = yield_radius(zc, mat)
    dp = state.p - prev_state.p
    dpn = tensor_norm(dp)
    viol = np.empty(grid.n_cells)
    moving = dpn > 1e-14
    if np.any(moving):
        dirs = dp[moving] / dpn[moving, None]
        viol[moving] = tensor_norm(xi[moving] - V[moving, None] * dirs)
    viol[~moving] = np.maximum(tensor_norm(xi[~moving]) - V[~moving], 0.0)
    r_p = float(np.sqrt(np.sum(grid.w_cell * viol ** 2)))
    return r_u, r_z, r_p


def incremental_functional(t: float, state: State, prev_state: State,
                           ops: Operators, mat: MaterialParams,
                           ep: EnergyParams, loading: LoadingSpec) -> float:
    rate = Rate(u_rate=(state.u - prev_state.u) / ep.tau,
                z_rate=(state.z - prev_state.z) / ep.tau,
                p_rate=(state.p - prev_state.p) / ep.tau)
    psi = psi_total(state, rate, ops, mat, ep.eps, ep.nu, tol_pos=1e-14)
    return ep.tau * psi + energy(t, state, ops, mat, ep.mu, loading)


def incremental_step(t: float, prev_state: State, ops: Operators,
                     mat: MaterialParams, ep: EnergyParams,
                     loading: LoadingSpec, tol_stat: float = 1e-8,
                     max_iter: int = 500) -> StepResult:
    """Alternating u -> p -> z sweeps from prev_state until the combined
    optimality residual drops below tol_stat (or max_iter sweeps)."""
    state = prev_state.copy()
    val0 = incremental_functional(t, state, prev_state, ops, mat, ep, loading)
    val = val0
    residuals = (np.inf, np.inf, np.inf)
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        state.u, state.p = solve_up_step(
            t, state, prev_state, ops, mat, ep, loading,
            tol_dual=max(1e-13, 0.02 * tol_stat))
        state.z = solve_z_step(t, state, prev_state, ops, mat, ep, loading,
                               tol=0.1 * tol_stat)
        new_val = incremental_functional(t, state, prev_state, ops, mat,
                                         ep, loading)
        residuals = el_residuals(t, state, prev_state, ops, mat, ep, loading)
        val = new_val
        if max(residuals) <= tol_stat:
            break
    accepted = max(residuals) <= tol_stat
    return StepResult(
        new_state=state,
        iterations=sweeps,
        functional_value=val,
        el_residuals=residuals,
        decrease=val0 - val,
        accepted=accepted,
        z_floor_active=bool(np.any(state.z <= Z_FLOOR * (1 + 1e-12))),
    )
