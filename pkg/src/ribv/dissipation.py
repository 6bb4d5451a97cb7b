"""Dissipation potentials, conjugates, distance functionals, and the
plastic proximal map.

All distance-type quantities come out in closed form because the
discrete inner products are lumped: the subdifferential of the damage
dissipation at zero rate is the nodewise half-space {chi >= -kappa}, the
stable set of the plastic dissipation is the cellwise ball of radius
V(z), and both distances reduce to weighted norms of constraint
violations.

Infinite values are ordinary float('inf') returns, never exceptions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constitutive import (
    MaterialParams,
    Operators,
    cell_damage,
    energy_gradients,
    stiffness_coeff,
    yield_radius,
)
from .discretization import (
    Grid,
    State,
    tensor_dev,
    tensor_dot,
    tensor_norm,
    tensor_trace,
)


@dataclass
class Rate:
    """State rate triple (per unit time).  z_rate must be nonpositive
    whenever the rate is admissible for the unidirectional damage
    dissipation; p_rate is trace-free cellwise."""

    u_rate: np.ndarray   # (n_nodes, 2), zero on Dirichlet nodes
    z_rate: np.ndarray   # (n_nodes,)
    p_rate: np.ndarray   # (n_cells, 3)


@dataclass
class DualDiagnostics:
    """Dual stability magnitudes of a state at a time instant.

    dual_u      -- dual norm of the displacement residual (K_D^-1 metric)
    dist_z      -- lumped-L2 distance of -g_z to the half-spaces {>= -kappa}
    dist_p      -- weighted distance of -g_p to the cellwise yield balls
    dist_p0     -- same with the hardening term dropped (sigma_D tested)
    d_nu_star   -- sqrt(dual_u^2/nu + dist_z^2 + dist_p^2/nu)
    d_star_mu   -- sqrt(dual_u^2 + dist_p^2)
    d_star0     -- sqrt(dual_u^2 + dist_p0^2)
    """

    dual_u: float
    dist_z: float
    dist_p: float
    dist_p0: float
    d_nu_star: float
    d_star_mu: float
    d_star0: float


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def norm_kd(ops: Operators, u_field: np.ndarray) -> float:
    """Viscous H1 seminorm of a nodal field vanishing on the Dirichlet
    nodes (the free-dof restriction is then exact)."""
    v = u_field.ravel()[ops.grid.free_dofs]
    return float(np.sqrt(max(v @ ops.K_D @ v, 0.0)))


def norm_u_h1(ops: Operators, u_field: np.ndarray) -> float:
    """Full H1 norm: lumped L2 part plus the strain seminorm."""
    grid = ops.grid
    l2sq = np.sum(grid.lump * np.sum(u_field ** 2, axis=1))
    v = u_field.ravel()[grid.free_dofs]
    return float(np.sqrt(l2sq + max(v @ ops.K_D @ v, 0.0)))


def norm_z_m(grid: Grid, z_field: np.ndarray) -> float:
    """Lumped L2 norm of a nodal scalar field."""
    return float(np.sqrt(np.sum(grid.lump * z_field ** 2)))


def norm_z_hm(ops: Operators, z_field: np.ndarray) -> float:
    """Nonlocal Sobolev-type norm: lumped L2 plus the Gagliardo form."""
    grid = ops.grid
    return float(np.sqrt(np.sum(grid.lump * z_field ** 2)
                         + max(z_field @ ops.A_m @ z_field, 0.0)))


def norm_p_l2(grid: Grid, p_field: np.ndarray) -> float:
    return float(np.sqrt(np.sum(grid.w_cell * tensor_dot(p_field, p_field))))


def norm_p_l1(grid: Grid, p_field: np.ndarray) -> float:
    return float(np.sum(grid.w_cell * tensor_norm(p_field)))


# ---------------------------------------------------------------------------
# dissipation potential and conjugates
# ---------------------------------------------------------------------------

def psi_total(state: State, rate: Rate, ops: Operators, mat: MaterialParams,
              eps: float, nu: float, tol_pos: float = 0.0) -> float:
    """Overall dissipation potential

        kappa ||z'||_L1 + sum_c w_c V(z_c) |p'_c|
        + eps/2 (nu ||u'||_KD^2 + ||z'||_M^2 + nu ||p'||_L2^2),

    returning +inf when some z' component is positive."""
    grid = ops.grid
    if np.any(rate.z_rate > tol_pos):
        return float("inf")
    rz = np.sum(grid.lump * mat.kappa * np.abs(rate.z_rate))
    zc = cell_damage(grid, state.z)
    hp = np.sum(grid.w_cell * yield_radius(zc, mat) * tensor_norm(rate.p_rate))
    visc = 0.5 * eps * (nu * norm_kd(ops, rate.u_rate) ** 2
                        + norm_z_m(grid, rate.z_rate) ** 2
                        + nu * norm_p_l2(grid, rate.p_rate) ** 2)
    return float(rz + hp + visc)


def conj_visc_u(ops: Operators, eta: np.ndarray, eps: float, nu: float) -> float:
    """Conjugate of the viscous displacement potential: for eps*nu > 0 the
    value is eta K_D^-1 eta / (2 eps nu); for eps*nu = 0 it is +inf
    unless eta vanishes."""
    eta = np.asarray(eta, dtype=float)
    if eps * nu <= 0.0:
        return 0.0 if np.all(eta == 0.0) else float("inf")
    return float(eta @ ops.K_D_inv @ eta / (2.0 * eps * nu))


def dist_r(grid: Grid, chi: np.ndarray, kappa: float,
           convention: str = "subdiff") -> float:
    """Lumped-L2 distance of the nodal field chi to the stable set of the
    damage dissipation at zero rate.

    convention "subdiff" uses the set {gamma >= -kappa} (the default,
    certified against the projection oracle); "mirror" uses
    {gamma >= +kappa} for comparison runs.
    """
    thr = -kappa if convention == "subdiff" else kappa
    viol = np.maximum(thr - chi, 0.0)
    return float(np.sqrt(np.sum(grid.lump * viol ** 2)))


def dist_h(grid: Grid, z: np.ndarray, omega: np.ndarray,
           mat: MaterialParams, tol: float = 1e-10) -> float:
    """Weighted L2 distance of the cellwise deviatoric field omega to the
    pointwise balls of radius V(z_c)."""
    omega = np.asarray(omega, dtype=float)
    if np.max(np.abs(tensor_trace(omega)), initial=0.0) > tol:
        raise ValueError("omega must be trace-free")
    zc = cell_damage(grid, z)
    viol = np.maximum(tensor_norm(omega) - yield_radius(zc, mat), 0.0)
    return float(np.sqrt(np.sum(grid.w_cell * viol ** 2)))


# ---------------------------------------------------------------------------
# dual diagnostics
# ---------------------------------------------------------------------------

def dual_diagnostics(t: float, state: State, ops: Operators,
                     mat: MaterialParams, mu: float, nu: float, loading,
                     dist_z_convention: str = "subdiff") -> DualDiagnostics:
    """Evaluate every dual stability magnitude of a state at time t."""
    g_u, g_z, g_p = energy_gradients(t, state, ops, mat, mu, loading)
    dual_u = float(np.sqrt(max(g_u @ ops.K_D_inv @ g_u, 0.0)))
    dz = dist_r(ops.grid, -g_z, mat.kappa, dist_z_convention)
    dp = dist_h(ops.grid, state.z, -g_p, mat)
    # hardening-free surrogate: test sigma_D itself
    dp0 = dist_h(ops.grid, state.z, -(g_p - mu * state.p), mat)
    if nu > 0:
        dnustar = float(np.sqrt(dual_u ** 2 / nu + dz ** 2 + dp ** 2 / nu))
    else:
        dnustar = float("inf") if (dual_u > 0 or dp > 0) else dz
    return DualDiagnostics(
        dual_u=dual_u,
        dist_z=dz,
        dist_p=dp,
        dist_p0=dp0,
        d_nu_star=dnustar,
        d_star_mu=float(np.hypot(dual_u, dp)),
        d_star0=float(np.hypot(dual_u, dp0)),
    )


def d_nu(ops: Operators, rate: Rate, nu: float) -> float:
    """Primal rate functional sqrt(nu ||u'||_KD^2 + ||z'||_M^2 +
    nu ||p'||_L2^2)."""
    grid = ops.grid
    return float(np.sqrt(nu * norm_kd(ops, rate.u_rate) ** 2
                         + norm_z_m(grid, rate.z_rate) ** 2
                         + nu * norm_p_l2(grid, rate.p_rate) ** 2))


def d_up(ops: Operators, u_rate: np.ndarray, p_rate: np.ndarray) -> float:
    """sqrt(||u'||_H1^2 + ||p'||_L2^2), the two-variable rate norm used in
    the hardening-free jump regime."""
    return float(np.hypot(norm_u_h1(ops, u_rate), norm_p_l2(ops.grid, p_rate)))


# ---------------------------------------------------------------------------
# plastic proximal map
# ---------------------------------------------------------------------------

def prox_plastic(p_prev: np.ndarray, e_bar_dev: np.ndarray, a, b, mu_w, c_q):
    """Exact minimizer over trace-free pi of

        a |pi - p_prev| + b/2 |pi - p_prev|^2 + mu_w/2 |pi|^2
        + c_q/2 |e_bar_dev - pi|^2.

    Accepts broadcast scalar or per-cell coefficients; returns an array of
    the same shape as p_prev.  The quadratic modulus b + mu_w + c_q must
    be positive.
    """
    p_prev = np.asarray(p_prev, dtype=float)
    e_bar_dev = np.asarray(e_bar_dev, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mu_w = np.asarray(mu_w, dtype=float)
    c_q = np.asarray(c_q, dtype=float)
    modulus = b + mu_w + c_q
    if np.any(modulus <= 0):
        raise ValueError("quadratic modulus must be positive")
    if np.any(a < 0):
        raise ValueError("shrinkage threshold must be nonnegative")
    # unconstrained quadratic minimizer, then shrinkage toward p_prev
    pi_hat = (b[..., None] * p_prev + c_q[..., None] * e_bar_dev) / modulus[..., None]
    d = pi_hat - p_prev
    dn = tensor_norm(d)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(dn > 0.0,
                          np.maximum(1.0 - a / (modulus * np.where(dn > 0, dn, 1.0)),
                                     0.0),
                          0.0)
    return p_prev + np.asarray(factor)[..., None] * d


def prox_plastic_cells(grid: Grid, z: np.ndarray, p_prev: np.ndarray,
                       e_bar: np.ndarray, mat: MaterialParams,
                       eps: float, nu: float, mu: float, tau: float) -> np.ndarray:
    """Cellwise plastic update: shrinkage with threshold V(z_c), viscous
    modulus eps*nu/tau, hardening mu, and the deviatoric elastic coupling
    coefficient of C(z_c)."""
    zc = cell_damage(grid, z)
    a = yield_radius(zc, mat)
    b = np.full_like(a, eps * nu / tau)
    mu_w = np.full_like(a, mu)
    c_q = 2.0 * mat.lame_mu * stiffness_coeff(zc, mat)
    return prox_plastic(p_prev, tensor_dev(e_bar), a, b, mu_w, c_q)
