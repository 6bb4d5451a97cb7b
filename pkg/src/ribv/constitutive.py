"""Constitutive laws and the driving energy.

Material model:

* damage-dependent isotropic elasticity
      C(z) xi = (delta_reg + min(z,1)^2) (2 mu_L xi + lam_L tr(xi) I),
* damage potential W(z) = w0 z^(-q_exp) with q_exp > 4 (a barrier at the
  fully broken state z = 0),
* damage-dependent yield radius V(z) = sigma_y (m_bar + (1-m_bar)
  clamp(z,0,1)) for the deviatoric constraint ball, with plastic
  dissipation density H(z, pi) = V(z) |pi|,
* unidirectional damage dissipation density kappa |zeta| for zeta <= 0.

The assembled energy is

    E_mu(t, q) = 1/2 sum_c w_c C(z_c) e_c : e_c + sum_i m_i W(z_i)
                 + mu/2 sum_c w_c |p_c|^2 + 1/2 z A z - F(t).(u + w(t))

with e = B(u + w(t)) - p and z_c the Q1 cell-center value (corner mean).
Gradients are returned as the representers used throughout the solver:
Euclidean covector for u on free dofs, lumped-L2 density for z, cellwise
density for p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import (
    FROB_W,
    Grid,
    LoadingSpec,
    State,
    apply_sym_gradient,
    eval_loading,
    tensor_dev,
    tensor_dot,
    tensor_trace,
    total_strain,
)


@dataclass(frozen=True)
class MaterialParams:
    """Material constants. Validated at construction."""

    lame_lambda: float = 1.0
    lame_mu: float = 1.0
    delta_reg: float = 0.05
    sigma_y: float = 1.0
    m_bar: float = 0.5
    kappa: float = 1.0
    w0: float = 0.1
    q_exp: float = 5.0
    m_order: float = 1.5

    def __post_init__(self):
        if self.lame_mu <= 0 or self.lame_lambda <= 0:
            raise ValueError("Lame constants must be positive")
        if not (0.0 < self.delta_reg < 1.0):
            raise ValueError("delta_reg must lie in (0, 1)")
        if self.sigma_y <= 0:
            raise ValueError("sigma_y must be positive")
        if not (0.0 < self.m_bar < 1.0):
            raise ValueError("m_bar must lie in (0, 1)")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.w0 <= 0:
            raise ValueError("w0 must be positive")
        if self.q_exp <= 4.0:
            raise ValueError("q_exp must exceed 4 (2n for n = 2)")
        if self.m_order <= 1.0:
            raise ValueError("m_order must exceed 1")
        if self.gamma1 <= 0:
            raise ValueError("elasticity lost ellipticity")

    @property
    def gamma1(self) -> float:
        """Lower ellipticity constant of C(z) over z >= 0."""
        return self.delta_reg * min(2 * self.lame_mu,
                                    2 * self.lame_mu + 2 * self.lame_lambda)

    @property
    def gamma2(self) -> float:
        """Upper ellipticity constant of C(z) over z >= 0."""
        return (1.0 + self.delta_reg) * max(2 * self.lame_mu,
                                            2 * self.lame_mu + 2 * self.lame_lambda)

    @property
    def c_k(self) -> float:
        """Lipschitz constant of z -> V(z)."""
        return self.sigma_y * (1.0 - self.m_bar)


@dataclass(frozen=True)
class EnergyParams:
    """Regularization parameters and time grid data."""

    eps: float = 1e-2
    nu: float = 1e-2
    mu: float = 1e-2
    tau: float = 0.05
    t_final: float = 1.0

    def __post_init__(self):
        if self.eps < 0 or self.nu < 0 or self.mu < 0:
            raise ValueError("regularization parameters must be nonnegative")
        if self.tau <= 0:
            raise ValueError("time step must be positive")


# ---------------------------------------------------------------------------
# pointwise laws
# ---------------------------------------------------------------------------

def stiffness_coeff(z, mat: MaterialParams):
    """Scalar factor (delta_reg + min(z,1)^2) of the elastic tensor."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("damage must be nonnegative")
    return mat.delta_reg + np.minimum(z, 1.0) ** 2


def stiffness_coeff_prime(z, mat: MaterialParams):
    """Derivative of the stiffness factor: 2z on [0,1), 0 beyond."""
    z = np.asarray(z, dtype=float)
    return np.where(z < 1.0, 2.0 * z, 0.0)


def elastic_tensor_apply(z, xi: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """Apply C(z) to a (..., 3) component array."""
    coef = stiffness_coeff(z, mat)
    tr = tensor_trace(xi)
    out = 2.0 * mat.lame_mu * np.array(xi, dtype=float, copy=True)
    out[..., 0] += mat.lame_lambda * tr
    out[..., 1] += mat.lame_lambda * tr
    return np.asarray(coef)[..., None] * out


def elastic_tensor_prime_apply(z, xi: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """Apply C'(z) to a (..., 3) component array."""
    coef = stiffness_coeff_prime(z, mat)
    tr = tensor_trace(xi)
    out = 2.0 * mat.lame_mu * np.array(xi, dtype=float, copy=True)
    out[..., 0] += mat.lame_lambda * tr
    out[..., 1] += mat.lame_lambda * tr
    return np.asarray(coef)[..., None] * out


def damage_potential(z, mat: MaterialParams):
    """Return (W(z), W'(z)) for the barrier potential w0 z^(-q)."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("damage hit the excluded fully-broken state")
    W = mat.w0 * z ** (-mat.q_exp)
    Wp = -mat.q_exp * mat.w0 * z ** (-mat.q_exp - 1.0)
    return W, Wp


def yield_radius(z, mat: MaterialParams):
    """Damage-dependent radius of the admissible deviatoric stress ball."""
    z = np.asarray(z, dtype=float)
    return mat.sigma_y * (mat.m_bar + (1.0 - mat.m_bar) * np.clip(z, 0.0, 1.0))


def plastic_density(z, pi: np.ndarray, mat: MaterialParams, tol: float = 1e-10):
    """Support function H(z, pi) = V(z) |pi| of the constraint ball;
    requires a trace-free argument."""
    pi = np.asarray(pi, dtype=float)
    if np.max(np.abs(tensor_trace(pi)), initial=0.0) > tol:
        raise ValueError("plastic direction must be trace-free")
    return yield_radius(z, mat) * np.sqrt(tensor_dot(pi, pi))


def cell_damage(grid: Grid, z: np.ndarray) -> np.ndarray:
    """Q1 interpolation of nodal damage at cell centers (corner mean)."""
    return z[grid.cells].mean(axis=1)


# ---------------------------------------------------------------------------
# assembled operators shared across evaluations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Operators:
    """Assembled discrete operators reused by every energy evaluation."""

    grid: Grid
    B: np.ndarray        # (n_cells, 3, 2 n_nodes)
    A_m: np.ndarray      # (n_nodes, n_nodes)
    K_D: np.ndarray      # (n_free, n_free) viscosity/H1 seminorm matrix
    K_D_inv: np.ndarray  # explicit inverse (desk-scale systems)

    @classmethod
    def build(cls, grid: Grid, mat: MaterialParams) -> "Operators":
        from .discretization import assemble_nonlocal_form, assemble_sym_gradient
        B = assemble_sym_gradient(grid)
        A_m = assemble_nonlocal_form(grid, mat.m_order)
        Bf = B.reshape(grid.n_cells * 3, 2 * grid.n_nodes)
        wf = np.repeat(grid.w_cell, 3) * np.tile(FROB_W, grid.n_cells)
        K_full = Bf.T @ (wf[:, None] * Bf)
        free = grid.free_dofs
        K_D = K_full[np.ix_(free, free)]
        K_D_inv = np.linalg.inv(K_D)
        return cls(grid=grid, B=B, A_m=A_m, K_D=K_D, K_D_inv=K_D_inv)


# ---------------------------------------------------------------------------
# energy and derivatives
# ---------------------------------------------------------------------------

def energy(t: float, state: State, ops: Operators, mat: MaterialParams,
           mu: float, loading: LoadingSpec) -> float:
    grid = ops.grid
    w, _, F, _ = eval_loading(loading, t)
    e = total_strain(ops.B, state, w)
    zc = cell_damage(grid, state.z)
    sigma = elastic_tensor_apply(zc, e, mat)
    quad = 0.5 * np.sum(grid.w_cell * tensor_dot(sigma, e))
    Wz, _ = damage_potential(state.z, mat)
    dam = np.sum(grid.lump * Wz)
    hard = 0.5 * mu * np.sum(grid.w_cell * tensor_dot(state.p, state.p))
    nonloc = 0.5 * state.z @ ops.A_m @ state.z
    work = F @ (state.u + w).ravel()
    return quad + dam + hard + nonloc - work


def energy_gradients(t: float, state: State, ops: Operators,
                     mat: MaterialParams, mu: float, loading: LoadingSpec):
    """Partial gradients of the energy.

    Returns (g_u, g_z, g_p):
      g_u -- Euclidean covector on the free displacement dofs,
      g_z -- nodal density against the lumped weights m_i,
      g_p -- cellwise density against the cell weights w_c (with the
             Frobenius pairing), g_p = mu p - sigma_D.
    """
    grid = ops.grid
    w, _, F, _ = eval_loading(loading, t)
    e = total_strain(ops.B, state, w)
    zc = cell_damage(grid, state.z)
    sigma = elastic_tensor_apply(zc, e, mat)

    # u: B^T (w_c sigma) - F on free dofs.
    weighted = (grid.w_cell[:, None] * FROB_W[None, :] * sigma).ravel()
    Bf = ops.B.reshape(grid.n_cells * 3, 2 * grid.n_nodes)
    g_u_full = Bf.T @ weighted - F
    g_u = g_u_full[grid.free_dofs]

    # z: nonlocal + barrier + half C'(z) e:e scattered to corner nodes.
    _, Wp = damage_potential(state.z, mat)
    cp = elastic_tensor_prime_apply(zc, e, mat)
    cell_drive = 0.5 * tensor_dot(cp, e)  # (n_cells,)
    scatter = np.zeros(grid.n_nodes)
    np.add.at(scatter, grid.cells.ravel(),
              np.repeat(grid.w_cell * cell_drive / 4.0, 4))
    g_z = (ops.A_m @ state.z) / grid.lump + Wp + scatter / grid.lump

    # p: mu p - sigma_D.
    g_p = mu * state.p - tensor_dev(sigma)
    return g_u, g_z, g_p


def energy_time_derivative(t: float, state: State, ops: Operators,
                           mat: MaterialParams, mu: float,
                           loading: LoadingSpec) -> float:
    """Partial time derivative of the energy at frozen state:
    int sigma : E(w') - <F', u + w> - <F, w'>."""
    grid = ops.grid
    w, w_rate, F, F_rate = eval_loading(loading, t)
    e = total_strain(ops.B, state, w)
    zc = cell_damage(grid, state.z)
    sigma = elastic_tensor_apply(zc, e, mat)
    Ew_rate = apply_sym_gradient(ops.B, w_rate)
    term1 = np.sum(grid.w_cell * tensor_dot(sigma, Ew_rate))
    term2 = F_rate @ (state.u + w).ravel()
    term3 = F @ w_rate.ravel()
    return term1 - term2 - term3
