"""Run the incremental scheme over a uniform partition and compute the
energy-dissipation diagnostics along the resulting trajectory.

Rates are backward differences.  The external power integral is done
with Gauss-Legendre quadrature at the frozen previous state, so the
per-step balance residual measures exactly the viscous time
discretization error and nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constitutive import EnergyParams, MaterialParams, Operators, energy, \
    energy_time_derivative
from .discretization import LoadingSpec, State, apply_sym_gradient, \
    eval_loading, total_strain
from .dissipation import (
    DualDiagnostics,
    Rate,
    d_nu,
    dual_diagnostics,
    norm_p_l1,
    norm_p_l2,
    norm_u_h1,
    norm_z_hm,
    norm_z_m,
    psi_total,
)
from .solver import StepResult, Z_FLOOR, incremental_step

_GAUSS_N = 8


@dataclass
class Trajectory:
    """Discrete-in-time viscous evolution with per-step diagnostics.

    All per-step arrays have length n_steps + 1 with entry 0 describing
    the initial state (rate quantities are 0 there by convention).
    """

    times: np.ndarray
    states: list[State]
    ep: EnergyParams
    mat: MaterialParams
    loading: LoadingSpec
    E_mu: np.ndarray
    N_value: np.ndarray          # dissipation rate functional per step
    psi_value: np.ndarray        # potential at the backward-difference rate
    power: np.ndarray            # integral of the partial time derivative
    balance_residual_cum: np.ndarray
    dual_diag: list[DualDiagnostics]
    el_residuals: list[tuple[float, float, float]]
    dnu: np.ndarray              # D_nu of the backward-difference rate
    iterations: np.ndarray
    accepted: np.ndarray
    aborted_at: int | None = None
    z_floor_hit: bool = False

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def rate(self, k: int) -> Rate:
        """Backward-difference rate at step k >= 1."""
        tau = self.times[k] - self.times[k - 1]
        return Rate(
            u_rate=(self.states[k].u - self.states[k - 1].u) / tau,
            z_rate=(self.states[k].z - self.states[k - 1].z) / tau,
            p_rate=(self.states[k].p - self.states[k - 1].p) / tau,
        )


def _power_integral(t0: float, t1: float, state: State, ops: Operators,
                    mat: MaterialParams, mu: float,
                    loading: LoadingSpec) -> float:
    """Gauss-Legendre integral of the partial time derivative of the
    energy over [t0, t1] at the frozen state."""
    xg, wg = np.polynomial.legendre.leggauss(_GAUSS_N)
    mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
    total = 0.0
    for x, w in zip(xg, wg):
        total += w * energy_time_derivative(mid + half * x, state, ops,
                                            mat, mu, loading)
    return half * total


def dissipation_rate(state: State, rate: Rate, ops: Operators,
                     mat: MaterialParams, ep: EnergyParams) -> float:
    """Rate functional N = R(z') + H(z, p') + eps (nu ||u'||_KD^2 +
    ||z'||_M^2 + nu ||p'||_L2^2).  Twice the viscous half of the
    incremental potential, as dictated by the balance identity."""
    psi_visc_half = psi_total(state, rate, ops, mat, ep.eps, ep.nu,
                              tol_pos=1e-12)
    # psi carries eps/2 * quadratic; N carries eps * quadratic
    quad = 0.5 * ep.eps * d_nu(ops, rate, ep.nu) ** 2
    return psi_visc_half + quad


def pre_relax(t0: float, init_state: State, ops: Operators,
              mat: MaterialParams, ep: EnergyParams, loading: LoadingSpec,
              tol_stat: float = 1e-9, max_iter: int = 200) -> State:
    """Relax the initial data to a stationary starting configuration at
    t0.  A single incremental step with an enormous time step removes
    the viscous terms while keeping the rate-independent dissipation, so
    the result is stable with respect to the dissipation distance."""
    ep_relax = EnergyParams(eps=ep.eps, nu=ep.nu, mu=ep.mu, tau=1e12,
                            t_final=ep.t_final)
    res = incremental_step(t0, init_state, ops, mat, ep_relax, loading,
                           tol_stat=tol_stat, max_iter=max_iter)
    return res.new_state


def run_viscous(ops: Operators, mat: MaterialParams, ep: EnergyParams,
                loading: LoadingSpec, init_state: State,
                n_steps: int | None = None, tol_stat: float = 1e-8,
                max_iter: int = 500, relax_initial: bool = True,
                abort_on_reject: bool = True) -> Trajectory:
    """Drive the incremental scheme from t=0 to t=t_final with uniform
    step ep.tau (or n_steps uniform steps if given)."""
    if n_steps is None:
        n_steps = int(round(ep.t_final / ep.tau))
    tau = ep.t_final / n_steps
    ep = EnergyParams(eps=ep.eps, nu=ep.nu, mu=ep.mu, tau=tau,
                      t_final=ep.t_final)
    times = np.linspace(0.0, ep.t_final, n_steps + 1)

    state0 = pre_relax(0.0, init_state, ops, mat, ep, loading) \
        if relax_initial else init_state.copy()

    states = [state0]
    zero_rate = Rate(u_rate=np.zeros_like(state0.u),
                     z_rate=np.zeros_like(state0.z),
                     p_rate=np.zeros_like(state0.p))
    E = [energy(0.0, state0, ops, mat, ep.mu, loading)]
    N = [0.0]
    psi = [0.0]
    power = [0.0]
    bal = [0.0]
    dd = [dual_diagnostics(0.0, state0, ops, mat, ep.mu, ep.nu, loading)]
    elr = [(0.0, 0.0, 0.0)]
    dnus = [0.0]
    iters = [0]
    acc = [True]
    aborted_at = None
    z_floor_hit = False

    diss_sum = 0.0
    power_sum = 0.0
    for k in range(1, n_steps + 1):
        t_k = times[k]
        res = incremental_step(t_k, states[-1], ops, mat, ep, loading,
                               tol_stat=tol_stat, max_iter=max_iter)
        z_floor_hit = z_floor_hit or res.z_floor_active
        state = res.new_state
        rate = Rate(u_rate=(state.u - states[-1].u) / tau,
                    z_rate=(state.z - states[-1].z) / tau,
                    p_rate=(state.p - states[-1].p) / tau)
        Nk = dissipation_rate(state, rate, ops, mat, ep)
        pk = _power_integral(times[k - 1], t_k, states[-1], ops, mat,
                             ep.mu, loading)
        diss_sum += tau * Nk
        power_sum += pk
        Ek = energy(t_k, state, ops, mat, ep.mu, loading)

        states.append(state)
        E.append(Ek)
        N.append(Nk)
        psi.append(psi_total(state, rate, ops, mat, ep.eps, ep.nu,
                             tol_pos=1e-12))
        power.append(pk)
        bal.append(abs(Ek + diss_sum - E[0] - power_sum))
        dd.append(dual_diagnostics(t_k, state, ops, mat, ep.mu, ep.nu,
                                   loading))
        elr.append(res.el_residuals)
        dnus.append(d_nu(ops, rate, ep.nu))
        iters.append(res.iterations)
        acc.append(res.accepted)
        if not res.accepted:
            aborted_at = k
            if abort_on_reject:
                break

    n_kept = len(states)
    return Trajectory(
        times=times[:n_kept],
        states=states,
        ep=ep,
        mat=mat,
        loading=loading,
        E_mu=np.array(E),
        N_value=np.array(N),
        psi_value=np.array(psi),
        power=np.array(power),
        balance_residual_cum=np.array(bal),
        dual_diag=dd,
        el_residuals=elr,
        dnu=np.array(dnus),
        iterations=np.array(iters),
        accepted=np.array(acc, dtype=bool),
        aborted_at=aborted_at,
        z_floor_hit=z_floor_hit,
    )


def balance_residual(traj: Trajectory, ops: Operators) -> np.ndarray:
    """Recompute the per-step cumulative balance residual from stored
    states only (independent quadrature path)."""
    ep, mat, loading = traj.ep, traj.mat, traj.loading
    out = np.zeros(len(traj.times))
    diss = 0.0
    pwr = 0.0
    E0 = energy(traj.times[0], traj.states[0], ops, mat, ep.mu, loading)
    for k in range(1, len(traj.times)):
        tau = traj.times[k] - traj.times[k - 1]
        rate = traj.rate(k)
        diss += tau * dissipation_rate(traj.states[k], rate, ops, mat, ep)
        pwr += _power_integral(traj.times[k - 1], traj.times[k],
                               traj.states[k - 1], ops, mat, ep.mu, loading)
        Ek = energy(traj.times[k], traj.states[k], ops, mat, ep.mu, loading)
        out[k] = abs(Ek + diss - E0 - pwr)
    return out


def enhanced_estimate_total(traj: Trajectory, ops: Operators) -> float:
    """Accumulated rate total  sum_k tau (||e'|| + ||z'||_Hm +
    sqrt(mu) ||u'||_H1 + sqrt(mu) ||p'||_L2), the quantity whose bound
    is uniform across vanishing-parameter levels with nu <= mu."""
    ep, loading = traj.ep, traj.loading
    total = 0.0
    for k in range(1, len(traj.times)):
        tau = traj.times[k] - traj.times[k - 1]
        rate = traj.rate(k)
        w0, _, _, _ = eval_loading(loading, traj.times[k - 1])
        w1, _, _, _ = eval_loading(loading, traj.times[k])
        e0 = total_strain(ops.B, traj.states[k - 1], w0)
        e1 = total_strain(ops.B, traj.states[k], w1)
        e_rate = (e1 - e0) / tau
        total += tau * (norm_p_l2(ops.grid, e_rate)
                        + norm_z_hm(ops, rate.z_rate)
                        + np.sqrt(ep.mu) * norm_u_h1(ops, rate.u_rate)
                        + np.sqrt(ep.mu) * norm_p_l2(ops.grid, rate.p_rate))
    return float(total)
