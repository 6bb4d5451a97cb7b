"""Joint vanishing limits: nu = eps and nu = mu = eps ladders.

Two further ladders send the displacement/plastic viscosity (and in
the second case also the hardening) to zero together with eps.  The
regime-specific stability magnitude and the contact-potential balance
residual of the reparameterized limit candidate both decrease down
each ladder.
"""

from ribv.problems import reference_problem
from ribv.reparam import bv_sweep


def show(regime, ladder, amplitude):
    grid, mat, ops, ep, loading, init = reference_problem(
        n_side=4, n_steps=20, amplitude=amplitude)
    rep = bv_sweep(ops, mat, loading, init, regime, ladder, n_steps=20)
    print(f"regime {regime} (amplitude {amplitude}):")
    print(f"  {'eps':>8} {'nu':>8} {'mu':>8} {'stability':>12} "
          f"{'ed residual':>12}")
    for lv in rep.levels:
        e, n, m = lv.params
        print(f"  {e:8.0e} {n:8.0e} {m:8.0e} "
              f"{lv.max_stability_nonjump:12.3e} "
              f"{lv.ed_balance_residual:12.4e}")
    print()


show("eps-nu0",
     [(1e-1, 1e-1, 0.1), (1e-2, 1e-2, 0.1), (1e-3, 1e-3, 0.1)], 0.48)
# smaller amplitude: with mu -> 0 the plastic response loses hardening,
# and the load must stay below the perfect-plasticity capacity
show("all0", [(1e-1,) * 3, (1e-2,) * 3, (1e-3,) * 3], 0.46)
