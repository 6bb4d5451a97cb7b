"""Vanishing-viscosity ladder (damage viscosity eps -> 0).

Keeps the rate viscosity nu and the hardening mu fixed and sends the
damage viscosity down a decade per level.  On non-jump knots the dual
stability magnitude must vanish in the limit; the decay ratio per
decade and the shrinking pairwise distance between consecutive damage
curves are the convergence evidence for a limiting solution.
"""

from ribv.problems import reference_problem
from ribv.reparam import bv_sweep

grid, mat, ops, ep, loading, init = reference_problem(n_side=4,
                                                      n_steps=20,
                                                      amplitude=0.48)
ladder = [(1e-1, 0.1, 0.1), (1e-2, 0.1, 0.1), (1e-3, 0.1, 0.1)]
rep = bv_sweep(ops, mat, loading, init, "eps0", ladder, n_steps=20)

print(f"{'eps':>8} {'stability':>12} {'jumps':>6} {'min z':>8} "
      f"{'length':>8}")
for lv in rep.levels:
    print(f"{lv.params[0]:8.0e} {lv.max_stability_nonjump:12.3e} "
          f"{len(lv.jump_intervals):6d} {lv.min_z:8.4f} "
          f"{lv.total_length:8.3f}")

stabs = [lv.max_stability_nonjump for lv in rep.levels]
print()
print("stability decay ratios per decade:",
      [f"{a / b:.2f}" for a, b in zip(stabs, stabs[1:])])
print("pairwise sup-distance between damage curves:",
      [f"{d:.3e}" for d in rep.pairwise_sup_distance])
