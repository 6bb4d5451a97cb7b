"""Discrete Gronwall-type inequality checkers.

Three checkers validate hypotheses and conclusion on concrete data:
the classic multiplicative form, an affine form with an implicit
right-hand side, and the viscous-regularization form whose calibrated
constant depends only on (eta, T).  The last block constructs a
saturating instance, the hardest case for any claimed constant.
"""

import numpy as np

from ribv.gronwall import (
    GronwallInstance,
    check_gronwall_affine,
    check_gronwall_classic,
    check_gronwall_viscous,
    viscous_constant,
)

# classic: a_k <= B + sum_{j<k} a_j b_j implies a_k <= B exp(sum b_j)
b = np.full(8, 0.3)
a = np.zeros(8)
acc = 0.0
for k in range(8):
    a[k] = 1.0 + acc          # recursion met with equality
    acc += a[k] * b[k]
hyp, bound, holds = check_gronwall_classic(
    GronwallInstance(a=a, b=b, B=1.0))
print(f"classic: hypotheses={hyp} bound_holds={holds} "
      f"a_n={a[-1]:.3f} <= {bound[-1]:.3f}")

# affine: a_k <= Lam + b sum_{j<=k} a_j with contraction margin
hyp, bound, holds = check_gronwall_affine(
    GronwallInstance(a=np.full(6, 1.2), b_const=0.2, lam=1.3, Lam=1.0))
print(f"affine:  hypotheses={hyp} bound_holds={holds}")

# viscous: per-step recursion with remainder r_k <= kappa2 a_k; the
# explicit constant makes the conclusion falsifiable
rng = np.random.default_rng(5)
n, eta, rho = 12, 1.0, 0.3
kappa1, kappa2, eps = 0.5, 2.0, 0.5
tau = eps / (2.0 * kappa2 * kappa1) * 0.9
gamma = kappa1 * tau / eps
c = rng.uniform(0, 1, n)
a = np.zeros(n + 1)
r = np.zeros(n)
M = np.zeros(n)
for k in range(1, n + 1):
    theta = 1.0 + c[k - 1] ** 2 + (rho ** 2 / (tau * eps) if k == 1
                                   else 0.0)
    coef = 1.0 + gamma - gamma * kappa2
    a[k] = (a[k - 1] + np.sqrt(a[k - 1] ** 2
                               + 4 * coef * eta ** 2 * gamma * theta)) \
        / (2 * coef)
    r[k - 1] = kappa2 * a[k]
    slack = (eta ** 2 * gamma * theta + gamma * a[k] * r[k - 1]
             - a[k] * (a[k] - a[k - 1]) - gamma * a[k] ** 2)
    M[k - 1] = np.sqrt(max(slack, 0.0) / gamma)
inst = GronwallInstance(a=a, r=r, c=c, M=M, eta=eta, rho=rho,
                        kappa1=kappa1, kappa2=kappa2, tau=tau, eps=eps,
                        lemma="viscous")
hyp, _, holds = check_gronwall_viscous(inst)
print(f"viscous: hypotheses={hyp} bound_holds={holds} "
      f"(constant C(eta={eta:g}, T={tau * n:.2f}) = "
      f"{viscous_constant(eta, tau * n):.2f}, saturating instance)")
