"""Monte Carlo audits of the algebraic lemmas behind the a priori estimates."""
import numpy as np

from dhym import lemma_lab as ll

print("perturbation constants (n = 3)")
print("  theta    eps1      eps4        eps2          M")
for theta in (np.pi / 3, np.pi / 2, 3 * np.pi / 4):
    for eps1 in (0.05, 0.2):
        b = ll.perturbation_constants(theta, eps1, 3)
        rep = ll.verify_perturb1(b, 20000, seed=1)
        print(f"  {theta:.3f}  {eps1:5.2f}  {b.eps4:.3e}  {b.eps2:.3e}  {b.M:8d}   violations {rep.violations}")

print("\nbound constants")
for theta in (0.4, np.pi / 2, 2.6):
    c = ll.bound_constants(theta, 0.1, 3)
    print(f"  theta={theta:.3f}: C_a={c.C_a:.4f}, C={c.C_top:.3f}, eps_b={c.eps_b:.4f}")

print("\ninf g on the constraint surface")
for theta in np.linspace(0.1, np.pi - 0.1, 7):
    rep = ll.sample_constraint_and_verify_g(theta, 50000, seed=2)
    print(f"  theta={theta:.3f}: inf g = {rep.worst_margin:.3e} over {rep.trials} samples")

# the tabulated minimum of the quadratic only matches with Delta = a c - b^2
sample = ll.ConstraintSample((ll.solve_lambda1(3.0, 0.7, 0.4, 1.0), 3.0, 0.7), 0.4, 1.0)
audit = ll.quadratic_min_audit(sample, fx=0.8, fy=-0.3, t=0.6)
S = sum(sample.lambdas) + 2 * sample.z
print(f"\nquadratic audit: direct min {audit.min_direct:.6f}, closed min {audit.min_closed:.6f}")
print(f"  matching normalization: Delta = {audit.normalization}")
print(f"  with Delta = S^2 g instead: {ll.closed_minimum(audit.a, audit.b, audit.c, audit.d, audit.e, S * S * audit.g):.6f}")
print(f"  coefficient deviations from the elimination: "
      + ", ".join(f"{k}={v:.1e}" for k, v in audit.deviations.items()))

rep = ll.verify_degentonon(np.pi / 2, 2, 1.0, 0.5, 4, 2000, seed=3)
print(f"\ndegenerate-cone propagation: min s0 = {rep.worst_margin:.3f}, "
      f"median s0 = {rep.details['median_s0']:.3f}, failures {rep.violations}")
