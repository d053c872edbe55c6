"""Mollifying plurisubharmonic potentials and measuring their Lelong numbers."""
import numpy as np

from dhym import mollify as mo

for n in (1, 2, 3):
    k = mo.build_kernel(n)
    kappa = 0.5 * sum(1 / j for j in range(n, n + 4))
    print(f"n={n}: kernel mass {k.normalization():.15f}, a_n = {k.a_n:.12f} (harmonic tail {kappa:.12f})")


def pole(c):
    return lambda z: c * np.log(np.linalg.norm(z, axis=-1))


print("\nLelong numbers of c log|z| at the origin")
print("  n     c    delta     estimate")
for n in (1, 2):
    for c in (0.5, 2.0):
        for delta in (1e-1, 1e-2):
            est = mo.lelong_level(pole(c), np.zeros(n), delta, 1.0)
            print(f"  {n}  {c:4.1f}  {delta:7.0e}   {est.nu_level:.6f}  inequalities hold: {est.holds()}")

# the pole sitting off-centre is seen with a smaller number at coarse scales
p = np.array([0.02 + 0j])
for delta in (1e-1, 1e-2, 1e-3):
    est = mo.lelong_level(lambda z: np.log(np.abs(z[..., 0] - p[0])), np.zeros(1), delta, 1.0)
    print(f"off-centre pole, delta={delta:.0e}: {est.nu_level:.4f}")

# mollifying |z|^2 shifts it by a constant, so the complex Hessian stays the identity
delta = 0.08
phi = mo.PotentialSample.from_function(lambda z: np.sum(np.abs(z) ** 2, axis=-1), 1, delta / 8, 41)
smooth = mo.mollify_potential(phi, mo.build_kernel(1), delta)
H = mo.complex_hessian_fd(smooth)
print(f"\n|z|^2 after mollification: max Hessian deviation {np.max(np.abs(H - 1)):.2e}")

# gluing two potentials with the regularized maximum
x = np.linspace(-1, 1, 9)
f, g = x**2, 0.25 + 0 * x
M = mo.regularized_max(f, g, 0.1)
print("\nregularized max of x^2 and 1/4 (eta = 0.1):")
for xi, a, b, m in zip(x, f, g, M):
    print(f"  x={xi:+.2f}  max={max(a, b):.4f}  M={m:.4f}")
