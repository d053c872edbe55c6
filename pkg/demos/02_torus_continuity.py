"""Solving the twisted equation on a flat torus by continuity.

A smooth potential is picked first, the twist that makes it exact is derived,
and the solver is asked to find it again from zero.
"""
import numpy as np

from dhym import cone_core as cc
from dhym import torus_solver as ts


def star_field(active, size):
    phi = ts.PeriodicField.from_function(
        lambda x, y: 0.5 * np.cos(x) + 0.3 * np.sin(x + y) + 0.2 * np.cos(2 * y), active, size)
    return phi - phi.mean()


H0 = np.diag([2.0, 2.5, 3.0]) + 0.1 * (np.ones((3, 3)) - np.eye(3))

for n, theta, active in [(2, 1.2, ("x1", "x2")), (3, 2.0, ("x1", "y2"))]:
    bg = ts.FlatBackground(n, np.eye(n), H0[:n, :n], cc.PhaseSpec(theta))
    print(f"\nn = {n}, theta = {theta}, active coordinates {active}")
    print("  grid   sup error    residual   path states")
    for size in (8, 16, 32, 64):
        star = star_field(active, size)
        f = ts.manufactured_twist(star, bg)
        report = ts.continuity_run(f, bg)
        err = np.max(np.abs(report.phi.values - star.values))
        print(f"  {size:4d}   {err:.3e}    {report.final_residual:.2e}   {len(report.path)}")
    print("  path on the finest grid:")
    for p in report.path:
        print(f"    t={p.t:.3f}  d_t={p.d_t:+.4f}  residual={p.residual:.1e}  "
              f"margin={p.cone_margin:.3f}  newton={p.newton_iters}")
    guard = ts.cone_guard(report.phi, bg, f)
    print(f"  worst cone margin of the solution: {guard.worst:.3f}")

# a twist that dips below zero still gives a phase inside (theta, Theta)
theta, Theta = np.pi / 2, 3 * np.pi / 4
bg = ts.FlatBackground(2, np.eye(2), (1 + 0.02) * np.eye(2), cc.PhaseSpec(theta))
star = ts.PeriodicField.from_function(
    lambda x, y: 0.15 * np.cos(x) + 0.1 * np.sin(x + y), ("x1", "x2"), 32)
f = ts.manufactured_twist(star - star.mean(), bg)
report = ts.continuity_run(f, bg, Theta=Theta)
audit = ts.phase_audit(report.phi, f, bg, Theta)
print(f"\nnegative dip: min f = {audit.f_min:.4f}, threshold {-audit.threshold:.4f}")
print(f"  largest angle sum {audit.max_phase:.4f} < Theta = {Theta:.4f}: {audit.below_Theta}")
print(f"  largest angle sum where f >= 0: {audit.max_phase_nonnegative_f:.4f} (theta = {theta:.4f})")

try:
    ts.continuity_run(f * 0 - 5.0, bg)
except ValueError as exc:
    print(f"\ninadmissible twist rejected: {exc}")
