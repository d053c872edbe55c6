"""Seeded numerical audits of the cone lemmas and the Laplacian-estimate algebra.

Every ``verify_*`` function returns a :class:`SuiteReport` with a violation
count and the smallest slack seen. Suites are deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import ceil, factorial

import numpy as np
from scipy import optimize

from . import cone_core as cc

BORDER = 1e-12


@dataclass
class SuiteReport:
    name: str
    trials: int
    violations: int
    worst_margin: float
    seed: int
    asserted: bool = True
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.violations == 0 or not self.asserted

    def row(self):
        return {
            "name": self.name, "trials": self.trials, "violations": self.violations,
            "worst_margin": self.worst_margin, "seed": self.seed,
        }


def _rng(seed):
    return np.random.default_rng(np.random.SeedSequence(seed))


def _random_unitary(rng, n, size):
    z = rng.normal(size=size + (n, n)) + 1j * rng.normal(size=size + (n, n))
    q, r = np.linalg.qr(z)
    phases = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (phases / np.abs(phases))[..., None, :]


def _conjugate(L, U, diag):
    """``L U diag U^H L^H`` for stacked factors."""
    inner = (U * diag[..., None, :]) @ np.conj(np.swapaxes(U, -1, -2))
    return L @ inner @ np.conj(np.swapaxes(L, -1, -2))


def sample_cone_angles(rng, theta, n, size, m=None, margin=0.0, max_rounds=200):
    """Angles uniform on ``(0, theta)^n`` conditioned on the top-m sum < theta - margin.

    Returns ``(angles, acceptance_rate)``; angles are sorted descending.
    """
    m = n - 1 if m is None else m
    out, drawn = [], 0
    need = size
    for _ in range(max_rounds):
        batch = max(2 * need, 1024)
        ang = rng.uniform(0, theta, size=(batch, n))
        drawn += batch
        top = np.sort(ang, axis=-1)[:, n - m:].sum(axis=-1) if m > 0 else np.zeros(batch)
        keep = ang[top < theta - margin]
        out.append(keep[:need])
        need -= len(out[-1])
        if need <= 0:
            break
    else:
        raise RuntimeError("cone sampler starved")
    angles = np.sort(np.concatenate(out), axis=-1)[:, ::-1]
    return angles, size / drawn


# ---------------------------------------------------------------------------
# sine lemma


def _subset_matrix(k):
    masks = np.arange(1 << k)
    return ((masks[:, None] >> np.arange(k)) & 1).astype(float)


def sinelem_predicates(theta, angles):
    """(sum < theta, all subsets have sin(theta - sum_I) > 0, min |slack|)."""
    angles = np.asarray(angles, dtype=float)
    theta = np.asarray(theta, dtype=float)
    k = angles.shape[-1]
    sums = angles @ _subset_matrix(k).T
    sines = np.sin(theta[..., None] - sums)
    lhs = angles.sum(axis=-1) < theta
    rhs = np.all(sines > 0, axis=-1)
    slack = np.minimum(np.min(np.abs(sines), axis=-1), np.abs(theta - angles.sum(axis=-1)))
    return lhs, rhs, slack


def verify_sinelem(k, trials, seed):
    """Angle sum below theta iff every subset sine is positive."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    rng = _rng(seed)
    theta = rng.uniform(0, np.pi, trials)
    angles = rng.uniform(0, np.pi, (trials, k))
    # half the tuples are scaled so their sum lands near theta
    near = rng.random(trials) < 0.5
    if k > 0:
        w = rng.dirichlet(np.ones(k), trials) * (theta * rng.uniform(0.5, 1.5, trials))[:, None]
        ok = near & np.all((w > 0) & (w < np.pi), axis=-1)
        angles[ok] = w[ok]
    lhs, rhs, slack = sinelem_predicates(theta, angles)
    keep = slack > BORDER
    bad = keep & (lhs != rhs)
    return SuiteReport(
        f"sinelem_k{k}", int(keep.sum()), int(bad.sum()), float(slack[keep].min(initial=np.inf)), seed,
        details={"inside": int((lhs & keep).sum()), "discarded": int((~keep).sum())},
    )


# ---------------------------------------------------------------------------
# perturbation constants


@dataclass(frozen=True)
class PerturbationBudget:
    theta: float
    eps1: float
    n: int
    M: int
    eps4: float
    eps3: float
    eps2: float

    def __post_init__(self):
        c = 1 / np.tan(self.theta / self.M)
        if not (c > self.eps1 and self.M > 2 * self.n * self.theta / self.eps3):
            raise ValueError("M violates the budget constraints")


def _angle_drop(lam, eps1):
    return cc.arccot(lam) - cc.arccot(lam + eps1)


def perturbation_constants(theta, eps1, n):
    """Constants of the perturbation lemma for given theta, eps1 and n.

    ``eps4`` is the minimum of ``arccot(l) - arccot(l + eps1)`` over
    ``[cot(theta), cot(theta / (2 (1 + n^2)))]`` found by bounded golden-section
    search, compared against the endpoint values.
    """
    if not 0 < theta < np.pi or eps1 <= 0 or n < 2:
        raise ValueError("need theta in (0, pi), eps1 > 0, n >= 2")
    lo = 1 / np.tan(theta)
    hi = 1 / np.tan(theta / (2 * (1 + n**2)))
    if hi <= lo:
        eps4 = float(_angle_drop(lo, eps1))
    else:
        res = optimize.minimize_scalar(lambda x: _angle_drop(x, eps1), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        eps4 = float(min(res.fun, _angle_drop(lo, eps1), _angle_drop(hi, eps1)))
    eps3 = min(eps4, theta / 2)
    M = max(int(np.floor(2 * n * theta / eps3)) + 1, 2)
    while not 1 / np.tan(theta / M) > eps1:
        M += 1
    c = 1 / np.tan(theta / M)
    eps2 = min(eps1 / c, c / (c - eps1) - 1)
    return PerturbationBudget(theta, eps1, n, M, eps4, eps3, eps2)


def verify_perturb1(budget, trials, seed):
    """omega in Gamma_{chi0} and chi0 <= chi <= (1 + eps2) chi0 give omega + 2 eps1 chi in Gamma_chi."""
    rng = _rng(seed)
    n, theta = budget.n, budget.theta
    angles, rate = sample_cone_angles(rng, theta, n, trials)
    lam = cc.cot(angles)
    chi0 = cc.random_positive(rng, n, trials)
    L = np.linalg.cholesky(chi0)
    omega = _conjugate(L, _random_unitary(rng, n, (trials,)), lam)
    # chi = chi0 + L V diag(s) V^H L^H with s in [0, eps2]; a fifth of trials at each extreme
    s = rng.uniform(0, budget.eps2, (trials, n))
    mode = rng.random(trials)
    s[mode < 0.2] = 0.0
    s[mode > 0.8] = budget.eps2
    chi = chi0 + _conjugate(L, _random_unitary(rng, n, (trials,)), s)
    shifted = cc.batch_pair_eigenvalues(omega, chi) + 2 * budget.eps1
    slack = theta - cc.batch_top_angle_sum(shifted, n - 1)
    bad = slack < -cc.BORDERLINE
    return SuiteReport(
        f"perturb1_theta{theta:.4f}_eps{budget.eps1:g}_n{n}", trials, int(bad.sum()), float(slack.min()), seed,
        details={"acceptance": rate, "eps2": budget.eps2, "M": budget.M},
    )


# ---------------------------------------------------------------------------
# bound constants


@dataclass(frozen=True)
class BoundConstants:
    theta: float
    delta: float
    n: int
    C_a: float  # sup sqrt(1 + l^2) / (l - cot + 1) over l > cot
    C_top: float  # C_a^n / sin(theta): C (Omega + chi)^n >= G^n
    C_b: float  # inf sqrt(1 + l^2) / (l - cot) over l > cot
    eps_b: float  # P^k >= eps_b Omega^k on Gamma_{theta - delta}, k < n


def _sup_on_half_line(func, lo):
    """sup of func on (lo, inf) via the substitution l = lo + tan(s)."""
    g = lambda s: -func(lo + np.tan(s))
    res = optimize.minimize_scalar(g, bounds=(0.0, np.pi / 2 - 1e-9), method="bounded", options={"xatol": 1e-12})
    grid = lo + np.tan(np.linspace(1e-9, np.pi / 2 - 1e-9, 2001))
    return float(max(-res.fun, np.max(func(grid))))


def bound_constants(theta, delta, n):
    if not 0 < delta < theta < np.pi:
        raise ValueError("need 0 < delta < theta < pi")
    cot = 1 / np.tan(theta)
    C_a = _sup_on_half_line(lambda l: np.sqrt(1 + l**2) / (l - cot + 1), cot)
    C_a = max(C_a, 1 / np.sin(theta), 1.0)  # the values at the endpoint l = cot and at infinity
    C_b = -_sup_on_half_line(lambda l: -np.sqrt(1 + l**2) / (l - cot), cot)
    C_b = min(C_b, 1.0)  # limit at infinity
    ratio = min(np.sin(delta), np.sin(theta)) / np.sin(theta)
    eps_b = min(C_b**k for k in range(1, n)) * ratio if n > 1 else np.inf
    return BoundConstants(theta, delta, n, C_a, C_a**n / np.sin(theta), C_b, eps_b)


def verify_bound(constants, trials, seed):
    """Check both parts of the bound lemma on sampled spectra."""
    rng = _rng(seed)
    theta, n, cot = constants.theta, constants.n, 1 / np.tan(constants.theta)
    angles, _ = sample_cone_angles(rng, theta, n, trials)
    lam = cc.cot(angles)
    g_top = cc.batch_g_coefficients(lam, theta, n)[..., 0]
    shifted = factorial(n) * np.prod(lam - cot + 1, axis=-1)
    slack_a = (constants.C_top * shifted - g_top) / np.maximum(1.0, np.abs(g_top))
    worst = float(slack_a.min())
    bad = int((slack_a < -1e-12).sum())
    if n > 1:
        angles_b, _ = sample_cone_angles(rng, theta - constants.delta, n, trials)
        lam_b = cc.cot(angles_b)
        mus = lam_b - cot
        for k in range(1, n):
            p = cc.batch_p_coefficients(mus, theta, k)
            powk = cc.batch_power_coefficients(mus, k)
            slack_b = (p - constants.eps_b * powk) / np.maximum(1.0, np.abs(p))
            worst = min(worst, float(slack_b.min()))
            bad += int((slack_b < -1e-12).sum())
    return SuiteReport(f"bound_theta{theta:.4f}_n{n}", trials, bad, worst, seed,
                       details={"C_a": constants.C_a, "eps_b": constants.eps_b})


# ---------------------------------------------------------------------------
# constraint surface


@dataclass(frozen=True)
class ConstraintSample:
    lambdas: tuple
    z: float
    theta: float

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        csc2 = 1 / np.sin(self.theta) ** 2
        lhs = np.prod(lam)
        rhs = csc2 * (lam.sum() + 2 * self.z)
        if abs(lhs - rhs) > 1e-10 * max(abs(lhs), abs(rhs), 1.0):
            raise ValueError("lambdas are not on the constraint surface")
        if np.any(lam <= 0) or any(lam[i] * lam[j] <= csc2 for i, j in combinations(range(3), 2)):
            raise ValueError("lambdas violate the cone side conditions")

    @property
    def S(self):
        return float(sum(self.lambdas) + 2 * self.z)


def solve_lambda1(lam2, lam3, z, theta):
    csc2 = 1 / np.sin(theta) ** 2
    return csc2 * (lam2 + lam3 + 2 * z) / (lam2 * lam3 - csc2)


def g_value(lam, z):
    lam = np.asarray(lam, dtype=float)
    pairs = lam[..., 0] * lam[..., 1] + lam[..., 0] * lam[..., 2] + lam[..., 1] * lam[..., 2]
    return pairs + 2 * z * lam.sum(axis=-1) + 3 * z**2


def sample_constraint(rng, theta, size, z=None, z_max=None, corner=0.25):
    """Vectorized samples of the constraint surface.

    ``(lam2, lam3)`` are drawn with ``lam2`` log-uniform around ``csc(theta)``
    and ``lam2 lam3 / csc^2 - 1`` log-uniform; ``z`` is uniform on
    ``(-csc(theta), z_max]`` unless given. A ``corner`` fraction is drawn near
    the degenerate point ``lam_i = csc``, ``z = -csc`` where g vanishes. Rows
    violating a side condition are dropped. Returns ``(lambdas, z)``.
    """
    csc = 1 / np.sin(theta)
    z_max = 10 * csc if z_max is None else z_max
    near = rng.random(size) < corner
    lam2 = csc * 10 ** np.where(near, rng.uniform(-0.05, 0.05, size), rng.uniform(-2, 2, size))
    gap = 10 ** np.where(near, rng.uniform(-8, -1, size), rng.uniform(-4, 3, size))
    lam3 = csc**2 * (1 + gap) / lam2
    if z is None:
        z = -csc + (min(z_max, 1e6 * csc) + csc) * (1 - rng.random(size))
        z = np.where(near, -csc + csc * 10 ** rng.uniform(-8, 0, size), z)
    z = np.broadcast_to(np.asarray(z, dtype=float), (size,)).copy()
    lam1 = solve_lambda1(lam2, lam3, z, theta)
    lam = np.stack([lam1, lam2, lam3], axis=-1)
    ok = np.all(lam > 0, axis=-1)
    for i, j in combinations(range(3), 2):
        ok &= lam[:, i] * lam[:, j] > csc**2
    return lam[ok], z[ok]


def sample_constraint_and_verify_g(theta, samples, seed):
    """g > 0 on the constraint surface; reports inf g."""
    rng = _rng(seed)
    lam, z = sample_constraint(rng, theta, samples)
    g = g_value(lam, z)
    return SuiteReport(f"discpos_theta{theta:.4f}", len(g), int((g <= 0).sum()), float(g.min(initial=np.inf)), seed,
                       details={"kept": len(g) / samples, "theta": float(theta)})


# ---------------------------------------------------------------------------
# the Laplacian-estimate quadratic


class DegenerateQuadratic(ValueError):
    pass


def paper_coefficients(lam, z, t, fx):
    """(a, b, c, d, e) in the tabulated form, with e listed equal to d."""
    l1, l2, l3 = lam
    S = l1 + l2 + l3 + 2 * z
    a = 2 * (l2 + l3 + 2 * z) * S
    b = 2 * (l3 + z) * S
    c = 2 * (l1 + l3 + 2 * z) * S
    d = -4 * t * fx * S
    e = -4 * t * fx * S
    return a, b, c, d, e


def _full_quadratic(lam, z, t, fx, v):
    """4 det(A) times the x-part of the highlighted terms, before elimination."""
    S = sum(lam) + 2 * z
    total = 0
    for mu in range(3):
        for al in range(3):
            total += v[mu] * v[al] * (S - lam[mu] - lam[al])
        total += v[mu] ** 2 * S
    return total - 4 * t * fx * sum(v)


def eliminated_quadratic(lam, z, t, fx, v1, v2):
    """The quadratic in (v1, v2) after eliminating v3 with the linear constraint,
    scaled by ``lam1 + lam2 + 2 z``."""
    S = sum(lam) + 2 * z
    w = [S - l for l in lam]  # sum_{k != mu} lam_k + 2 z
    v3 = (2 * t * fx - v1 * w[0] - v2 * w[1]) / w[2]
    return w[2] * _full_quadratic(lam, z, t, fx, (v1, v2, v3))


def eliminated_coefficients(lam, z, t, fx):
    """Coefficients (a, b, c, d, e, const) of ``a v1^2 + 2 b v1 v2 + c v2^2 + d v1 + e v2 + const``.

    Obtained by evaluating :func:`eliminated_quadratic` at six points, which is
    exact for rational input.
    """
    one = Fraction(1) if isinstance(lam[0], Fraction) else 1.0
    q = lambda x, y: eliminated_quadratic(lam, z, t, fx, x * one, y * one)
    q00 = q(0, 0)
    qp0, qm0, q0p, q0m, q11 = q(1, 0), q(-1, 0), q(0, 1), q(0, -1), q(1, 1)
    a = (qp0 + qm0) / 2 - q00
    c = (q0p + q0m) / 2 - q00
    d = (qp0 - qm0) / 2
    e = (q0p - q0m) / 2
    b = (q11 - a - c - d - e - q00) / 2
    return a, b, c, d, e, q00


def closed_minimum(a, b, c, d, e, Delta):
    num = a * c**2 * d**2 - a * b**2 * e**2 + a**2 * c * e**2 - b**2 * c * d**2 + 2 * b**3 * d * e - 2 * a * b * c * d * e
    num = num + 2 * Delta * (2 * b * d * e - c * d**2 - a * e**2)
    return num / (4 * Delta**2)


def direct_minimum(a, b, c, d, e):
    """Minimum of ``a v1^2 + 2 b v1 v2 + c v2^2 + d v1 + e v2`` from its stationarity system."""
    v = np.linalg.solve(np.array([[2 * a, 2 * b], [2 * b, 2 * c]], dtype=float), -np.array([d, e], dtype=float))
    return float(a * v[0] ** 2 + 2 * b * v[0] * v[1] + c * v[1] ** 2 + d * v[0] + e * v[1])


def _exact_closed(a, b, c, d, e, Delta):
    # the numerator cancels heavily; evaluate it on the exact binary values
    return float(closed_minimum(*(Fraction(float(x)) for x in (a, b, c, d, e, Delta))))


NORMALIZATIONS = {"4 S^2 g": 4.0, "S^2 g": 1.0}


@dataclass
class QuadraticAudit:
    a: float
    b: float
    c: float
    d: float
    e: float
    dprime: float
    eprime: float
    Delta: float
    g: float
    min_closed: float
    min_direct: float
    normalization: str | None
    derived: tuple  # coefficients from the elimination oracle
    deviations: dict  # |paper - derived| per coefficient
    min_closed_y: float = np.nan
    min_direct_y: float = np.nan

    @property
    def matches(self):
        return self.normalization is not None


def quadratic_min_audit(sample, fx, fy, t, rtol=1e-8):
    lam = tuple(float(x) for x in sample.lambdas)
    z = float(sample.z)
    S = sum(lam) + 2 * z
    g = float(g_value(lam, z))
    a, b, c, d, e = paper_coefficients(lam, z, t, fx)
    _, _, _, dp, ep = paper_coefficients(lam, z, t, fy)
    D = a * c - b * b
    scale = max(a * c, b * b, 1e-300)
    if D < 1e-8 * scale:
        raise DegenerateQuadratic(f"a c - b^2 = {D:.3e} is too small relative to {scale:.3e}")
    min_direct = direct_minimum(a, b, c, d, e)
    min_direct_y = direct_minimum(a, b, c, dp, ep)
    chosen, closed, closed_y = None, np.nan, np.nan
    for name, factor in NORMALIZATIONS.items():
        Delta = factor * S * S * g
        val = _exact_closed(a, b, c, d, e, Delta)
        if abs(val - min_direct) <= rtol * (1 + abs(min_direct)):
            chosen, closed = name, val
            closed_y = _exact_closed(a, b, c, dp, ep, Delta)
            break
    Delta = NORMALIZATIONS.get(chosen, 4.0) * S * S * g
    if chosen is None:
        closed = _exact_closed(a, b, c, d, e, Delta)
    derived = eliminated_coefficients(lam, z, t, fx)
    names = ("a", "b", "c", "d", "e")
    deviations = {k: abs(p - q) for k, p, q in zip(names, (a, b, c, d, e), derived)}
    deviations["const"] = abs(derived[5])
    return QuadraticAudit(a, b, c, d, e, dp, ep, Delta, g, closed, min_direct, chosen, derived, deviations,
                          closed_y, min_direct_y)


def verify_quadratic(theta, trials, seed, rtol=1e-8):
    """Closed minimum against the direct one on random constraint samples."""
    rng = _rng(seed)
    lam, z = sample_constraint(rng, theta, 4 * trials, z_max=2 / np.sin(theta))
    lam, z = lam[:trials], z[:trials]
    fx = rng.normal(size=len(z))
    fy = rng.normal(size=len(z))
    t = rng.random(len(z))
    worst, bad, rejected, dev = 0.0, 0, 0, 0.0
    names = {}
    for i in range(len(z)):
        sample = ConstraintSample(tuple(lam[i]), float(z[i]), theta)
        try:
            audit = quadratic_min_audit(sample, fx[i], fy[i], t[i], rtol)
        except DegenerateQuadratic:
            rejected += 1
            continue
        names[audit.normalization] = names.get(audit.normalization, 0) + 1
        err = abs(audit.min_closed - audit.min_direct) / (1 + abs(audit.min_direct))
        worst = max(worst, err)
        bad += not audit.matches
        size = max(abs(audit.a), abs(audit.c), abs(audit.d), 1.0)
        dev = max(dev, max(audit.deviations.values()) / size)
    return SuiteReport(f"quadratic_theta{theta:.4f}", len(z) - rejected, bad, -worst, seed,
                       details={"normalizations": names, "rejected": rejected, "max_coefficient_deviation": dev})


def numerator(a, b, c, d, e, Delta):
    return closed_minimum(a, b, c, d, e, Delta) * 4 * Delta**2


def numbound_profile(theta, samples, seed, lam_min=1e3, f_bound=1.0):
    """Empirical lower bound of num / lam1^8 for lam1 >= lam_min."""
    rng = _rng(seed)
    csc = 1 / np.sin(theta)
    lam2 = csc * 10 ** rng.uniform(0, 1, samples)
    # lam2 lam3 slightly above csc^2 pushes lam1 up
    lam3 = csc**2 * (1 + 10 ** rng.uniform(-7, -2, samples)) / lam2
    lam3 = np.maximum(lam3, lam2 * 0 + csc * 1.0001)
    lam2 = np.maximum(lam2, csc**2 * (1 + 1e-7) / lam3)
    z = rng.uniform(-0.5 * csc, 2 * csc, samples)
    lam1 = solve_lambda1(lam2, lam3, z, theta)
    keep = lam1 >= lam_min
    ratios = []
    for l1, l2, l3, zz in zip(lam1[keep], lam2[keep], lam3[keep], z[keep]):
        fx = rng.uniform(-f_bound, f_bound)
        t = rng.random()
        a, b, c, d, e = paper_coefficients((l1, l2, l3), zz, t, fx)
        S = l1 + l2 + l3 + 2 * zz
        Delta = 4 * S * S * g_value((l1, l2, l3), zz)
        ratios.append(numerator(a, b, c, d, e, Delta) / l1**8)
    ratios = np.array(ratios)
    return SuiteReport(f"numbound_theta{theta:.4f}", len(ratios), 0, float(ratios.min(initial=np.inf)), seed,
                       asserted=False, details={"lam1_max": float(lam1[keep].max(initial=0))})


# ---------------------------------------------------------------------------
# sum bound


def verify_sumbound(theta, eps, delta, samples, seed=0):
    """lam_i + lam_j + 2 z_t > 2 delta on the constraint surface with admissible z_t."""
    if not 0 < delta < eps:
        raise ValueError("need 0 < delta < eps")
    rng = _rng(seed)
    cot = 1 / np.tan(theta)
    t = rng.random(samples)
    f = -eps + delta + (1 - rng.random(samples)) * rng.choice([1e-6, 1e-2, 1.0, 10.0], samples)
    d_t = rng.uniform(0, 1, samples) * rng.choice([0.0, 1.0], samples)
    z = t * f + d_t + cot
    lam, zz = sample_constraint(rng, theta, samples, z=z, z_max=np.inf)
    pairs = np.stack([lam[:, i] + lam[:, j] for i, j in combinations(range(3), 2)], axis=-1) + 2 * zz[:, None]
    amgm = np.stack([lam[:, i] + lam[:, j] - 2 * np.sqrt(lam[:, i] * lam[:, j])
                     for i, j in combinations(range(3), 2)], axis=-1)
    slack = pairs.min(axis=-1) - 2 * delta
    return SuiteReport(f"sumbound_theta{theta:.4f}", len(zz), int((slack <= 0).sum() + (amgm < -1e-9).sum()),
                       float(slack.min(initial=np.inf)), seed)


# ---------------------------------------------------------------------------
# degenerate-to-nondegenerate propagation


def _ratio_slack(mus, theta, m, target):
    """min over k <= m and |K| = k of P^k / Omega^k - target (per leading batch index)."""
    worst = None
    for k in range(1, m + 1):
        p = cc.batch_p_coefficients(mus, theta, k)
        powk = cc.batch_power_coefficients(mus, k)
        r = (p / powk - target[..., None]).min(axis=-1)
        worst = r if worst is None else np.minimum(worst, r)
    return worst


def cone_ratio(Omega, chi, theta, m):
    """Largest eps with P^k(Omega, chi) >= eps Omega^k for k <= m (NaN if Omega is not positive)."""
    mus = cc.batch_pair_eigenvalues(Omega, chi)
    out = _ratio_slack(mus, theta, m, np.zeros(mus.shape[:-1]))
    return np.where(mus.min(axis=-1) > 0, out, np.nan)


def degentonon_holds(Omega, chi, alpha, theta, m, A, a, N, eps, s):
    """Boolean ``(..., S)``: the propagated inequality at each ``s`` (shape ``(..., S)``)."""
    s = np.asarray(s, dtype=float)
    Om = Omega[..., None, :, :] + (A * s)[..., None, None] * alpha[..., None, :, :]
    ch = chi[..., None, :, :] + (s**N)[..., None, None] * alpha[..., None, :, :]
    mus = cc.batch_pair_eigenvalues(Om, ch)
    target = a * np.broadcast_to(np.asarray(eps, dtype=float)[..., None], s.shape)
    return (mus.min(axis=-1) > 0) & (_ratio_slack(mus, theta, m, target) >= 0)


def degentonon_s0(Omega, chi, alpha, theta, m, A, a, N, eps, s_grid):
    """Largest grid value ``s0`` with the inequality holding at every grid point ``s <= s0``.

    Returns 0 when it fails at the smallest grid point.
    """
    s = np.sort(np.asarray(s_grid, dtype=float))
    ok = degentonon_holds(Omega, chi, alpha, theta, m, A, a, N, eps, np.broadcast_to(s, Omega.shape[:-2] + s.shape))
    first = np.where(ok, len(s), np.arange(len(s))).min(axis=-1)
    return np.where(first > 0, s[np.clip(first - 1, 0, None)], 0.0)


def verify_degentonon(theta, m, A, a, N, trials, seed, n=3, s_grid=None, chunk=500):
    """Sampled check that adding s alpha keeps P^k >= a eps Omega^k for small s.

    For each triple the scan reports ``s0``; the inequality is then re-checked
    at 100 log-spaced values in ``[1e-6 s0, s0]``.
    """
    if not (0 < a < 1 and A > 0 and N > n and 1 <= m <= n):
        raise ValueError("need 0 < a < 1, A > 0, N > n, 1 <= m <= n")
    rng = _rng(seed)
    s_grid = np.logspace(1, -8, 91) if s_grid is None else np.asarray(s_grid)
    angles, rate = sample_cone_angles(rng, theta, n, trials, m=m, margin=1e-3)
    mus = cc.cot(angles) - cc.cot(theta)
    chi = cc.random_positive(rng, n, trials)
    L = np.linalg.cholesky(chi)
    Omega = _conjugate(L, _random_unitary(rng, n, (trials,)), mus)
    eps = np.minimum(cone_ratio(Omega, chi, theta, m), 0.99)
    alpha = cc.random_positive(rng, n, trials)
    frac = np.logspace(0, -6, 100)
    s0 = np.empty(trials)
    recheck = np.zeros(trials, dtype=bool)
    for lo in range(0, trials, chunk):
        sl = slice(lo, lo + chunk)
        s0[sl] = degentonon_s0(Omega[sl], chi[sl], alpha[sl], theta, m, A, a, N, eps[sl], s_grid)
        ok = degentonon_holds(Omega[sl], chi[sl], alpha[sl], theta, m, A, a, N, eps[sl], s0[sl, None] * frac)
        recheck[sl] = ok.all(axis=-1)
    good = (s0 > 0) & recheck
    return SuiteReport(
        f"degentonon_theta{theta:.4f}_m{m}", trials, int((~good).sum()), float(s0.min(initial=np.inf)), seed,
        details={"median_s0": float(np.median(s0)), "acceptance": rate},
    )


# ---------------------------------------------------------------------------
# phase lifting


def phase_lift_threshold(theta, Theta, n):
    if n == 1:
        return 1 / np.tan(theta) - 1 / np.tan(Theta)
    return np.sin((Theta - theta) / 2) / np.sin(theta)


def verify_phase_lift(theta, Theta, trials, seed, n=2):
    """On Gamma_{chi, theta}, f > -eps forces the full angle sum below Theta."""
    if not 0 < theta < Theta < np.pi:
        raise ValueError("need 0 < theta < Theta < pi")
    rng = _rng(seed)
    eps = phase_lift_threshold(theta, Theta, n)
    angles, _ = sample_cone_angles(rng, theta, n, trials)
    lam = cc.cot(angles)
    f = cc.batch_dhym_residual(lam, theta)
    total = angles.sum(axis=-1)
    lifted = f > -eps
    nonneg = f >= 0
    bad = int(np.sum(lifted & (total >= Theta)) + np.sum(nonneg & (total > theta + 1e-9)))
    margin = float(np.min(Theta - total[lifted], initial=np.inf))
    return SuiteReport(f"phaselift_theta{theta:.4f}_n{n}", int(lifted.sum()), bad, margin, seed,
                       details={"nonnegative": int(nonneg.sum()), "threshold": eps})
