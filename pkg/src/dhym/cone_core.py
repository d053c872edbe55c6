"""Pointwise algebra of Hermitian pairs and the supercritical cone conditions.

For a Hermitian ``omega`` and a positive-definite ``chi`` the relative
eigenvalues ``lambda_i`` solve ``det(omega - lambda chi) = 0`` and the
Lagrangian angles are ``theta_i = arccot(lambda_i)`` in ``(0, pi)``. In the
simultaneous eigenbasis the (k,k)-form ``G^k_theta(omega, chi)`` has one
coefficient per subset ``K`` of size ``k``::

    k! * prod_{i in K} sqrt(1 + lambda_i^2) * sin(theta - sum_{i in K} theta_i) / sin(theta)

and ``P^k_theta(Omega, chi) = G^k_theta(Omega + cot(theta) chi, chi)``.

Functions whose names start with ``batch_`` act on stacked arrays of
eigenvalues (shape ``(..., n)``) and are what the Monte Carlo suites use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb, factorial

import numpy as np

from . import forms

BORDERLINE = 1e-9
HERMITIAN_TOL = 1e-12


class ComparisonFormError(ValueError):
    """Raised when the comparison matrix ``chi`` is not positive definite."""


def arccot(x):
    """arccot with range (0, pi), monotone decreasing on the whole line."""
    return np.pi / 2 - np.arctan(x)


def cot(x):
    return np.cos(x) / np.sin(x)


@dataclass(frozen=True)
class PhaseSpec:
    theta: float
    Theta: float | None = None

    def __post_init__(self):
        if not 0 < self.theta < np.pi:
            raise ValueError(f"theta must lie in (0, pi), got {self.theta}")
        if self.Theta is not None and not self.theta < self.Theta < np.pi:
            raise ValueError(f"Theta must lie in (theta, pi), got {self.Theta}")

    @property
    def cot(self):
        return cot(self.theta)

    @property
    def csc2(self):
        return 1.0 / np.sin(self.theta) ** 2


@dataclass(frozen=True)
class HermitianPair:
    omega: np.ndarray
    chi: np.ndarray

    def __post_init__(self):
        omega = np.atleast_2d(np.asarray(self.omega, dtype=complex))
        chi = np.atleast_2d(np.asarray(self.chi, dtype=complex))
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "chi", chi)
        if omega.shape != chi.shape or omega.shape[0] != omega.shape[1]:
            raise ValueError("omega and chi must be square matrices of equal size")
        if not 1 <= omega.shape[0] <= 3:
            raise ValueError("complex dimension must be 1, 2 or 3")
        for name, m in (("omega", omega), ("chi", chi)):
            if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * max(1.0, np.max(np.abs(m))):
                raise ValueError(f"{name} is not Hermitian")
        if np.linalg.eigvalsh(chi)[0] <= 0:
            raise ComparisonFormError("chi must be positive definite")

    @property
    def n(self):
        return self.omega.shape[0]

    def shifted(self, shift):
        """The pair ``(omega + shift * chi, chi)``."""
        return HermitianPair(self.omega + shift * self.chi, self.chi)


@dataclass(frozen=True)
class EigenSpectrum:
    lambdas: np.ndarray  # descending
    angles: np.ndarray  # ascending

    @classmethod
    def from_lambdas(cls, lambdas):
        lam = np.sort(np.asarray(lambdas, dtype=float))[::-1]
        return cls(lam, arccot(lam))

    @property
    def n(self):
        return self.lambdas.size


@dataclass
class ConeReport:
    """Cone membership for one pair.

    ``member_gamma_m[m]`` is True, False, or None when any slack entering the
    decision is within ``BORDERLINE`` of zero.
    """

    m: int
    member_gamma_m: dict
    member_gamma_theta_Theta: bool | None
    subset_coefficients: dict
    margins: dict = field(default_factory=dict)

    @property
    def member(self):
        return self.member_gamma_m[self.m]

    @property
    def indeterminate(self):
        return self.member is None


# ---------------------------------------------------------------------------
# batched primitives


def batch_pair_eigenvalues(omega, chi):
    """Relative eigenvalues of stacked pairs, sorted descending.

    Reduces with the Cholesky factor ``chi = L L^H`` to the Hermitian matrix
    ``L^{-1} omega L^{-H}``.
    """
    omega = np.asarray(omega, dtype=complex)
    chi = np.asarray(chi, dtype=complex)
    try:
        chol = np.linalg.cholesky(chi)
    except np.linalg.LinAlgError as exc:
        raise ComparisonFormError("chi must be positive definite") from exc
    linv = np.linalg.inv(chol)
    reduced = linv @ omega @ np.conj(np.swapaxes(linv, -1, -2))
    reduced = 0.5 * (reduced + np.conj(np.swapaxes(reduced, -1, -2)))
    return np.linalg.eigvalsh(reduced)[..., ::-1]


def subsets(n, k):
    return list(combinations(range(n), k))


def batch_top_angle_sum(lambdas, m):
    angles = np.sort(arccot(np.asarray(lambdas)), axis=-1)
    return angles[..., -m:].sum(axis=-1)


def batch_normalized_coefficients(lambdas, theta, k):
    """``sin(theta - sum_K theta_i) / sin(theta)`` for each subset of size k."""
    angles = arccot(np.asarray(lambdas, dtype=float))
    n = angles.shape[-1]
    cols = [np.sin(theta - angles[..., list(K)].sum(axis=-1)) for K in subsets(n, k)]
    return np.stack(cols, axis=-1) / np.sin(theta)


def batch_g_coefficients(lambdas, theta, k):
    lam = np.asarray(lambdas, dtype=float)
    n = lam.shape[-1]
    radii = np.sqrt(1.0 + lam**2)
    weights = np.stack([radii[..., list(K)].prod(axis=-1) for K in subsets(n, k)], axis=-1)
    return factorial(k) * weights * batch_normalized_coefficients(lam, theta, k)


def batch_p_coefficients(mus, theta, k):
    """P^k coefficients from eigenvalues ``mu`` of ``Omega`` relative to ``chi``."""
    return batch_g_coefficients(np.asarray(mus) + cot(theta), theta, k)


def batch_power_coefficients(mus, k):
    """Diagonal coefficients of ``Omega^k``: ``k! prod_{i in K} mu_i``."""
    mus = np.asarray(mus, dtype=float)
    n = mus.shape[-1]
    return factorial(k) * np.stack([mus[..., list(K)].prod(axis=-1) for K in subsets(n, k)], axis=-1)


def batch_dhym_residual(lambdas, theta):
    lam = np.asarray(lambdas, dtype=float)
    angles = arccot(lam)
    return np.prod(np.sqrt(1 + lam**2), axis=-1) * np.sin(theta - angles.sum(axis=-1)) / np.sin(theta)


def batch_cone_slacks(lambdas, theta, m):
    """Angle slack ``theta - top_m`` and worst normalized coefficient over k <= m."""
    angle_slack = theta - batch_top_angle_sum(lambdas, m)
    coeff_slack = np.min(
        np.concatenate([batch_normalized_coefficients(lambdas, theta, k) for k in range(1, m + 1)], axis=-1),
        axis=-1,
    )
    return angle_slack, coeff_slack


# ---------------------------------------------------------------------------
# object API


def generalized_spectrum(pair):
    lam = batch_pair_eigenvalues(pair.omega, pair.chi)
    return EigenSpectrum.from_lambdas(lam)


def angle_sum_top_m(spec, m):
    """Largest sum of ``m`` Lagrangian angles."""
    if not 1 <= m <= spec.n:
        raise ValueError(f"m must lie in 1..{spec.n}, got {m}")
    return float(np.sort(spec.angles)[-m:].sum())


def _check_k(n, k, lower=1):
    if not lower <= k <= n:
        raise ValueError(f"k must lie in {lower}..{n}, got {k}")


def g_form_coefficients(pair, spec, k):
    """Subset coefficients of ``G^k_theta(omega, chi)``, subsets in lexicographic
    order of the descending eigenvalue ordering."""
    _check_k(pair.n, k)
    lam = generalized_spectrum(pair).lambdas
    return batch_g_coefficients(lam, spec.theta, k)


def p_form_coefficients(Omega, spec, k):
    """Subset coefficients of ``P^k_theta(Omega, chi)``; ``Omega.omega`` holds Omega."""
    _check_k(Omega.n, k)
    return g_form_coefficients(Omega.shifted(spec.cot), spec, k)


def dhym_scalar_residual(pair, spec):
    """Pointwise ratio ``G^n_theta(omega, chi) / chi^n``."""
    lam = generalized_spectrum(pair).lambdas
    return float(batch_dhym_residual(lam, spec.theta))


def dhym_residual_det(pair, spec):
    """Same ratio computed from ``det(omega + i chi) / det(chi)``."""
    ratio = np.linalg.det(pair.omega + 1j * pair.chi) / np.linalg.det(pair.chi)
    return float(ratio.real - spec.cot * ratio.imag)


def _tri(slack):
    if abs(slack) <= BORDERLINE:
        return None
    return bool(slack > 0)


def cone_membership(pair, spec, m=None):
    """Membership of ``omega`` in the cones Gamma^m and Gamma_{theta, Theta}.

    For each ``m`` the angle-sum predicate and the subset-coefficient predicate
    are both evaluated; a disagreement on non-borderline input raises, since
    the two are equivalent.
    """
    n = pair.n
    m = n if m is None else m
    _check_k(n, m)
    lam = generalized_spectrum(pair).lambdas
    theta = spec.theta
    coefficients = {k: batch_g_coefficients(lam, theta, k) for k in range(1, n + 1)}
    members = {}
    margins = {}
    for mm in range(1, n + 1):
        angle_slack, coeff_slack = batch_cone_slacks(lam, theta, mm)
        by_angle, by_coeff = _tri(float(angle_slack)), _tri(float(coeff_slack))
        if by_angle is None or by_coeff is None:
            members[mm] = None
        elif by_angle != by_coeff:
            raise AssertionError(f"cone predicates disagree for m={mm}: {lam}")
        else:
            members[mm] = by_angle
        margins[f"angle_{mm}"] = float(angle_slack)
        margins[f"coeff_{mm}"] = float(coeff_slack)

    in_ttheta = None
    if spec.Theta is not None:
        full = spec.Theta - angle_sum_top_m(EigenSpectrum.from_lambdas(lam), n)
        sub = theta - angle_sum_top_m(EigenSpectrum.from_lambdas(lam), n - 1) if n > 1 else np.inf
        margins["Theta"] = float(full)
        if abs(full) <= BORDERLINE or abs(sub) <= BORDERLINE:
            in_ttheta = None
        else:
            in_ttheta = bool(full > 0 and sub > 0)
    return ConeReport(m, members, in_ttheta, coefficients, margins)


def expand_binomial(alpha, delta, spec, k):
    """Both sides of ``G^k(a + d, b) = sum_r C(k, r) G^r(a, b) d^{k-r}``.

    ``alpha`` is a pair ``(a, b)``; ``delta`` a Hermitian matrix. Sides are
    returned as full coefficient vectors of (k,k)-forms, so ``delta`` need not
    commute with the pair.
    """
    a = forms.Form.from_hermitian(alpha.omega)
    b = forms.Form.from_hermitian(alpha.chi)
    d = forms.Form.from_hermitian(delta)
    lhs = forms.g_polynomial(a + d, b, spec.theta, k)
    rhs = forms.Form(alpha.n)
    d_pows = [forms.Form.one(alpha.n)]
    for _ in range(k):
        d_pows.append(d_pows[-1].wedge(d))
    for r in range(k + 1):
        rhs = rhs + forms.g_polynomial(a, b, spec.theta, r).wedge(d_pows[k - r]) * comb(k, r)
    return lhs.coeffs, rhs.coeffs


def expand_binomial_p(alpha, delta, spec, k):
    """The P-polynomial version of ``expand_binomial``."""
    a = forms.Form.from_hermitian(alpha.omega)
    b = forms.Form.from_hermitian(alpha.chi)
    d = forms.Form.from_hermitian(delta)
    lhs = forms.p_polynomial(a + d, b, spec.theta, k)
    rhs = forms.Form(alpha.n)
    d_pows = [forms.Form.one(alpha.n)]
    for _ in range(k):
        d_pows.append(d_pows[-1].wedge(d))
    for r in range(k + 1):
        rhs = rhs + forms.p_polynomial(a, b, spec.theta, r).wedge(d_pows[k - r]) * comb(k, r)
    return lhs.coeffs, rhs.coeffs


def diagonalize(pair):
    """Simultaneous eigenbasis: returns the pair ``(diag(lambda), I)``."""
    lam = generalized_spectrum(pair).lambdas
    return HermitianPair(np.diag(lam), np.eye(pair.n))


def _batch_shape(size):
    if size is None:
        return ()
    return (size,) if np.isscalar(size) else tuple(size)


def random_hermitian(rng, n, size=None, scale=1.0):
    shape = _batch_shape(size) + (n, n)
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return scale * 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def random_positive(rng, n, size=None, spread=1.0):
    """Random positive-definite matrices with eigenvalues in ``[e^-spread, e^spread]``."""
    shape = _batch_shape(size)
    g = rng.normal(size=shape + (n, n)) + 1j * rng.normal(size=shape + (n, n))
    q, _ = np.linalg.qr(g)
    eig = np.exp(rng.uniform(-spread, spread, size=shape + (n,)))
    return (q * eig[..., None, :]) @ np.conj(np.swapaxes(q, -1, -2))
