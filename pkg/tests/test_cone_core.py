from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dhym import cone_core as cc
from dhym import forms
from dhym.cone_core import HermitianPair, PhaseSpec


def random_pair(rng, n, scale=2.0):
    return HermitianPair(cc.random_hermitian(rng, n, scale=scale), cc.random_positive(rng, n))


def det_roots(pair):
    """Brute-force oracle: roots of det(omega - lambda chi) as a polynomial."""
    n = pair.n
    nodes = np.arange(n + 1, dtype=float)
    values = [np.linalg.det(pair.omega - x * pair.chi).real for x in nodes]
    coeffs = np.polyfit(nodes, values, n)
    return np.sort(np.roots(coeffs).real)[::-1]


# ---------------------------------------------------------------- spectrum


@pytest.mark.parametrize("n", [1, 2, 3])
def test_identity_pair(n):
    chi = cc.random_positive(np.random.default_rng(n), n)
    spec = cc.generalized_spectrum(HermitianPair(chi, chi))
    np.testing.assert_allclose(spec.lambdas, 1.0, rtol=1e-12)
    np.testing.assert_allclose(spec.angles, np.pi / 4, rtol=1e-12)


def test_diagonal_pair_sorted_descending():
    spec = cc.generalized_spectrum(HermitianPair(np.diag([2.0, 3.0]), np.eye(2)))
    np.testing.assert_array_equal(spec.lambdas, [3.0, 2.0])
    assert spec.angles[0] < spec.angles[1]


@pytest.mark.parametrize("seed", range(20))
def test_spectrum_matches_polynomial_roots(seed):
    rng = np.random.default_rng(seed)
    pair = random_pair(rng, 3)
    lam = cc.generalized_spectrum(pair).lambdas
    np.testing.assert_allclose(lam, det_roots(pair), rtol=1e-10, atol=1e-10)


def test_non_positive_chi_rejected():
    with pytest.raises(cc.ComparisonFormError):
        HermitianPair(np.eye(2), np.diag([1.0, -1.0]))
    with pytest.raises(cc.ComparisonFormError):
        cc.batch_pair_eigenvalues(np.eye(2), np.diag([1.0, 0.0]))


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        HermitianPair(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))


def test_arccot_range_and_monotonicity():
    x = np.linspace(-1e6, 1e6, 10001)
    y = cc.arccot(x)
    assert np.all((y > 0) & (y < np.pi))
    assert np.all(np.diff(y) < 0)
    assert cc.arccot(0.0) == pytest.approx(np.pi / 2)


# ------------------------------------------------------------ angle sums


def test_angle_sum_examples():
    spec = cc.EigenSpectrum.from_lambdas([1.0, 1.0, 1.0])
    assert cc.angle_sum_top_m(spec, 3) == pytest.approx(3 * np.pi / 4)
    spec = cc.EigenSpectrum.from_lambdas([0.0, 1.0, 1.0])
    assert cc.angle_sum_top_m(spec, 2) == pytest.approx(np.pi / 2 + np.pi / 4)
    with pytest.raises(ValueError):
        cc.angle_sum_top_m(spec, 4)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=3), st.integers(1, 3))
def test_angle_sum_is_max_over_subsets(lams, m):
    spec = cc.EigenSpectrum.from_lambdas(lams)
    m = min(m, spec.n)
    brute = max(sum(cc.arccot(spec.lambdas[list(I)])) for I in combinations(range(spec.n), m))
    assert cc.angle_sum_top_m(spec, m) == pytest.approx(brute, abs=1e-14)


# ---------------------------------------------------------- coefficients


def test_g1_at_right_angle_is_lambda():
    pair = HermitianPair(np.diag([3.0, -0.5, 2.0]), np.eye(3))
    coeffs = cc.g_form_coefficients(pair, PhaseSpec(np.pi / 2), 1)
    np.testing.assert_allclose(coeffs, [3.0, 2.0, -0.5], rtol=1e-14)


def test_g3_identity_pair_negative():
    pair = HermitianPair(np.eye(3), np.eye(3))
    (coeff,) = cc.g_form_coefficients(pair, PhaseSpec(np.pi / 2), 3)
    assert coeff == pytest.approx(6 * 2**1.5 * np.sin(np.pi / 2 - 3 * np.pi / 4))
    assert coeff < 0
    assert cc.cone_membership(pair, PhaseSpec(np.pi / 2), 3).member is False


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("theta", [0.4, np.pi / 2, 2.6])
def test_subset_coefficients_match_closed_forms(n, theta):
    rng = np.random.default_rng(17 * n)
    for _ in range(5):
        pair = cc.diagonalize(random_pair(rng, n))
        alpha = forms.Form.from_hermitian(pair.omega)
        beta = forms.Form.from_hermitian(pair.chi)
        spec = PhaseSpec(theta)
        for k in range(1, n + 1):
            closed = forms.diagonal_coefficients(forms.g_closed(alpha, beta, theta, k), k)
            np.testing.assert_allclose(cc.g_form_coefficients(pair, spec, k), closed.real, rtol=1e-10, atol=1e-12)
            closed_p = forms.diagonal_coefficients(forms.p_closed(alpha, beta, theta, k), k)
            np.testing.assert_allclose(cc.p_form_coefficients(pair, spec, k), closed_p.real, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_closed_forms_equal_defining_polynomials(n):
    rng = np.random.default_rng(3)
    a = forms.Form.from_hermitian(cc.random_hermitian(rng, n))
    b = forms.Form.from_hermitian(cc.random_positive(rng, n))
    for k in range(1, n + 1):
        assert forms.g_closed(a, b, 1.1, k).allclose(forms.g_polynomial(a, b, 1.1, k))
        assert forms.p_closed(a, b, 1.1, k).allclose(forms.p_polynomial(a, b, 1.1, k))


def test_p2_at_right_angle():
    lam = np.array([3.0, 2.0, 0.5])
    pair = HermitianPair(np.diag(lam), np.eye(3))
    coeffs = cc.p_form_coefficients(pair, PhaseSpec(np.pi / 2), 2)
    expected = [2 * (lam[i] * lam[j] - 1) for i, j in combinations(range(3), 2)]
    np.testing.assert_allclose(coeffs, expected, rtol=1e-13)


def test_p2_scaling_case():
    theta = 1.0
    c = 1.7
    pair = HermitianPair(np.eye(2) * c / np.sin(theta), np.eye(2))
    (coeff,) = cc.p_form_coefficients(pair, PhaseSpec(theta), 2)
    assert coeff == pytest.approx(2 * (c**2 - 1) / np.sin(theta) ** 2)


@pytest.mark.parametrize("seed", range(10))
def test_p_shift_identity(seed):
    rng = np.random.default_rng(seed)
    pair = random_pair(rng, 3)
    spec = PhaseSpec(rng.uniform(0.2, 3.0))
    for k in (1, 2, 3):
        np.testing.assert_allclose(
            cc.p_form_coefficients(pair, spec, k),
            cc.g_form_coefficients(pair.shifted(spec.cot), spec, k),
            rtol=1e-10,
        )


# ---------------------------------------------------------------- residual


def test_residual_examples():
    root3 = np.sqrt(3.0)
    pair = HermitianPair(np.eye(3) * root3, np.eye(3))
    assert cc.dhym_scalar_residual(pair, PhaseSpec(np.pi / 2)) == pytest.approx(0.0, abs=1e-14)
    pair = HermitianPair([[1.0]], [[1.0]])
    assert cc.dhym_scalar_residual(pair, PhaseSpec(np.pi / 2)) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(20))
def test_residual_matches_complex_determinant(seed):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 3
    pair = random_pair(rng, n)
    spec = PhaseSpec(rng.uniform(0.1, 3.0))
    r1 = cc.dhym_scalar_residual(pair, spec)
    r2 = cc.dhym_residual_det(pair, spec)
    assert r1 == pytest.approx(r2, rel=1e-10, abs=1e-10)
    angles = cc.generalized_spectrum(pair).angles
    assert np.sign(r1) == np.sign(np.sin(spec.theta - angles.sum()))


def test_residual_equals_top_form_ratio():
    rng = np.random.default_rng(5)
    pair = random_pair(rng, 3)
    theta = 0.9
    a = forms.Form.from_hermitian(pair.omega)
    b = forms.Form.from_hermitian(pair.chi)
    ratio = forms.g_polynomial(a, b, theta, 3).top_ratio(b.power(3))
    assert ratio.real == pytest.approx(cc.dhym_scalar_residual(pair, PhaseSpec(theta)), rel=1e-10)


# ------------------------------------------------------------- membership


def test_membership_examples():
    report = cc.cone_membership(HermitianPair(np.eye(3), np.eye(3)), PhaseSpec(2.5), 3)
    assert report.member is True
    pair = HermitianPair(np.diag([0.0, 1.0, 1.0]), np.eye(3))
    assert cc.cone_membership(pair, PhaseSpec(np.pi / 2), 2).member is False


def test_borderline_is_indeterminate():
    # arccot(1) + arccot(1) = pi/2 exactly
    pair = HermitianPair(np.diag([1.0, 1.0]), np.eye(2))
    report = cc.cone_membership(pair, PhaseSpec(np.pi / 2), 2)
    assert report.indeterminate
    assert report.member_gamma_m[1] is True


def test_theta_Theta_membership():
    lam = np.array([3.0, 2.0, 1.5])
    spec = PhaseSpec(1.6, Theta=2.0)
    report = cc.cone_membership(HermitianPair(np.diag(lam), np.eye(3)), spec)
    total = cc.arccot(lam).sum()
    top2 = np.sort(cc.arccot(lam))[-2:].sum()
    assert report.member_gamma_theta_Theta == bool(total < 2.0 and top2 < 1.6)


@pytest.mark.parametrize("n", [2, 3])
def test_dual_predicates_agree_in_batch(n):
    rng = np.random.default_rng(99 + n)
    omega = cc.random_hermitian(rng, n, size=20000, scale=3.0) + 2.0 * np.eye(n)
    chi = cc.random_positive(rng, n, size=20000)
    lam = cc.batch_pair_eigenvalues(omega, chi)
    for theta in np.linspace(0.2, 3.0, 5):
        for m in range(1, n + 1):
            a, c = cc.batch_cone_slacks(lam, theta, m)
            ok = (np.abs(a) > cc.BORDERLINE) & (np.abs(c) > cc.BORDERLINE)
            assert np.array_equal(a[ok] > 0, c[ok] > 0)


# -------------------------------------------------------------- binomial


def test_binomial_trivial_cases():
    rng = np.random.default_rng(0)
    pair = random_pair(rng, 3)
    spec = PhaseSpec(1.2)
    for k in (1, 2, 3):
        lhs, rhs = cc.expand_binomial(pair, np.zeros((3, 3)), spec, k)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    delta = cc.random_hermitian(rng, 3)
    lhs, rhs = cc.expand_binomial(HermitianPair(np.zeros((3, 3)), pair.chi), delta, spec, 1)
    expected = forms.Form.from_hermitian(delta - spec.cot * pair.chi).coeffs
    np.testing.assert_allclose(lhs, expected, atol=1e-12)
    np.testing.assert_allclose(rhs, expected, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_binomial_random(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    pair = random_pair(rng, n)
    delta = cc.random_hermitian(rng, n)
    spec = PhaseSpec(rng.uniform(0.1, 3.0))
    for k in range(1, n + 1):
        for expand in (cc.expand_binomial, cc.expand_binomial_p):
            lhs, rhs = expand(pair, delta, spec, k)
            assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(lhs)))


# ------------------------------------------------------------- properties


def _members(lam, theta, m):
    a, _ = cc.batch_cone_slacks(lam, theta, m)
    return a > 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 3), st.floats(0.3, 2.9))
def test_convexity_sampled(seed, n, theta):
    rng = np.random.default_rng(seed)
    chi = cc.random_positive(rng, n)
    omegas = cc.random_hermitian(rng, n, size=400, scale=2.0) + 3.0 * chi
    lam = cc.batch_pair_eigenvalues(omegas, np.broadcast_to(chi, omegas.shape))
    m = n - 1
    inside = omegas[_members(lam, theta, m)]
    if len(inside) < 2:
        return
    s = rng.uniform(size=(len(inside) // 2, 1, 1))
    combos = s * inside[0::2][: len(s)] + (1 - s) * inside[1::2][: len(s)]
    lam_c = cc.batch_pair_eigenvalues(combos, np.broadcast_to(chi, combos.shape))
    a, _ = cc.batch_cone_slacks(lam_c, theta, m)
    assert np.all(a > -1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 3), st.floats(0.3, 2.9))
def test_monotone_in_chi(seed, n, theta):
    rng = np.random.default_rng(seed)
    chi = cc.random_positive(rng, n)
    Omega = cc.random_positive(rng, n, spread=2.0) * 3.0
    mus = cc.batch_pair_eigenvalues(Omega, chi)
    in_cone = all(np.all(cc.batch_p_coefficients(mus, theta, k) > 0) for k in range(1, n))
    if not in_cone:
        return
    # chi0 <= chi: shrink by a random PSD amount
    half = np.linalg.cholesky(chi)
    shrink = cc.random_positive(rng, n, spread=0.5)
    shrink = shrink / (1.01 * np.linalg.eigvalsh(shrink)[-1])
    chi0 = half @ (np.eye(n) - shrink) @ half.conj().T
    mus0 = cc.batch_pair_eigenvalues(Omega, chi0)
    for k in range(1, n):
        assert np.all(cc.batch_p_coefficients(mus0, theta, k) > 0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=3, max_size=3), st.floats(0.05, 3.1))
def test_sine_lemma_matrix_level(lams, theta):
    lam = np.array(lams)
    if cc.batch_top_angle_sum(lam, 3) >= theta - 1e-9:
        return
    for k in (1, 2, 3):
        assert np.all(cc.batch_normalized_coefficients(lam, theta, k) > 0)
