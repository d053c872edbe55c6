import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dhym import cone_core as cc
from dhym import mollify as m


def kappa(n):
    # closed form of the centred log-pole ratio for the (1 - t^2)^3 bump
    return 0.5 * sum(1.0 / j for j in range(n, n + 4))


def norm_log(z, c=1.0, p=None):
    if p is not None:
        z = z - p
    return c * np.log(np.linalg.norm(z, axis=-1))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_kernel_unit_mass(n):
    k = m.build_kernel(n)
    assert abs(k.normalization() - 1) < 1e-10
    assert abs(k.weights.sum() - 1) < 1e-10


@pytest.mark.parametrize("n", [1, 2, 3])
def test_kernel_mass_direct(n):
    # integrate rho(|x|) over the unit ball of R^{2n} in polar form, independently of sphere_area
    k = m.build_kernel(n)
    d = 2 * n
    from scipy.special import gamma

    area = 2 * np.pi ** (d / 2) / gamma(d / 2)
    val, _ = integrate.quad(lambda t: k.rho(t) * t ** (d - 1) * area, 0, 1)
    assert val == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_a_n_matches_log_pole_constant(n):
    assert m.build_kernel(n).a_n == pytest.approx(kappa(n), abs=1e-10)


def test_kappa_values():
    assert kappa(1) == pytest.approx(25 / 24)
    assert kappa(3) == pytest.approx(0.475)


def test_rho_support():
    k = m.build_kernel(2)
    assert k.rho(1.2) == 0 and k.rho(-0.1) == 0 and k.rho(0.5) > 0


def test_build_kernel_rejects_dimension():
    with pytest.raises(ValueError):
        m.build_kernel(4)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_spherical_mean_of_quadratic(n):
    rng = np.random.default_rng(n)
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    # mean of |z|^2 over the sphere of radius r about x is |x|^2 + r^2
    val = m.spherical_mean(lambda z: np.sum(np.abs(z) ** 2, axis=-1), x, 0.7)
    assert val == pytest.approx(np.sum(np.abs(x) ** 2) + 0.49, rel=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_spherical_mean_quartic(n):
    # E|z_1|^4 over the unit sphere of C^n is 2 / (n (n + 1))
    val = m.spherical_mean(lambda z: np.abs(z[..., 0]) ** 4, np.zeros(n), 1.0)
    assert val == pytest.approx(2 / (n * (n + 1)), rel=1e-12)


def test_spherical_mean_harmonic():
    # pluriharmonic functions equal their spherical means
    f = lambda z: np.real(z[..., 0] ** 3 + 2j * z[..., 1])
    x = np.array([0.3 + 0.1j, -0.2j])
    assert m.spherical_mean(f, x, 0.25) == pytest.approx(f(x), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_mollify_at_log_pole(n):
    delta = 0.01
    val = m.mollify_at(lambda z: norm_log(z, 2.0), np.zeros(n), m.build_kernel(n), delta)
    assert val == pytest.approx(2 * np.log(delta) - 2 * kappa(n), abs=1e-9)


@pytest.mark.parametrize("n", [1, 2])
def test_mollify_at_quadratic(n):
    # |z|^2 mollified gains the kernel's second moment: E|t|^2 delta^2
    k = m.build_kernel(n)
    delta = 0.3
    second, _ = integrate.quad(lambda t: k.rho(t) * t ** (2 * n + 1) * m.sphere_area(n), 0, 1)
    x = np.full(n, 0.5 + 0.25j)
    val = m.mollify_at(lambda z: np.sum(np.abs(z) ** 2, axis=-1), x, k, delta)
    assert val == pytest.approx(np.sum(np.abs(x) ** 2) + second * delta**2, rel=1e-12)


def test_mollify_at_rejects_delta():
    with pytest.raises(ValueError):
        m.mollify_at(norm_log, np.zeros(1), m.build_kernel(1), 0.0)


# grid mollification


def quad_sample(n, spacing, size, matrix=None):
    matrix = np.eye(n) if matrix is None else matrix

    def f(z):
        return np.real(np.einsum("...j,jk,...k->...", np.conj(z), matrix, z))

    return m.PotentialSample.from_function(f, n, spacing, size)


@pytest.mark.parametrize("n,size", [(1, 41), (2, 25)])
def test_mollified_quadratic_hessian_is_identity(n, size):
    delta = 0.08
    phi = quad_sample(n, delta / 8, size)
    smooth = m.mollify_potential(phi, m.build_kernel(n), delta)
    H = m.complex_hessian_fd(smooth)
    assert H.size > 0
    assert np.max(np.abs(H - np.eye(n))) < 1e-8


def test_mollified_affine_unchanged():
    n, delta = 1, 0.1
    f = lambda z: 3 * np.real(z[..., 0]) - 2 * np.imag(z[..., 0]) + 1
    phi = m.PotentialSample.from_function(f, n, delta / 8, 41)
    smooth = m.mollify_potential(phi, m.build_kernel(n), delta)
    expected = f(smooth.points())
    assert np.max(np.abs(smooth.values - expected)) < 1e-12


def test_mollify_potential_shrinks_grid():
    phi = quad_sample(1, 0.01, 41)
    smooth = m.mollify_potential(phi, m.build_kernel(1), 0.08)
    assert smooth.values.shape == (25, 25)
    # the grid stays centred
    assert np.allclose(smooth.points()[12, 12], 0)


def test_mollify_potential_domain_errors():
    phi = quad_sample(1, 0.01, 11)
    k = m.build_kernel(1)
    with pytest.raises(m.DomainError):
        m.mollify_potential(phi, k, 0.08)
    with pytest.raises(ValueError):
        m.mollify_potential(phi, k, 0.04)  # spacing too coarse for delta


def test_mollify_potential_masks_singular_set():
    phi = m.PotentialSample.from_function(lambda z: norm_log(z), 1, 0.01, 41)
    assert not np.isfinite(phi.values).all()
    smooth = m.mollify_potential(phi, m.build_kernel(1), 0.08)
    assert np.isnan(smooth.values[12, 12])
    assert np.isfinite(smooth.values[0, 0])


def test_fd_hessian_oracle():
    # 4th-order stencils on a cubic-quartic polynomial in two complex variables
    def f(z):
        a, b = z[..., 0], z[..., 1]
        return np.real(a * np.conj(b) * (1 + 1j)) + np.abs(a) ** 4

    phi = m.PotentialSample.from_function(f, 2, 0.05, 9)
    H = m.complex_hessian_fd(phi)
    z = phi.points()[2:-2, 2:-2, 2:-2, 2:-2]
    a = z[..., 0]
    expected = np.zeros(H.shape, dtype=complex)
    expected[..., 0, 0] = 4 * np.abs(a) ** 2
    expected[..., 0, 1] = 0.5 * (1 + 1j)
    expected[..., 1, 0] = 0.5 * (1 - 1j)
    assert np.max(np.abs(H - expected)) < 1e-9


def test_potential_sample_interpolation():
    phi = quad_sample(1, 0.05, 21)
    z = np.array([[0.1 + 0.2j], [-0.33 + 0.05j]])
    assert np.allclose(phi(z), np.abs(z[:, 0]) ** 2, atol=1e-5)


def test_potential_sample_validation():
    with pytest.raises(ValueError):
        m.PotentialSample(np.zeros((3, 3)), -1.0, [0])
    with pytest.raises(ValueError):
        m.PotentialSample(np.zeros((3, 3, 3)), 1.0, [0])


# current cone


def test_current_cone_check_pass_and_fail():
    n, delta = 2, 0.08
    spec = cc.PhaseSpec(theta=1.2)
    k = m.build_kernel(n)
    good = quad_sample(n, delta / 8, 21, np.diag([2.0, 3.0]))
    rep = m.current_cone_check(good, np.eye(n), spec, delta, k)
    assert rep.passed and rep.checked > 0 and rep.masked == 0
    bad = quad_sample(n, delta / 8, 21, np.diag([-3.0, 0.2]))
    rep = m.current_cone_check(bad, np.eye(n), spec, delta, k)
    assert not rep.passed and rep.worst_normalized < 0


def test_current_cone_check_matches_pointwise():
    n, delta = 2, 0.08
    spec = cc.PhaseSpec(theta=2.0)
    A = np.array([[1.0, 0.3 + 0.2j], [0.3 - 0.2j, -0.4]])
    phi = quad_sample(n, delta / 8, 21, A)
    rep = m.current_cone_check(phi, np.eye(n), spec, delta, m.build_kernel(n))
    pair = cc.HermitianPair(A, (1 - 1e-6) * np.eye(n))
    direct = cc.cone_membership(pair, spec, 1)
    assert rep.passed == bool(direct.member)


def test_current_cone_check_callable_chi():
    n, delta = 1, 0.08
    spec = cc.PhaseSpec(theta=1.0)
    phi = quad_sample(n, delta / 8, 41, np.array([[2.0]]))
    chi = lambda z: (1 + np.abs(z[..., :1, None]) ** 2) * np.eye(1)
    rep = m.current_cone_check(phi, chi, spec, delta, m.build_kernel(n))
    assert rep.passed


# Lelong numbers


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("delta", [0.1, 0.01])
def test_lelong_of_log_pole(n, delta):
    c = 1.7
    est = m.lelong_level(lambda z: norm_log(z, c), np.zeros(n), delta, 1.0, m.build_kernel(n))
    assert abs(est.nu_level - c) < 1e-3
    assert est.holds()
    # the mollification inequality is sharp for the centred pole
    assert est.inequalities()["mollify_upper"] == pytest.approx(0, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2])
def test_lelong_inequalities_model_potentials(n):
    k = m.build_kernel(n)
    p = np.zeros(n, dtype=complex)
    p[0] = 0.004
    models = [
        lambda z: np.sum(np.abs(z) ** 2, axis=-1) + np.real(z[..., 0] ** 2),
        lambda z: np.maximum(2 * np.log(np.linalg.norm(z, axis=-1)), -10.0),
        lambda z: norm_log(z, 1.0, p),
        lambda z: norm_log(z, 0.5) + np.abs(z[..., -1]) ** 2,
    ]
    for f in models:
        for delta in (0.1, 0.01):
            est = m.lelong_level(f, np.zeros(n), delta, 1.0, k)
            assert est.holds(), est.inequalities()


def test_lelong_smooth_potential_is_small():
    est = m.lelong_level(lambda z: np.abs(z[..., 0]) ** 2, np.zeros(1), 0.01, 1.0, m.build_kernel(1))
    assert 0 <= est.nu_level < 0.05


def test_lelong_domain_checks():
    with pytest.raises(m.DomainError):
        m.lelong_level(norm_log, np.zeros(1), 0.3, 1.0)
    phi = quad_sample(1, 0.01, 21)
    with pytest.raises(m.DomainError):
        m.lelong_level(phi, np.zeros(1), 0.01, 1.0)


def test_lelong_on_sample():
    phi = quad_sample(1, 0.01, 81)
    est = m.lelong_level(phi, np.zeros(1), 0.02, 1.0)
    assert est.holds(tol=1e-7)


# regularized maximum

reals = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(reals, reals, st.floats(1e-3, 5))
def test_regmax_sandwich(f, g, eta):
    M = m.regularized_max(f, g, eta)
    assert max(f, g) - 1e-12 <= M <= max(f, g) + eta + 1e-12


@settings(max_examples=300, deadline=None)
@given(reals, reals, st.floats(1e-3, 5))
def test_regmax_symmetric_and_local(f, g, eta):
    assert m.regularized_max(f, g, eta) == pytest.approx(m.regularized_max(g, f, eta), abs=1e-12)
    if abs(f - g) >= 2 * eta:
        assert abs(m.regularized_max(f, g, eta) - max(f, g)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(reals, reals, reals, reals, st.floats(1e-2, 2))
def test_regmax_convex_monotone(f1, g1, f2, g2, eta):
    mid = m.regularized_max((f1 + f2) / 2, (g1 + g2) / 2, eta)
    avg = (m.regularized_max(f1, g1, eta) + m.regularized_max(f2, g2, eta)) / 2
    assert mid <= avg + 1e-10
    assert m.regularized_max(f1 + 1, g1, eta) >= m.regularized_max(f1, g1, eta) - 1e-12


def test_regmax_smooth_across_switch():
    # psi is C^3 at +-1: finite differences of the derivative stay bounded
    u = np.linspace(-1.5, 1.5, 30001)
    vals = m.regularized_max(u, np.zeros_like(u), 0.5)
    d1 = np.gradient(vals, u)
    d2 = np.gradient(d1, u)
    assert np.all(np.abs(np.diff(d1)) < 1e-3)
    assert np.all(d2 >= -1e-6)
    assert np.max(np.abs(np.diff(d2))) < 1e-2


def test_regmax_upper_bound_constant():
    # the worst excess is 2 eta E[S_+] = 35 eta / 128, attained at f = g
    assert m.regularized_max(0.0, 0.0, 1.0) == pytest.approx(35 / 128, rel=1e-12)


def test_regmax_on_samples():
    a = quad_sample(1, 0.1, 11)
    b = m.PotentialSample(np.full((11, 11), 0.2), 0.1, [0])
    out = m.regularized_max(a, b, 0.05)
    assert isinstance(out, m.PotentialSample)
    assert np.all(out.values >= np.maximum(a.values, b.values) - 1e-12)
    with pytest.raises(ValueError):
        m.regularized_max(a, m.PotentialSample(np.zeros((5, 5)), 0.1, [0]), 0.1)
    with pytest.raises(ValueError):
        m.regularized_max(1.0, 2.0, 0.0)
