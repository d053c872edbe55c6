"""Mollification of potentials on coordinate polydiscs, the current cone
condition, Lelong numbers at level delta, and the regularized maximum.

Potentials are either plain callables ``phi(z)`` taking complex points of
shape ``(..., n)`` or :class:`PotentialSample` grids. Spherical means
``phi_hat_r(x)`` are averages over the real sphere of radius ``r`` in
``C^n = R^{2n}``, computed with a product rule: the squared moduli
``|z_j|^2 / r^2`` are uniform on the simplex and the phases are uniform on
the torus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, signal, special
from scipy.interpolate import RegularGridInterpolator

from . import cone_core as cc


class DomainError(ValueError):
    """Raised when a radius does not fit inside the sampled domain."""


def sphere_area(n):
    """Area of the unit sphere S^{2n-1}."""
    return 2 * np.pi**n / factorial(n - 1)


def bump(t):
    t = np.asarray(t, dtype=float)
    return np.where((t >= 0) & (t <= 1), (1 - t**2) ** 3, 0.0)


@lru_cache(maxsize=None)
def _radial_rule(levels=40, order=8):
    """Composite Gauss-Legendre nodes on [0, 1], graded geometrically toward 0
    so that integrands with ``log t`` singularities converge."""
    x, w = special.roots_legendre(order)
    edges = np.concatenate([[0.0], 2.0 ** -np.arange(levels, -1, -1)])
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(lo + (hi - lo) * (x + 1) / 2)
        weights.append(w * (hi - lo) / 2)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class MollifierKernel:
    n: int
    scale: float  # rho(t) = scale * (1 - t^2)^3
    a_n: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)  # radial measure rho(t) |S| t^{2n-1} dt

    def rho(self, t):
        return self.scale * bump(t)

    def normalization(self):
        value, _ = integrate.quad(
            lambda t: self.rho(t) * t ** (2 * self.n - 1) * sphere_area(self.n), 0, 1, epsabs=1e-13, epsrel=1e-13, limit=200
        )
        return value


# the radial weight vanishes like t^{2n-1}, so fewer dyadic levels suffice as n grows
_RADIAL_LEVELS = {1: 40, 2: 16, 3: 11}


@lru_cache(maxsize=None)
def build_kernel(n, a_n=None):
    """The bump ``(1 - t^2)^3`` rescaled to unit mass on C^n.

    ``a_n`` bounds ``(phi_hat_delta - phi_delta) / nu`` and is obtained by
    maximizing that ratio over log-pole models ``log|z - p|`` with ``|p| < delta``.
    """
    if n not in (1, 2, 3):
        raise ValueError("n must be 1, 2 or 3")
    mass = special.beta(n, 4) / 2  # int_0^1 (1 - t^2)^3 t^{2n-1} dt
    scale = 1.0 / (mass * sphere_area(n))
    t, w = _radial_rule(_RADIAL_LEVELS[n])
    weights = w * scale * bump(t) * t ** (2 * n - 1) * sphere_area(n)
    kernel = MollifierKernel(n, scale, np.nan, t, weights)
    if a_n is None:
        a_n = _estimate_a_n(kernel)
    return MollifierKernel(n, scale, a_n, t, weights)


def _estimate_a_n(kernel, cs=(0.5, 1.0, 2.0), deltas=(1e-1, 1e-2, 1e-3), r=1.0):
    """Largest ``(phi_hat_delta - phi_delta) / nu`` over models ``c log|z|``.

    The models are rotation invariant, so a two-point phase rule is exact."""
    n = kernel.n
    origin = np.zeros(n, dtype=complex)
    best = -np.inf
    for c in cs:
        def model(z, c=c):
            return c * np.log(np.linalg.norm(z, axis=-1))

        for delta in deltas:
            means = spherical_mean(model, origin, np.array([r / 4, delta]), n, n_phase=2, n_radial=2)
            nu = (means[0] - means[1]) / (np.log(r / 4) - np.log(delta))
            gap = means[1] - mollify_at(model, origin, kernel, delta, n_phase=2, n_radial=2)
            best = max(best, gap / nu)
    return float(best)


# ---------------------------------------------------------------------------
# spherical means and pointwise mollification


@lru_cache(maxsize=None)
def _sphere_rule(n, n_phase, n_radial):
    """Points on the unit sphere of C^n with weights summing to one."""
    phases = 2 * np.pi * np.arange(n_phase) / n_phase
    if n == 1:
        pts = np.exp(1j * phases)[:, None]
        return pts, np.full(n_phase, 1.0 / n_phase)
    if n == 2:
        x, w = special.roots_legendre(n_radial)
        s = (x + 1) / 2
        moduli = np.stack([np.sqrt(s), np.sqrt(1 - s)], axis=-1)
        wt = w / 2
    else:
        x, w = special.roots_jacobi(n_radial, 1.0, 0.0)  # weight (1 - x)
        u, wu = (x + 1) / 2, w / 4
        y, wy = special.roots_legendre(n_radial)
        v, wv = (y + 1) / 2, wy / 2
        U, V = np.meshgrid(u, v, indexing="ij")
        s1, s2, s3 = U, (1 - U) * V, (1 - U) * (1 - V)
        moduli = np.sqrt(np.stack([s1, s2, s3], axis=-1)).reshape(-1, 3)
        wt = (2 * np.outer(wu, wv)).ravel()
    grids = np.meshgrid(*([phases] * n), indexing="ij")
    rot = np.exp(1j * np.stack([g.ravel() for g in grids], axis=-1))
    pts = moduli[:, None, :] * rot[None, :, :]
    weights = np.repeat(wt / wt.sum(), rot.shape[0]) / rot.shape[0]
    return pts.reshape(-1, n), weights


def spherical_mean(phi, x, radius, n=None, n_phase=None, n_radial=None):
    """Mean of ``phi`` over the sphere of the given radius centred at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    n = x.size if n is None else n
    if n_phase is None:
        n_phase = {1: 512, 2: 48, 3: 12}[n]
    if n_radial is None:
        n_radial = {1: 1, 2: 12, 3: 8}[n]
    pts, weights = _sphere_rule(n, n_phase, n_radial)
    radius = np.asarray(radius, dtype=float)
    flat = radius.ravel()
    out = np.empty(flat.shape)
    chunk = max(1, 2**22 // len(weights))
    for start in range(0, flat.size, chunk):
        z = x + flat[start:start + chunk, None, None] * pts
        out[start:start + chunk] = phi(z) @ weights
    return out.reshape(radius.shape)


def mollify_at(phi, x, kernel, delta, n_phase=None, n_radial=None):
    """``phi_delta(x)`` by radial quadrature of spherical means."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    means = spherical_mean(phi, x, delta * kernel.nodes, kernel.n, n_phase, n_radial)
    return float(np.dot(kernel.weights, means))


# ---------------------------------------------------------------------------
# grid potentials


@dataclass
class PotentialSample:
    """Real potential sampled on a uniform grid in R^{2n}.

    Axes are ordered ``(x_1, y_1, ..., x_n, y_n)`` with ``z_j = x_j + i y_j``;
    grid points sit at ``center + spacing * (i - (N - 1) / 2)`` along each axis.
    Non-finite values mark a singular set.
    """

    values: np.ndarray
    spacing: float
    center: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.center = np.atleast_1d(np.asarray(self.center, dtype=complex))
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if self.values.ndim != 2 * self.n:
            raise ValueError("values must have 2n axes")

    @property
    def n(self):
        return np.atleast_1d(self.center).size

    def axes(self):
        out = []
        for a, size in enumerate(self.values.shape):
            c = self.center[a // 2]
            c = c.real if a % 2 == 0 else c.imag
            out.append(c + self.spacing * (np.arange(size) - (size - 1) / 2))
        return out

    def points(self):
        """Complex coordinates of all grid points, shape ``values.shape + (n,)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([mesh[2 * j] + 1j * mesh[2 * j + 1] for j in range(self.n)], axis=-1)

    @classmethod
    def from_function(cls, func, n, spacing, shape, center=None):
        center = np.zeros(n, dtype=complex) if center is None else center
        shape = (shape,) * (2 * n) if np.isscalar(shape) else tuple(shape)
        sample = cls(np.zeros(shape), spacing, center)
        with np.errstate(divide="ignore", invalid="ignore"):
            sample.values = np.asarray(func(sample.points()), dtype=float)
        return sample

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        real = np.stack([f(z[..., j]) for j in range(self.n) for f in (np.real, np.imag)], axis=-1)
        interp = RegularGridInterpolator(self.axes(), self.values, method="cubic", bounds_error=True)
        return interp(real.reshape(-1, 2 * self.n)).reshape(z.shape[:-1])


def mollify_potential(phi, kernel, delta):
    """Discrete convolution of a grid potential with the scaled kernel.

    The discrete weights are renormalized to sum to one, so quadratic
    potentials are shifted by a constant and keep their Hessian exactly.
    Returns the sample restricted to points whose closed delta-ball lies in
    the grid box; points whose stencil touches the singular set are NaN.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if phi.spacing > delta / 8 * (1 + 1e-12):
        raise ValueError("grid spacing must be at most delta / 8 to resolve the kernel")
    half = int(np.floor(delta / phi.spacing + 1e-12))
    if any(2 * half + 1 > size for size in phi.values.shape):
        raise DomainError("delta is too large for the sampled domain")
    offsets = np.arange(-half, half + 1) * phi.spacing
    mesh = np.meshgrid(*([offsets] * phi.values.ndim), indexing="ij")
    radius = np.sqrt(sum(m**2 for m in mesh))
    weights = kernel.rho(radius / delta)
    weights /= weights.sum()
    singular = ~np.isfinite(phi.values)
    values = np.where(singular, 0.0, phi.values)
    out = signal.fftconvolve(values, weights, mode="valid")
    if singular.any():
        touched = signal.fftconvolve(singular.astype(float), (weights > 0).astype(float), mode="valid")
        out[touched > 0.5] = np.nan
    return PotentialSample(out, phi.spacing, phi.center)


# 4th-order central difference weights
_D1 = np.array([1, -8, 0, 8, -1]) / 12.0
_D2 = np.array([-1, 16, -30, 16, -1]) / 12.0


def _diff(values, axis, stencil, h):
    out = np.zeros_like(values)
    n = values.shape[axis]
    for shift, c in zip(range(-2, 3), stencil):
        if c:
            out += c * np.roll(values, -shift, axis=axis)
    # drop the wrapped borders
    sl = [slice(None)] * values.ndim
    sl[axis] = slice(2, n - 2)
    out = out / h
    return out, tuple(sl)


def complex_hessian_fd(phi):
    """Complex Hessian ``d^2 phi / dz_j dzbar_k`` by 4th-order differences.

    Returns an array of shape ``interior_shape + (n, n)`` where the interior
    drops two points on each side (four for mixed derivatives)."""
    v, h, n = phi.values, phi.spacing, phi.n
    d = v.ndim
    real = np.empty(tuple(s - 4 for s in v.shape) + (d, d))
    inner = tuple(slice(2, s - 2) for s in v.shape)
    for a in range(d):
        second, _ = _diff(v, a, _D2, h * h)
        real[..., a, a] = second[inner]
        first, _ = _diff(v, a, _D1, h)
        for b in range(a + 1, d):
            mixed, _ = _diff(first, b, _D1, h)
            real[..., a, b] = real[..., b, a] = mixed[inner]
    H = np.empty(real.shape[:-2] + (n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            xj, yj, xk, yk = 2 * j, 2 * j + 1, 2 * k, 2 * k + 1
            H[..., j, k] = 0.25 * (
                real[..., xj, xk] + real[..., yj, yk] + 1j * (real[..., xj, yk] - real[..., yj, xk])
            )
    return H


def _inner_points(phi, trim):
    pts = phi.points()
    return pts[tuple(slice(trim, s - trim) for s in phi.values.shape)]


@dataclass
class CurrentConeReport:
    passed: bool
    worst_margin: float  # min raw P^k coefficient
    worst_normalized: float  # min sin(theta - sum_K theta_i) / sin(theta)
    checked: int
    masked: int


def _frozen_chi(chi, points, n, delta, spacing):
    """Constant comparison forms chi_0(x) <= chi on B_delta(x)."""
    if callable(chi):
        at = np.asarray(chi(points), dtype=complex)
        # probe the ball on a coarse stencil of offsets along each real axis
        steps = np.linspace(-delta, delta, 5)
        scale = np.full(points.shape[:-1], np.inf)
        ref = np.linalg.cholesky(at)
        ref_inv = np.linalg.inv(ref)
        for axis in range(2 * n):
            for s in steps:
                shift = np.zeros(n, dtype=complex)
                shift[axis // 2] = s if axis % 2 == 0 else 1j * s
                other = np.asarray(chi(points + shift), dtype=complex)
                rel = ref_inv @ other @ np.conj(np.swapaxes(ref_inv, -1, -2))
                scale = np.minimum(scale, np.linalg.eigvalsh(rel)[..., 0])
        return (1 - 1e-6) * np.minimum(scale, 1.0)[..., None, None] * at
    chi = np.asarray(chi, dtype=complex)
    return np.broadcast_to((1 - 1e-6) * chi, points.shape[:-1] + (n, n))


def current_cone_check(phi, chi, spec, delta, kernel=None, m=None, tol=1e-6):
    """Check ``P^k_theta(i ddbar phi_delta, chi_0) >= 0`` for k = 1..m on U_delta.

    ``chi`` is a constant matrix or a callable returning matrices at points.
    The check passes when the worst normalized slack is at least ``-tol``.
    """
    n = phi.n
    kernel = build_kernel(n) if kernel is None else kernel
    m = max(n - 1, 1) if m is None else m
    smooth = mollify_potential(phi, kernel, delta)
    H = complex_hessian_fd(smooth)
    pts = _inner_points(smooth, 2)
    chi0 = _frozen_chi(chi, pts, n, delta, phi.spacing)
    finite = np.all(np.isfinite(H), axis=(-2, -1))
    mus = cc.batch_pair_eigenvalues(np.where(finite[..., None, None], H, 0.0), chi0)[finite]
    worst_raw, worst_norm = np.inf, np.inf
    for k in range(1, m + 1):
        worst_raw = min(worst_raw, float(np.min(cc.batch_p_coefficients(mus, spec.theta, k), initial=np.inf)))
        worst_norm = min(
            worst_norm, float(np.min(cc.batch_normalized_coefficients(mus + spec.cot, spec.theta, k), initial=np.inf))
        )
    return CurrentConeReport(worst_norm >= -tol, worst_raw, worst_norm, int(finite.sum()), int((~finite).sum()))


# ---------------------------------------------------------------------------
# Lelong numbers at level delta


@dataclass
class LelongEstimate:
    x: np.ndarray
    delta: float
    r: float
    nu_level: float
    hat_values: dict
    mollified: float
    scale_gaps: dict  # a -> phi_hat_delta - phi_hat_{delta/a}
    a_n: float

    def inequalities(self, tol=1e-9):
        """Slack of each inequality; all are >= -tol when both hold."""
        hat = self.hat_values[self.delta]
        out = {}
        for a, gap in self.scale_gaps.items():
            out[f"scale_lower_a={a:g}"] = gap
            out[f"scale_upper_a={a:g}"] = self.nu_level * np.log(a) - gap
        gap = hat - self.mollified
        out["mollify_lower"] = gap
        out["mollify_upper"] = self.nu_level * self.a_n - gap
        return out

    def holds(self, tol=1e-9):
        return all(v >= -tol for v in self.inequalities(tol).values())


def lelong_level(phi, x, delta, r, kernel=None, ratios=(2.0, 10.0)):
    """Lelong number at level delta with its two comparison inequalities.

    ``phi_hat`` is the spherical mean; ``ratios`` are the values of ``a >= 1``
    tested in ``0 <= phi_hat_delta - phi_hat_{delta/a} <= nu log a``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    n = x.size
    if not 0 < delta < r / 4:
        raise DomainError("need 0 < delta < r / 4")
    if isinstance(phi, PotentialSample):
        lo = [a[0] for a in phi.axes()]
        hi = [a[-1] for a in phi.axes()]
        coords = np.array([f(x[j]) for j in range(n) for f in (np.real, np.imag)])
        if np.any(coords - r / 4 < lo) or np.any(coords + r / 4 > hi):
            raise DomainError("radius r/4 leaves the sampled domain")
    kernel = build_kernel(n) if kernel is None else kernel
    radii = [r / 4, delta] + [delta / a for a in ratios]
    hats = spherical_mean(phi, x, np.array(radii), n)
    hat_outer, hat_delta = float(hats[0]), float(hats[1])
    nu = (hat_outer - hat_delta) / (np.log(r / 4) - np.log(delta))
    gaps = {a: hat_delta - float(h) for a, h in zip(ratios, hats[2:])}
    return LelongEstimate(
        x, delta, r, float(nu), {r / 4: hat_outer, delta: hat_delta}, mollify_at(phi, x, kernel, delta), gaps,
        kernel.a_n,
    )


# ---------------------------------------------------------------------------
# regularized maximum

_DENSITY = Polynomial([1, 0, -3, 0, 3, 0, -1]) * (35 / 32)  # (1 - s^2)^3, unit mass on [-1, 1]
_CDF = _DENSITY.integ(lbnd=-1)
_PSI = _CDF.integ(lbnd=-1)


def _psi(u):
    """E[(u + S)_+] for S with density (35/32)(1 - s^2)^3 on [-1, 1]."""
    u = np.asarray(u, dtype=float)
    inside = np.clip(u, -1.0, 1.0)
    return np.where(u >= 1, u, np.where(u <= -1, 0.0, _PSI(inside)))


def regularized_max(f, g, eta):
    """Smooth symmetric maximum with ``max <= M <= max + eta``.

    ``M(f, g) = g + 2 eta psi((f - g) / (2 eta))`` equals ``max(f, g)`` once
    ``|f - g| >= 2 eta``; it is convex and nondecreasing in each argument.
    """
    if np.any(np.asarray(eta) <= 0):
        raise ValueError("eta must be positive")
    if isinstance(f, PotentialSample):
        if f.values.shape != g.values.shape or f.spacing != g.spacing:
            raise ValueError("regularized_max needs samples on a common grid")
        return PotentialSample(regularized_max(f.values, g.values, eta), f.spacing, f.center)
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    return g + 2 * eta * _psi((f - g) / (2 * eta))
