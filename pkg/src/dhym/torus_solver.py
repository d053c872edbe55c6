"""Continuity-method solver for the twisted dHYM equation on flat tori.

The torus is C^n / (2 pi Z^{2n}) with constant comparison form ``chi0`` and
constant background ``H0``. Unknown potentials depend on at most two of the
real coordinates ``x1, y1, ..., xn, yn`` (the *active* coordinates) and are
stored on uniform periodic grids; derivatives are spectral.

The twist ``f`` is always given in the normalization

    Re(omega_phi + i chi)^n - cot(theta) Im(omega_phi + i chi)^n = f chi^n,

and the path is ``P^n(Omega_phi) / chi^n = t f + d_t`` with
``d_t = (1 - t) mean(f)`` and ``Omega = omega - cot(theta) chi``. For n = 3
the solver works with ``F(z, A) = (tr A + 2 z) / det A = sin^2(theta)`` where
``A = chi0^{-1} Omega`` and ``z = sin^2(theta) (t f + d_t) / 2 + cot(theta)``.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import fft
from scipy.sparse.linalg import LinearOperator, gmres

from . import cone_core as cc

COORDS = ("x1", "y1", "x2", "y2", "x3", "y3")


class ConeViolation(ValueError):
    """Omega_phi left the admissible cone at some grid point."""

    def __init__(self, message, index=None, lambdas=None):
        super().__init__(message)
        self.index = index
        self.lambdas = lambdas


class StepFailure(RuntimeError):
    """Newton could not converge at the requested t (the path step is refined)."""


class SolverError(RuntimeError):
    """The linear solve stagnated."""


class NonConvergence(RuntimeError):
    def __init__(self, message, path):
        super().__init__(message)
        self.path = path


class AliasingWarning(UserWarning):
    pass


def _workers():
    return int(os.environ.get("DHYM_NUM_THREADS", "1"))


# ---------------------------------------------------------------------------
# data


@dataclass
class FlatBackground:
    n: int
    chi0: np.ndarray
    H0: np.ndarray
    theta: cc.PhaseSpec

    def __post_init__(self):
        if not isinstance(self.theta, cc.PhaseSpec):
            self.theta = cc.PhaseSpec(float(self.theta))
        self.chi0 = np.asarray(self.chi0, dtype=complex).reshape(self.n, self.n)
        self.H0 = np.asarray(self.H0, dtype=complex).reshape(self.n, self.n)
        pair = cc.HermitianPair(self.H0, self.chi0)  # validates shapes, hermiticity, chi0 > 0
        if self.n > 1:
            report = cc.cone_membership(pair, self.theta, self.n - 1)
            if report.member_gamma_m[self.n - 1] is not True:
                raise ValueError("background H0 is not in the cone Gamma_{chi0, theta}")

    @property
    def Omega0(self):
        return self.H0 - self.theta.cot * self.chi0

    @property
    def chi_inv(self):
        return np.linalg.inv(self.chi0)

    def p_ratio_background(self):
        """``P^n(Omega_0) / chi^n``, which must equal mean(f)."""
        return float(_p_ratio(self.Omega0[None], self)[0])


@dataclass
class PeriodicField:
    """Real samples on the grid ``2 pi i / N`` along each active coordinate."""

    values: np.ndarray
    active_coords: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if np.iscomplexobj(self.values):
            if np.max(np.abs(self.values.imag), initial=0.0) > 0:
                raise ValueError("PeriodicField values must be real")
            self.values = self.values.real
        self.values = self.values.astype(float)
        self.active_coords = tuple(self.active_coords)
        if len(self.active_coords) > 2 or len(set(self.active_coords)) != len(self.active_coords):
            raise ValueError("at most two distinct active coordinates")
        for c in self.active_coords:
            if c not in COORDS:
                raise ValueError(f"unknown coordinate {c!r}")
        if self.values.ndim != len(self.active_coords):
            raise ValueError("values need one axis per active coordinate")

    @property
    def shape(self):
        return self.values.shape

    def mean(self):
        return float(self.values.mean())

    def grid(self):
        axes = [2 * np.pi * np.arange(s) / s for s in self.shape]
        return np.meshgrid(*axes, indexing="ij")

    @classmethod
    def from_function(cls, func, active_coords, size):
        active_coords = tuple(active_coords)
        shape = (size,) * len(active_coords) if np.isscalar(size) else tuple(size)
        field_ = cls(np.zeros(shape), active_coords)
        field_.values = np.asarray(func(*field_.grid()), dtype=float) * np.ones(shape)
        return field_

    def like(self, values):
        return PeriodicField(values, self.active_coords)

    def __add__(self, other):
        other = other.values if isinstance(other, PeriodicField) else other
        return self.like(self.values + other)

    def __sub__(self, other):
        other = other.values if isinstance(other, PeriodicField) else other
        return self.like(self.values - other)

    def __mul__(self, scalar):
        return self.like(self.values * scalar)

    __rmul__ = __mul__


@dataclass
class SolverConfig:
    tol: float = 1e-10
    max_newton: int = 25
    dt0: float = 0.25
    dt_min: float = 1e-6
    dt_max: float = 1.0
    fast_iters: int = 4
    gmres_rtol: float = 1e-3
    gmres_tight: float = 1e-10
    tight_below: float = 1e-6
    gmres_restart: int = 60
    gmres_maxiter: int = 20
    step_min: float = 1e-6


@dataclass
class ContinuityState:
    t: float
    phi: PeriodicField
    d_t: float
    residual_norm: float = np.inf
    cone_margin: float = np.nan
    newton_iters: int = 0
    bordered: float = 0.0
    history: list = field(default_factory=list)
    steps: list = field(default_factory=list)  # accepted line-search lengths

    def summary(self):
        return PathRecord(self.t, self.d_t, self.residual_norm, self.cone_margin, self.newton_iters, self.bordered)


@dataclass(frozen=True)
class PathRecord:
    t: float
    d_t: float
    residual: float
    cone_margin: float
    newton_iters: int
    bordered: float


@dataclass
class SolveReport:
    path: list
    final_residual: float
    phase_field: PeriodicField
    in_theta_Theta: bool | None
    phi: PeriodicField
    success: bool


# ---------------------------------------------------------------------------
# spectral calculus


def _real_index(coord):
    return COORDS.index(coord)


def _wavenumbers(shape, nyquist=False):
    """Integer wavenumbers per axis broadcast to the grid.

    The Nyquist entry is zeroed unless ``nyquist`` is set: odd derivatives of
    that mode vanish on the grid, while ``-k^2`` is still exact for it.
    """
    ks = []
    for axis, size in enumerate(shape):
        k = fft.fftfreq(size, 1.0 / size)
        if size % 2 == 0 and not nyquist:
            k[size // 2] = 0.0
        bshape = [1] * len(shape)
        bshape[axis] = size
        ks.append(k.reshape(bshape))
    return ks


def _hessian_symbol(shape, active, n):
    """Fourier multiplier of ``d^2 / dz_j dzbar_k`` for each (j, k)."""
    ks = _wavenumbers(shape)
    full = _wavenumbers(shape, nyquist=True)
    real = {}
    for p, cp in enumerate(active):
        for q, cq in enumerate(active):
            real[_real_index(cp), _real_index(cq)] = -full[p] ** 2 if p == q else -ks[p] * ks[q]
    zero = np.zeros(shape)
    out = np.zeros(shape + (n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            d = lambda a, b: real.get((a, b), zero)
            xj, yj, xk, yk = 2 * j, 2 * j + 1, 2 * k, 2 * k + 1
            out[..., j, k] = 0.25 * (d(xj, xk) + d(yj, yk) + 1j * (d(xj, yk) - d(yj, xk))) * np.ones(shape)
    return out


def _check_aliasing(values):
    coeffs = fft.fftn(values, workers=_workers())
    power = np.abs(coeffs) ** 2
    flat = power.reshape(-1).copy()
    flat[0] = 0.0
    total = flat.sum()
    if total == 0:
        return
    top = np.zeros(values.shape, dtype=bool)
    for axis, size in enumerate(values.shape):
        k = np.abs(fft.fftfreq(size, 1.0 / size))
        bshape = [1] * values.ndim
        bshape[axis] = size
        top |= (k > size / 3).reshape(bshape)
    fraction = power[top].sum() / total
    if fraction > 1e-8:
        warnings.warn(f"top-frequency energy fraction {fraction:.2e} exceeds 1e-8", AliasingWarning, stacklevel=3)


def _hessian_values(values, active, n, symbol=None):
    if values.ndim == 0:
        return np.zeros((n, n), dtype=complex)
    symbol = _hessian_symbol(values.shape, active, n) if symbol is None else symbol
    coeffs = fft.fftn(values, workers=_workers())
    out = np.empty(values.shape + (n, n), dtype=complex)
    for j in range(n):
        for k in range(j, n):
            entry = fft.ifftn(symbol[..., j, k] * coeffs, workers=_workers())
            if j == k:
                out[..., j, k] = entry.real
            else:
                # d^2 phi / dz_j dzbar_k of a real function; the (k, j) entry is its conjugate
                out[..., j, k] = entry
                out[..., k, j] = np.conj(entry)
    return out


def complex_hessian(phi, bg):
    """The field ``d^2 phi / dz_j dzbar_k`` with shape ``grid + (n, n)``."""
    _check_aliasing(phi.values)
    return _hessian_values(phi.values, phi.active_coords, bg.n)


# ---------------------------------------------------------------------------
# pointwise nonlinearity


def twist_at(f, t):
    """``(t f + d_t, d_t)`` in the user normalization, as arrays."""
    values = f.values if isinstance(f, PeriodicField) else np.asarray(f, dtype=float)
    d_t = (1.0 - t) * float(np.mean(values))
    return t * values + d_t, d_t


def internal_z(ft, theta):
    """``z_t`` of the n = 3 equation from the user-normalized ``t f + d_t``."""
    return np.sin(theta) ** 2 * np.asarray(ft) / 2 + 1.0 / np.tan(theta)


def _p_ratio(Omega, bg):
    A = bg.chi_inv @ Omega
    csc2, cot = bg.theta.csc2, bg.theta.cot
    if bg.n == 1:
        return A[..., 0, 0].real
    det = np.linalg.det(A).real
    if bg.n == 2:
        return det - csc2
    tr = np.trace(A, axis1=-2, axis2=-1).real
    return det - csc2 * tr - 2 * csc2 * cot


def _omega_field(phi, bg, symbol=None):
    return bg.Omega0 + _hessian_values(phi.values, phi.active_coords, bg.n, symbol)


def _lambdas(Omega, bg):
    return cc.batch_pair_eigenvalues(Omega, np.broadcast_to(bg.chi0, Omega.shape))


def _margin_field(lam, bg):
    n = lam.shape[-1]
    if n == 1:
        return np.full(lam.shape[:-1], np.inf)
    margin = lam.min(axis=-1)
    if n == 3:
        for i, j in ((0, 1), (0, 2), (1, 2)):
            margin = np.minimum(margin, lam[..., i] * lam[..., j] - bg.theta.csc2)
    return margin


def _guard(Omega, bg):
    lam = _lambdas(Omega, bg)
    margin = _margin_field(lam, bg)
    if not np.all(margin > 0):
        idx = np.unravel_index(np.argmin(np.where(np.isnan(margin), -np.inf, margin)), margin.shape)
        raise ConeViolation(f"cone condition fails at grid index {idx}: lambdas {lam[idx]}", idx, lam[idx])
    return lam, margin


def _residual_values(Omega, ft, bg):
    theta = bg.theta.theta
    if bg.n == 3:
        A = bg.chi_inv @ Omega
        det = np.linalg.det(A).real
        tr = np.trace(A, axis1=-2, axis2=-1).real
        return (tr + 2 * internal_z(ft, theta)) / det - np.sin(theta) ** 2
    return _p_ratio(Omega, bg) - ft


def residual_field(phi, t, f, bg):
    """Pointwise residual and ``d_t``; raises :class:`ConeViolation` off the cone."""
    Omega = _omega_field(phi, bg)
    _guard(Omega, bg)
    ft, d_t = twist_at(f, t)
    return phi.like(_residual_values(Omega, ft, bg)), d_t


def _linear_coefficients(Omega, ft, bg):
    """Hermitian field ``M`` with ``dR[u] = tr(M i ddbar u)``."""
    n = bg.n
    chi_inv = np.broadcast_to(bg.chi_inv, Omega.shape)
    if n == 1:
        return chi_inv.copy()
    A = chi_inv @ Omega
    det = np.linalg.det(A).real[..., None, None]
    Oinv = np.linalg.inv(Omega)
    if n == 2:
        return det * Oinv
    tr = np.trace(A, axis1=-2, axis2=-1).real[..., None, None]
    z = internal_z(ft, bg.theta.theta)[..., None, None]
    F = (tr + 2 * z) / det
    return (chi_inv - F * det * Oinv) / det


def _apply(coeffs, values, active, n, symbol):
    H = _hessian_values(values, active, n, symbol)
    return np.einsum("...kj,...jk->...", coeffs, H).real


def linearized_apply(phi, u, t, f, bg):
    """Directional derivative of :func:`residual_field` at ``phi`` along ``u``."""
    Omega = _omega_field(phi, bg)
    _guard(Omega, bg)
    ft, _ = twist_at(f, t)
    coeffs = _linear_coefficients(Omega, ft, bg)
    symbol = _hessian_symbol(phi.shape, phi.active_coords, bg.n)
    return phi.like(_apply(coeffs, u.values, phi.active_coords, bg.n, symbol))


# ---------------------------------------------------------------------------
# Newton and continuation


def _bordered_solve(coeffs, rhs, active, n, symbol, rtol, config):
    """Solve ``L u + b = rhs, mean(u) = 0`` by preconditioned GMRES."""
    shape = rhs.shape
    size = rhs.size
    mean_coeffs = coeffs.reshape(-1, n, n).mean(axis=0)
    sym0 = np.einsum("kj,...jk->...", mean_coeffs, symbol).real
    sym0.reshape(-1)[0] = 1.0
    small = np.abs(sym0) < 1e-14
    sym0 = np.where(small, 1.0, sym0)

    def matvec(x):
        u = x[:size].reshape(shape)
        out = np.empty(size + 1)
        out[:size] = (_apply(coeffs, u, active, n, symbol) + x[size]).ravel()
        out[size] = u.mean()
        return out

    def precond(y):
        r = y[:size].reshape(shape)
        b = r.mean()
        coeff = fft.fftn(r - b, workers=_workers()) / sym0
        coeff[small] = 0.0
        coeff.reshape(-1)[0] = y[size] * size
        out = np.empty(size + 1)
        out[:size] = fft.ifftn(coeff, workers=_workers()).real.ravel()
        out[size] = b
        return out

    op = LinearOperator((size + 1, size + 1), matvec=matvec, dtype=float)
    prec = LinearOperator((size + 1, size + 1), matvec=precond, dtype=float)
    b_full = np.concatenate([rhs.ravel(), [0.0]])
    x, info = gmres(op, b_full, x0=precond(b_full), rtol=rtol, atol=0.0, restart=config.gmres_restart,
                    maxiter=config.gmres_maxiter, M=prec)
    achieved = np.linalg.norm(matvec(x) - b_full) / max(np.linalg.norm(b_full), 1e-300)
    if info != 0 and achieved > max(10 * rtol, 1e-12):
        raise SolverError(f"GMRES stagnated at relative residual {achieved:.2e}")
    return x[:size].reshape(shape), float(x[size])


def newton_at_t(state, f, bg, config=None):
    """Newton iteration for the path equation at ``state.t`` from ``state.phi``.

    Each step solves the bordered system and halves the step length until the
    cone conditions hold strictly at every grid point.
    """
    config = config or SolverConfig()
    t, phi = state.t, state.phi
    active, n = phi.active_coords, bg.n
    symbol = _hessian_symbol(phi.shape, active, n)
    ft, d_t = twist_at(f, t)
    Omega = _omega_field(phi, bg, symbol)
    lam, margin = _guard(Omega, bg)
    R = _residual_values(Omega, ft, bg)
    history = [float(np.max(np.abs(R)))]
    bordered = 0.0
    iters = 0
    steps = []
    while history[-1] > config.tol:
        if iters >= config.max_newton:
            raise StepFailure(f"Newton did not converge at t={t:.6g}: residual {history[-1]:.3e}")
        coeffs = _linear_coefficients(Omega, ft, bg)
        rtol = config.gmres_tight if history[-1] < config.tight_below else config.gmres_rtol
        u, bordered = _bordered_solve(coeffs, -R, active, n, symbol, rtol, config)
        s = 1.0
        while True:
            trial = phi.like(phi.values + s * u)
            Omega_trial = _omega_field(trial, bg, symbol)
            try:
                lam, margin = _guard(Omega_trial, bg)
                R_trial = _residual_values(Omega_trial, ft, bg)
                if np.all(np.isfinite(R_trial)):
                    break
            except (ConeViolation, np.linalg.LinAlgError, cc.ComparisonFormError):
                pass
            s /= 2
            if s < config.step_min:
                raise StepFailure(f"line search exhausted at t={t:.6g}")
        phi, Omega, R = trial, Omega_trial, R_trial
        steps.append(s)
        iters += 1
        history.append(float(np.max(np.abs(R))))
    return ContinuityState(t, phi, d_t, history[-1], float(np.min(margin)), iters, bordered, history, steps)


def twist_lower_bound(bg):
    """Pointwise lower bound on f required before solving (None when vacuous)."""
    theta = bg.theta.theta
    if bg.n == 2:
        return -bg.theta.csc2
    if bg.n == 3:
        eps = 1 / np.sin(theta) - abs(1 / np.tan(theta))
        return -2 * bg.theta.csc2 * eps
    return None


def check_twist(f, bg, rtol=1e-8):
    bound = twist_lower_bound(bg)
    if bound is not None and not np.all(f.values > bound):
        raise ValueError(f"twist violates f > {bound:.6g} (min f = {f.values.min():.6g})")
    target = bg.p_ratio_background()
    if abs(f.mean() - target) > rtol * (1 + abs(target)):
        raise ValueError(f"mean of f is {f.mean():.12g} but the background class requires {target:.12g}")


def continuity_run(f, bg, config=None, Theta=None):
    """March t from 0 to 1 starting from phi = 0."""
    config = config or SolverConfig()
    check_twist(f, bg)
    phi = f.like(np.zeros(f.shape))
    state = newton_at_t(ContinuityState(0.0, phi, twist_at(f, 0.0)[1]), f, bg, config)
    path = [state.summary()]
    t, dt = 0.0, config.dt0
    while t < 1.0:
        t_new = min(1.0, t + dt)
        try:
            trial = ContinuityState(t_new, state.phi, twist_at(f, t_new)[1])
            new = newton_at_t(trial, f, bg, config)
        except (StepFailure, SolverError):
            dt /= 2
            if dt < config.dt_min:
                raise NonConvergence(f"path step underflow at t={t:.6g}", path) from None
            continue
        state, t = new, t_new
        path.append(state.summary())
        if state.newton_iters <= config.fast_iters:
            dt = min(2 * dt, config.dt_max)
    Theta = bg.theta.Theta if Theta is None else Theta
    phase = phase_field(state.phi, bg)
    inside = None if Theta is None else bool(np.all(phase.values < Theta))
    success = state.residual_norm <= config.tol and all(p.cone_margin > 0 for p in path)
    return SolveReport(path, state.residual_norm, phase, inside, state.phi, success)


# ---------------------------------------------------------------------------
# audits


@dataclass
class ConeMargins:
    margins: PeriodicField
    worst: float
    pair_margin: float | None = None  # min of lam_i lam_j - csc^2(theta) alone (n = 3)
    delta_prime: float | None = None
    sum_slack: float | None = None  # min over pairs of (lam_i + lam_j + 2 z_t) - 2 delta'

    @property
    def sumbound_holds(self):
        return None if self.sum_slack is None else self.sum_slack > 0


def cone_guard(phi, bg, f=None, t=1.0):
    """Per-point ``min{lam_i, lam_i lam_j - csc^2(theta)}``.

    With a twist ``f`` and n = 3 the pairwise lower bound
    ``lam_i + lam_j + 2 z_t > 2 delta'`` is also evaluated, where
    ``delta' = min(f_int) + eps`` in the rescaled twist.
    """
    lam = _lambdas(_omega_field(phi, bg), bg)
    margins = _margin_field(lam, bg)
    out = ConeMargins(phi.like(margins), float(np.min(margins)))
    if bg.n == 3:
        products = [lam[..., i] * lam[..., j] for i, j in ((0, 1), (0, 2), (1, 2))]
        out.pair_margin = float(np.min(products) - bg.theta.csc2)
    if f is not None and bg.n == 3:
        theta = bg.theta.theta
        eps = 1 / np.sin(theta) - abs(1 / np.tan(theta))
        f_int = np.sin(theta) ** 2 * f.values / 2
        delta = min(float(f_int.min()) + eps, eps)
        if delta > 0:
            ft, _ = twist_at(f, t)
            z = internal_z(ft, theta)
            sums = np.min([lam[..., i] + lam[..., j] for i, j in ((0, 1), (0, 2), (1, 2))], axis=0) + 2 * z
            out.delta_prime = delta
            out.sum_slack = float(np.min(sums - 2 * delta))
    return out


def phase_field(phi, bg):
    """Pointwise sum of the Lagrangian angles of ``omega_phi``."""
    lam = _lambdas(_omega_field(phi, bg), bg) + bg.theta.cot
    return phi.like(cc.arccot(lam).sum(axis=-1))


def phase_threshold(theta, Theta, n):
    """Largest ``eps`` such that ``f > -eps`` forces the phase below Theta."""
    if n == 1:
        return 1 / np.tan(theta) - 1 / np.tan(Theta)
    return np.sin((Theta - theta) / 2) / np.sin(theta)


def phase_interval_check(phi, f, bg, Theta):
    """True iff the angle sum stays below ``Theta`` at every grid point."""
    if not bg.theta.theta < Theta < np.pi:
        raise ValueError("need theta < Theta < pi")
    return bool(np.all(phase_field(phi, bg).values < Theta))


@dataclass
class PhaseAudit:
    threshold: float
    f_min: float
    max_phase: float
    max_phase_nonnegative_f: float  # -inf when f < 0 everywhere
    below_Theta: bool
    lifted: bool  # f > -threshold everywhere, so the check is expected to pass


def phase_audit(phi, f, bg, Theta):
    phase = phase_field(phi, bg).values
    nonneg = f.values >= 0
    eps = phase_threshold(bg.theta.theta, Theta, bg.n)
    return PhaseAudit(
        float(eps), float(f.values.min()), float(phase.max()),
        float(phase[nonneg].max()) if nonneg.any() else -np.inf,
        bool(np.all(phase < Theta)), bool(np.all(f.values > -eps)),
    )


# ---------------------------------------------------------------------------
# manufactured data


def manufactured_twist(phi_star, bg):
    """The twist ``f = P^n(Omega_{phi*}) / chi^n`` that makes ``phi*`` exact at t = 1."""
    Omega = _omega_field(phi_star, bg)
    _guard(Omega, bg)
    return phi_star.like(_p_ratio(Omega, bg))

