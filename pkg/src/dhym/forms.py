"""Exterior algebra of (p, q)-forms with constant coefficients on C^n.

A form is stored as a dense complex vector indexed by bitmasks over the 2n
generators ``dz_1, ..., dz_n, dzbar_1, ..., dzbar_n`` (bit ``j`` is ``dz_{j+1}``,
bit ``n + j`` is ``dzbar_{j+1}``). Products are computed with a precomputed
sign/target table, so this module never diagonalises anything. It is used as
an independent oracle for the subset-coefficient formulas in ``cone_core``.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np


@lru_cache(maxsize=None)
def _wedge_table(n):
    size = 1 << (2 * n)
    masks = np.arange(size)
    target = np.full((size, size), -1, dtype=np.int64)
    sign = np.zeros((size, size))
    for a in range(size):
        for b in range(size):
            if a & b:
                continue
            # sign = (-1)^{#(i in a, j in b, i > j)}
            swaps = 0
            for j in range(2 * n):
                if b >> j & 1:
                    swaps += bin(a >> (j + 1)).count("1")
            target[a, b] = a | b
            sign[a, b] = -1.0 if swaps % 2 else 1.0
    valid = target >= 0
    return masks, target, sign, valid


class Form:
    """A constant-coefficient complex differential form on C^n."""

    __slots__ = ("n", "coeffs")

    def __init__(self, n, coeffs=None):
        self.n = n
        size = 1 << (2 * n)
        if coeffs is None:
            coeffs = np.zeros(size, dtype=complex)
        self.coeffs = np.asarray(coeffs, dtype=complex)
        if self.coeffs.shape != (size,):
            raise ValueError(f"expected {size} coefficients, got {self.coeffs.shape}")

    @classmethod
    def one(cls, n):
        form = cls(n)
        form.coeffs[0] = 1.0
        return form

    @classmethod
    def from_hermitian(cls, matrix):
        """The real (1,1)-form ``i * sum a_jk dz_j ^ dzbar_k``."""
        a = np.asarray(matrix, dtype=complex)
        n = a.shape[0]
        form = cls(n)
        for j in range(n):
            for k in range(n):
                form.coeffs[(1 << j) | (1 << (n + k))] += 1j * a[j, k]
        return form

    def __add__(self, other):
        return Form(self.n, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return Form(self.n, self.coeffs - other.coeffs)

    def __neg__(self):
        return Form(self.n, -self.coeffs)

    def __mul__(self, scalar):
        return Form(self.n, self.coeffs * scalar)

    __rmul__ = __mul__

    def wedge(self, other):
        _, target, sign, _ = _wedge_table(self.n)
        ia = np.flatnonzero(self.coeffs)
        ib = np.flatnonzero(other.coeffs)
        tgt = target[np.ix_(ia, ib)]
        prod = np.outer(self.coeffs[ia], other.coeffs[ib]) * sign[np.ix_(ia, ib)]
        keep = tgt >= 0
        out = np.zeros_like(self.coeffs)
        np.add.at(out, tgt[keep], prod[keep])
        return Form(self.n, out)

    __xor__ = wedge

    def power(self, k):
        out = Form.one(self.n)
        for _ in range(k):
            out = out.wedge(self)
        return out

    def top_ratio(self, other):
        """Ratio of two top-degree forms."""
        top = (1 << (2 * self.n)) - 1
        return self.coeffs[top] / other.coeffs[top]

    def diagonal_coefficient(self, subset):
        """Coefficient against ``prod_{i in K} (i dz_i ^ dzbar_i)``."""
        basis = Form.one(self.n)
        for i in subset:
            e = Form(self.n)
            e.coeffs[(1 << i) | (1 << (self.n + i))] = 1j
            basis = basis.wedge(e)
        mask = int(np.flatnonzero(basis.coeffs)[0]) if subset else 0
        return self.coeffs[mask] / basis.coeffs[mask]

    def allclose(self, other, rtol=1e-10, atol=0.0):
        return np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol)


def _re_im_power(alpha, beta, k):
    """Real and imaginary parts of the formal power (alpha + i beta)^k."""
    re = Form(alpha.n)
    im = Form(alpha.n)
    a_pows, b_pows = [Form.one(alpha.n)], [Form.one(alpha.n)]
    for _ in range(k):
        a_pows.append(a_pows[-1].wedge(alpha))
        b_pows.append(b_pows[-1].wedge(beta))
    for j in range(k + 1):
        term = a_pows[k - j].wedge(b_pows[j]) * comb(k, j)
        unit = 1j**j
        re = re + term * unit.real
        im = im + term * unit.imag
    return re, im


def g_polynomial(alpha, beta, theta, k):
    """``Re(alpha + i beta)^k - cot(theta) Im(alpha + i beta)^k`` as a form."""
    if k == 0:
        return Form.one(alpha.n)
    re, im = _re_im_power(alpha, beta, k)
    return re - im * (np.cos(theta) / np.sin(theta))


def p_polynomial(alpha, beta, theta, k):
    cot = np.cos(theta) / np.sin(theta)
    return g_polynomial(alpha + beta * cot, beta, theta, k)


def g_closed(alpha, beta, theta, k):
    """Hand-expanded low-degree formulas for the G polynomials (k <= 3)."""
    cot = np.cos(theta) / np.sin(theta)
    a1, b1 = alpha, beta
    if k == 0:
        return Form.one(alpha.n)
    if k == 1:
        return a1 - b1 * cot
    if k == 2:
        return a1.power(2) - (a1 ^ b1) * (2 * cot) - b1.power(2)
    if k == 3:
        return (a1.power(3) - (a1.power(2) ^ b1) * (3 * cot)
                - (a1 ^ b1.power(2)) * 3 + b1.power(3) * cot)
    raise ValueError("closed forms are tabulated for k <= 3 only")


def p_closed(alpha, beta, theta, k):
    csc2 = 1.0 / np.sin(theta) ** 2
    cot = np.cos(theta) / np.sin(theta)
    if k == 0:
        return Form.one(alpha.n)
    if k == 1:
        return alpha * 1.0
    if k == 2:
        return alpha.power(2) - beta.power(2) * csc2
    if k == 3:
        return (alpha.power(3) - (alpha ^ beta.power(2)) * (3 * csc2)
                - beta.power(3) * (2 * csc2 * cot))
    raise ValueError("closed forms are tabulated for k <= 3 only")


def diagonal_coefficients(form, k):
    """Diagonal (k,k) coefficients over all subsets K of size k, lexicographic."""
    return np.array([form.diagonal_coefficient(K) for K in combinations(range(form.n), k)])
