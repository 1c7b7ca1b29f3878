"""Spectral and algebraic identities for the noise-difference matrix.

The covariance of consecutive differences of i.i.d. noise is, up to the
noise variance, the tridiagonal Toeplitz matrix with 2 on the diagonal and
-1 on the first off-diagonals.  Everything the block likelihood needs about
that matrix family (eigenvalues of diagonal shifts, resolvent trace
integrals, LDL pivot recursions, determinants, and entrywise inverses) is
collected and cross-checked here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate


def noise_diff_matrix(l: int) -> np.ndarray:
    """Dense l-by-l tridiagonal matrix with 2 on the diagonal, -1 off it."""
    if l < 1:
        raise ValueError(f"matrix size must be >= 1, got {l}")
    m = 2.0 * np.eye(l)
    off = np.arange(l - 1)
    m[off, off + 1] = -1.0
    m[off + 1, off] = -1.0
    return m


def shifted_eigenvalues(a: float, l: int) -> np.ndarray:
    """Eigenvalues of a*I + M(l), ascending.

    M(l) is the noise-difference matrix; its spectrum has the closed form
    ``a + 2*(1 - cos(i*pi/(l+1)))`` for i = 1..l.
    """
    if l < 1:
        raise ValueError(f"matrix size must be >= 1, got {l}")
    i = np.arange(1, l + 1)
    return a + 2.0 * (1.0 - np.cos(i * np.pi / (l + 1)))


def resolvent_integral(p: int, a: float) -> float:
    """Integral of (a + 2(1-cos x))^(-p) over (0, pi).

    Closed forms are used for p = 1 and p = 2; higher orders fall back to
    adaptive quadrature at 1e-10 relative tolerance.
    """
    if a <= 0:
        raise ValueError(f"shift a must be > 0, got {a}")
    if p == 1:
        return np.pi / np.sqrt(a * (4.0 + a))
    if p == 2:
        return np.pi * (2.0 + a) * a ** -1.5 * (4.0 + a) ** -1.5
    val, _ = integrate.quad(
        lambda x: (a + 2.0 * (1.0 - np.cos(x))) ** -p, 0.0, np.pi,
        epsrel=1e-10, epsabs=0.0, limit=200,
    )
    return val


def resolvent_integral_deriv(p: int, a: float) -> float:
    """Same as :func:`resolvent_integral` but via repeated differentiation.

    The order-p integral equals the (p-1)-th derivative of the order-1
    closed form times (-1)^(p-1)/(p-1)!.  Supported for p <= 3; used as an
    independent cross-check of the quadrature route.
    """
    if a <= 0:
        raise ValueError(f"shift a must be > 0, got {a}")
    if p == 1:
        return np.pi / np.sqrt(a * (4.0 + a))
    if p == 2:
        # -d/da [pi (a(4+a))^(-1/2)] = pi (2+a) (a(4+a))^(-3/2)
        return np.pi * (2.0 + a) * (a * (4.0 + a)) ** -1.5
    if p == 3:
        # (1/2) d^2/da^2 [pi (a(4+a))^(-1/2)]
        g = a * (4.0 + a)
        return 0.5 * np.pi * (3.0 * (2.0 + a) ** 2 * g**-2.5 - g**-1.5)
    raise ValueError(f"derivative route implemented for p <= 3, got {p}")


def resolvent_cross_integral(p: int, q: int, a: float, b: float) -> float:
    """Integral of (a + 2(1-cos x))^(-p) (b + 2(1-cos x))^(-q) over (0, pi)."""
    if a <= 0 or b <= 0:
        raise ValueError(f"shifts must be > 0, got a={a}, b={b}")
    val, _ = integrate.quad(
        lambda x: (a + 2.0 * (1.0 - np.cos(x))) ** -p
        * (b + 2.0 * (1.0 - np.cos(x))) ** -q,
        0.0, np.pi, epsrel=1e-10, epsabs=0.0, limit=200,
    )
    return val


def logdet_integral_difference(a: float, b: float) -> float:
    """Closed form of the integral of log((a+2(1-cos x))/(b+2(1-cos x)))."""
    if a <= 0 or b <= 0:
        raise ValueError(f"shifts must be > 0, got a={a}, b={b}")
    return 2.0 * np.pi * (
        np.log(np.sqrt(a) + np.sqrt(4.0 + a)) - np.log(np.sqrt(b) + np.sqrt(4.0 + b))
    )


@dataclass(frozen=True)
class PivotSequences:
    """LDL pivots of eps*I + M(l) and of its corner-reduced variant.

    ``p`` solves p_1 = 2+eps, p_{j+1} = 2+eps-1/p_j (Gaussian elimination
    pivots of the shifted matrix, so their product is its determinant);
    ``p_alt`` starts from 1+eps instead.  ``p_limit`` is the common fixed
    point 1 + eps/2 + sqrt(eps + eps^2/4) of the recursion.
    """

    eps: float
    p: np.ndarray
    p_alt: np.ndarray

    @property
    def p_limit(self) -> float:
        return pivot_limit(self.eps)


def pivot_limit(eps: float) -> float:
    """Fixed point of the pivot recursion p -> 2 + eps - 1/p."""
    return 1.0 + eps / 2.0 + np.sqrt(eps + eps * eps / 4.0)


def pivot_sequences(eps: float, l: int) -> PivotSequences:
    """First l terms of both pivot recursions for the shift eps >= 0."""
    if eps < 0:
        raise ValueError(f"shift eps must be >= 0, got {eps}")
    if l < 1:
        raise ValueError(f"length must be >= 1, got {l}")
    p = np.empty(l)
    q = np.empty(l)
    p[0] = 2.0 + eps
    q[0] = 1.0 + eps
    for j in range(l - 1):
        p[j + 1] = 2.0 + eps - 1.0 / p[j]
        q[j + 1] = 2.0 + eps - 1.0 / q[j]
    return PivotSequences(eps=eps, p=p, p_alt=q)


def shifted_determinant(eps: float, l: int) -> float:
    """det(eps*I + M(l)) as the product of the LDL pivots."""
    return float(np.prod(pivot_sequences(eps, l).p))


def shifted_inverse(eps: float, l: int) -> np.ndarray:
    """Entrywise inverse of eps*I + M(l) from cumulative pivot products.

    For row k <= column k', the inverse entry is
    ``P(k-1) * P(l-k') / P(l)`` with P(j) the product of the first j
    pivots; the diagonal case is the classical two-sided cofactor ratio.
    Valid for eps >= 0 (the unshifted matrix has determinant l+1 > 0).
    """
    piv = pivot_sequences(eps, l).p
    # cumulative products P(0)=1, P(j)=p_1...p_j
    P = np.concatenate(([1.0], np.cumprod(piv)))
    k = np.arange(1, l + 1)
    lo = np.minimum.outer(k, k)
    hi = np.maximum.outer(k, k)
    return P[lo - 1] * P[l - hi] / P[l]
