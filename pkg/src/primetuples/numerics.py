"""Numerical kernel: exact combinatorics, Bessel series, quadrature, roots, eigenvalues.

Exact rationals are :class:`fractions.Fraction`, which is always kept in lowest
terms with a positive denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import BracketError, InvalidArgument, NumericFailure

Rational = Fraction

__all__ = [
    "Rational",
    "QuadratureRule",
    "binomial",
    "rising_factorial",
    "identity_812",
    "bessel_J",
    "bessel_series",
    "gauss_legendre",
    "bisect",
    "jacobi_eigen",
]


def binomial(n: int, k: int) -> int:
    """Exact binomial coefficient; zero when ``k > n`` or ``k < 0``."""
    if n < 0:
        raise InvalidArgument(f"binomial requires n >= 0, got {n}")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def rising_factorial(d: int, i: int) -> int:
    """d(d+1)...(d+i-1), with the empty product equal to 1."""
    out = 1
    for t in range(i):
        out *= d + t
    return out


def identity_sides(u: int, v: int, d: int) -> tuple[Fraction, Fraction]:
    """Both sides of the alternating binomial identity, in exact arithmetic."""
    lhs = Fraction(0)
    for i in range(u + 1):
        term = Fraction(binomial(u, i) * rising_factorial(d, i), math.factorial(v + d + i))
        lhs += -term if i % 2 else term
    lhs /= math.factorial(u)
    rhs = Fraction(binomial(u + v, u), math.factorial(u + v + d))
    return lhs, rhs


def identity_812(u: int, v: int, d: int) -> bool:
    r"""Check
    :math:`\frac{1}{u!}\sum_{i=0}^{u}\binom{u}{i}(-1)^i\frac{d^{\overline{i}}}{(v+d+i)!}
    = \binom{u+v}{u}\frac{1}{(u+v+d)!}` exactly.
    """
    for name, val in (("u", u), ("v", v), ("d", d)):
        if not 0 <= val <= 20:
            raise InvalidArgument(f"{name} must lie in [0, 20], got {val}")
    lhs, rhs = identity_sides(u, v, d)
    return lhs == rhs


# ---------------------------------------------------------------------------
# Bessel functions of integer order
# ---------------------------------------------------------------------------

BESSEL_MAX_ARG = 50.0


def bessel_series(order: int, x, one=1.0, rel_tol: float = 1e-18, max_terms: int = 10_000):
    """Power series for J_order(x) in whatever arithmetic ``x`` and ``one`` carry.

    Passing ``mpmath.mpf`` values evaluates the same series in extended
    precision; the float entry point is :func:`bessel_J`.
    """
    half = x / 2
    term = one
    for j in range(1, order + 1):
        term = term * half / j
    total = term
    sq = half * half
    for m in range(1, max_terms):
        term = -term * sq / (m * (m + order))
        total += term
        if abs(term) <= rel_tol * abs(total) and m > sq ** 0.5:
            return total
        if total == 0 and term == 0:
            return total
    raise NumericFailure(f"Bessel series for J_{order}({x}) did not converge")


def _bessel_ratio_series(order: int, x: float) -> float:
    """sum_m (-y)^m / (m! (order+1)_m) with y = x^2/4, in fixed-point integer arithmetic.

    The alternating terms grow to about e^x before they decay, so the sum is
    carried with that many guard bits; ``y`` is a dyadic rational and enters
    exactly.
    """
    y = Fraction(x) ** 2 / 4
    a, b = y.numerator, y.denominator
    bits = 64 + int(x * 1.4427) + 8
    term = 1 << bits
    total = term
    m = 0
    while True:
        m += 1
        term = -(term * a) // (b * m * (m + order))
        if term == 0 or (term == -1 and m > x):
            break
        total += term
    return total / (1 << bits)


def bessel_J(order: int, x: float) -> float:
    """J_order(x) for integer order 0..64 and 0 <= x <= 50 by its power series.

    The leading factor (x/2)^order / order! is taken in floating point and the
    remaining series in exact fixed-point arithmetic, which keeps full double
    accuracy despite the cancellation between terms.
    """
    if order < 0 or order > 64:
        raise InvalidArgument(f"order must be in [0, 64], got {order}")
    if x < 0:
        raise InvalidArgument("x must be non-negative")
    if x > BESSEL_MAX_ARG:
        raise NumericFailure(
            f"x={x} exceeds the supported range of the series evaluation (x <= 50)"
        )
    if x == 0:
        return 1.0 if order == 0 else 0.0
    x = float(x)
    lead = math.exp(order * math.log(x / 2) - math.lgamma(order + 1))
    return lead * _bessel_ratio_series(order, x)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights mapped to (0, 1)."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return math.fsum(self.weights * f(self.nodes))


_GL_CACHE: dict[int, QuadratureRule] = {}


def gauss_legendre(order: int) -> QuadratureRule:
    """Gauss-Legendre rule of the given order on (0, 1).

    Roots of P_order are located by Newton iteration from the Chebyshev-like
    initial guesses ``cos(pi (i - 1/4) / (n + 1/2))``.
    """
    if not 2 <= order <= 256:
        raise InvalidArgument(f"order must be in [2, 256], got {order}")
    if order in _GL_CACHE:
        return _GL_CACHE[order]
    n = order
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    else:
        raise NumericFailure(f"Newton iteration for Legendre roots of order {n} did not converge")
    # final derivative at converged nodes
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = n * (x * p1 - p0) / (x * x - 1)
    w = 2.0 / ((1 - x * x) * dp * dp)
    order_idx = np.argsort(x)
    nodes = (x[order_idx] + 1) / 2
    weights = w[order_idx] / 2
    rule = QuadratureRule(nodes=nodes, weights=weights, order=n)
    _GL_CACHE[order] = rule
    return rule


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of ``f`` in [lo, hi] by bisection, to within ``tol``.

    Uses at most ``ceil(log2((hi - lo) / tol))`` evaluations beyond the two
    endpoint checks.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise BracketError(f"f({lo})={flo} and f({hi})={fhi} have the same sign")
    steps = max(0, math.ceil(math.log2((hi - lo) / tol)))
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Symmetric eigenvalues
# ---------------------------------------------------------------------------


def jacobi_eigen(matrix: Sequence[Sequence[float]] | np.ndarray, max_sweeps: int = 100) -> list[float]:
    """All eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``1e-14 * ||A||_F``. Eigenvalues are returned in ascending order.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgument("matrix must be square")
    n = a.shape[0]
    if n > 64:
        raise InvalidArgument(f"dimension {n} exceeds 64")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale > 0 and np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise InvalidArgument("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    if n <= 1:
        return [float(v) for v in np.diag(a)]
    target = 1e-14 * np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= target:
            return sorted(float(v) for v in np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    # rotation angle below double resolution
                    t = apq / diff
                else:
                    tau = diff / (2.0 * apq)
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
    raise NumericFailure(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
