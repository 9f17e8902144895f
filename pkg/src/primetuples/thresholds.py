"""Decision formulas: when a tuple is forced to contain two (or more) primes.

Covers the elementary inequality and its table, the quadratic-form (matrix)
refinement, the Bessel variational threshold, the E_r gap bounds, and the
polynomial machinery behind the bounded-multiple-gap estimate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, NumericFailure, ResourceLimit
from .numerics import bessel_J, bisect, gauss_legendre, jacobi_eigen

K_CAP = 10_000
MATRIX_L_MAX = 12
THETA_TOL = 1e-8
THM3_K_MAX = 300
THM3_GRID = (1e-4, 1e4, 1.05)


def as_rational(x) -> Fraction:
    """Exact rational value of ``x``; floats are read through their shortest repr (0.95 -> 19/20)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x))


@lru_cache(maxsize=1)
def reference_tables() -> dict:
    with resources.files("primetuples").joinpath("data/reference_tables.json").open() as fh:
        return json.load(fh)


def known_h(k: int) -> tuple[int | None, bool]:
    """Tabulated minimal diameter h(k) and whether it is only an upper bound."""
    ref = reference_tables()
    upper = k in ref["h_k_upper_bounds"]
    for name in ("table_34", "table_matrix"):
        for _, kk, _, h in ref[name]["rows"]:
            if kk == k:
                return h, upper
    return None, False


@dataclass(frozen=True)
class ThresholdRow:
    theta: Fraction
    k: int | None
    ell_or_L: int | None
    h_k: int | None = None
    h_k_upper_bound: bool = False

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise InvalidArgument("k must be >= 1")
        if self.ell_or_L is not None and self.ell_or_L < 0:
            raise InvalidArgument("ell_or_L must be >= 0")

    @property
    def unsat(self) -> bool:
        return self.k is None

    def as_list(self) -> list:
        return [float(self.theta), self.k, self.ell_or_L, self.h_k]


def _row(theta: Fraction, k: int | None, ell: int | None) -> ThresholdRow:
    if k is None:
        return ThresholdRow(theta, None, None)
    h, upper = known_h(k)
    if h is None and k <= 12:
        from .tuples import narrowest_admissible

        h = narrowest_admissible(k).diameter
    return ThresholdRow(theta, k, ell, h, upper)


# ---------------------------------------------------------------------------
# The elementary inequality
# ---------------------------------------------------------------------------


def condition_34(k: int, ell: int, theta) -> bool:
    """(k/(k+2l+1)) ((2l+1)/(l+1)) theta > 1, decided exactly."""
    if k < 1 or ell < 0:
        raise InvalidArgument("need k >= 1 and ell >= 0")
    t = as_rational(theta)
    if not 0 < t <= 1:
        raise InvalidArgument(f"theta must lie in (0, 1], got {theta}")
    return k * (2 * ell + 1) * t.numerator > (k + 2 * ell + 1) * (ell + 1) * t.denominator


def _minimal_k_ell(t: Fraction) -> tuple[int | None, int | None]:
    for k in range(1, K_CAP + 1):
        for ell in range(0, k + 1):
            if k * (2 * ell + 1) * t.numerator > (k + 2 * ell + 1) * (ell + 1) * t.denominator:
                return k, ell
    return None, None


def table_34(theta_list: Sequence) -> list[ThresholdRow]:
    """Smallest k admitting some ell <= k, then the smallest such ell, for each theta.

    Rows with no solution up to k = 10^4 carry ``k = None`` (``row.unsat``).
    """
    rows = []
    for theta in theta_list:
        t = as_rational(theta)
        if not Fraction(1, 2) < t <= 1:
            raise InvalidArgument(f"theta must lie in (1/2, 1], got {theta}")
        rows.append(_row(t, *_minimal_k_ell(t)))
    return rows


# ---------------------------------------------------------------------------
# The quadratic-form refinement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightMatrix:
    """Exact (L+1)x(L+1) matrix of the quadratic form in the weight coefficients."""

    k: int
    L: int
    theta: Fraction
    entries: tuple[tuple[Fraction, ...], ...]

    def to_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries])

    def scaled_array(self) -> np.ndarray:
        """D M D with D = diag(sqrt((k+2i)!)); same inertia, no underflow at large k."""
        n = self.L + 1
        out = np.empty((n, n))
        lg = [math.lgamma(self.k + 2 * i + 1) for i in range(n)]
        for i in range(n):
            for j in range(i, n):
                s = i + j
                bracket = _bracket(self.k, i, j, self.theta)
                scale = math.exp(0.5 * (lg[i] + lg[j]) - math.lgamma(self.k + s + 1))
                out[i, j] = out[j, i] = math.comb(s, i) * scale * float(bracket)
        return out


def _bracket(k: int, i: int, j: int, theta: Fraction) -> Fraction:
    s = i + j
    return Fraction(k * (s + 2) * (s + 1), (i + 1) * (j + 1) * (k + s + 1)) - 2 / theta


def weight_matrix(k: int, L: int, theta) -> WeightMatrix:
    """M_ij = C(i+j, i) / (k+i+j)! * (k(s+2)(s+1)/((i+1)(j+1)(k+s+1)) - 2/theta), s = i + j."""
    if k < 1 or L < 0:
        raise InvalidArgument("need k >= 1 and L >= 0")
    t = as_rational(theta)
    if t <= 0:
        raise InvalidArgument("theta must be positive")
    rows = [[Fraction(0)] * (L + 1) for _ in range(L + 1)]
    for i in range(L + 1):
        for j in range(i, L + 1):
            s = i + j
            v = Fraction(math.comb(s, i), math.factorial(k + s)) * _bracket(k, i, j, t)
            rows[i][j] = rows[j][i] = v
    return WeightMatrix(k, L, t, tuple(tuple(r) for r in rows))


def max_eigenvalue(M: WeightMatrix | np.ndarray | Sequence[Sequence[float]]) -> float:
    """Largest eigenvalue by cyclic Jacobi rotations."""
    a = M.to_array() if isinstance(M, WeightMatrix) else M
    return jacobi_eigen(a)[-1]


def negative_definite(M: WeightMatrix) -> bool:
    """Exact test that every eigenvalue is negative, via the pivots of -M = L D L^T."""
    a = [[-x for x in row] for row in M.entries]
    n = len(a)
    for i in range(n):
        piv = a[i][i]
        if piv <= 0:
            return False
        for r in range(i + 1, n):
            f = a[r][i] / piv
            if f:
                for c in range(i + 1, n):
                    a[r][c] -= f * a[i][c]
    return True


def matrix_has_positive_eigenvalue(k: int, L: int, theta) -> bool:
    """True when the weight matrix is not negative definite.

    Decided in rational arithmetic: near the threshold the top eigenvalue is
    far below double-precision resolution of the matrix entries. A zero
    eigenvalue counts as positive, which only happens on a measure-zero set
    of theta.
    """
    return not negative_definite(weight_matrix(k, L, theta))


def theta_threshold_matrix(k: int, L: int, tol: float = THETA_TOL) -> float | None:
    """Infimum of theta in (1/2, 1] at which the weight matrix gains a positive eigenvalue.

    The matrix grows in the Loewner order as theta increases (the subtracted
    part is a positive definite moment matrix times 2/theta), so the sign of
    the top eigenvalue changes at most once. Returns None when it stays
    non-positive on the whole interval and 1/2 when it is positive already
    at the left end.
    """
    def f(th: float) -> float:
        return 1.0 if matrix_has_positive_eigenvalue(k, L, Fraction(th)) else -1.0

    if f(1.0) <= 0:
        return None
    if f(0.5) > 0:
        return 0.5
    return bisect(f, 0.5, 1.0, tol=tol)


def k6_closed_form() -> float:
    """Smaller root of 15 t^2 - 64 t + 48, the k = 6, L = 1 threshold."""
    return 4 * (8 - math.sqrt(19)) / 15


def matrix_table(theta_list: Sequence, L_max: int = MATRIX_L_MAX, k_max: int = K_CAP) -> list[ThresholdRow]:
    """Smallest k with a positive eigenvalue for some L <= L_max, then the smallest such L.

    The top eigenvalue is non-decreasing in L (each matrix is a principal
    block of the next), so only L_max needs checking for each k.
    """
    rows = []
    for theta in theta_list:
        t = as_rational(theta)
        if not Fraction(1, 2) < t <= 1:
            raise InvalidArgument(f"theta must lie in (1/2, 1], got {theta}")
        found = None
        for k in range(1, k_max + 1):
            if matrix_has_positive_eigenvalue(k, L_max, t):
                L = next(L for L in range(L_max + 1) if matrix_has_positive_eigenvalue(k, L, t))
                found = (k, L)
                break
        rows.append(_row(t, *(found or (None, None))))
    return rows


# ---------------------------------------------------------------------------
# Bessel variational threshold
# ---------------------------------------------------------------------------

BESSEL_DOUBLE_K_MAX = 25
_SMALL_Y = 1e-8


def bessel_q(k: int, beta: float, y):
    """q(y) = J_{k-2}(2 sqrt(beta)) - y^(1-k/2) J_{k-2}(2 sqrt(beta y))."""
    n = k - 2
    a = bessel_J(n, 2 * math.sqrt(beta))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty_like(y)
    limit = beta ** (n / 2) / math.factorial(n)
    for i, yi in enumerate(y):
        if yi < _SMALL_Y:
            out[i] = a - limit
        else:
            out[i] = a - yi ** (-n / 2) * bessel_J(n, 2 * math.sqrt(beta * yi))
    return out


def bessel_q_prime(k: int, beta: float, y):
    """q'(y) = sqrt(beta) y^(-(k-1)/2) J_{k-1}(2 sqrt(beta y))."""
    n = k - 2
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty_like(y)
    limit = beta ** ((n + 2) / 2) / math.factorial(n + 1)
    for i, yi in enumerate(y):
        if yi < _SMALL_Y:
            out[i] = limit
        else:
            out[i] = math.sqrt(beta) * yi ** (-(n + 1) / 2) * bessel_J(n + 1, 2 * math.sqrt(beta * yi))
    return out


def bessel_ratio(k: int, beta: float) -> float:
    """Int y^(k-2) q^2 / int y^(k-1) q'^2 over (0, 1) by 64-point Gauss-Legendre."""
    rule = gauss_legendre(64)
    num = rule.integrate(lambda y: y ** (k - 2) * bessel_q(k, beta, y) ** 2)
    den = rule.integrate(lambda y: y ** (k - 1) * bessel_q_prime(k, beta, y) ** 2)
    if not den > 0:
        raise NumericFailure(f"vanishing denominator at k={k}, beta={beta}")
    return num / den


def bessel_ratio_mp(k: int, beta: float) -> float:
    """The same ratio in extended precision, integrating the power series of q term by term.

    Writing q(y) = sum_{m>=1} c_m (1 - y^m) turns both integrals into double
    sums of c_m c_m' over rational kernels, free of quadrature error; the
    working precision grows with 2 sqrt(beta) to absorb cancellation.
    """
    import mpmath

    x = 2 * math.sqrt(beta)
    with mpmath.workdps(int(x / math.log(10)) + 30):
        n = k - 2
        b = mpmath.mpf(beta)
        tol = mpmath.mpf(10) ** (-mpmath.mp.dps)
        t = b ** (mpmath.mpf(n) / 2) / mpmath.factorial(n)
        c = []
        m = 0
        while True:
            m += 1
            t = -t * b / (m * (m + n))
            c.append(t)
            if m > x + 20 and abs(t) < tol:
                break
        M = len(c)
        S0 = mpmath.fsum(c)
        S1 = mpmath.fsum(cm / (k - 1 + i) for i, cm in enumerate(c, 1))
        A3 = []
        B = []
        for s in range(2, 2 * M + 1):
            lo, hi = max(1, s - M), min(M, s - 1)
            pairs = [c[i - 1] * c[s - i - 1] for i in range(lo, hi + 1)]
            A3.append(mpmath.fsum(pairs) / (k - 1 + s))
            B.append(mpmath.fsum(i * (s - i) * p for i, p in zip(range(lo, hi + 1), pairs)) / (k + s - 2))
        num = S0 * S0 / (k - 1) - 2 * S0 * S1 + mpmath.fsum(A3)
        return float(num / mpmath.fsum(B))


def bessel_beta(k: int, method: str = "auto") -> float:
    """Smallest beta > 0 with 1/beta equal to the variational ratio.

    The root is bracketed by scanning x = 2 sqrt(beta) upward (steps of 1/2
    in double precision, 2 in extended precision; consecutive sign changes
    sit at least pi apart in x) up to beta = k^2, then refined by bisection.
    """
    if k < 3:
        raise InvalidArgument("k must be >= 3")
    if method == "auto":
        method = "double" if k <= BESSEL_DOUBLE_K_MAX else "mp"
    if method == "double":
        if k > BESSEL_DOUBLE_K_MAX:
            raise InvalidArgument(f"double-precision path supports k <= {BESSEL_DOUBLE_K_MAX}")
        ratio, step = bessel_ratio, 0.5
    elif method == "mp":
        ratio, step = bessel_ratio_mp, 2.0
    else:
        raise InvalidArgument(f"unknown method {method!r}")

    def g(beta: float) -> float:
        return 1.0 / beta - ratio(k, beta)

    x_max = 2.0 * k
    x = step
    prev_beta, prev = x * x / 4, g(x * x / 4)
    while x < x_max:
        x = min(x + step, x_max)
        beta = x * x / 4
        val = g(beta)
        if (val < 0) != (prev < 0):
            return bisect(g, prev_beta, beta, tol=1e-10 * beta)
        prev_beta, prev = beta, val
    raise NumericFailure(f"no root of the variational equation for k={k} with beta <= k^2")


def bessel_threshold(k: int, method: str = "auto") -> float:
    """Theta above which the optimal smooth weight certifies two primes in every admissible k-tuple."""
    return 2 * bessel_beta(k, method) / (k * (k - 1))


def bessel_smallest_k(theta, k_start: int = 3, k_max: int = 400) -> int:
    """Smallest k with bessel_threshold(k) < theta (thresholds decrease in k)."""
    t = float(as_rational(theta))
    for k in range(k_start, k_max + 1):
        if bessel_threshold(k) < t:
            return k
    raise ResourceLimit(f"no k <= {k_max} reaches theta={theta}")


# ---------------------------------------------------------------------------
# Gap bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErBounds:
    r: int
    theta: float
    simple: float
    thm3: float | None
    unconditional: float


def er_bounds(r: int, theta: float) -> ErBounds:
    """max(r - 2 theta, 0); (sqrt r - sqrt(2 theta))^2 for r >= 2; (sqrt r - 1)^2."""
    if r < 1:
        raise InvalidArgument("r must be >= 1")
    if not 0.5 <= theta <= 1:
        raise InvalidArgument(f"theta must lie in [1/2, 1], got {theta}")
    thm3 = (math.sqrt(r) - math.sqrt(2 * theta)) ** 2 if r >= 2 else None
    return ErBounds(r, theta, max(r - 2 * theta, 0.0), thm3, (math.sqrt(r) - 1) ** 2)


@dataclass(frozen=True)
class Thm3Params:
    k: int
    ell: int
    nu: int
    theta0: float
    Theta: float
    phi: float
    a: float

    @classmethod
    def standard(cls, ell: int, nu: int, theta0: float, k: int | None = None) -> "Thm3Params":
        """phi = 1/(l+1), Theta = theta0 (1 - phi)/2, a = 2 - phi; k defaults to (l+1)^2."""
        if ell < 1 or nu < 1:
            # ell = 0 gives Theta = 0
            raise InvalidArgument("need ell >= 1 and nu >= 1")
        if not 0.5 <= theta0 <= 1:
            raise InvalidArgument(f"theta0 must lie in [1/2, 1], got {theta0}")
        phi = 1.0 / (ell + 1)
        k = (ell + 1) ** 2 if k is None else k
        return cls(k, ell, nu, theta0, theta0 * (1 - phi) / 2, phi, 2 - phi)


def _thm3_terms(params: Thm3Params, nu: int, x: float) -> tuple[list[float], float]:
    """Signed mantissas and common log scale of the polynomial's terms."""
    k, ell = params.k, params.ell
    if k > THM3_K_MAX:
        raise ResourceLimit(f"k={k} exceeds {THM3_K_MAX}; squared binomials leave the float range")
    if x <= 0:
        raise InvalidArgument("x must be positive")
    lx = math.log(x)
    lcomb = [math.lgamma(k + 1) - math.lgamma(r + 1) - math.lgamma(k - r + 1) for r in range(k + 1)]
    logs, signs = [], []
    for r in range(k + 1):
        bracket = 1 + x * (4 * (1 - params.phi / 2) * k / (r + 2 * ell + 1) - nu / params.Theta)
        if bracket == 0:
            continue
        lt = 2 * lcomb[r] + r * lx - (math.lgamma(r + 2 * ell + 1) - math.lgamma(r + 1))
        logs.append(lt + math.log(abs(bracket)))
        signs.append(1.0 if bracket > 0 else -1.0)
    if not logs:
        return [0.0], 0.0
    top = max(logs)
    return [s * math.exp(l - top) for s, l in zip(signs, logs)], top


def thm3_polynomial(params: Thm3Params, nu: int, x: float) -> float:
    """sum_r C(k,r)^2 x^r / ((r+1)...(r+2l)) (1 + x (4(1 - phi/2)k/(r+2l+1) - nu/Theta))."""
    mant, top = _thm3_terms(params, nu, x)
    s = math.fsum(mant)
    if s == 0:
        return 0.0
    try:
        return s * math.exp(top)
    except OverflowError:
        return math.copysign(math.inf, s)


def _thm3_sign(params: Thm3Params, nu: int, x: float) -> float:
    mant, _ = _thm3_terms(params, nu, x)
    return math.fsum(mant)


def thm3_first_nonpositive(params: Thm3Params, nu: int | None = None) -> float | None:
    """Smallest x > 0 with P(x) <= 0: geometric scan, then bisection in log x."""
    nu = params.nu if nu is None else nu
    lo, hi, ratio = THM3_GRID
    prev = lo
    if _thm3_sign(params, nu, lo) <= 0:
        return lo
    x = lo
    while x < hi:
        x = min(x * ratio, hi)
        if _thm3_sign(params, nu, x) <= 0:
            t = bisect(lambda u: _thm3_sign(params, nu, math.exp(u)), math.log(prev), math.log(x), tol=1e-9)
            return math.exp(t)
        prev = x
    return None


def min_lambda(k: int, ell: int, nu: int, theta0: float) -> float | None:
    """Theta / x_crit, the interval-length multiplier certified by the polynomial.

    (nu, theta0) = (2, 1) is already settled by the simple bound and returns
    0.0. None means the polynomial stayed positive on the scanned grid.
    """
    if nu == 2 and theta0 == 1:
        return 0.0
    params = Thm3Params.standard(ell, nu, theta0, k)
    x = thm3_first_nonpositive(params)
    if x is None:
        return None
    return params.Theta / x


def z0_identity_residual(nu: int, theta0: float) -> float:
    """1 + (4(z0+1) - 2 nu/theta0) / z0^2 at z0 = sqrt(2 nu/theta0) - 2 (zero in exact arithmetic)."""
    c = 2 * nu / theta0
    z0 = math.sqrt(c) - 2
    if z0 <= 0:
        raise InvalidArgument(f"z0 = {z0} is not positive for nu={nu}, theta0={theta0}")
    return 1 + (4 * (z0 + 1) - c) / (z0 * z0)
