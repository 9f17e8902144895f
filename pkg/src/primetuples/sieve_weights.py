"""Truncated divisor-sum weights, their moments, and the predicted main terms.

Two independent routes are kept for every moment that admits one:

* the *per-n* route factors each shift ``n + h_i`` and sums over divisors of
  ``P_H(n)`` directly;
* the *per-d* route swaps the order of summation and counts, for each
  squarefree ``d <= R``, the ``n`` with ``d | P_H(n)`` exactly.

Large-N brute-force sums use a third evaluation, ``weight_array``, which
marks every residue class ``n = r (mod d)`` with ``d | P_H(r)`` in a numpy
buffer.
"""

from __future__ import annotations

import math
import multiprocessing as mp
import warnings as _warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, Sequence

import numpy as np

from .errors import DegenerateWeight, InvalidArgument, OutOfRange, ResourceLimit
from .primes import PrimeTable, build_prime_table, factorize, squarefree_primes
from .singular_series import singular_series
from .tuples import HTuple, as_tuple

PAIR_EXACT_BUDGET = 400_000
SINGULAR_SERIES_TRUNCATION = 10**6


# ---------------------------------------------------------------------------
# Pointwise weights
# ---------------------------------------------------------------------------


def _signed_divisor_logs(primes: Sequence[int], R: float) -> list[tuple[int, float]]:
    """(mu(d), log d) for squarefree d <= R built from ``primes``."""
    out = [(1, 0.0)]
    logR = math.log(R)
    for p in sorted(primes):
        lp = math.log(p)
        out += [(-s, ld + lp) for s, ld in out if ld + lp <= logR + 1e-12]
    return out


def lambda_R(n: int, R: float, table: PrimeTable | None = None) -> float:
    """Sum over d | n, d <= R of mu(d) log(R/d)."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    logR = math.log(R)
    return math.fsum(s * (logR - ld) for s, ld in _signed_divisor_logs(list(factorize(n, table)), R))


def generalized_von_mangoldt(n: int, k: int, table: PrimeTable | None = None) -> float:
    """Sum over d | n of mu(d) (log(n/d))^k; vanishes when n has more than k prime factors."""
    if n < 1 or k < 1:
        raise InvalidArgument("need n >= 1 and k >= 1")
    primes = list(factorize(n, table))
    logn = math.log(n)
    out = [(1, 0.0)]
    for p in primes:
        lp = math.log(p)
        out += [(-s, ld + lp) for s, ld in out]
    return math.fsum(s * (logn - ld) ** k for s, ld in out)


@dataclass(frozen=True)
class WeightParams:
    H: HTuple
    ell: int
    R: float

    def __post_init__(self):
        object.__setattr__(self, "H", as_tuple(self.H))
        if not 0 <= self.ell <= self.H.k:
            raise InvalidArgument(f"need 0 <= ell <= k, got ell={self.ell}, k={self.H.k}")
        if self.R < 2:
            raise InvalidArgument(f"R must be >= 2, got {self.R}")

    @property
    def degree(self) -> int:
        return self.H.k + self.ell


def _tuple_primes(n: int, H: HTuple, table: PrimeTable | None) -> set[int]:
    ps: set[int] = set()
    for h in H.shifts:
        ps.update(factorize(n + h, table))
    return ps


def lambda_R_weight(n: int, params: WeightParams, table: PrimeTable | None = None) -> float:
    """(1/(k+l)!) * sum over d | P_H(n), d <= R of mu(d) (log(R/d))^(k+l)."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    m = params.degree
    logR = math.log(params.R)
    terms = _signed_divisor_logs(_tuple_primes(n, params.H, table), params.R)
    return math.fsum(s * (logR - ld) ** m for s, ld in terms) / math.factorial(m)


# ---------------------------------------------------------------------------
# Residue-class machinery
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def squarefree_upto(R: int) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """Every squarefree d <= R with its ascending prime factors."""
    R = int(R)
    if R < 1:
        return ()
    spf = list(range(R + 1))
    for p in range(2, math.isqrt(R) + 1):
        if spf[p] == p:
            for m in range(p * p, R + 1, p):
                if spf[m] == m:
                    spf[m] = p
    out = [(1, ())]
    for d in range(2, R + 1):
        ps = []
        x = d
        ok = True
        while x > 1:
            p = spf[x]
            x //= p
            if x % p == 0:
                ok = False
                break
            ps.append(p)
        if ok:
            out.append((d, tuple(ps)))
    return tuple(out)


def _crt_extend(residues: list[int], d: int, roots_p: Sequence[int], p: int) -> list[int]:
    inv = pow(d, -1, p)
    return [a + d * (((b - a) * inv) % p) for a in residues for b in roots_p]


def tuple_roots(H: HTuple, primes: Sequence[int]) -> list[int]:
    """Residues b mod d (d = prod primes) with d | P_H(b)."""
    res = [0]
    d = 1
    for p in primes:
        res = _crt_extend(res, d, sorted({(-h) % p for h in H.shifts}), p)
        d *= p
    return res


def _count_in_classes(residues: Sequence[int], m: int, N: int) -> int:
    """#{1 <= n <= N : n mod m in residues}."""
    q, rem = divmod(N, m)
    extra = sum(1 for r in residues if 1 <= (r if r else m) <= rem)
    return len(residues) * q + extra


def divisor_residue_count(H, d: int, N: int) -> int:
    """Exact #{1 <= n <= N : d | P_H(n)} for squarefree d."""
    H = as_tuple(H)
    return _count_in_classes(tuple_roots(H, squarefree_primes(d)), d, N)


def weight_array(H, ell: int, R: float, lo: int, hi: int) -> np.ndarray:
    """Lambda_R(n; H, ell) for every n in [lo, hi], by marking residue classes."""
    H = as_tuple(H)
    if lo < 1 or hi < lo:
        raise InvalidArgument(f"bad range [{lo}, {hi}]")
    m = H.k + ell
    logR = math.log(R)
    w = np.zeros(hi - lo + 1)
    roots: dict[int, list[int]] = {1: [0]}
    fact = math.factorial(m)
    for d, ps in squarefree_upto(int(math.floor(R))):
        if d > 1:
            p = ps[-1]
            prev = d // p
            roots[d] = _crt_extend(roots[prev], prev, sorted({(-h) % p for h in H.shifts}), p)
        L = logR - math.log(d)
        if L <= 0:
            continue
        c = (-1) ** len(ps) * L**m / fact
        for r in roots[d]:
            start = (r - lo) % d
            w[start::d] += c
    return w


def product_weight_array(H, R: float, lo: int, hi: int) -> np.ndarray:
    """prod_i Lambda_R(n + h_i) for n in [lo, hi]."""
    H = as_tuple(H)
    base = weight_array(HTuple((0,)), 0, R, lo + H.shifts[0], hi + H.shifts[-1])
    out = np.ones(hi - lo + 1)
    for h in H.shifts:
        off = h - H.shifts[0]
        out *= base[off : off + hi - lo + 1]
    return out


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class MomentReport:
    N: int
    R: float
    brute_force: float | None
    fast_path: float | None
    predicted_main: float
    params: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def ratio(self) -> float | None:
        observed = self.brute_force if self.brute_force is not None else self.fast_path
        if observed is None or self.predicted_main == 0:
            return None
        return observed / self.predicted_main

    @property
    def paths_agree(self) -> bool | None:
        if self.brute_force is None or self.fast_path is None:
            return None
        scale = max(abs(self.brute_force), abs(self.fast_path), 1e-300)
        return abs(self.brute_force - self.fast_path) <= 1e-6 * scale

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["ratio"] = self.ratio
        return out


def _range_warnings(N: int, R: float, M: int, which: str, h: int) -> list[str]:
    out = []
    logN = math.log(N) if N > 1 else 1.0
    if which == "moment":
        lim = math.sqrt(N) * logN ** (-4 * M)
        if R > lim:
            out.append(f"R={R:g} exceeds N^(1/2)(log N)^(-4M)={lim:.3g}; asymptotic regime not reached")
    else:
        lim = N**0.25
        if R > lim:
            out.append(f"R={R:g} exceeds N^(1/4)={lim:.3g}; outside the unconditional range")
        if h > R:
            out.append(f"largest shift {h} exceeds R={R:g}")
    out.append("main-term agreement is asymptotic; judge desk-scale ratios by trend, not tolerance")
    return out


def _singular(H: HTuple) -> float:
    P = max(SINGULAR_SERIES_TRUNCATION, 2 * H.diameter, 2 * H.k**2)
    return singular_series(H, P).value


def _need_table(table: PrimeTable | None, upto: int) -> PrimeTable:
    if table is None:
        return build_prime_table(max(upto, 100))
    if table.limit < upto:
        raise OutOfRange(f"prime table limit {table.limit} below required {upto}")
    return table


# ---------------------------------------------------------------------------
# First moment
# ---------------------------------------------------------------------------

_WORKER_STATE: dict[str, Any] = {}


def _per_n_chunk(lo: int, hi: int) -> float:
    spf = _WORKER_STATE["spf"]
    shifts = _WORKER_STATE["shifts"]
    R = _WORKER_STATE["R"]
    m = _WORKER_STATE["m"]
    logR = math.log(R)
    log = math.log
    parts = []
    for n in range(lo, hi + 1):
        ps = set()
        for h in shifts:
            x = n + h
            while x > 1:
                p = spf[x]
                ps.add(p)
                x //= p
                while x % p == 0:
                    x //= p
        terms = [(1, 0.0)]
        for p in sorted(ps):
            lp = log(p)
            if lp > logR:
                break
            terms += [(-s, ld + lp) for s, ld in terms if ld + lp <= logR]
        parts.append(math.fsum(s * (logR - ld) ** m for s, ld in terms))
    return math.fsum(parts)


def _first_moment_per_n(H: HTuple, R: float, N: int, table: PrimeTable, workers: int) -> float:
    _WORKER_STATE.update(
        spf=table.smallest_factor[: N + H.shifts[-1] + 1].tolist(),
        shifts=H.shifts,
        R=R,
        m=H.k,
    )
    try:
        if workers <= 1 or N < 20_000:
            total = _per_n_chunk(1, N)
        else:
            step = -(-N // (4 * workers))
            bounds = [(lo, min(lo + step - 1, N)) for lo in range(1, N + 1, step)]
            ctx = mp.get_context("fork")
            with ctx.Pool(workers) as pool:
                total = math.fsum(pool.starmap(_per_n_chunk, bounds))
    finally:
        _WORKER_STATE.clear()
    return total / math.factorial(H.k)


def _first_moment_per_d(H: HTuple, R: float, N: int) -> float:
    k = H.k
    logR = math.log(R)
    terms = []
    for d, ps in squarefree_upto(int(math.floor(R))):
        L = logR - math.log(d)
        if L <= 0:
            continue
        cnt = _count_in_classes(tuple_roots(H, ps), d, N)
        terms.append((-1) ** len(ps) * L**k * cnt)
    return math.fsum(terms) / math.factorial(k)


def main_term_sum(H, R: float) -> float:
    """(1/k!) sum over d <= R of mu(d) nu_d(H)/d (log(R/d))^k: the N-coefficient of the first moment."""
    H = as_tuple(H)
    k = H.k
    logR = math.log(R)
    terms = []
    for d, ps in squarefree_upto(int(math.floor(R))):
        L = logR - math.log(d)
        if L <= 0:
            continue
        nu = math.prod(len({h % p for h in H.shifts}) for p in ps)
        terms.append((-1) ** len(ps) * nu / d * L**k)
    return math.fsum(terms) / math.factorial(k)


def first_moment(
    H,
    R: float,
    N: int,
    path: str = "both",
    table: PrimeTable | None = None,
    workers: int = 1,
) -> MomentReport:
    """Sum of Lambda_R(n; H) over n <= N, against the prediction S(H) N.

    ``path`` is ``"per_n"``, ``"per_d"`` or ``"both"``; the per-n value is
    reported as ``brute_force`` and the per-d value as ``fast_path``.
    """
    H = as_tuple(H)
    if path not in ("per_n", "per_d", "both"):
        raise InvalidArgument(f"unknown path {path!r}")
    if R < 2:
        raise InvalidArgument("R must be >= 2")
    brute = fast = None
    if path in ("per_n", "both"):
        tbl = _need_table(table, N + H.shifts[-1])
        brute = _first_moment_per_n(H, R, N, tbl, workers)
    if path in ("per_d", "both"):
        fast = _first_moment_per_d(H, R, N)
    S = _singular(H)
    warns = _range_warnings(N, R, H.k, "moment", H.shifts[-1])
    if S == 0:
        warns.insert(0, "prediction-degenerate: tuple is inadmissible, predicted main term is 0")
    return MomentReport(
        N=N,
        R=R,
        brute_force=brute,
        fast_path=fast,
        predicted_main=S * N,
        params={"experiment": "first_moment", "H": str(H), "ell": 0, "singular_series": S},
        warnings=warns,
    )


# ---------------------------------------------------------------------------
# Pair correlations
# ---------------------------------------------------------------------------


def _pair_exact(H1: HTuple, l1: int, H2: HTuple, l2: int, R: float, N: int) -> float | None:
    """Double divisor sum with exact joint residue counts; None when over budget."""
    sq = [(d, ps) for d, ps in squarefree_upto(int(math.floor(R))) if math.log(d) < math.log(R)]
    if len(sq) ** 2 > PAIR_EXACT_BUDGET:
        return None
    m1, m2 = H1.k + l1, H2.k + l2
    logR = math.log(R)
    r1 = {}
    r2 = {}

    def roots(H, p, cache):
        if p not in cache:
            cache[p] = sorted({(-h) % p for h in H.shifts})
        return cache[p]

    terms = []
    for d, pd in sq:
        a = (-1) ** len(pd) * (logR - math.log(d)) ** m1
        sd = set(pd)
        for e, pe in sq:
            b = (-1) ** len(pe) * (logR - math.log(e)) ** m2
            se = set(pe)
            res = [0]
            mod = 1
            for p in sorted(sd | se):
                if p in sd and p in se:
                    rp = sorted(set(roots(H1, p, r1)) & set(roots(H2, p, r2)))
                elif p in sd:
                    rp = roots(H1, p, r1)
                else:
                    rp = roots(H2, p, r2)
                if not rp:
                    res = []
                    break
                res = _crt_extend(res, mod, rp, p)
                mod *= p
            if res:
                terms.append(a * b * _count_in_classes(res, mod, N))
    return math.fsum(terms) / (math.factorial(m1) * math.factorial(m2))


def pair_main_coefficient(r: int, l1: int, l2: int, logR: float) -> float:
    """C(l1+l2, l1) (log R)^(r+l1+l2) / (r+l1+l2)!."""
    s = r + l1 + l2
    return math.comb(l1 + l2, l1) * logR**s / math.factorial(s)


def pair_correlation(
    H1,
    H2,
    l1: int,
    l2: int,
    R: float,
    N: int,
    exact_path: bool = True,
) -> MomentReport:
    """Sum over n <= N of Lambda_R(n; H1, l1) Lambda_R(n; H2, l2)."""
    H1, H2 = as_tuple(H1), as_tuple(H2)
    WeightParams(H1, l1, R), WeightParams(H2, l2, R)
    w1 = weight_array(H1, l1, R, 1, N)
    w2 = w1 if (H1, l1) == (H2, l2) else weight_array(H2, l2, R, 1, N)
    brute = math.fsum(w1 * w2)
    fast = _pair_exact(H1, l1, H2, l2, R, N) if exact_path else None
    H = H1.union(H2)
    r = len(set(H1.shifts) & set(H2.shifts))
    S = _singular(H)
    predicted = pair_main_coefficient(r, l1, l2, math.log(R)) * S * N
    M = H1.k + H2.k + l1 + l2
    warns = _range_warnings(N, R, M, "moment", H.shifts[-1])
    if S == 0:
        warns.insert(0, "prediction-degenerate: union tuple is inadmissible")
    return MomentReport(
        N=N,
        R=R,
        brute_force=brute,
        fast_path=fast,
        predicted_main=predicted,
        params={
            "experiment": "pair_correlation",
            "H1": str(H1),
            "H2": str(H2),
            "ell1": l1,
            "ell2": l2,
            "r": r,
            "singular_series": S,
        },
        warnings=warns,
    )


@dataclass(frozen=True)
class CorrelationCase:
    case_id: str
    C_R: float


def correlation_case(H1, H2, h0: int, l1: int, l2: int, R: float) -> CorrelationCase:
    """Classify h0 against H1, H2 and return the matching constant C_R."""
    H1, H2 = as_tuple(H1), as_tuple(H2)
    r = len(set(H1.shifts) & set(H2.shifts))
    logR = math.log(R)
    s = l1 + l2
    in1, in2 = h0 in H1, h0 in H2
    if not in1 and not in2:
        return CorrelationCase("not_in_H", 1.0)
    if in1 and in2:
        return CorrelationCase("in_both", (s + 2) * (s + 1) * logR / ((l1 + 1) * (l2 + 1) * (r + s + 1)))
    if in1:
        return CorrelationCase("in_H1_only", (s + 1) * logR / ((l1 + 1) * (r + s + 1)))
    return CorrelationCase("in_H2_only", (s + 1) * logR / ((l2 + 1) * (r + s + 1)))


def weighted_correlation(
    H1,
    H2,
    l1: int,
    l2: int,
    h0: int,
    R: float,
    N: int,
    table: PrimeTable | None = None,
) -> MomentReport:
    """Sum over n <= N of Lambda_R(n; H1, l1) Lambda_R(n; H2, l2) theta(n + h0)."""
    H1, H2 = as_tuple(H1), as_tuple(H2)
    WeightParams(H1, l1, R), WeightParams(H2, l2, R)
    if h0 < 0:
        raise InvalidArgument("h0 must be non-negative")
    tbl = _need_table(table, N + h0)
    w1 = weight_array(H1, l1, R, 1, N)
    w2 = w1 if (H1, l1) == (H2, l2) else weight_array(H2, l2, R, 1, N)
    th = tbl.theta_array[1 + h0 : N + h0 + 1]
    brute = math.fsum(w1 * w2 * th)
    case = correlation_case(H1, H2, h0, l1, l2, R)
    H = H1.union(H2)
    H0 = H if h0 in H else H.union([h0])
    r = len(set(H1.shifts) & set(H2.shifts))
    S0 = _singular(H0)
    predicted = case.C_R * pair_main_coefficient(r, l1, l2, math.log(R)) * S0 * N
    M = H1.k + H2.k + l1 + l2
    warns = _range_warnings(N, R, M, "weighted", H0.shifts[-1])
    if S0 == 0:
        warns.insert(0, "prediction-degenerate: H u {h0} is inadmissible")
    return MomentReport(
        N=N,
        R=R,
        brute_force=brute,
        fast_path=None,
        predicted_main=predicted,
        params={
            "experiment": "weighted_correlation",
            "H1": str(H1),
            "H2": str(H2),
            "ell1": l1,
            "ell2": l2,
            "h0": h0,
            "r": r,
            "case": case.case_id,
            "C_R": case.C_R,
            "singular_series": S0,
        },
        warnings=warns,
    )


# ---------------------------------------------------------------------------
# The detector ratio
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RhoResult:
    rho: float
    Q1: float
    Q2: float
    predicted: float | None
    weight: str

    @property
    def certified_components(self) -> int:
        """Largest r + 1 with rho > r; at least that many primes occur in some shifted tuple."""
        return max(0, math.ceil(self.rho) - 1) + 1 if self.rho > 0 else 0


def predicted_rho(k: int, coeffs: Sequence[float], logR: float, log3N: float) -> float:
    """Main-term value of Q2 / (Q1 log 3N) for f = sum_l b_l (log R)^-l Lambda_R(n; H, l)."""
    num = den = 0.0
    for l1, b1 in enumerate(coeffs):
        for l2, b2 in enumerate(coeffs):
            s = l1 + l2
            den += b1 * b2 * math.comb(s, l1) / math.factorial(k + s)
            num += b1 * b2 * k * math.comb(s + 2, l1 + 1) / math.factorial(k + s + 1)
    if den == 0:
        raise DegenerateWeight("all polynomial coefficients vanish")
    return num / den * logR / log3N


def rho_statistic(
    H,
    weight: str,
    R: float,
    N: int,
    table: PrimeTable | None = None,
    ell: int = 0,
    coeffs: Sequence[float] | None = None,
) -> RhoResult:
    """rho = Q2 / (Q1 log 3N) over N < n <= 2N for one of three weights.

    ``weight`` is ``"ell"`` (Lambda_R(n; H, ell)), ``"product"``
    (prod Lambda_R(n + h_i)) or ``"polynomial"`` (sum_l b_l (log R)^-l
    Lambda_R(n; H, l) with ``coeffs`` = b).
    """
    H = as_tuple(H)
    lo, hi = N + 1, 2 * N
    tbl = _need_table(table, hi + H.shifts[-1])
    logR, log3N = math.log(R), math.log(3 * N)
    if weight == "ell":
        f = weight_array(H, ell, R, lo, hi)
        pred = predicted_rho(H.k, [0.0] * ell + [1.0], logR, log3N)
    elif weight == "product":
        f = product_weight_array(H, R, lo, hi)
        pred = H.k * logR / log3N
    elif weight == "polynomial":
        if not coeffs:
            raise InvalidArgument("polynomial weight needs coefficients")
        f = np.zeros(hi - lo + 1)
        for l, b in enumerate(coeffs):
            if b:
                f += b / logR**l * weight_array(H, l, R, lo, hi)
        pred = predicted_rho(H.k, coeffs, logR, log3N)
    else:
        raise InvalidArgument(f"unknown weight {weight!r}")
    f2 = f * f
    Q1 = math.fsum(f2)
    if Q1 == 0:
        raise DegenerateWeight("weight vanishes on the whole range")
    th = sum(tbl.theta_array[lo + h : hi + h + 1] for h in H.shifts)
    Q2 = math.fsum(th * f2)
    return RhoResult(rho=Q2 / (Q1 * log3N), Q1=Q1, Q2=Q2, predicted=pred, weight=weight)
