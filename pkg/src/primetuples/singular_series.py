"""Truncated Euler products for the singular series and Gallagher's average."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidArgument
from .primes import PrimeTable, build_prime_table
from .tuples import HTuple, as_tuple, enumerate_tuples

# |log factor| <= TAIL_CONSTANT * k^2 / p^2 for every omitted prime p > P
TAIL_CONSTANT = 2.0

_TABLES: dict[int, PrimeTable] = {}


def _primes_upto(P: int) -> np.ndarray:
    for lim, table in _TABLES.items():
        if lim >= P:
            return table.primes_upto(P)
    table = build_prime_table(max(P, 1000))
    _TABLES[table.limit] = table
    return table.primes_upto(P)


@lru_cache(maxsize=256)
def _generic_log_product(k: int, P: int) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative log of (1 - k/p)(1 - 1/p)^{-k} over primes p <= P (only p > k are finite)."""
    ps = _primes_upto(P).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.log1p(-k / ps) - k * np.log1p(-1.0 / ps)
    return ps, terms


@dataclass(frozen=True)
class SingularSeriesValue:
    value: float
    truncation_prime: int
    tail_bound: float
    tuple: HTuple

    @property
    def admissible(self) -> bool:
        return self.value != 0.0


def min_truncation(H) -> int:
    H = as_tuple(H)
    return max(2 * H.diameter, 2 * H.k**2, 2)


def tail_bound(k: int, P: int) -> float:
    """Bound on the summed |log factor| of the omitted primes p > P."""
    return TAIL_CONSTANT * k**2 / (P * math.log(P))


def singular_series(H, P: int = 10**6) -> SingularSeriesValue:
    """Product over p <= P of (1 - 1/p)^{-k} (1 - nu_p(H)/p).

    A prime with nu_p(H) = p contributes an exact zero. The returned
    ``tail_bound`` brackets the infinite product for admissible tuples.
    """
    H = as_tuple(H)
    P = int(P)
    if P < min_truncation(H):
        raise InvalidArgument(
            f"truncation {P} below max(2*diameter, 2*k^2) = {min_truncation(H)}"
        )
    k = H.k
    ps, generic = _generic_log_product(k, P)
    # primes dividing some difference are the only ones with nu_p < k
    cutoff = max(H.diameter, k)
    n_small = int(np.searchsorted(ps, cutoff, side="right"))
    logs = []
    for p in ps[:n_small].astype(int):
        p = int(p)
        nu = len({h % p for h in H.shifts})
        if nu == p:
            return SingularSeriesValue(0.0, P, 0.0, H)
        logs.append(math.log1p(-nu / p) - k * math.log1p(-1.0 / p))
    logs.extend(generic[n_small:].tolist())
    value = math.exp(math.fsum(logs))
    return SingularSeriesValue(value, P, tail_bound(k, P), H)


def singular_series_augmented(H, h0: int, P: int = 10**6) -> SingularSeriesValue:
    """Singular series of H u {h0} (equal to that of H when h0 already belongs to H)."""
    H = as_tuple(H)
    H0 = H if h0 in H else H.union([h0])
    return singular_series(H0, P)


def gallagher_ratio(k: int, h: int, ordered: bool = True, P: int = 10**5) -> float:
    """Sum of S(H) over k-subsets of {1..h}, normalized to tend to 1.

    ``ordered=True`` counts every permutation and divides by h^k; the
    unordered convention counts each set once and divides by h^k / k!.
    """
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    cache: dict[tuple[int, ...], float] = {}
    vals = []
    mult = 1
    for H, mult in enumerate_tuples(k, h, ordered=ordered):
        key = H.normalized().shifts
        if key not in cache:
            cache[key] = singular_series(H, max(P, min_truncation(H))).value
        vals.append(cache[key])
    total = math.fsum(vals) * mult
    if ordered:
        return total / h**k
    return total / (h**k / math.factorial(k))
