"""Prime sieving, Chebyshev sums in progressions, remainder terms, divisor functions."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, OutOfRange, ResourceLimit

SEGMENT_SIZE = 1 << 20
CACHE_MAGIC = b"GPYP"
CACHE_VERSION = 1
DIVISOR_SUM_BUDGET = 10**8


def _simple_sieve(limit: int) -> np.ndarray:
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return flags


def segmented_sieve(limit: int, segment_size: int = SEGMENT_SIZE) -> np.ndarray:
    """Boolean primality flags for 0..limit, sieved one segment at a time."""
    root = math.isqrt(limit)
    base = np.flatnonzero(_simple_sieve(max(root, 1)))
    flags = np.empty(limit + 1, dtype=bool)
    for lo in range(0, limit + 1, segment_size):
        hi = min(lo + segment_size, limit + 1)
        seg = np.ones(hi - lo, dtype=bool)
        for p in base:
            p = int(p)
            start = max(p * p, -(-lo // p) * p)
            if start >= hi:
                continue
            seg[start - lo :: p] = False
        flags[lo:hi] = seg
    flags[: min(2, limit + 1)] = False
    return flags


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """Primality flags and the ascending prime list up to ``limit``.

    Treat instances as immutable; they are safe to share between workers.
    """

    limit: int
    primality: np.ndarray
    primes: np.ndarray

    def is_prime(self, n: int) -> bool:
        if n < 0 or n > self.limit:
            raise OutOfRange(f"{n} outside prime table range [0, {self.limit}]")
        return bool(self.primality[n])

    def primes_upto(self, x: float) -> np.ndarray:
        return self.primes[: int(np.searchsorted(self.primes, math.floor(x), side="right"))]

    @cached_property
    def log_primes(self) -> np.ndarray:
        return np.log(self.primes.astype(float))

    @cached_property
    def smallest_factor(self) -> np.ndarray:
        """Smallest prime factor of each n <= limit (0 and 1 map to themselves)."""
        spf = np.arange(self.limit + 1, dtype=np.int64)
        for p in self.primes:
            p = int(p)
            if p * p > self.limit:
                break
            block = spf[p * p :: p]
            mask = block == np.arange(p * p, self.limit + 1, p)
            block[mask] = p
        return spf

    @cached_property
    def theta_array(self) -> np.ndarray:
        """theta(n) for every 0 <= n <= limit."""
        out = np.zeros(self.limit + 1)
        out[self.primes] = self.log_primes
        return out


def build_prime_table(limit: int) -> PrimeTable:
    if limit < 2:
        raise InvalidArgument(f"prime table limit must be >= 2, got {limit}")
    flags = segmented_sieve(int(limit))
    flags.setflags(write=False)
    primes = np.flatnonzero(flags).astype(np.int64)
    primes.setflags(write=False)
    return PrimeTable(limit=int(limit), primality=flags, primes=primes)


def save_prime_table(table: PrimeTable, path: str | Path) -> None:
    """Write the table as ``GPYP`` | u32 version | u64 limit | bitset (bit i set iff i prime)."""
    bits = np.packbits(table.primality, bitorder="little")
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<IQ", CACHE_VERSION, table.limit))
        fh.write(bits.tobytes())


def load_prime_table(path: str | Path) -> PrimeTable:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:4] != CACHE_MAGIC:
            raise InvalidArgument(f"{path} is not a prime table cache file")
        version, limit = struct.unpack("<IQ", head[4:])
        if version != CACHE_VERSION:
            raise InvalidArgument(f"unsupported cache version {version}")
        payload = np.frombuffer(fh.read(), dtype=np.uint8)
    nbytes = (limit + 1 + 7) // 8
    if payload.size != nbytes:
        raise InvalidArgument(f"cache payload has {payload.size} bytes, expected {nbytes}")
    flags = np.unpackbits(payload, bitorder="little")[: limit + 1].astype(bool)
    flags.setflags(write=False)
    primes = np.flatnonzero(flags).astype(np.int64)
    primes.setflags(write=False)
    return PrimeTable(limit=int(limit), primality=flags, primes=primes)


def cached_prime_table(limit: int, path: str | Path | None) -> PrimeTable:
    """Load ``path`` when it covers ``limit``, otherwise sieve and (re)write it."""
    if path is not None and Path(path).exists():
        table = load_prime_table(path)
        if table.limit >= limit:
            return table
    table = build_prime_table(limit)
    if path is not None:
        save_prime_table(table, path)
    return table


# ---------------------------------------------------------------------------
# Small-integer arithmetic
# ---------------------------------------------------------------------------


def factorize(n: int, table: PrimeTable | None = None) -> dict[int, int]:
    """Prime factorization as {p: exponent}; uses the table's smallest factors when possible."""
    if n < 1:
        raise InvalidArgument(f"cannot factor {n}")
    out: dict[int, int] = {}
    if table is not None and n <= table.limit:
        spf = table.smallest_factor
        while n > 1:
            p = int(spf[n])
            out[p] = out.get(p, 0) + 1
            n //= p
        return out
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def is_prime_small(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def squarefree_primes(d: int) -> list[int]:
    """Prime factors of a squarefree ``d``; raises for non-squarefree input."""
    if d < 1:
        raise InvalidArgument(f"expected a positive integer, got {d}")
    f = factorize(d)
    if any(e > 1 for e in f.values()):
        raise InvalidArgument(f"{d} is not squarefree")
    return sorted(f)


def euler_phi(q: int) -> int:
    out = q
    for p in factorize(q):
        out = out // p * (p - 1)
    return out


# ---------------------------------------------------------------------------
# Chebyshev theta and remainder terms
# ---------------------------------------------------------------------------


def theta(n: int, table: PrimeTable) -> float:
    """log n when n is prime, else 0."""
    if n > table.limit:
        raise OutOfRange(f"{n} exceeds prime table limit {table.limit}")
    return math.log(n) if n >= 2 and table.primality[n] else 0.0


@dataclass(frozen=True)
class ProgressionRemainder:
    x: int
    q: int
    a: int
    theta_value: float
    main_term: float

    @property
    def E(self) -> float:
        return self.theta_value - self.main_term


def _check_range(x: int, q: int, table: PrimeTable) -> None:
    if q < 1:
        raise InvalidArgument(f"modulus must be >= 1, got {q}")
    if x > table.limit:
        raise OutOfRange(f"x={x} exceeds prime table limit {table.limit}")


def theta_progression(x: int, q: int, a: int, table: PrimeTable) -> ProgressionRemainder:
    """theta(x; q, a) with its main term [(a, q) = 1] x / phi(q)."""
    _check_range(x, q, table)
    ps = table.primes_upto(x)
    logs = table.log_primes[: ps.size]
    sel = logs[(ps % q) == (a % q)]
    value = math.fsum(sel)
    main = x / euler_phi(q) if math.gcd(a, q) == 1 else 0.0
    return ProgressionRemainder(x=x, q=q, a=a, theta_value=value, main_term=float(main))


def _class_sums(ps: np.ndarray, logs: np.ndarray, q: int) -> dict[int, float]:
    """Compensated sum of log p per residue class mod q."""
    res = ps % q
    order = np.argsort(res, kind="stable")
    res_sorted = res[order]
    logs_sorted = logs[order]
    classes, starts = np.unique(res_sorted, return_index=True)
    bounds = list(starts) + [res_sorted.size]
    return {
        int(c): math.fsum(logs_sorted[bounds[i] : bounds[i + 1]])
        for i, c in enumerate(classes)
    }


def remainder_max(x: int, q: int, table: PrimeTable) -> float:
    """E'(x, q): the largest |E(x; q, a)| over reduced residues a."""
    _check_range(max(x, 0), q, table)
    if x <= 0:
        return 0.0
    ps = table.primes_upto(x)
    sums = _class_sums(ps, table.log_primes[: ps.size], q)
    main = x / euler_phi(q)
    return max(abs(sums.get(a, 0.0) - main) for a in range(q) if math.gcd(a, q) == 1)


def remainder_sup(x: int, q: int, table: PrimeTable) -> float:
    """E*(x, q): the largest E'(y, q) over integers 1 <= y <= x.

    For a fixed class, E(y; q, a) is constant in theta and linear in y between
    consecutive primes, so its extremes over integers sit at y = 1, y = x, at
    each prime p and at p - 1.
    """
    _check_range(max(x, 0), q, table)
    if x <= 0:
        return 0.0
    ps = table.primes_upto(x)
    logs = table.log_primes[: ps.size]
    cand = np.unique(np.concatenate(([1, x], ps, ps - 1)))
    cand = cand[(cand >= 1) & (cand <= x)].astype(float)
    phi = euler_phi(q)
    best = 0.0
    res = ps % q
    for a in range(q):
        if math.gcd(a, q) != 1:
            continue
        cls = ps[res == a]
        cum = np.concatenate(([0.0], np.cumsum(logs[res == a])))
        th = cum[np.searchsorted(cls, cand, side="right")]
        best = max(best, float(np.max(np.abs(th - cand / phi))))
    return best


_BV_MODES = {"max": remainder_max, "E'": remainder_max, "sup": remainder_sup, "E*": remainder_sup}


def bv_sum(N: int, Q: int, table: PrimeTable, mode: str = "max") -> float:
    """Sum over q <= Q of E'(N, q) (mode ``"max"``/``"E'"``) or E*(N, q) (``"sup"``/``"E*"``)."""
    if Q > N:
        raise InvalidArgument(f"Q={Q} must not exceed N={N}")
    try:
        f = _BV_MODES[mode]
    except KeyError:
        raise InvalidArgument(f"unknown mode {mode!r}") from None
    return math.fsum(f(N, q, table) for q in range(1, Q + 1))


# ---------------------------------------------------------------------------
# Generalized divisor functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DivisorFunctionValue:
    q: int
    m: float
    omega: int
    value: float


def divisor_fn(q: int, m: float) -> DivisorFunctionValue:
    """d_m(q) = m ** omega(q) for squarefree q and real m."""
    omega = len(squarefree_primes(q))
    if omega == 0:
        value = 1.0
    elif m > 0:
        value = math.exp(omega * math.log(m))
    else:
        value = float(m) ** omega
    return DivisorFunctionValue(q=q, m=m, omega=omega, value=value)


def squarefree_omega(x: int) -> tuple[np.ndarray, np.ndarray]:
    """(squarefree mask, omega) for 0..x, both by sieving."""
    sqfree = np.ones(x + 1, dtype=bool)
    sqfree[0] = False
    omega = np.zeros(x + 1, dtype=np.int16)
    for p in np.flatnonzero(_simple_sieve(max(x, 1))):
        p = int(p)
        omega[p::p] += 1
        if p * p <= x:
            sqfree[p * p :: p * p] = False
    return sqfree, omega


def lemma2_sums(x: int, m: float) -> tuple[float, float]:
    """(D'(x, m), D*(x, m)): sums of d_m(q)/q and d_m(q) over squarefree q <= x."""
    if x < 1 or m <= 0:
        raise InvalidArgument("lemma2_sums needs x >= 1 and m > 0")
    if x > DIVISOR_SUM_BUDGET:
        raise ResourceLimit(f"x={x} exceeds enumeration budget {DIVISOR_SUM_BUDGET}")
    sqfree, omega = squarefree_omega(int(x))
    q = np.flatnonzero(sqfree)
    dm = np.exp(omega[q] * math.log(m))
    return math.fsum(dm / q), math.fsum(dm)


def divisor_sum_bound(x: float, m: float) -> float:
    """(ceil(m) + log x) ** ceil(m)."""
    c = math.ceil(m)
    return (c + math.log(x)) ** c
