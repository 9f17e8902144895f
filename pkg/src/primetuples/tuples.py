"""Shift sets, residue-class counts, admissibility and narrowest admissible tuples."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import InvalidArgument, ResourceLimit
from .primes import is_prime_small, squarefree_primes

ENUMERATION_BUDGET = 5_000_000


@dataclass(frozen=True)
class HTuple:
    """A set of distinct non-negative shifts h_1 < ... < h_k."""

    shifts: tuple[int, ...]

    def __post_init__(self):
        s = tuple(int(h) for h in self.shifts)
        if not s:
            raise InvalidArgument("a tuple needs at least one shift")
        if any(h < 0 for h in s):
            raise InvalidArgument(f"shifts must be non-negative: {s}")
        if len(set(s)) != len(s):
            raise InvalidArgument(f"shifts must be distinct: {s}")
        object.__setattr__(self, "shifts", tuple(sorted(s)))

    @classmethod
    def of(cls, shifts: Iterable[int]) -> "HTuple":
        return cls(tuple(shifts))

    @classmethod
    def parse(cls, text: str) -> "HTuple":
        """Parse the comma-separated form, e.g. ``"0,4,6,10,12,16"``."""
        try:
            return cls(tuple(int(t) for t in text.replace(" ", "").split(",") if t))
        except ValueError as exc:
            raise InvalidArgument(f"cannot parse tuple {text!r}") from exc

    @property
    def k(self) -> int:
        return len(self.shifts)

    @property
    def diameter(self) -> int:
        return self.shifts[-1] - self.shifts[0]

    def normalized(self) -> "HTuple":
        h1 = self.shifts[0]
        return HTuple(tuple(h - h1 for h in self.shifts))

    def union(self, other: "HTuple | Iterable[int]") -> "HTuple":
        extra = other.shifts if isinstance(other, HTuple) else tuple(other)
        return HTuple(tuple(set(self.shifts) | set(extra)))

    def __contains__(self, h: int) -> bool:
        return h in self.shifts

    def __iter__(self):
        return iter(self.shifts)

    def __len__(self):
        return len(self.shifts)

    def __str__(self) -> str:
        return ",".join(str(h) for h in self.shifts)


def as_tuple(H) -> HTuple:
    if isinstance(H, HTuple):
        return H
    if isinstance(H, str):
        return HTuple.parse(H)
    return HTuple.of(H)


def _require_prime(p: int) -> None:
    if not is_prime_small(p):
        raise InvalidArgument(f"{p} is not prime")


def nu_p(H, p: int) -> int:
    """Number of distinct residue classes mod p occupied by the shifts."""
    _require_prime(p)
    return len({h % p for h in as_tuple(H)})


def nu_d(H, d: int) -> int:
    """Multiplicative extension of nu_p to squarefree d."""
    H = as_tuple(H)
    out = 1
    for p in squarefree_primes(d):
        out *= len({h % p for h in H})
    return out


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    witness_prime: int | None
    nu_values: dict[int, int] = field(default_factory=dict)


def small_primes(upto: int) -> list[int]:
    return [p for p in range(2, upto + 1) if is_prime_small(p)]


def is_admissible(H) -> AdmissibilityReport:
    """Check nu_p(H) < p for the primes p <= k; larger primes cannot be covered."""
    H = as_tuple(H)
    nus: dict[int, int] = {}
    witness = None
    for p in small_primes(H.k):
        nus[p] = len({h % p for h in H})
        if witness is None and nus[p] == p:
            witness = p
    return AdmissibilityReport(admissible=witness is None, witness_prime=witness, nu_values=nus)


def delta_product(H) -> int:
    """Product of |h_j - h_i| over pairs i < j (exact integer)."""
    H = as_tuple(H)
    if H.k < 2:
        raise InvalidArgument("the pairwise-difference product is empty for k = 1")
    return math.prod(b - a for a, b in itertools.combinations(H.shifts, 2))


def u_bound(H, C: float = 1.0) -> float:
    """C k^2 log(2 h) with h the largest shift (an upper bound for log Delta when C >= 1)."""
    if C <= 0:
        raise InvalidArgument("C must be positive")
    H = as_tuple(H)
    h = max(H.shifts[-1], 1)
    return C * H.k**2 * math.log(2 * h)


def nu_bar_p(H1, H2, p: int) -> int:
    """nu_p(H1) + nu_p(H2) - nu_p(H1 u H2): classes mod p hit by both tuples."""
    H1, H2 = as_tuple(H1), as_tuple(H2)
    return nu_p(H1, p) + nu_p(H2, p) - nu_p(H1.union(H2), p)


def nu_bar_d(H1, H2, d: int) -> int:
    out = 1
    for p in squarefree_primes(d):
        out *= nu_bar_p(H1, H2, p)
    return out


def nu_star_p(G, h0: int, p: int) -> int:
    """nu_p(G u {h0}) - 1."""
    if h0 < 0:
        raise InvalidArgument("h0 must be non-negative")
    return nu_p(as_tuple(G).union([h0]), p) - 1


# ---------------------------------------------------------------------------
# Narrowest admissible tuples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NarrowestResult:
    tuple: HTuple
    proven_minimal: bool
    nodes: int
    lower_bound: int

    @property
    def diameter(self) -> int:
        return self.tuple.diameter


def _prime_upper_bound_tuple(k: int) -> HTuple:
    """The first k primes above k, translated to start at 0; always admissible."""
    ps = []
    n = k + 1
    while len(ps) < k:
        if is_prime_small(n):
            ps.append(n)
        n += 1
    return HTuple(tuple(p - ps[0] for p in ps))


class _Budget:
    def __init__(self, nodes: int | None, seconds: float | None):
        self.nodes_left = nodes
        self.deadline = None if seconds is None else time.monotonic() + seconds
        self.used = 0

    def tick(self) -> bool:
        self.used += 1
        if self.nodes_left is not None and self.used > self.nodes_left:
            return False
        if self.deadline is not None and self.used % 4096 == 0 and time.monotonic() > self.deadline:
            return False
        return True


class _Exhausted(Exception):
    pass


def _search_diameter(k: int, D: int, primes: list[int], budget: _Budget) -> tuple[int, ...] | None:
    """Depth-first search for an admissible k-set containing 0 and D inside [0, D]."""
    occ = [0] * len(primes)
    for i, p in enumerate(primes):
        occ[i] = (1 << 0) | (1 << (D % p))
        if bin(occ[i]).count("1") >= p:
            return None
    chosen = [0]

    def extend(start: int, need: int) -> bool:
        if not budget.tick():
            raise _Exhausted
        if need == 0:
            return True
        for c in range(start, D - need + 1):
            saved = list(occ)
            ok = True
            for i, p in enumerate(primes):
                m = occ[i] | (1 << (c % p))
                if m != occ[i] and bin(m).count("1") >= p:
                    ok = False
                    break
                occ[i] = m
            if ok:
                chosen.append(c)
                if extend(c + 1, need - 1):
                    return True
                chosen.pop()
            occ[:] = saved
        return False

    if k == 1:
        return (0,) if D == 0 else None
    if extend(1, k - 2):
        return tuple(chosen) + (D,)
    return None


def narrowest_admissible(
    k: int, max_nodes: int | None = 50_000_000, max_seconds: float | None = None
) -> NarrowestResult:
    """Admissible k-tuple of minimal diameter, normalized to start at 0.

    Diameters are tried in increasing order and each is searched exhaustively,
    so a successful return proves every smaller diameter impossible. When the
    budget runs out the best known construction is returned with
    ``proven_minimal=False``.
    """
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    if k == 1:
        return NarrowestResult(HTuple((0,)), True, 0, 0)
    primes = small_primes(k)
    budget = _Budget(max_nodes, max_seconds)
    fallback = _prime_upper_bound_tuple(k)
    D = k - 1
    try:
        while D < fallback.diameter:
            found = _search_diameter(k, D, primes, budget)
            if found is not None:
                return NarrowestResult(HTuple(found), True, budget.used, D)
            D += 1
    except _Exhausted:
        return NarrowestResult(fallback, False, budget.used, D)
    return NarrowestResult(fallback, True, budget.used, D)


def enumerate_tuples(k: int, h: int, ordered: bool = False, budget: int = ENUMERATION_BUDGET) -> Iterator[tuple[HTuple, int]]:
    """Every k-subset of {1, ..., h} once, paired with its multiplicity.

    The multiplicity is k! under the ordered convention (all permutations
    counted) and 1 otherwise.
    """
    if k < 1 or k > h:
        raise InvalidArgument(f"need 1 <= k <= h, got k={k}, h={h}")
    if math.comb(h, k) > budget:
        raise ResourceLimit(f"C({h},{k}) = {math.comb(h, k)} tuples exceeds budget {budget}")
    mult = math.factorial(k) if ordered else 1
    for combo in itertools.combinations(range(1, h + 1), k):
        yield HTuple(combo), mult
