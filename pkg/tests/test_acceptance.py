"""Acceptance criteria, one test per criterion.

A summary with one PASS/FAIL line per criterion is printed at the end of the
pytest run (see ``conftest.py``).
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import CORPUS
from primetuples.numerics import identity_812
from primetuples.primes import is_prime_small, divisor_sum_bound, lemma2_sums
from primetuples.singular_series import gallagher_ratio
from primetuples.sieve_weights import (
    first_moment,
    generalized_von_mangoldt,
    pair_correlation,
    correlation_case,
    weighted_correlation,
)
from primetuples.thresholds import (
    bessel_threshold,
    er_bounds,
    k6_closed_form,
    matrix_has_positive_eigenvalue,
    min_lambda,
    reference_tables,
    table_34,
    theta_threshold_matrix,
    z0_identity_residual,
)
from primetuples.tuples import narrowest_admissible, nu_bar_p, nu_d

THETAS = ["1", "0.95", "0.90", "0.85", "0.80", "0.75", "0.70", "0.65", "0.60", "0.55"]


@pytest.fixture
def criterion(record_property):
    def tag(name: str, detail: str = "") -> None:
        record_property("criterion", name)
        if detail:
            record_property("detail", detail)

    return tag


def test_criterion_01_inequality_table(criterion):
    criterion("1 inequality table")
    t0 = time.perf_counter()
    got = [(r.k, r.ell_or_L) for r in table_34(THETAS)]
    elapsed = time.perf_counter() - t0
    expected = [(7, 1), (8, 1), (9, 1), (11, 1), (16, 1), (21, 2), (31, 2), (51, 3), (111, 5), (421, 10)]
    criterion("1 inequality table", f"rows={got}")
    assert got == expected
    assert elapsed < 5


def test_criterion_02_matrix_threshold(criterion):
    criterion("2 matrix threshold")
    t0 = time.perf_counter()
    thr = theta_threshold_matrix(6, 1)
    rows = reference_tables()["table_matrix"]["rows"]
    positive = [matrix_has_positive_eigenvalue(k, L, Fraction(theta)) for theta, k, L, _ in rows]
    elapsed = time.perf_counter() - t0
    criterion("2 matrix threshold", f"theta(6,1)={thr:.9f} closed form={k6_closed_form():.9f}")
    assert abs(thr - 4 * (8 - math.sqrt(19)) / 15) < 1e-6
    assert all(positive)
    assert elapsed < 10


def test_criterion_03_bessel_threshold(criterion):
    criterion("3 bessel threshold")
    t0 = time.perf_counter()
    b = bessel_threshold(6)
    elapsed = time.perf_counter() - t0
    criterion("3 bessel threshold", f"bessel(6)={b:.7f}")
    assert abs(b - 0.95971) < 1e-3
    assert b < theta_threshold_matrix(6, 1)
    assert elapsed < 10


def test_criterion_04_binomial_identity(criterion):
    criterion("4 binomial identity")
    t0 = time.perf_counter()
    failures = [(u, v, d) for u in range(9) for v in range(9) for d in range(9) if not identity_812(u, v, d)]
    elapsed = time.perf_counter() - t0
    criterion("4 binomial identity", f"failures={len(failures)} of 729")
    assert failures == []
    assert elapsed < 5


def test_criterion_05_narrowest_tuples(criterion):
    criterion("5 narrowest tuples")
    t0 = time.perf_counter()
    results = {k: narrowest_admissible(k) for k in (6, 7, 8, 9)}
    elapsed = time.perf_counter() - t0
    diam = {k: r.diameter for k, r in results.items()}
    criterion("5 narrowest tuples", f"h={diam}")
    assert diam == {6: 16, 7: 20, 8: 26, 9: 30}
    assert all(r.proven_minimal for r in results.values())
    assert elapsed < 60


MOMENT_CONFIGS = [
    ((0, 2), 1000.0, 10**6),
    ((0,), 100.0, 10**5),
    ((0,), 1000.0, 10**5),
    ((0, 2), 10.0, 10**4),
    ((0, 2), 100.0, 10**5),
    ((0, 4), 50.0, 50_000),
    ((0, 2, 6), 30.0, 10**5),
    ((0, 4, 6), 200.0, 10**5),
    ((0, 2, 6, 8), 60.0, 50_000),
    ((0, 2, 6, 8, 12), 40.0, 50_000),
    ((0, 4, 6, 10, 12, 16), 100.0, 10**5),
    ((0, 6, 12, 18, 24, 30, 36, 42, 48, 54), 25.0, 20_000),
]


def test_criterion_06_two_path_moment(criterion, table):
    criterion("6 two-path moment")
    t0 = time.perf_counter()
    worst = 0.0
    for H, R, N in MOMENT_CONFIGS:
        rep = first_moment(H, R, N, path="both", table=table)
        worst = max(worst, abs(rep.brute_force - rep.fast_path) / abs(rep.fast_path))
    elapsed = time.perf_counter() - t0
    criterion("6 two-path moment", f"configs={len(MOMENT_CONFIGS)} worst rel diff={worst:.2e}")
    assert worst < 1e-6
    assert elapsed < 120


def test_criterion_07_first_moment_trend(criterion, table):
    criterion("7 first-moment trend")
    t0 = time.perf_counter()
    ratios, pair = {}, {}
    for N in (10**4, 10**5, 10**6):
        R = N ** 0.25
        ratios[N] = first_moment((0, 2), R, N, path="per_d", table=table).ratio
        pair[N] = pair_correlation((0,), (0,), 0, 0, R, N, exact_path=False).ratio
    elapsed = time.perf_counter() - t0
    fmt = lambda d: "/".join(f"{v:.4f}" for v in d.values())
    criterion("7 first-moment trend", f"first moment ratios {fmt(ratios)}; pair ratios {fmt(pair)}")
    assert abs(pair[10**6] - 1) < abs(pair[10**4] - 1)
    assert abs(ratios[10**6] - 1) < abs(ratios[10**4] - 1)
    assert elapsed < 600


CASE_VECTORS = [
    ((0, 2), (0, 2), 6, "not_in_H"),
    ((0,), (2,), 4, "not_in_H"),
    ((0, 2), (6,), 8, "not_in_H"),
    ((0, 2), (0,), 2, "in_H1_only"),
    ((0, 2, 6), (0, 2), 6, "in_H1_only"),
    ((0, 4), (2,), 4, "in_H1_only"),
    ((0, 2), (0, 2), 0, "in_both"),
    ((0, 2), (2, 6), 2, "in_both"),
    ((0, 2, 6), (0, 6), 6, "in_both"),
]

WEIGHTED_CONFIGS = {
    "not_in_H": ((0, 2), (0, 2), 6),
    "in_H1_only": ((0, 2), (0,), 2),
    "in_both": ((0, 2), (0, 2), 0),
}


def test_criterion_08_case_constants(criterion, table):
    criterion("8 case constants")
    R0 = 100.0
    logR = math.log(R0)
    for H1, H2, h0, case in CASE_VECTORS:
        c = correlation_case(H1, H2, h0, 1, 1, R0)
        r = len(set(H1) & set(H2))
        expected = {
            "not_in_H": 1.0,
            "in_H1_only": 3 * logR / (2 * (r + 3)),
            "in_both": 12 * logR / (4 * (r + 3)),
        }[case]
        assert c.case_id == case
        assert c.C_R == pytest.approx(expected, rel=1e-14)
    trends = {}
    for case, (H1, H2, h0) in WEIGHTED_CONFIGS.items():
        trends[case] = [
            weighted_correlation(H1, H2, 0, 0, h0, N ** 0.125, N, table=table).ratio for N in (10**4, 10**5, 10**6)
        ]
    detail = "; ".join(f"{c} " + "/".join(f"{v:.3f}" for v in t) for c, t in trends.items())
    criterion("8 case constants", detail)
    for case, (a, b, c) in trends.items():
        assert 0.3 < c < 3, case
        assert abs(c - 1) < abs(b - 1) < abs(a - 1), case


def test_criterion_09_gallagher(criterion):
    criterion("9 gallagher")
    t0 = time.perf_counter()
    g = {h: gallagher_ratio(2, h) for h in (100, 200, 400)}
    elapsed = time.perf_counter() - t0
    criterion("9 gallagher", "ratios " + " ".join(f"h={h}:{v:.4f}" for h, v in g.items()))
    assert abs(g[200] - 1) < 0.1
    assert abs(g[400] - 1) < abs(g[100] - 1)
    assert elapsed < 60


def test_criterion_10_vanishing(criterion):
    criterion("10 vanishing")
    t0 = time.perf_counter()
    omega = np.zeros(10**5 + 1, dtype=np.int8)
    for p in range(2, 10**5 + 1):
        if omega[p] == 0:
            omega[p::p] += 1
    worst = 0.0
    for n in np.flatnonzero(omega >= 3):
        n = int(n)
        worst = max(worst, abs(generalized_von_mangoldt(n, 2)) / math.log(n) ** 2)
    primes = [p for p in range(2, 200) if is_prime_small(p)]
    semis = [(p, q) for i, p in enumerate(primes) for q in primes[i + 1 :]][:50]
    semi_err = max(
        abs(generalized_von_mangoldt(p * q, 2) - 2 * math.log(p) * math.log(q)) / (2 * math.log(p) * math.log(q))
        for p, q in semis
    )
    elapsed = time.perf_counter() - t0
    criterion("10 vanishing", f"worst |L2|/log^2={worst:.1e} semiprime rel err={semi_err:.1e}")
    assert worst < 1e-6
    assert len(semis) == 50 and semi_err < 1e-12
    assert elapsed < 30


def test_criterion_11_polynomial_machinery(criterion):
    criterion("11 polynomial machinery")
    t0 = time.perf_counter()
    residual = max(abs(z0_identity_residual(nu, 0.5)) for nu in range(2, 11))
    lams = [min_lambda((l + 1) ** 2, l, 2, 0.5) for l in (1, 2, 4, 8)]
    elapsed = time.perf_counter() - t0
    criterion("11 polynomial machinery", f"residual={residual:.1e} lambda={[round(x, 4) for x in lams]}")
    assert residual < 1e-12
    assert all(a > b for a, b in zip(lams, lams[1:]))
    assert all(x > (math.sqrt(2) - 1) ** 2 for x in lams)
    assert lams[-1] < 1.2
    assert elapsed < 60


def test_criterion_12_gap_bounds(criterion):
    criterion("12 gap bounds")
    expected = {1: 0.0, 2: (math.sqrt(2) - 1) ** 2, 3: (math.sqrt(3) - 1) ** 2, 4: 1.0}
    got = {r: er_bounds(r, 1.0).unconditional for r in expected}
    criterion("12 gap bounds", f"E2 simple={er_bounds(2, 1.0).simple} unconditional={got}")
    assert er_bounds(2, 1.0).simple == 0.0
    for r in expected:
        assert got[r] == pytest.approx(expected[r], abs=1e-15)


def test_criterion_13_divisor_sum_bounds(criterion):
    criterion("13 divisor-sum bounds")
    t0 = time.perf_counter()
    violations = []
    for m in (1, 2, 3.5, 5):
        for x in (10, 10**3, 10**6):
            d1, _ = lemma2_sums(x, m)
            if not d1 <= divisor_sum_bound(x, m):
                violations.append((m, x))
    elapsed = time.perf_counter() - t0
    criterion("13 divisor-sum bounds", f"violations={len(violations)} of 12")
    assert violations == []
    assert elapsed < 60


def test_criterion_14_residue_oracles(criterion):
    criterion("14 residue oracles")
    t0 = time.perf_counter()
    mismatches = 0
    checked = 0
    squarefree = [d for d in range(1, 1001) if all(d % (p * p) for p in range(2, 32))]
    for H in CORPUS:
        for d in squarefree:
            n = np.arange(d, dtype=np.int64)
            prod = np.ones(d, dtype=np.int64)
            for h in H:
                prod = (prod * ((n + h) % d)) % d
            hit = prod == 0
            checked += 1
            mismatches += int(hit.sum()) != nu_d(H, d)
    for H1 in CORPUS:
        for H2 in CORPUS:
            for p in range(2, 101):
                if not is_prime_small(p):
                    continue
                direct = len({(-h) % p for h in H1} & {(-h) % p for h in H2})
                checked += 1
                mismatches += direct != nu_bar_p(H1, H2, p)
    elapsed = time.perf_counter() - t0
    criterion("14 residue oracles", f"mismatches={mismatches} of {checked}")
    assert mismatches == 0
    assert elapsed < 30
