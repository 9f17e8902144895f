import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS
from primetuples.errors import DegenerateWeight, InvalidArgument, OutOfRange
from primetuples.primes import build_prime_table
from primetuples.sieve_weights import (
    WeightParams,
    divisor_residue_count,
    first_moment,
    generalized_von_mangoldt,
    lambda_R,
    lambda_R_weight,
    main_term_sum,
    pair_correlation,
    predicted_rho,
    correlation_case,
    rho_statistic,
    weight_array,
    weighted_correlation,
)
from primetuples.tuples import HTuple, nu_d


def mobius(d):
    out, x, p = 1, d, 2
    while p * p <= x:
        if x % p == 0:
            x //= p
            if x % p == 0:
                return 0
            out = -out
        p += 1
    return -out if x > 1 else out


def direct_weight(n, H, ell, R):
    P = math.prod(n + h for h in H)
    m = len(H) + ell
    return sum(mobius(d) * math.log(R / d) ** m for d in range(1, int(R) + 1) if P % d == 0) / math.factorial(m)


def omega(n):
    return sum(1 for p in range(2, n + 1) if n % p == 0 and all(p % q for q in range(2, math.isqrt(p) + 1)))


def test_lambda_R_examples():
    assert lambda_R(1, 30.0) == pytest.approx(math.log(30))
    assert lambda_R(97, 30.0) == pytest.approx(math.log(30))
    expected = math.log(10) - math.log(5) - math.log(10 / 3) + math.log(10 / 6)
    assert lambda_R(6, 10.0) == pytest.approx(expected)


def test_lambda_R_matches_divisor_loop():
    for n in range(1, 500):
        assert lambda_R(n, 40.0) == pytest.approx(direct_weight(n, (0,), 0, 40.0) * 1, abs=1e-12)


def test_generalized_von_mangoldt_examples():
    assert generalized_von_mangoldt(13, 1) == pytest.approx(math.log(13))
    assert generalized_von_mangoldt(15, 2) == pytest.approx(2 * math.log(3) * math.log(5))
    assert generalized_von_mangoldt(15, 2) == pytest.approx(3.53630, abs=1e-5)
    assert abs(generalized_von_mangoldt(30, 2)) < 1e-12


@pytest.mark.parametrize("k", [2, 3])
def test_generalized_von_mangoldt_vanishes(k):
    for n in range(2, 3000):
        if omega(n) > k:
            assert abs(generalized_von_mangoldt(n, k)) <= 1e-6 * math.log(n) ** k


def test_weight_params_invariants():
    with pytest.raises(InvalidArgument):
        WeightParams(HTuple((0, 2)), 3, 10.0)
    with pytest.raises(InvalidArgument):
        WeightParams(HTuple((0, 2)), 1, 1.5)


def test_lambda_R_weight_examples():
    p = WeightParams(HTuple((0, 2)), 0, 5.0)
    assert lambda_R_weight(1, p) == pytest.approx(0.5 * (math.log(5) ** 2 - math.log(5 / 3) ** 2))
    single = WeightParams(HTuple((0,)), 0, 50.0)
    for n in range(1, 1001):
        assert lambda_R_weight(n, single) == pytest.approx(lambda_R(n, 50.0), abs=1e-12)
    # P_H(n) coprime to every d in [2, R]
    p = WeightParams(HTuple((0, 2)), 1, 10.0)
    assert lambda_R_weight(11, p) == pytest.approx(math.log(10) ** 3 / 6)


@pytest.mark.parametrize("H", [(0, 2), (0, 2, 6), (0, 4, 6, 10, 12, 16)])
@pytest.mark.parametrize("ell", [0, 1, 2])
def test_weight_array_matches_direct_sum(H, ell):
    R = 37.5
    w = weight_array(H, ell, R, 1, 300)
    params = WeightParams(HTuple(H), ell, R)
    for n in range(1, 301):
        d = direct_weight(n, H, ell, R)
        assert w[n - 1] == pytest.approx(d, rel=1e-10, abs=1e-9)
        assert w[n - 1] == pytest.approx(lambda_R_weight(n, params), rel=1e-10, abs=1e-9)


def test_weight_array_offset_window():
    full = weight_array((0, 2, 6), 1, 50.0, 1, 2000)
    part = weight_array((0, 2, 6), 1, 50.0, 777, 1500)
    assert np.allclose(part, full[776:1500], rtol=1e-12, atol=1e-12)


def test_divisor_residue_count_examples():
    assert divisor_residue_count((0, 2), 1, 123) == 123
    assert divisor_residue_count((0, 2), 3, 9) == 6


@given(st.sampled_from(CORPUS), st.sampled_from([1, 2, 3, 5, 6, 7, 10, 15, 30, 77, 105, 210]), st.integers(1, 5000))
@settings(max_examples=100, deadline=None)
def test_divisor_residue_count_properties(H, d, N):
    count = divisor_residue_count(H, d, N)
    direct = sum(1 for n in range(1, N + 1) if math.prod(n + h for h in H) % d == 0)
    assert count == direct
    assert abs(count - nu_d(H, d) * N / d) <= nu_d(H, d)


@pytest.mark.parametrize(
    "H,R,N",
    [((0,), 50, 10_000), ((0, 2), 10, 10_000), ((0, 2, 6), 20, 20_000), ((0, 4, 6, 10, 12, 16), 30, 5_000)],
)
def test_first_moment_two_paths(H, R, N):
    rep = first_moment(H, R, N)
    assert rep.paths_agree
    assert rep.brute_force == pytest.approx(rep.fast_path, rel=1e-9)


def test_first_moment_trivial_tuple_prediction():
    rep = first_moment((0,), 50, 10_000)
    assert rep.predicted_main == pytest.approx(10_000)


def test_first_moment_inadmissible():
    rep = first_moment((0, 1), 20, 1000, path="per_d")
    assert rep.predicted_main == 0 and rep.ratio is None
    assert rep.warnings[0].startswith("prediction-degenerate")


def test_first_moment_workers_match_sequential():
    a = first_moment((0, 2), 40, 60_000, path="per_n", workers=1)
    b = first_moment((0, 2), 40, 60_000, path="per_n", workers=2)
    assert a.brute_force == pytest.approx(b.brute_force, rel=1e-13)


def test_first_moment_table_too_small():
    with pytest.raises(OutOfRange):
        first_moment((0, 2), 10, 1000, path="per_n", table=build_prime_table(500))


def test_first_moment_per_d_equals_main_term_plus_bounded_error():
    H, R, N = (0, 2, 6), 25.0, 50_000
    rep = first_moment(H, R, N, path="per_d")
    # each d <= R contributes at most nu_d (log R)^k / k! of rounding error
    slack = sum(nu_d(H, d) for d in range(1, 26) if mobius(d)) * math.log(R) ** 3 / 6
    assert abs(rep.fast_path - N * main_term_sum(H, R)) <= slack


def test_pair_correlation_exact_path_agrees():
    for H1, H2, l1, l2 in [((0,), (0,), 0, 0), ((0, 2), (0, 2), 0, 1), ((0,), (2,), 0, 0), ((0, 2), (2, 6), 1, 0)]:
        rep = pair_correlation(H1, H2, l1, l2, 20.0, 5000)
        assert rep.paths_agree, (H1, H2)


def test_pair_correlation_brute_force_against_direct_loop():
    H1, H2, R, N = (0, 2), (0, 6), 12.0, 400
    direct = sum(direct_weight(n, H1, 1, R) * direct_weight(n, H2, 0, R) for n in range(1, N + 1))
    assert pair_correlation(H1, H2, 1, 0, R, N).brute_force == pytest.approx(direct, rel=1e-10)


def test_pair_predictions():
    N, R = 1000, 20.0
    rep = pair_correlation((0,), (0,), 0, 0, R, N)
    assert rep.predicted_main == pytest.approx(N * math.log(R))
    rep = pair_correlation((0, 2), (0, 2), 0, 0, R, N)
    S = rep.params["singular_series"]
    assert rep.predicted_main == pytest.approx(S * N * math.log(R) ** 2 / 2)
    rep = pair_correlation((0,), (2,), 0, 0, R, N)
    assert rep.params["r"] == 0 and rep.predicted_main == pytest.approx(S * N)
    rep = pair_correlation((0, 2), (0, 2), 1, 2, R, N, exact_path=False)
    assert rep.predicted_main == pytest.approx(3 * math.log(R) ** 5 / math.factorial(5) * S * N)


CASE_VECTORS = [
    # (H1, H2, h0, l1, l2, case)
    ((0, 2), (0, 2), 6, 0, 0, "not_in_H"),
    ((0,), (2,), 4, 1, 0, "not_in_H"),
    ((0, 2), (6,), 8, 1, 2, "not_in_H"),
    ((0, 2), (0,), 2, 0, 0, "in_H1_only"),
    ((0, 2, 6), (0, 2), 6, 1, 0, "in_H1_only"),
    ((0, 4), (2,), 4, 0, 1, "in_H1_only"),
    ((0, 2), (0, 2), 0, 0, 0, "in_both"),
    ((0, 2), (2, 6), 2, 1, 1, "in_both"),
    ((0, 2, 6), (0, 6), 6, 2, 0, "in_both"),
]


@pytest.mark.parametrize("H1,H2,h0,l1,l2,case", CASE_VECTORS)
def test_correlation_case_selection(H1, H2, h0, l1, l2, case):
    R = 50.0
    logR = math.log(R)
    r = len(set(H1) & set(H2))
    c = correlation_case(H1, H2, h0, l1, l2, R)
    assert c.case_id == case
    s = l1 + l2
    expected = {
        "not_in_H": 1.0,
        "in_H1_only": (s + 1) * logR / ((l1 + 1) * (r + s + 1)),
        "in_both": (s + 2) * (s + 1) * logR / ((l1 + 1) * (l2 + 1) * (r + s + 1)),
    }[case]
    assert c.C_R == pytest.approx(expected)


def test_case_constant_zero_ell_specializations():
    R = 100.0
    assert correlation_case((0, 2), (0,), 2, 0, 0, R).C_R == pytest.approx(math.log(R) / 2)
    assert correlation_case((0, 2), (0, 2), 0, 0, 0, R).C_R == pytest.approx(2 * math.log(R) / 3)
    assert correlation_case((0,), (0, 2), 2, 0, 0, R).case_id == "in_H2_only"


def test_weighted_correlation_against_direct_loop():
    table = build_prime_table(5000)
    H1, H2, h0, R, N = (0, 2), (0,), 2, 8.0, 2000
    direct = sum(
        direct_weight(n, H1, 0, R) * direct_weight(n, H2, 0, R) * (math.log(n + h0) if table.is_prime(n + h0) else 0)
        for n in range(1, N + 1)
    )
    rep = weighted_correlation(H1, H2, 0, 0, h0, R, N, table=table)
    assert rep.brute_force == pytest.approx(direct, rel=1e-10)
    assert rep.params["case"] == "in_H1_only"
    S = rep.params["singular_series"]
    assert rep.predicted_main == pytest.approx(math.log(R) / 2 * math.log(R) * S * N)


def test_weighted_inadmissible_union_flagged():
    rep = weighted_correlation((0, 2), (0, 2), 0, 0, 4, 10.0, 1000)
    assert rep.predicted_main == 0 and rep.warnings[0].startswith("prediction-degenerate")


def test_rho_constant_weight(table):
    H, N = HTuple((0, 2)), 20_000
    res = rho_statistic(H, "ell", 2.0, N, table=table)
    th = table.theta_array
    mean = sum(th[n] + th[n + 2] for n in range(N + 1, 2 * N + 1)) / N
    assert res.rho == pytest.approx(mean / math.log(3 * N), rel=1e-12)


def test_rho_against_direct_loop():
    table = build_prime_table(5000)
    H, R, N = (0, 2, 6), 9.0, 1000
    f = [direct_weight(n, H, 1, R) for n in range(N + 1, 2 * N + 1)]
    th = [sum(math.log(n + h) if table.is_prime(n + h) else 0 for h in H) for n in range(N + 1, 2 * N + 1)]
    Q1 = sum(x * x for x in f)
    Q2 = sum(t * x * x for t, x in zip(th, f))
    res = rho_statistic(H, "ell", R, N, table=table, ell=1)
    assert res.rho == pytest.approx(Q2 / (Q1 * math.log(3 * N)), rel=1e-10)


def test_rho_product_weight_against_direct_loop():
    table = build_prime_table(5000)
    H, R, N = (0, 2), 7.0, 800
    f = [math.prod(lambda_R(n + h, R) for h in H) for n in range(N + 1, 2 * N + 1)]
    th = [sum(math.log(n + h) if table.is_prime(n + h) else 0 for h in H) for n in range(N + 1, 2 * N + 1)]
    Q1 = math.fsum(x * x for x in f)
    Q2 = math.fsum(t * x * x for t, x in zip(th, f))
    assert rho_statistic(H, "product", R, N, table=table).rho == pytest.approx(Q2 / (Q1 * math.log(3 * N)), rel=1e-10)


def test_rho_polynomial_reduces_to_ell_weight(table):
    a = rho_statistic((0, 2), "polynomial", 30.0, 5000, table=table, coeffs=[0.0, 2.5])
    b = rho_statistic((0, 2), "ell", 30.0, 5000, table=table, ell=1)
    assert a.rho == pytest.approx(b.rho, rel=1e-12)


def test_rho_degenerate_weight(table):
    with pytest.raises(DegenerateWeight):
        rho_statistic((0, 2), "polynomial", 30.0, 1000, table=table, coeffs=[0.0, 0.0])


def test_predicted_rho_closed_form():
    for k, ell in [(2, 0), (6, 1), (7, 1), (30, 4)]:
        logR, log3N = 3.0, 12.0
        theta0 = 2 * logR / log3N
        closed = k / (k + 2 * ell + 1) * (2 * ell + 1) / (ell + 1) * theta0
        assert predicted_rho(k, [0.0] * ell + [1.0], logR, log3N) == pytest.approx(closed, rel=1e-12)


def test_moment_report_serializes():
    rep = first_moment((0, 2), 10, 1000, path="per_d")
    d = rep.to_dict()
    assert set(d) >= {"N", "R", "params", "brute_force", "fast_path", "predicted_main", "ratio", "warnings"}
    assert d["ratio"] == pytest.approx(rep.fast_path / rep.predicted_main)
