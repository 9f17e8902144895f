import math

import pytest

from primetuples.primes import build_prime_table

CORPUS = [
    (0,),
    (0, 2),
    (0, 1),
    (0, 2, 6),
    (0, 4, 6),
    (0, 2, 4),
    (0, 4, 6, 10, 12, 16),
    (0, 2, 6, 8, 12),
    (1, 3, 7, 9, 13, 19, 21),
    (0, 6, 12, 18, 24, 30, 36, 42, 48, 54),
]


def trial_division_is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, math.isqrt(n) + 1))


@pytest.fixture(scope="session")
def table():
    return build_prime_table(2_000_100)


@pytest.fixture(scope="session")
def small_table():
    return build_prime_table(20_000)


_ACCEPTANCE: list[tuple[str, str, float, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        verdict = "PASS" if report.outcome == "passed" else "FAIL"
        _ACCEPTANCE.append((props["criterion"], verdict, report.duration, str(props.get("detail", ""))))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, seconds, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0].split()[0])):
        line = f"{verdict}  criterion {name}  ({seconds:.1f} s)"
        terminalreporter.write_line(f"{line}  {detail}" if detail else line)
