import itertools
import math

import pytest


def coprime_pairs(lo, hi, n_hi=None):
    n_hi = hi if n_hi is None else n_hi
    return [(M, N) for M in range(lo, hi + 1) for N in range(M + 1, n_hi + 1) if math.gcd(M, N) == 1]


def brute_lags(positions):
    """Sorted list of distinct pairwise differences, computed pair by pair."""
    return sorted({a - b for a, b in itertools.product(positions, repeat=2)})


def brute_consecutive(lags):
    s = set(lags)
    k = 0
    while k + 1 in s:
        k += 1
    return 2 * k + 1


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


# acceptance verdict lines, echoed after the run whatever the capture mode
ACCEPTANCE_LINES: dict = {}


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES[str(criterion)] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: [int(p) if p.isdigit() else p for p in k.replace(".", " ").split()]):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
