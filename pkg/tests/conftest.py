import numpy as np
import pytest

from affine_dim import Mat2

# {A, B} entrywise positive, both in the class M
POSITIVE = [Mat2(0.5, 0.4, 0.1, 0.1), Mat2(0.45, 0.3, 0.2, 0.35)]
# positive, but the first matrix fails the M ratio bound on its own
MIXED_POSITIVE = [Mat2(0.5, 0.4, 0.1, 0.1), Mat2(0.1, 0.1, 0.4, 0.5)]
DIAG2 = [Mat2.diag(0.5, 0.25)] * 2
DIAG3 = [Mat2.diag(0.5, 0.25)] * 3
CONFORMAL = [Mat2.diag(1 / 3, 1 / 3)] * 2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_matrix(rng, lo=-1.0, hi=1.0) -> Mat2:
    while True:
        A = Mat2.from_flat(rng.uniform(lo, hi, size=4))
        if abs(A.det) > 1e-3:
            return A


def random_class_m(rng) -> Mat2:
    """Rejection sample of a matrix in M, with a random overall sign."""
    sign = rng.choice([-1.0, 1.0])
    while True:
        a, b, c, d = rng.uniform(0.01, 0.6, size=4)
        A = Mat2(a, b, c, d)
        if A.det == 0.0:
            continue
        ratio = abs(A.det) / A.min_row_norm**2
        if 0 < ratio < 0.5 and A.norm < 1:
            return A.scale(sign)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}
ACCEPTANCE_COUNT = 13


def pytest_terminal_summary(terminalreporter):
    ran = any("test_acceptance" in r.nodeid for rs in terminalreporter.stats.values() for r in rs if hasattr(r, "nodeid"))
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_COUNT + 1):
        terminalreporter.write_line(ACCEPTANCE.get(n, f"FAIL  criterion {n:2d}: no result (test errored or was skipped)"))
