"""Shared test helpers: tiny distribution builders and brute-force oracles.

The oracles here are deliberately independent of the library internals:
dense eigensolver for the l2 worst case, exhaustive sign enumeration for
the hypercube worst case, and a grid search for the ball projection.
"""

import numpy as np
import pytest

from wcmean.core import IndexPair, SampleTargetDistribution

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def make_dist(n, pairs):
    """Build a distribution from raw (sample, target) index lists."""
    return SampleTargetDistribution(
        n, tuple(IndexPair(tuple(a), tuple(b)) for a, b in pairs)
    )


def random_dist(rng, n, m, allow_empty=False, full_targets=False):
    """Random distribution: each index joins the sample with probability 1/2."""
    pairs = []
    for _ in range(m):
        while True:
            sample = [j for j in range(n) if rng.random() < 0.5]
            if sample or allow_empty:
                break
        if full_targets:
            target = list(range(n))
        else:
            while True:
                target = [j for j in range(n) if rng.random() < 0.5]
                if target:
                    break
        pairs.append((sample, target))
    return make_dist(n, pairs)


def dense_lambda_max(M_dense):
    """Dense-eigensolver oracle for the top eigenvalue."""
    return float(np.linalg.eigvalsh(M_dense)[-1])


def hypercube_max(M_dense):
    """Exhaustive max of x^T M x over x in {-1, +1}^n (n <= 16)."""
    n = M_dense.shape[0]
    if n > 16:
        raise ValueError("hypercube oracle limited to n <= 16")
    # fix x_0 = +1: the quadratic form is sign-symmetric
    count = 1 << (n - 1)
    bits = (np.arange(count)[:, None] >> np.arange(n - 1)) & 1
    X = np.hstack([np.ones((count, 1)), 2.0 * bits - 1.0])
    return float(np.max(np.einsum("ij,jk,ik->i", X, M_dense, X)))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
