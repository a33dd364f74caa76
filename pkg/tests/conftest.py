from pathlib import Path

import numpy as np
import pytest

from lossprobe.nn import Architecture, Batch

REPO = Path(__file__).resolve().parents[1]
FIXTURES = Path(__file__).resolve().parent / "fixtures"
MNIST_SUBSET = REPO / "data" / "mnist_subset"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def xor_arch():
    return Architecture(2, (2,), 1)


@pytest.fixture
def xor_batch():
    return Batch([[0, 0], [0, 1], [1, 0], [1, 1]], [0, 1, 1, 0])


def random_batch(arch, n, rng):
    """Inputs in [0, 1] with valid targets for ``arch``."""
    x = rng.uniform(0, 1, size=(n, arch.input_dim))
    if arch.output_dim == 1:
        t = rng.integers(0, 2, size=(n, 1)).astype(float)
    else:
        t = np.eye(arch.output_dim)[rng.integers(0, arch.output_dim, size=n)]
    return Batch(x, t)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
