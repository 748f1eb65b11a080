import numpy as np
import pytest

from oensc.admm import DictionaryMatrix

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(seed, p=20, m=15, lambda2=0.1):
    r = np.random.default_rng(seed)
    A = r.standard_normal((p, m))
    z = r.standard_normal(p)
    return DictionaryMatrix.auto(A, lambda2), z


@pytest.fixture
def instance():
    return random_instance(0)
