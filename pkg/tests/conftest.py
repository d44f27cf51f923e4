import numpy as np
import pytest

from matryoshka import constellation as C


@pytest.fixture(scope="session")
def mat():
    return C.build_matryoshka()


@pytest.fixture(scope="session")
def qpsk():
    return C.build_pdm_qpsk()


@pytest.fixture(scope="session")
def per_block():
    return C.build_matryoshka(rule=C.CouplingRule.PER_BLOCK_PARITY)


@pytest.fixture(scope="session", params=["matryoshka", "pdm-qpsk", "per-block"])
def any_constellation(request, mat, qpsk, per_block):
    return {"matryoshka": mat, "pdm-qpsk": qpsk, "per-block": per_block}[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
