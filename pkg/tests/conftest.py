import numpy as np
import pytest

from streamqm import _kernels

_criteria = []


@pytest.fixture
def rng():
    return np.random.default_rng(20241015)


@pytest.fixture(params=["numpy", "numba"])
def kernel_backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    monkeypatch.setenv("STREAMQM_NUMBA", "1" if request.param == "numba" else "0")
    if request.param == "numba" and _kernels.backend() != "numba":
        pytest.skip("numba not available")
    return request.param


@pytest.fixture
def criterion():
    """Record one acceptance-criterion outcome for the end-of-run summary."""

    def record(label, ok, detail=""):
        _criteria.append((label, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _criteria:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
