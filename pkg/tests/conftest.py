import numpy as np
import pytest

from tbrw import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["cython", "python"])
def backend(request):
    if request.param == "cython" and not kernels.compiled_available():
        pytest.skip("compiled kernels not built")
    prev = kernels.BACKEND
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one pass/fail line for an acceptance criterion, then assert it."""
    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _VERDICTS.append(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
