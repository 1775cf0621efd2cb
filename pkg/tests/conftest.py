import pytest

from robust_phase import _kernels

BACKENDS = ["numpy"] + (["numba"] if _kernels.numba_backend is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    be = _kernels.get_backend(request.param)
    monkeypatch.setattr(_kernels, "backend", be)
    return be


# one line per acceptance criterion, printed after the run so it survives output capture
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[num])
