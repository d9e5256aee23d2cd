import sys
from pathlib import Path

import numpy as np
import pytest

from radiosv import _backend

sys.path.insert(0, str(Path(__file__).parent))

BACKENDS = sorted(_backend.available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    impl = _backend.available_backends()[request.param]
    monkeypatch.setattr(_backend, "sosfilt", impl.sosfilt)
    monkeypatch.setattr(_backend, "jacobi_sweeps", impl.jacobi_sweeps)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
