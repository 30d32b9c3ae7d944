import numpy as np
import pytest

from planelayout import kernels
from planelayout.geometry import CameraIntrinsics

BACKENDS = ["python"]
try:
    kernels.get_backend("cython")
    BACKENDS.append("cython")
except ImportError:
    pass


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    mod = kernels.get_backend(request.param)
    for name in ("fill_polygon", "zbuffer_polygon", "min_fill_pass"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


@pytest.fixture
def K100():
    return CameraIntrinsics(100.0, 100.0, 50.0, 50.0, 100, 100)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


@pytest.fixture
def record():
    """Record one acceptance criterion outcome for the end-of-run summary."""
    def _record(num, name, ok, detail=""):
        ACCEPTANCE[num] = (name, bool(ok), detail)
        print(f"criterion {num} {name}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {name} {detail}")
