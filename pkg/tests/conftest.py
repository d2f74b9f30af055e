from __future__ import annotations

import numpy as np
import pytest

from stopline import kernels
from stopline import _pykernels
from stopline.grid_map import GridGeometry
from stopline.synth import SceneSpec

try:
    from stopline import _ckernels
except ImportError:  # extension not built
    _ckernels = None


BACKENDS = [pytest.param(_pykernels, id="python")]
if _ckernels is not None:
    BACKENDS.append(pytest.param(_ckernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tall_geometry():
    """Grid with ~60 m ahead of the ego cell so every evaluation band is populated."""
    return GridGeometry(256, 192, 0.26, (232, 96))


@pytest.fixture
def plain_spec():
    return SceneSpec(seed=3, intersection_offset=20.0, lanes_per_direction=1)


def pytest_report_header(config):
    return f"stopline kernels backend: {kernels.BACKEND}"


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, text = results[n]
        terminalreporter.write_line(f"AC{n:<2} {'PASS' if ok else 'FAIL'}  {text}")
