from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlvc.kernels import KernelSpec
from nlvc.lattice import Torus
from nlvc.stencil import build_stencil

settings.register_profile("nlvc", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nlvc")


@pytest.fixture
def rng():
    return np.random.default_rng(0xA11CE)


@pytest.fixture(scope="session")
def compact2d():
    return KernelSpec("CompactIntegrable", 2, delta=0.25)


@pytest.fixture(scope="session")
def stencil2d(compact2d):
    return build_stencil(compact2d, Torus.cube(2, 32, 1 / 16), [1.0, 0.0])


@pytest.fixture(scope="session")
def stencil3d():
    spec = KernelSpec("CompactIntegrable", 3, delta=0.2)
    return build_stencil(spec, Torus.cube(3, 16, 1 / 16), [1.0, 0.0, 0.0])


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line per criterion and fail on any violated part.

    ``parts`` is a list of ``(label, value, bound, passed)``.
    """
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number: int, title: str, parts: list[tuple[str, float, float, bool]]) -> None:
        ok = all(p[3] for p in parts)
        detail = "; ".join(f"{label} {value:.3e} vs {bound:.3e}{'' if good else ' FAILED'}"
                           for label, value, bound, good in parts)
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
