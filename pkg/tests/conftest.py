import numpy as np
import pytest

from hylc import catalog
from hylc.cycles import extract_limit_cycle, find_fixed_point
from hylc.flow import IntegratorConfig


@pytest.fixture(scope="session")
def cfg():
    return IntegratorConfig()


@pytest.fixture(scope="session")
def tcp():
    return catalog.make_tcp()


@pytest.fixture(scope="session")
def tcp_open():
    # plain box, admits starts below the invariant parabola
    return catalog.make_tcp(restrict=False)


@pytest.fixture(scope="session")
def academic():
    return catalog.make_academic()


@pytest.fixture(scope="session")
def timer():
    return catalog.make_timer()


@pytest.fixture(scope="session")
def rotation():
    return catalog.make_rotation()


@pytest.fixture(scope="session")
def izhikevich():
    return catalog.make_izhikevich()


@pytest.fixture(scope="session")
def tcp_cycle(tcp, cfg):
    return extract_limit_cycle(tcp, np.array([1.0, 1.6]), cfg)


@pytest.fixture(scope="session")
def timer_cycle(timer, cfg):
    return extract_limit_cycle(timer, np.array([1.0]), cfg)


@pytest.fixture(scope="session")
def rotation_cycle(rotation, cfg):
    return extract_limit_cycle(rotation, np.array([0.0, -3.5]), cfg)


@pytest.fixture(scope="session")
def izh_fixed_point(izhikevich, cfg):
    return find_fixed_point(izhikevich, np.array([30.0, -7.0]), cfg)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def record():
    """record(n, ok, detail) logs an acceptance criterion outcome."""

    def _record(n, ok, detail):
        _ACCEPTANCE.append((n, ok, detail))
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
