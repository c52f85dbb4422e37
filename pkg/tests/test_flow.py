import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hylc import catalog
from hylc.errors import InvalidInputError
from hylc.flow import IntegratorConfig, flow_until_impact, rk4_step, time_to_impact


def test_rk4_step_examples(timer, tcp_open, academic):
    assert rk4_step(timer, (0.2,), 0.1)[0] == pytest.approx(0.3, abs=1e-15)
    assert rk4_step(tcp_open, (0.0, 0.4), 0.5)[1] == pytest.approx(0.9, abs=1e-15)
    # one RK4 step applies the degree-4 Taylor polynomial of exp(-a s)
    z = -0.2
    amp = 1 + z + z * z / 2 + z ** 3 / 6 + z ** 4 / 24
    got = rk4_step(academic, (1.0,), 0.1)[0]
    assert abs(got - ((1 - 3) * amp + 3)) <= 1e-14
    # local truncation error is about 2 * 0.2**5 / 120
    assert abs(got - ((1 - 3) * math.exp(-0.2) + 3)) <= 1e-5


def test_time_to_impact_examples(cfg, academic, tcp, timer, rotation):
    assert abs(flow_until_impact(academic, (1.0,), cfg).T_I - math.log(2) / 2) <= 1e-9
    assert abs(flow_until_impact(tcp, (1.0, 0.4), cfg).T_I - 1.2) <= 1e-9
    assert abs(flow_until_impact(timer, (0.3,), cfg).T_I - 0.7) <= 1e-9
    assert abs(flow_until_impact(rotation, (3.5, 0.0), cfg).T_I - math.pi / 1.6) <= 1e-8


def test_time_to_impact_on_guard_is_zero(cfg, tcp):
    assert time_to_impact(tcp, (1.0, 1.6), cfg) == 0.0


def test_time_to_impact_academic_formula(cfg, academic):
    assert abs(time_to_impact(academic, (1.5,), cfg) - 0.5 * math.log(1.5)) <= 1e-9
    assert abs(time_to_impact(academic, (1.0,), cfg) - math.log(2) / 2) <= 1e-9


def test_no_impact_gives_infinity():
    from hylc.model import HybridSystem, Region

    decay = HybridSystem(n=1, f=lambda x: -x, g=lambda x: x, h=lambda x: 1.0,
                         region=Region(np.array([[-2.0, 2.0]])))
    assert time_to_impact(decay, (1.0,), IntegratorConfig(horizon=5.0)) == math.inf


def test_left_region_termination(cfg):
    # timer box is [0, 1]; shrink it so the flow exits before the guard
    sys = catalog.make_timer()
    from hylc.model import Region

    sys = sys.with_region(Region(np.array([[0.0, 0.5]])))
    res = flow_until_impact(sys, (0.1,), cfg)
    assert res.terminated_by == "left_region"
    assert res.T_I == math.inf


def test_bad_config_rejected():
    with pytest.raises(InvalidInputError):
        IntegratorConfig(step=0.0)
    with pytest.raises(InvalidInputError):
        IntegratorConfig(event_tol=math.nan)
    with pytest.raises(InvalidInputError):
        IntegratorConfig(max_bisections=0)


def test_flow_is_deterministic(cfg, izhikevich):
    a = flow_until_impact(izhikevich, (-55.0, -6.0), cfg)
    b = flow_until_impact(izhikevich, (-55.0, -6.0), cfg)
    assert a.to_csv() == b.to_csv()
    assert a.impact_time == b.impact_time


@settings(max_examples=40, deadline=None)
@given(xi=st.floats(1.0, 1.99))
def test_academic_impact_time_matches_closed_form(academic, xi):
    p = catalog.get_entry("academic").defaults
    assert abs(time_to_impact(academic, (xi,)) - catalog.academic_impact_time(p, (xi,))) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.3, 1.5), dq=st.floats(0.0, 0.3))
def test_tcp_impact_time_matches_closed_form(tcp_open, r, dq):
    p = catalog.get_entry("tcp").defaults
    x = (1.0 - dq, r)
    expect = catalog.tcp_impact_time(p, x)
    # the closed form ignores the excluded ball around (q_max, B)
    path = np.array([catalog.tcp_flow(p, x, t) for t in np.linspace(0.0, expect, 400)])
    if np.min(np.hypot(path[:, 0] - 1.0, path[:, 1] - 1.0)) < 0.01:
        return
    got = time_to_impact(tcp_open, x)
    assert abs(got - expect) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(xi=st.floats(1.0, 1.9), d=st.floats(-1e-4, 1e-4))
def test_impact_time_continuous(academic, xi, d):
    # T_I is continuous away from the guard
    a = time_to_impact(academic, (xi,))
    b = time_to_impact(academic, (xi + d,))
    assert abs(a - b) <= 2 * abs(d) + 1e-9
