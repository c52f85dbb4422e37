import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hylc import catalog
from hylc.errors import InvalidInputError
from hylc.sim import SampledSet, distance_to_samples, omega_limit_estimate, simulate


def _max_error_vs_closed_form(name, arc, x0, T_max, J_max):
    segs = catalog.closed_form_segments(name, None, x0, T_max, J_max)
    worst = 0.0
    for seg in arc.segments:
        for t, x in zip(seg.times, seg.states):
            y = catalog.closed_form_value(name, None, segs, float(t), seg.j)
            worst = max(worst, float(np.max(np.abs(x - y))))
    return worst


def test_timer_solution(timer, cfg):
    arc = simulate(timer, (0.4,), 3.0, 10, cfg)
    t, j, x = arc.flat()
    assert float(np.max(np.abs(x[:, 0] - (0.4 + t - j)))) <= 1e-9
    # records carry the counter before the jump
    assert [r.j for r in arc.jumps] == [0, 1, 2]
    assert [r.t for r in arc.jumps] == pytest.approx([0.6, 1.6, 2.6], abs=1e-9)


def test_tcp_matches_closed_form(tcp, cfg):
    arc = simulate(tcp, (1.0, 0.4), 6.5, 10, cfg)
    assert len(arc.jumps) == 5
    assert _max_error_vs_closed_form("tcp", arc, (1.0, 0.4), 6.5, 10) <= 1e-6


def test_academic_matches_closed_form(academic, cfg):
    T = 5 * math.log(2) / 2
    arc = simulate(academic, (1.0,), T, 10, cfg)
    assert _max_error_vs_closed_form("academic", arc, (1.0,), T, 10) <= 1e-7


def test_start_outside_rejected(tcp):
    with pytest.raises(InvalidInputError):
        simulate(tcp, (1.2, 1.0), 1.0, 1)
    with pytest.raises(InvalidInputError):
        simulate(tcp, (1.0, 1.0), -1.0, 1)


def test_jmax_stops(timer, cfg):
    arc = simulate(timer, (0.0,), 100.0, 4, cfg)
    assert arc.j_final == 4
    assert arc.t_final == pytest.approx(4.0, abs=1e-9)


def test_jump_records_consistent(tcp, cfg):
    arc = simulate(tcp, (1.0, 0.4), 10.0, 20, cfg)
    for r in arc.jumps:
        assert abs(tcp.h(r.x_minus)) <= 1e-9
        np.testing.assert_allclose(r.x_plus, tcp.g(r.x_minus))
        seg = arc.segment(r.j + 1)
        np.testing.assert_allclose(seg.states[0], r.x_plus)
        assert seg.t_start == r.t
    # dwell time respected
    ts = [r.t for r in arc.jumps]
    assert min(np.diff(ts)) >= tcp.min_dwell


def test_omega_limit_academic(academic, cfg):
    arc = simulate(academic, (1.0,), 20.0, 100, cfg)
    pts = omega_limit_estimate(arc, 0.5)
    assert pts.min() <= 1.0 + 1e-3 and pts.max() >= 2.0 - 1e-3
    assert pts.min() >= 1.0 - 1e-9 and pts.max() <= 2.0 + 1e-9


def test_omega_limit_tcp_on_invariant(tcp_open, cfg):
    arc = simulate(tcp_open, (0.2, 0.2), 40.0, 100, cfg)
    pts = omega_limit_estimate(arc, 0.3)
    R = catalog.tcp_level(catalog.get_entry("tcp").defaults)
    resid = pts[:, 0] - (pts[:, 1] - 1.0) ** 2 / 2.0 - R
    assert float(np.max(np.abs(resid))) <= 1e-2


def test_omega_limit_needs_jumps(timer, cfg):
    arc = simulate(timer, (0.0,), 1.5, 10, cfg)
    with pytest.raises(InvalidInputError):
        omega_limit_estimate(arc, 0.5)


def test_distance_examples():
    assert distance_to_samples((1.0, 0.0), [(0.0, 0.0), (1.0, 0.0)]) == 0.0
    assert distance_to_samples((0.5, 1.0), [(0.0, 0.0), (1.0, 0.0)]) == pytest.approx(math.sqrt(1.25))
    with pytest.raises(InvalidInputError):
        distance_to_samples((0.0,), np.empty((0, 1)))


def test_tcp_fixed_point_on_cycle(tcp_cycle):
    assert float(np.min(tcp_cycle.distance(np.array([1.0, 1.6])))) <= 1e-6


@settings(max_examples=50, deadline=None)
@given(pts=st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=2, max_size=30),
       x=st.tuples(st.floats(-3, 3), st.floats(-3, 3)))
def test_sampled_set_distance_bounded_by_point_distance(pts, x):
    # the polyline refinement can only shrink the point-set distance
    s = SampledSet(np.array(pts), ordered=True)
    d_poly = float(np.min(s.distance(np.array(x))))
    d_pts = distance_to_samples(x, pts)
    assert d_poly <= d_pts + 1e-12
    assert d_poly >= 0


def test_simulate_is_deterministic(izhikevich, cfg):
    a = simulate(izhikevich, (-55.0, -6.0), 100.0, 10, cfg)
    b = simulate(izhikevich, (-55.0, -6.0), 100.0, 10, cfg)
    assert a.to_csv() == b.to_csv()
