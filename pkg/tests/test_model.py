import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hylc import catalog
from hylc.errors import InvalidInputError
from hylc.model import (
    HybridSystem,
    Region,
    flow_membership,
    fd_gradient,
    jump_membership,
    lie_derivative_h,
    validate_assumptions,
)

finite = st.floats(-5, 5, allow_nan=False)


def test_flow_membership_examples(tcp, timer):
    assert flow_membership(tcp, (0.5, 1.0), 0.0)
    assert not flow_membership(tcp, (1.2, 1.0), 0.0)
    assert flow_membership(timer, (1.0,), 0.0)


def test_jump_membership_examples(tcp, academic):
    assert jump_membership(tcp, (1.0, 1.6))
    assert not jump_membership(tcp, (1.0, 0.4))
    assert jump_membership(academic, (2.0,))


def test_lie_derivative_examples(tcp, timer, academic):
    assert lie_derivative_h(tcp, (1.0, 1.6)) == pytest.approx(-0.6, abs=1e-12)
    for x in (0.0, 0.3, 1.0):
        assert lie_derivative_h(timer, (x,)) == pytest.approx(-1.0)
    assert lie_derivative_h(academic, (2.0,)) == pytest.approx(-2.0)


def test_non_finite_state_rejected(tcp):
    with pytest.raises(InvalidInputError):
        flow_membership(tcp, (np.nan, 1.0))
    with pytest.raises(InvalidInputError):
        jump_membership(tcp, (1.0, np.inf))


def test_wrong_dimension_rejected(tcp):
    with pytest.raises(InvalidInputError):
        flow_membership(tcp, (1.0, 1.0, 1.0))


def test_validate_tcp_passes(tcp):
    rep = validate_assumptions(tcp, 100, 0)
    assert rep.verdict == "pass"
    assert rep.lie_derivative_max < 0
    assert not rep.g_maps_back_into_D


def test_validate_izhikevich_passes(izhikevich):
    assert validate_assumptions(izhikevich, 100, 0).verdict == "pass"


def test_validate_tcp_large_m_fails_on_reentry():
    sys = catalog.make_tcp(m=1.5, strict=False)
    rep = validate_assumptions(sys, 100, 0)
    assert rep.verdict == "fail"
    assert rep.g_maps_back_into_D
    assert rep.g_witnesses


def test_validate_is_deterministic(tcp):
    a = validate_assumptions(tcp, 50, 7).to_dict()
    b = validate_assumptions(tcp, 50, 7).to_dict()
    assert a == b


def test_validate_empty_jump_set_warns():
    sys = HybridSystem(
        n=1, f=lambda x: -x, g=lambda x: x, h=lambda x: 1.0,
        region=Region(np.array([[-1.0, 1.0]])),
    )
    with pytest.warns(UserWarning):
        rep = validate_assumptions(sys, 10, 0)
    assert len(rep.samples) == 0


@settings(max_examples=50, deadline=None)
@given(q=st.floats(0.0, 1.0), r=st.floats(0.0, 2.4))
def test_jump_set_inside_flow_set(tcp, q, r):
    # D is a subset of C
    x = np.array([q, r])
    if jump_membership(tcp, x):
        assert flow_membership(tcp, x)


@settings(max_examples=50, deadline=None)
@given(q=finite, r=finite)
def test_fd_lie_derivative_matches_analytic(q, r):
    sys = catalog.make_tcp(restrict=False)
    x = np.array([q, r])
    analytic = lie_derivative_h(sys, x)
    fd = float(fd_gradient(sys.h, x) @ sys.f(x))
    assert abs(analytic - fd) <= 1e-6 * (1 + abs(analytic))


@settings(max_examples=30, deadline=None)
@given(v=st.floats(-80, 30), w=st.floats(-20, 20))
def test_membership_is_deterministic(izhikevich, v, w):
    x = np.array([v, w])
    assert flow_membership(izhikevich, x) == flow_membership(izhikevich, x.copy())
    assert jump_membership(izhikevich, x) == jump_membership(izhikevich, x.copy())


def test_negative_tolerance_rejected(tcp):
    with pytest.raises(InvalidInputError):
        flow_membership(tcp, (0.5, 1.0), -1.0)
