import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hylc import catalog
from hylc.certify import (
    Certificate,
    Reparameterization,
    build_impact_reparameterization,
    check_certificate,
    check_incremental_stability,
    check_nonexistence_signal,
    euclidean_distance_profile,
    identity_reparameterization,
    zhukovskii_distance,
)
from hylc.cycles import extract_limit_cycle
from hylc.errors import DegenerateError, InvalidInputError
from hylc.sim import simulate

TCP_P = catalog.get_entry("tcp").defaults
ROT_P = catalog.get_entry("rotation").defaults


# ------------------------------------------------------------ certificates


def test_tcp_certificate_passes(tcp, tcp_cycle):
    rep = check_certificate(tcp, catalog.tcp_certificate(TCP_P), tcp_cycle)
    assert rep.verdict == "pass"
    assert max(rep.residual_flow, rep.residual_flow2, rep.residual_jump) <= 1e-5


def test_tcp_certificate_passes_without_gradient(tcp, tcp_cycle):
    rep = check_certificate(tcp, catalog.tcp_certificate(TCP_P).without_gradient(), tcp_cycle)
    assert rep.verdict == "pass"


def test_rotation_certificate_passes(rotation, rotation_cycle):
    rep = check_certificate(rotation, catalog.rotation_certificate(ROT_P), rotation_cycle)
    assert rep.verdict == "pass"
    assert max(rep.residual_flow, rep.residual_flow2, rep.residual_jump) <= 1e-5


def test_shifted_certificate_fails(tcp, tcp_cycle):
    cert = Certificate(p=lambda x: x[0] - 0.5, x_bar=np.zeros(2), n_bar=2)
    rep = check_certificate(tcp, cert, tcp_cycle)
    assert rep.verdict == "fail"
    assert rep.residual_flow > 1e-2


def test_polynomial_certificate_matches_closed_form(tcp, tcp_cycle):
    # q - r^2/2 + r - (1/2 + R) written as monomials
    R = catalog.tcp_level(TCP_P)
    doc = {"coefficients": {"1,0": 1.0, "0,2": -0.5, "0,1": 1.0, "0,0": -(0.5 + R)},
           "x_bar": [0.0, 0.0], "n_bar": 2}
    cert = Certificate.from_json(doc)
    ref = catalog.tcp_certificate(TCP_P)
    for x in tcp_cycle.samples[::100]:
        assert cert.p(x) == pytest.approx(ref.p(x), abs=1e-12)
        np.testing.assert_allclose(cert.grad_p(x), ref.grad_p(x), atol=1e-12)
    assert check_certificate(tcp, cert, tcp_cycle).verdict == "pass"


def test_certificate_validation():
    with pytest.raises(InvalidInputError):
        Certificate(p=lambda x: 1.0, x_bar=np.zeros(1), n_bar=3)
    with pytest.raises(InvalidInputError):
        Certificate(p=lambda x: 0.0, x_bar=np.zeros(1))
    with pytest.raises(InvalidInputError):
        Certificate.from_json({"coefficients": {"1": 1.0}, "x_bar": [1.0], "extra": 1})


@settings(max_examples=40, deadline=None)
@given(x=st.tuples(st.floats(-3, 3), st.floats(-3, 3)))
def test_W_nonnegative_and_zero_on_level(x):
    cert = catalog.rotation_certificate(ROT_P)
    assert cert.W(np.array(x)) >= 0
    ang = math.atan2(x[1], x[0])
    on = 3.5 * np.array([math.cos(ang), math.sin(ang)])
    assert cert.W(on) == pytest.approx(cert.p_bar ** 2, rel=1e-9)


# ------------------------------------------------------- reparameterization


def test_timer_reparameterization(timer, cfg):
    phi1 = simulate(timer, (0.8,), 3.0, 10, cfg)
    phi2 = simulate(timer, (0.0,), 4.0, 10, cfg)
    tau = build_impact_reparameterization(timer, phi1, phi2)
    assert tau.scale == pytest.approx(5.0)
    assert tau.shift == pytest.approx(0.8)
    assert tau(0.1) == pytest.approx(0.5)
    assert tau(1.0) == pytest.approx(1.8)
    z = zhukovskii_distance(phi1, phi2, tau)
    assert z.sup <= 0.8 + 1e-9
    assert z.sup_after(0.2) <= 1e-6


def test_identical_arcs_identity(timer, cfg):
    phi = simulate(timer, (0.3,), 3.0, 10, cfg)
    tau = build_impact_reparameterization(timer, phi, phi)
    assert tau.scale == pytest.approx(1.0) and tau.shift == pytest.approx(0.0)
    assert zhukovskii_distance(phi, phi, identity_reparameterization()).sup == 0.0
    for eps in (0.0, 0.1, 1.0):
        assert check_incremental_stability(phi, phi, eps).ok


def test_academic_shift(academic, cfg):
    a, b = 2.0, 6.0
    xi1, xi2 = 1.8, 1.2
    phi1 = simulate(academic, (xi1,), 2.0, 10, cfg)
    phi2 = simulate(academic, (xi2,), 2.0, 10, cfg)
    tau = build_impact_reparameterization(academic, phi1, phi2)
    assert tau.shift == pytest.approx(math.log((a * xi2 - b) / (a * xi1 - b)) / a, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(xi=st.floats(1.0, 1.9), delta=st.floats(0.0, 0.09))
def test_academic_zhukovskii_bound(academic, xi, delta):
    phi1 = simulate(academic, (xi,), 2.0, 10)
    phi2 = simulate(academic, (xi + delta,), 2.0, 10)
    if delta == 0:
        return
    tau = build_impact_reparameterization(academic, phi1, phi2)
    assert zhukovskii_distance(phi1, phi2, tau).sup <= delta + 1e-6


def test_degenerate_start(timer, cfg):
    phi1 = simulate(timer, (1.0,), 2.0, 10, cfg)
    phi2 = simulate(timer, (0.0,), 2.0, 10, cfg)
    with pytest.raises(DegenerateError):
        build_impact_reparameterization(None, phi1, phi2)
    with pytest.raises(DegenerateError):
        Reparameterization(0.0, 1.0)


def test_euclidean_profile(timer, cfg):
    phi1 = simulate(timer, (0.8,), 3.0, 10, cfg)
    phi2 = simulate(timer, (0.0,), 3.0, 10, cfg)
    ts = np.linspace(0.0, 2.9, 59)
    d = euclidean_distance_profile(phi1, phi2, ts)
    # 0.8 until phi1 jumps at 0.2, then 0.2 for 0.8 seconds, then 0.8 again
    assert np.allclose(d[ts < 0.19], 0.8, atol=1e-6)
    mid = (ts > 0.21) & (ts < 0.99)
    assert np.allclose(d[mid], 0.2, atol=1e-6)


# --------------------------------------------------------- incremental


def test_rotation_incremental(cfg):
    sys = catalog.make_rotation(restrict=False)
    x1, x2 = np.array([3.0, 0.0]), np.array([4.0, 3.0])
    gap = float(np.linalg.norm(x1 - x2))
    # smallest eps with delta = min(delta_phi, delta_t, eps) covering the start gap
    lo, hi = 0.0, 10.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if min(*catalog.rotation_delta_bounds(ROT_P, x1, x2, mid), mid) >= gap:
            hi = mid
        else:
            lo = mid
    eps = hi
    phi1 = simulate(sys, x1, 12.0, 20, cfg)
    phi2 = simulate(sys, x2, 12.0, 20, cfg)
    assert check_incremental_stability(phi1, phi2, eps).ok
    assert check_incremental_stability(phi2, phi1, eps).ok


def test_timer_incremental_fails(timer, cfg):
    phi1 = simulate(timer, (0.8,), 3.0, 10, cfg)
    phi2 = simulate(timer, (0.0,), 3.0, 10, cfg)
    res = check_incremental_stability(phi1, phi2, 0.1)
    assert not res.ok
    t, j = res.witness
    assert j >= 0 and t >= 0


def test_negative_eps_rejected(timer, cfg):
    phi = simulate(timer, (0.3,), 1.0, 10, cfg)
    with pytest.raises(InvalidInputError):
        check_incremental_stability(phi, phi, -0.1)


# ---------------------------------------------------- nonexistence signal


def test_timer_nonexistence(timer, timer_cycle, cfg):
    rep = check_nonexistence_signal(timer, timer_cycle, [0.05, 0.1, 0.21, 0.25], 0.2, cfg)
    ok = {r["eps"]: r["pass"] for r in rep["rows"]}
    assert not ok[0.05] and not ok[0.1]
    assert ok[0.25]


def test_tcp_zero_shift_passes(tcp, tcp_cycle, cfg):
    rep = check_nonexistence_signal(tcp, tcp_cycle, [1e-3, 0.01, 0.1], 0.0, cfg)
    assert all(r["pass"] for r in rep["rows"])


def test_academic_half_period_fails_small_eps(academic, cfg):
    cyc = extract_limit_cycle(academic, (2.0,), cfg)
    rep = check_nonexistence_signal(academic, cyc, [1e-3, 1e-2], cyc.period_T_star / 2, cfg)
    assert not any(r["pass"] for r in rep["rows"])
