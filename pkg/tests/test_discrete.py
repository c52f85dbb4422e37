import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hylc import catalog
from hylc.discrete import (
    ComputedMapConfig,
    closeness_study,
    consistency_slope,
    d_grid,
    drift_csv,
    fixed_point_drift,
    poincare_euler,
)
from hylc.errors import InvalidInputError, NoReturnError

TCP_P = catalog.get_entry("tcp").defaults
ACAD_P = catalog.get_entry("academic").defaults
X_STAR = np.array([1.0, 1.6])


def tcp_exact(x):
    return catalog.tcp_poincare(TCP_P, x)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(1.05, 2.4), s=st.sampled_from([0.1, 0.05, 0.02, 0.01]))
def test_tcp_formula(tcp, r, s):
    y, k = poincare_euler(tcp, (1.0, r), ComputedMapConfig(s=s), return_steps=True)
    m, B, a = 0.25, 1.0, 1.0
    expect = (1.0 + (m * r - B) * k * s + k * k * a * s * s / 2, m * r + a * k * s)
    np.testing.assert_allclose(y, expect, atol=1e-12)
    # first step past the guard
    assert y[0] >= 1.0 - 1e-12


def test_euler_scheme_formula(tcp):
    # forward Euler accumulates k(k-1)/2 instead of k^2/2
    s, r = 0.05, 1.6
    y, k = poincare_euler(tcp, (1.0, r), ComputedMapConfig(s=s, scheme="euler"), return_steps=True)
    np.testing.assert_allclose(y, (1.0 + (0.25 * r - 1) * k * s + k * (k - 1) * s * s / 2, 0.25 * r + k * s),
                               atol=1e-12)


@pytest.mark.parametrize("k", [12, 24, 120, 400])
def test_tcp_exact_fixed_point(tcp, k):
    rows = fixed_point_drift(tcp, [1.2 / k], (1.0, 1.0), x_star=X_STAR)
    assert not rows[0].flagged
    assert rows[0].drift <= 1e-9


def test_tcp_drift_shrinks(tcp):
    rows = fixed_point_drift(tcp, [0.1, 0.05, 0.01, 0.001], (1.0, 1.0), x_star=X_STAR)
    assert [r.s for r in rows] == [0.1, 0.05, 0.01, 0.001]
    for r in rows:
        assert r.drift <= 2.0 * r.s
    assert rows[-1].drift <= rows[0].drift + 1e-12


def test_izhikevich_drift_decreasing(izhikevich, izh_fixed_point):
    rows = fixed_point_drift(izhikevich, [0.1, 0.01], None, x_star=izh_fixed_point)
    assert rows[1].drift < rows[0].drift


def test_drift_csv_layout(tcp):
    rows = fixed_point_drift(tcp, [0.1, 0.01], (1.0, 1.0), x_star=X_STAR)
    text = drift_csv(rows)
    assert text.splitlines()[0] == "s,drift"
    assert len(text.splitlines()) == 3


def test_consistency_slope_tcp(tcp):
    pts = d_grid(tcp, 20, X_STAR, spread=0.2, seed=0)
    assert len(pts) == 20
    out = consistency_slope(tcp, pts, [0.1, 0.03, 0.01, 0.003], exact_map=tcp_exact)
    assert out["slope"] >= 0.9


def test_consistency_slope_academic(academic):
    pts = [np.array([2.0])]
    out = consistency_slope(academic, pts, [0.1, 0.03, 0.01, 0.003],
                            exact_map=lambda x: catalog.academic_poincare(ACAD_P, x))
    assert out["slope"] >= 0.9


def test_closeness_tcp(tcp):
    starts = [np.array([1.0, r]) for r in (1.2, 1.6, 2.0)]
    out = closeness_study(tcp, starts, 5, [0.1, 0.01, 0.001], 1e-3, exact_map=tcp_exact)
    assert out["s_star"] is not None and out["s_star"] > 0
    # from the fixed point s = 0.1 divides T* and is exact, so the coarse
    # gap (0) beats the fine one; the study flags that start
    assert out["ordering_violations"] == [1]
    assert out["rows"][-1]["gaps"][1] <= 1e-12


def test_closeness_academic_uniform_in_J(academic):
    starts = [np.array([2.0])]
    exact = lambda x: catalog.academic_poincare(ACAD_P, x)
    s = 0.01
    g1 = closeness_study(academic, starts, 1, [s], 1.0, exact_map=exact)["rows"][0]["max_gap"]
    g10 = closeness_study(academic, starts, 10, [s], 1.0, exact_map=exact)["rows"][0]["max_gap"]
    # the reset forgets the error, so ten iterates are no worse than one
    assert g10 <= g1 + 1e-12
    assert g10 <= 2.0 * s


def test_config_validation():
    with pytest.raises(InvalidInputError):
        ComputedMapConfig(s=0.0)
    with pytest.raises(InvalidInputError):
        ComputedMapConfig(s=0.1, k_cap=0)
    with pytest.raises(InvalidInputError):
        ComputedMapConfig(s=0.1, scheme="rk4")


def test_k_cap(tcp):
    with pytest.raises(NoReturnError):
        poincare_euler(tcp, (1.0, 1.6), ComputedMapConfig(s=1e-3, k_cap=10))


def test_off_guard_rejected(tcp):
    with pytest.raises(InvalidInputError):
        poincare_euler(tcp, (0.5, 1.6), ComputedMapConfig(s=0.01))


def test_generic_step_flags_periodic_orbit(tcp):
    rows = fixed_point_drift(tcp, [0.07], (1.0, 1.0), x_star=X_STAR)
    assert rows[0].flagged and "periodic" in rows[0].note
    assert math.isfinite(rows[0].drift)
