import json
import math

import numpy as np
import pytest

from hylc import catalog
from hylc.cycles import analyze_fixed_point, extract_limit_cycle, find_fixed_point
from hylc.errors import InvalidInputError, ParameterError
from hylc.model import validate_assumptions
from hylc.sim import simulate

# entries whose closed forms are checked against the simulator (tolerance)
CLOSED_FORM = {"tcp": 1e-6, "academic": 1e-9, "timer": 1e-9, "rotation": 1e-6}
# compass gait multipliers deviate from the reference list (see ledger)
EIG_EXEMPT = {"compass_gait"}


def test_tcp_examples(cfg):
    sys = catalog.make_tcp(B=1, a=1, m=0.25, q_max=1)
    np.testing.assert_allclose(find_fixed_point(sys, (1.0, 1.0), cfg), [1.0, 1.6], atol=1e-8)
    assert catalog.tcp_period(dict(B=1, a=1, m=0.25)) == pytest.approx(1.2)
    with pytest.raises(ParameterError):
        catalog.make_tcp(B=1, a=1, m=0.9, q_max=1)
    sys2 = catalog.make_tcp(B=2, a=1, m=0.25, q_max=1)
    np.testing.assert_allclose(find_fixed_point(sys2, (1.0, 3.0), cfg), [1.0, 3.2], atol=1e-8)


def test_academic_examples(cfg):
    assert catalog.academic_period(dict(a=2, b=6, b1=2, b2=1)) == pytest.approx(math.log(2) / 2)
    with pytest.raises(ParameterError):
        catalog.make_academic(1, 2, 3, 1)
    sys = catalog.make_academic(1, 4, 2, 1)
    c = extract_limit_cycle(sys, (2.0,), cfg)
    assert c.period_T_star == pytest.approx(math.log(1.5), abs=1e-7)


def test_izhikevich_variants_construct():
    catalog.make_izhikevich(d=0.0)
    catalog.make_izhikevich(I_ext=0.0)


def test_timer_and_rotation(cfg, timer_cycle, rotation_cycle):
    assert timer_cycle.period_T_star == pytest.approx(1.0, abs=1e-9)
    assert timer_cycle.samples.min() == pytest.approx(0.0) and timer_cycle.samples.max() == pytest.approx(1.0)
    assert rotation_cycle.period_T_star == pytest.approx(math.pi / 1.6, abs=1e-6)
    radii = np.linalg.norm(rotation_cycle.samples, axis=1)
    assert np.allclose(radii, 3.5, atol=1e-8)
    with pytest.raises(ParameterError):
        catalog.make_rotation(b=-1.0)


@pytest.mark.parametrize("name", sorted(catalog.CATALOG))
def test_entries_validate(name):
    assert validate_assumptions(catalog.build(name), 60, 0).verdict == "pass"


@pytest.mark.parametrize("name,tol", sorted(CLOSED_FORM.items()))
def test_closed_form_matches_simulator(name, tol, cfg):
    entry = catalog.get_entry(name)
    sys = entry.build()
    x0 = entry.default_x0
    T = 5.3 * float(entry.reference["T_star"].value)
    arc = simulate(sys, x0, T, 20, cfg)
    segs = catalog.closed_form_segments(name, None, x0, T, 20)
    assert len(arc.jumps) == len(segs) - 1
    worst = 0.0
    for seg in arc.segments:
        for t, x in zip(seg.times, seg.states):
            worst = max(worst, float(np.max(np.abs(x - catalog.closed_form_value(name, None, segs, t, seg.j)))))
    assert worst <= tol


@pytest.mark.parametrize("name", sorted(set(catalog.CATALOG) - EIG_EXEMPT))
def test_reference_values(name, cfg):
    entry = catalog.get_entry(name)
    sys = entry.build()
    x = find_fixed_point(sys, entry.fixed_point_guess, cfg)
    a = analyze_fixed_point(sys, x, cfg)
    c = extract_limit_cycle(sys, x, cfg)
    rep = catalog.compare_to_reference(name, None, x, c.period_T_star, a.eigenvalues)
    assert rep["applicable"]
    assert not rep["deviation"], rep["checks"]


def test_compass_reference_flags_deviation(cfg):
    entry = catalog.get_entry("compass_gait")
    sys = entry.build()
    x = find_fixed_point(sys, entry.fixed_point_guess, cfg)
    a = analyze_fixed_point(sys, x, cfg)
    rep = catalog.compare_to_reference("compass_gait", None, x, None, a.eigenvalues)
    assert rep["checks"]["fixed_point"]["ok"]
    assert rep["deviation"] and rep["notes"]


def test_reference_not_applicable_off_defaults():
    assert catalog.compare_to_reference("tcp", {"B": 2.0}, (1.0, 3.2)) == {"applicable": False}


def test_unknown_names_and_params():
    with pytest.raises(InvalidInputError):
        catalog.get_entry("nosuch")
    with pytest.raises(InvalidInputError):
        catalog.build("tcp", {"zeta": 1.0})


def test_system_document_round_trip(tmp_path):
    doc = catalog.system_document("tcp", {"m": 0.3})
    path = tmp_path / "tcp.json"
    path.write_text(json.dumps(doc))
    a = catalog.load_system(str(path))
    b = catalog.build("tcp", {"m": 0.3})
    assert a.params == b.params
    np.testing.assert_array_equal(a.region.box, b.region.box)
    with pytest.raises(InvalidInputError):
        catalog.load_system({"system": "tcp", "colour": 1})
    with pytest.raises(InvalidInputError):
        catalog.load_system("{not json")


def test_list_entries_schema():
    entries = catalog.list_entries()
    names = [e["name"] for e in entries]
    assert names == sorted(names)
    assert {"tcp", "izhikevich", "compass_gait", "academic", "timer", "rotation"} <= set(names)
    json.dumps(entries)
