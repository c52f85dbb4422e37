"""Compass-gait cycle from (0, 0, 2, -0.4): fixed point, period, multipliers and
kinetic-energy change across the impact."""

import numpy as np

from hylc import catalog
from hylc.cycles import analyze_fixed_point, detect_limit_cycle
from hylc.flow import IntegratorConfig


def main():
    entry = catalog.get_entry("compass_gait")
    sys = entry.build()
    cfg = IntegratorConfig()
    cyc = detect_limit_cycle(sys, entry.default_x0, cfg)
    if cyc is None:
        print("no cycle detected")
        return
    a = analyze_fixed_point(sys, cyc.x_pre, cfg)
    p = entry.resolve({})
    print("fixed point", np.round(cyc.x_pre, 4))
    print("period", round(cyc.period_T_star, 4))
    print("multipliers", [complex(round(e.real, 4), round(e.imag, 4)) for e in a.eigenvalues])
    print("spectral radius", round(a.spectral_radius, 4), a.verdict)
    ke_minus = catalog.compass_kinetic_energy(p, cyc.x_pre)
    ke_plus = catalog.compass_kinetic_energy(p, cyc.x_post)
    print("kinetic energy before/after impact", round(ke_minus, 4), round(ke_plus, 4))
    rep = catalog.compare_to_reference("compass_gait", None, cyc.x_pre, cyc.period_T_star, a.eigenvalues)
    for k, c in rep["checks"].items():
        print(f"  {k}: ok={c['ok']} error={c['error']:.4f} tol={c['tol']}")
    for note in rep["notes"]:
        print("note:", note)


if __name__ == "__main__":
    main()
