"""Fixed-point drift of the computed Poincare map P_s for TCP and Izhikevich."""

from hylc import catalog
from hylc.cycles import find_fixed_point
from hylc.discrete import ComputedMapConfig, consistency_slope, d_grid, fixed_point_drift
from hylc.flow import IntegratorConfig


def main():
    cfg = IntegratorConfig()
    for name, grid in (("tcp", [0.1, 0.07, 0.03, 0.01, 0.003]), ("izhikevich", [0.1, 0.03, 0.01])):
        entry = catalog.get_entry(name)
        sys = entry.build()
        x_star = find_fixed_point(sys, entry.fixed_point_guess, cfg)
        for scheme in ("heun", "euler"):
            rows = fixed_point_drift(sys, grid, None, ComputedMapConfig(s=1.0, scheme=scheme), x_star=x_star)
            print(f"# {name} {scheme}")
            for r in rows:
                print(f"s={r.s:<6} drift={r.drift:.3e} {'flagged: ' + r.note if r.flagged else ''}")
        if name == "tcp":
            pts = d_grid(sys, 20, x_star, seed=0)
            out = consistency_slope(sys, pts, [0.1, 0.03, 0.01, 0.003], flow_cfg=cfg)
            print(f"# tcp consistency slope {out['slope']:.3f}")


if __name__ == "__main__":
    main()
