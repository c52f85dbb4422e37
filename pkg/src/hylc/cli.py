"""Command-line front end.

Every command writes its artifacts into --out (default: current directory)
and prints a short JSON summary. Exit codes: 0 success, 1 usage or input
error, 2 analysis verdict of fail, marginal or non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys as _sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import catalog
from .certify import (
    Certificate,
    build_impact_reparameterization,
    check_certificate,
    check_nonexistence_signal,
    zhukovskii_distance,
)
from .cycles import SCHEMA, analyze_fixed_point, cycle_report, detect_limit_cycle, extract_limit_cycle, find_fixed_point
from .discrete import ComputedMapConfig, closeness_study, d_grid, drift_csv, fixed_point_drift
from .errors import HylcError, InvalidInputError, NonConvergenceError
from .flow import IntegratorConfig
from .model import HybridSystem
from .robust import SweepProtocol, sweep_margin
from .sim import simulate

EXIT_OK, EXIT_USAGE, EXIT_VERDICT = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    system: str
    params: dict = field(default_factory=dict)
    x0: Optional[list] = None
    tmax: Optional[float] = None
    jmax: Optional[int] = None
    step: Optional[float] = None
    event_tol: float = 1e-10
    out: str = "."
    seed: int = 0
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("tmax", "step", "event_tol"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise InvalidInputError(f"--{name.replace('_', '-')} must be finite")
        if self.x0 is not None and not all(math.isfinite(v) for v in self.x0):
            raise InvalidInputError("--x0 must be finite")


# --------------------------------------------------------------- parsing


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidInputError(f"expected comma-separated numbers, got '{text}'") from None


def _value(text: str):
    low = text.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return float(text)
    except ValueError:
        raise InvalidInputError(f"bad parameter value '{text}'") from None


def _params(text: Optional[str]) -> dict:
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        if "=" not in item:
            raise InvalidInputError(f"bad --params item '{item}', expected k=v")
        k, v = item.split("=", 1)
        out[k.strip()] = _value(v)
    return out


def _box(text: str) -> list:
    rows = [_floats(r) for r in text.split(";")]
    if any(len(r) != 2 for r in rows):
        raise InvalidInputError("box must look like 'lo,hi;lo,hi;...'")
    return rows


def _resolve_system(cfg: RunConfig):
    """(system, catalog entry, resolved params) from a name or a JSON file."""
    spec = cfg.system
    if spec.endswith(".json") or os.path.isfile(spec):
        try:
            with open(spec, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise InvalidInputError(f"cannot read {spec}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"malformed JSON in {spec}: {exc}") from None
        if cfg.params:
            doc = dict(doc)
            doc["params"] = {**(doc.get("params") or {}), **cfg.params}
        system = catalog.load_system(doc)
        entry = catalog.get_entry(doc["system"])
        params = entry.resolve(doc.get("params") or {})
        return system, entry, params, doc
    entry = catalog.get_entry(spec)
    params = entry.resolve(cfg.params)
    return entry.constructor(**params), entry, params, None


def _integrator(cfg: RunConfig, entry=None, sweep=False) -> IntegratorConfig:
    step = cfg.step
    if step is None:
        step = entry.step if (sweep and entry is not None and entry.step) else 1e-3
    return IntegratorConfig(step=step, event_tol=cfg.event_tol)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(u) for k, u in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def _write(cfg: RunConfig, name: str, content) -> str:
    try:
        os.makedirs(cfg.out, exist_ok=True)
        path = os.path.join(cfg.out, name)
        text = content if isinstance(content, str) else json.dumps(_jsonable(content), indent=2, sort_keys=True) + "\n"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise InvalidInputError(f"cannot write to {cfg.out}: {exc}") from None
    return path


def _emit(summary: dict) -> None:
    print(json.dumps(_jsonable(summary), sort_keys=True))


def _x0(cfg, entry, sys: HybridSystem, fallback_name="default_x0"):
    if cfg.x0 is not None:
        if len(cfg.x0) != sys.n:
            raise InvalidInputError(f"--x0 needs {sys.n} values")
        return cfg.x0
    x0 = getattr(entry, fallback_name)
    if x0 is None:
        raise InvalidInputError("--x0 is required for this system")
    return list(x0)


# -------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig) -> int:
    sys, entry, params, _ = _resolve_system(cfg)
    x0 = _x0(cfg, entry, sys)
    arc = simulate(sys, x0, cfg.tmax if cfg.tmax is not None else 10.0,
                   cfg.jmax if cfg.jmax is not None else 100, _integrator(cfg))
    traj = _write(cfg, "trajectory.csv", arc.to_csv())
    dom = _write(cfg, "domain.json", {"schema": SCHEMA, "system": entry.name, "params": params,
                                      "x0": x0, **arc.domain()})
    _emit({"schema": SCHEMA, "terminated_by": arc.terminated_by, "jumps": len(arc.jumps),
           "files": [traj, dom]})
    return EXIT_OK


def _cycle_pipeline(cfg, sys, entry, icfg):
    """Fixed point from --x0 (simulate and detect) or the catalog guess."""
    if cfg.x0 is not None:
        cyc = detect_limit_cycle(sys, _x0(cfg, entry, sys), icfg)
        if cyc is None:
            raise NonConvergenceError("no limit cycle detected from --x0")
        return cyc.x_pre, cyc
    if entry.fixed_point_guess is None:
        raise InvalidInputError("--x0 is required for this system")
    x_star = find_fixed_point(sys, entry.fixed_point_guess, icfg)
    return x_star, extract_limit_cycle(sys, x_star, icfg)


def cmd_cycle(cfg: RunConfig) -> int:
    sys, entry, params, _ = _resolve_system(cfg)
    icfg = _integrator(cfg)
    try:
        x_star, cyc = _cycle_pipeline(cfg, sys, entry, icfg)
    except NonConvergenceError as exc:
        _write(cfg, "cycle.json", {"schema": SCHEMA, "system": entry.name, "verdict": "non_convergence",
                                   "reason": str(exc)})
        _emit({"schema": SCHEMA, "verdict": "non_convergence", "reason": str(exc)})
        return EXIT_VERDICT
    analysis = analyze_fixed_point(sys, x_star, icfg)
    report = cycle_report(analysis, cyc)
    report["system"] = entry.name
    report["params"] = params
    report["cycle"] = cyc.to_dict()
    report["reference"] = catalog.compare_to_reference(entry.name, params, x_star, cyc.period_T_star,
                                                       analysis.eigenvalues)
    path = _write(cfg, "cycle.json", report)
    lines = ["s," + ",".join(f"x{i}" for i in range(sys.n))]
    for t, x in zip(cyc.times, cyc.samples):
        lines.append(",".join(repr(float(v)) for v in (t, *x)))
    samples = _write(cfg, "cycle_samples.csv", "\n".join(lines) + "\n")
    _emit({"schema": SCHEMA, "verdict": analysis.verdict, "eigenvalues": report["eigenvalues"],
           "T_star": cyc.period_T_star, "deviation": report["reference"].get("deviation", False),
           "files": [path, samples]})
    return EXIT_OK if analysis.verdict == "asymptotically_stable" else EXIT_VERDICT


def cmd_robust(cfg: RunConfig) -> int:
    sys, entry, params, _ = _resolve_system(cfg)
    ex = cfg.extra
    icfg = _integrator(cfg, entry, sweep=True)
    x_star = find_fixed_point(sys, entry.fixed_point_guess, icfg)
    cyc = extract_limit_cycle(sys, x_star, icfg)
    mode = {"perturbation": "perturbation_rho", "inflation": "inflation_eps"}[ex["mode"]]
    K = ex["kbox"] or (entry.K_box and [list(r) for r in entry.K_box])
    if K is None:
        raise InvalidInputError("--kbox is required for this system")
    grid = ex["grid"] or ([0.0005, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4]
                          if mode == "perturbation_rho" else [0.005, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32])
    proto = SweepProtocol(settle_periods=ex["settle"], check_periods=ex["check"], policy=ex["policy"],
                          metric=ex["metric"])
    table = sweep_margin(sys, cyc, mode, K, ex["eps"], grid, trials=ex["trials"], seed=cfg.seed, cfg=icfg,
                         jobs=cfg.jobs, protocol=proto)
    csv = _write(cfg, "sweep.csv", table.to_csv())
    meta = _write(cfg, "sweep.json", table.metadata_json())
    ok = all(r.pass_fraction == 1.0 and r.margin > 0 for r in table.rows)
    _emit({"schema": SCHEMA, "rows": len(table.rows), "ratios": table.ratios(), "monotone": table.is_monotone(),
           "files": [csv, meta]})
    return EXIT_OK if ok else EXIT_VERDICT


def _load_certificate(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"malformed certificate JSON: {exc}") from None
    return Certificate.from_json(doc)


def cmd_certify(cfg: RunConfig) -> int:
    sys, entry, params, _ = _resolve_system(cfg)
    ex = cfg.extra
    icfg = _integrator(cfg)
    x_star = find_fixed_point(sys, entry.fixed_point_guess, icfg)
    cyc = extract_limit_cycle(sys, x_star, icfg)
    out = {"schema": SCHEMA, "system": entry.name, "params": params}
    verdict_ok = True
    cert = None
    if ex.get("cert"):
        cert = _load_certificate(ex["cert"])
    elif entry.certificate is not None:
        cert = entry.certificate(params)
    if cert is not None:
        rep = check_certificate(sys, cert, cyc, cert_tol=ex["cert_tol"])
        out["certificate"] = rep.to_dict()
        verdict_ok = rep.verdict == "pass"
    if ex.get("zhukovskii"):
        a, b = ex["zhukovskii"]
        T = (cfg.tmax if cfg.tmax is not None else 5.0 * cyc.period_T_star)
        J = cfg.jmax if cfg.jmax is not None else 100
        p1, p2 = simulate(sys, a, T, J, icfg), simulate(sys, b, T, J, icfg)
        tau = build_impact_reparameterization(sys, p1, p2)
        z = zhukovskii_distance(p1, p2, tau)
        out["zhukovskii"] = {"tau": tau.to_dict(), "sup": z.sup, "unmatched": z.unmatched, "matched": z.matched,
                             "max_time_shift": z.max_time_shift}
    if ex.get("shift") is not None:
        out["delta_s"] = check_nonexistence_signal(sys, cyc, ex["ds_eps"], ex["shift"], icfg)
    path = _write(cfg, "certify.json", out)
    _emit({"schema": SCHEMA, "certificate": out.get("certificate", {}).get("verdict"), "files": [path]})
    return EXIT_OK if verdict_ok else EXIT_VERDICT


def cmd_discrete(cfg: RunConfig) -> int:
    sys, entry, params, _ = _resolve_system(cfg)
    ex = cfg.extra
    icfg = _integrator(cfg)
    x_star = find_fixed_point(sys, entry.fixed_point_guess, icfg)
    base = ComputedMapConfig(s=1.0, scheme=ex["scheme"])
    rows = fixed_point_drift(sys, ex["s"], None, base, x_star=x_star)
    drift = _write(cfg, "drift.csv", drift_csv(rows))
    exact = None
    if entry.poincare is not None:
        exact = lambda x: entry.poincare(params, x)
    starts = d_grid(sys, ex["starts"], x_star, seed=cfg.seed) if sys.n > 1 else [x_star]
    close = closeness_study(sys, starts, ex["J"], ex["s"], ex["eps_close"], base, icfg, exact)
    close["schema"] = SCHEMA
    close["system"] = entry.name
    close["drift"] = [{"s": r.s, "drift": r.drift, "flagged": r.flagged, "note": r.note} for r in rows]
    cpath = _write(cfg, "closeness.json", close)
    flagged = any(r.flagged for r in rows)
    _emit({"schema": SCHEMA, "s_star": close["s_star"], "flagged_rows": sum(r.flagged for r in rows),
           "files": [drift, cpath]})
    return EXIT_VERDICT if flagged else EXIT_OK


def cmd_catalog(cfg: RunConfig) -> int:
    ex = cfg.extra
    if ex["action"] == "list":
        entries = catalog.list_entries()
        if ex["json"]:
            print(json.dumps(_jsonable({"schema": SCHEMA, "systems": entries}), indent=2, sort_keys=True))
        else:
            for e in entries:
                print(f"{e['name']:<14}{e['description']}")
        return EXIT_OK
    if not ex.get("name"):
        raise InvalidInputError("catalog export needs a system name")
    doc = catalog.system_document(ex["name"], cfg.params)
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    if ex.get("file"):
        _write(cfg, ex["file"], text)
    else:
        print(text, end="")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "cycle": cmd_cycle,
    "robust": cmd_robust,
    "certify": cmd_certify,
    "discrete": cmd_discrete,
    "catalog": cmd_catalog,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", default=None, help="catalog name or system JSON file")
    common.add_argument("--params", default=None, help="k=v,... parameter overrides")
    common.add_argument("--x0", default=None, help="initial state v1,v2,...")
    common.add_argument("--tmax", type=float, default=None)
    common.add_argument("--jmax", type=int, default=None)
    common.add_argument("--step", type=float, default=None)
    common.add_argument("--event-tol", type=float, default=1e-10)
    common.add_argument("--out", default=".")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)

    p = argparse.ArgumentParser(prog="hylc", description="Hybrid limit cycle toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate a hybrid solution")
    sub.add_parser("cycle", parents=[common], help="find and classify a limit cycle")

    r = sub.add_parser("robust", parents=[common], help="robustness margin sweep")
    r.add_argument("--mode", choices=["perturbation", "inflation"], required=True)
    r.add_argument("--eps", required=True, help="comma-separated eps levels")
    r.add_argument("--grid", default=None, help="comma-separated margin grid")
    r.add_argument("--kbox", default=None, help="lo,hi;lo,hi;...")
    r.add_argument("--trials", type=int, default=4)
    r.add_argument("--policy", choices=["earliest", "latest"], default="earliest")
    r.add_argument("--metric", choices=["set", "nominal"], default="set")
    r.add_argument("--settle", type=float, default=10.0, help="settle window in periods")
    r.add_argument("--check", type=float, default=10.0, help="check window in periods")

    c = sub.add_parser("certify", parents=[common], help="certificate, Zhukovskii and delta-S checks")
    c.add_argument("--cert", default=None, help="polynomial certificate JSON")
    c.add_argument("--cert-tol", type=float, default=1e-5)
    c.add_argument("--zhukovskii", default=None, help="two initial states 'a1,a2;b1,b2'")
    c.add_argument("--shift", type=float, default=None, help="phase shift for the delta-S test")
    c.add_argument("--ds-eps", default="0.05,0.1,0.25", help="eps grid for the delta-S test")

    d = sub.add_parser("discrete", parents=[common], help="computed Poincare map study")
    d.add_argument("--s", default="0.1,0.05,0.01,0.001", help="comma-separated step sizes")
    d.add_argument("--scheme", choices=["heun", "euler"], default="heun")
    d.add_argument("--J", type=int, default=5)
    d.add_argument("--eps-close", type=float, default=1e-3)
    d.add_argument("--starts", type=int, default=5, help="number of D points for the closeness study")

    k = sub.add_parser("catalog", parents=[common], help="list or export catalog systems")
    k.add_argument("action", choices=["list", "export"])
    k.add_argument("name", nargs="?", default=None)
    k.add_argument("--json", action="store_true")
    k.add_argument("--file", default=None, help="write the export into --out/FILE")
    return p


def _config(args) -> RunConfig:
    extra = {}
    if args.command == "robust":
        extra = dict(mode=args.mode, eps=_floats(args.eps), grid=_floats(args.grid) if args.grid else None,
                     kbox=_box(args.kbox) if args.kbox else None, trials=args.trials, policy=args.policy,
                     metric=args.metric, settle=args.settle, check=args.check)
    elif args.command == "certify":
        zk = None
        if args.zhukovskii:
            zk = [_floats(v) for v in args.zhukovskii.split(";")]
            if len(zk) != 2:
                raise InvalidInputError("--zhukovskii needs two states separated by ';'")
        extra = dict(cert=args.cert, cert_tol=args.cert_tol, zhukovskii=zk, shift=args.shift,
                     ds_eps=_floats(args.ds_eps))
    elif args.command == "discrete":
        extra = dict(s=_floats(args.s), scheme=args.scheme, J=args.J, eps_close=args.eps_close,
                     starts=args.starts)
    elif args.command == "catalog":
        extra = dict(action=args.action, name=args.name, json=args.json, file=args.file)
    if args.command != "catalog" and not args.system:
        raise InvalidInputError("--system is required")
    return RunConfig(
        command=args.command, system=args.system or "", params=_params(args.params),
        x0=_floats(args.x0) if args.x0 else None, tmax=args.tmax, jmax=args.jmax, step=args.step,
        event_tol=args.event_tol, out=args.out, seed=args.seed, jobs=max(1, args.jobs), extra=extra,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = _config(args)
        return COMMANDS[cfg.command](cfg)
    except (InvalidInputError, ValueError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except HylcError as exc:
        _emit({"schema": SCHEMA, "verdict": "non_convergence", "reason": str(exc)})
        return EXIT_VERDICT


if __name__ == "__main__":
    raise SystemExit(main())
