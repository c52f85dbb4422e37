"""Perturbed and inflated simulations, robustness-margin sweeps and
practical KL envelope checks.

Perturbed system:
    x' = f(x + d1) + d2          while x + d3 in M (flow)
    x+ = g(x + d1) + d2          when x + d4 in M ∩ D (jump)
Flow and jump channels of d1, d2 are separate signals so a perturbation can
act on jumps only.

Inflated system: C_eps = {h >= -eps}, D_eps = {|h| <= eps, L_f h <= 0}, with
either the earliest or the latest admissible jump.
"""

from __future__ import annotations

import json
import math
import multiprocessing as mp
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .cycles import LimitCycle
from .errors import InvalidInputError
from .flow import FlowHooks, IntegratorConfig
from .model import DEFAULT_TOL, HybridSystem, as_state, flow_membership, in_region, jump_membership, lie_derivative_h
from .sim import HybridArc, run_hybrid, simulate

# ---------------------------------------------------------------- signals


class Signal:
    """Bounded signal on hybrid time: __call__(t, j) -> vector of length n."""

    is_zero = False

    def __call__(self, t: float, j: int, n: int) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


class Zero(Signal):
    is_zero = True

    def __call__(self, t, j, n):
        return np.zeros(n)

    def describe(self):
        return {"kind": "zero"}


@dataclass(frozen=True)
class Constant(Signal):
    value: tuple

    def __call__(self, t, j, n):
        return np.asarray(self.value, dtype=float)

    def describe(self):
        return {"kind": "constant", "value": list(self.value)}


@dataclass(frozen=True)
class Sinusoid(Signal):
    """amplitude * sin(frequency * t + phase), componentwise amplitude."""

    amplitude: tuple
    frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, t, j, n):
        return np.asarray(self.amplitude, dtype=float) * math.sin(self.frequency * t + self.phase)

    def describe(self):
        return {"kind": "sinusoid", "amplitude": list(self.amplitude), "frequency": self.frequency,
                "phase": self.phase}


@dataclass(frozen=True)
class Noise(Signal):
    """Seeded piecewise-constant uniform noise in [-scale, scale]^n.

    Held constant on [k dt, (k+1) dt) for each jump count j, so the signal is
    measurable and reproducible.
    """

    scale: float
    seed: int = 0
    dt: float = 0.1

    def __call__(self, t, j, n):
        return _noise_sample(self.seed, int(j), int(math.floor(t / self.dt)), n) * self.scale

    def describe(self):
        return {"kind": "noise", "scale": self.scale, "seed": self.seed, "dt": self.dt}


@lru_cache(maxsize=65536)
def _noise_sample_cached(seed, j, k, n):
    return tuple(np.random.default_rng([seed, j, max(k, 0)]).uniform(-1.0, 1.0, n))


def _noise_sample(seed, j, k, n):
    return np.array(_noise_sample_cached(seed, j, k, n))


def _bounded(sig: Signal, bound: float, n: int):
    if sig.is_zero:
        return None

    def fn(t, j):
        v = sig(t, j, n)
        nv = float(np.linalg.norm(v))
        if nv > bound:
            v = v * (bound / nv)
        return v

    return fn


@dataclass(frozen=True)
class PerturbationSpec:
    """Signals d1..d4 with Euclidean bounds M1..M4."""

    d1_flow: Signal = field(default_factory=Zero)
    d2_flow: Signal = field(default_factory=Zero)
    d1_jump: Signal = field(default_factory=Zero)
    d2_jump: Signal = field(default_factory=Zero)
    d3: Signal = field(default_factory=Zero)
    d4: Signal = field(default_factory=Zero)
    M1: float = math.inf
    M2: float = math.inf
    M3: float = math.inf
    M4: float = math.inf

    def __post_init__(self):
        for name in ("M1", "M2", "M3", "M4"):
            v = getattr(self, name)
            if not v >= 0 or math.isnan(v):
                raise InvalidInputError(f"{name} must be >= 0")

    @property
    def is_zero(self) -> bool:
        return all(getattr(self, k).is_zero for k in ("d1_flow", "d2_flow", "d1_jump", "d2_jump", "d3", "d4"))

    def describe(self) -> dict:
        out = {k: getattr(self, k).describe() for k in ("d1_flow", "d2_flow", "d1_jump", "d2_jump", "d3", "d4")}
        out.update({k: getattr(self, k) for k in ("M1", "M2", "M3", "M4")})
        return out


def jump_sinusoid(n: int, rho: float, component: int = 0) -> PerturbationSpec:
    """rho * sin(t) added to one state component at every jump."""
    amp = [0.0] * n
    amp[component] = rho
    return PerturbationSpec(d2_jump=Sinusoid(tuple(amp)), M2=abs(rho))


def simulate_perturbed(sys: HybridSystem, x0, pert: PerturbationSpec, T_max: float, J_max: int,
                       cfg: Optional[IntegratorConfig] = None, keep_samples: bool = True) -> HybridArc:
    cfg = cfg or IntegratorConfig()
    if pert.is_zero:
        return simulate(sys, x0, T_max, J_max, cfg, keep_samples)
    x0 = as_state(sys, x0)
    if not (T_max >= 0 and J_max >= 0):
        raise InvalidInputError("T_max and J_max must be nonnegative")
    n = sys.n
    d1f, d2f = _bounded(pert.d1_flow, pert.M1, n), _bounded(pert.d2_flow, pert.M2, n)
    d1j, d2j = _bounded(pert.d1_jump, pert.M1, n), _bounded(pert.d2_jump, pert.M2, n)
    d3, d4 = _bounded(pert.d3, pert.M3, n), _bounded(pert.d4, pert.M4, n)
    f, g, h = sys.f, sys.g, sys.h
    tol = DEFAULT_TOL

    def shifted(d):
        return (lambda t, j, x: x) if d is None else (lambda t, j, x: x + d(t, j))

    s1, s3, s4 = shifted(d1f), shifted(d3), shifted(d4)
    if not (flow_membership(sys, s3(0.0, 0, x0)) or jump_membership(sys, s4(0.0, 0, x0))):
        raise InvalidInputError("x0 is outside the perturbed C ∪ D")

    def hooks_for(j):
        if d2f is None:
            rhs = lambda t, x: f(s1(t, j, x))
        else:
            rhs = lambda t, x: f(s1(t, j, x)) + d2f(t, j)

        def accept(t, x):
            y = s4(t, j, x)
            if not in_region(sys, y, tol):
                return False
            if sys.jump_region is not None and not sys.jump_region(y):
                return False
            return lie_derivative_h(sys, y) < 0

        return FlowHooks(
            rhs=rhs,
            event=lambda t, x: h(s4(t, j, x)),
            accept=accept,
            at_start=lambda t, x: jump_membership(sys, s4(t, j, x), tol),
            inside=lambda t, x: in_region(sys, s3(t, j, x), tol),
        )

    def jump(t, j, x):
        y = g(x if d1j is None else x + d1j(t, j))
        return y if d2j is None else y + d2j(t, j)

    return run_hybrid(sys, x0, T_max, J_max, cfg, hooks_for, jump, keep_samples)


POLICIES = ("earliest", "latest")


def simulate_inflated(sys: HybridSystem, eps: float, x0, T_max: float, J_max: int,
                      cfg: Optional[IntegratorConfig] = None, policy: str = "earliest",
                      keep_samples: bool = True) -> HybridArc:
    """Simulate the eps-inflated system.

    earliest: jump on first entry into D_eps (h falls to +eps).
    latest: flow on until h falls to -eps and jump there.
    The box of M is inflated by eps as well.
    """
    if not eps >= 0:
        raise InvalidInputError("eps must be >= 0")
    if policy not in POLICIES:
        raise InvalidInputError(f"policy must be one of {POLICIES}")
    cfg = cfg or IntegratorConfig()
    if eps == 0:
        return simulate(sys, x0, T_max, J_max, cfg, keep_samples)
    x0 = as_state(sys, x0)
    f, h = sys.f, sys.h
    # located jump points may sit event_tol past h = -eps
    tol = eps + 1e-6
    level = eps if policy == "earliest" else -eps

    def in_D(x):
        hx = h(x)
        if not (-eps - DEFAULT_TOL <= hx <= eps + DEFAULT_TOL):
            return False
        if not in_region(sys, x, tol):
            return False
        if sys.jump_region is not None and not sys.jump_region(x):
            return False
        return lie_derivative_h(sys, x) <= 0

    def accept(_t, x):
        return in_D(x) and lie_derivative_h(sys, x) < 0

    def at_start(_t, x):
        if policy == "earliest":
            return in_D(x)
        return abs(h(x) + eps) <= DEFAULT_TOL and in_D(x)

    if not (in_region(sys, x0, tol) and (h(x0) >= -eps - DEFAULT_TOL)):
        raise InvalidInputError("x0 is outside the inflated C ∪ D")
    hooks = FlowHooks(
        rhs=lambda _t, x: f(x),
        event=lambda _t, x: h(x) - level,
        accept=accept,
        at_start=at_start,
        inside=lambda _t, x: in_region(sys, x, tol),
    )
    return run_hybrid(sys, x0, T_max, J_max, cfg, lambda j: hooks, lambda t, j, x: sys.g(x), keep_samples)


# ----------------------------------------------------------------- sweeps


METRICS = ("set", "nominal")


@dataclass(frozen=True)
class SweepProtocol:
    """settle/check windows in periods of the cycle.

    metric "set" measures |x|_O. "nominal" measures the distance to the
    unperturbed solution from the same start at equal t (latest j), which
    also counts phase drift; it is a diagnostic, not the default.
    """

    settle_periods: float = 10.0
    check_periods: float = 10.0
    bisection_steps: int = 12
    policy: str = "earliest"
    metric: str = "set"

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise InvalidInputError(f"policy must be one of {POLICIES}")
        if self.metric not in METRICS:
            raise InvalidInputError(f"metric must be one of {METRICS}")
        if not (self.settle_periods >= 0 and self.check_periods > 0 and self.bisection_steps >= 0):
            raise InvalidInputError("invalid sweep protocol")


@dataclass
class SweepRow:
    eps: float
    margin: float
    trials: int
    pass_fraction: float


@dataclass
class SweepTable:
    rows: list
    metadata: dict

    def to_csv(self) -> str:
        lines = ["eps,margin,trials,pass_fraction"]
        for r in self.rows:
            lines.append(f"{r.eps!r},{r.margin!r},{r.trials},{r.pass_fraction!r}")
        return "\n".join(lines) + "\n"

    def metadata_json(self) -> str:
        return json.dumps(self.metadata, indent=2, sort_keys=True) + "\n"

    def ratios(self) -> list:
        return [r.margin / r.eps for r in self.rows]

    def is_monotone(self) -> bool:
        m = [r.margin for r in self.rows]
        return all(a <= b for a, b in zip(m, m[1:]))


def tail_distance(arc: HybridArc, cycle: LimitCycle, t_from: float, t_needed: float) -> float:
    """sup of |x|_O over samples with t >= t_from; inf if the arc stopped
    before t_needed."""
    if arc.t_final < t_needed - 1e-9 and arc.terminated_by != "horizon_J":
        return math.inf
    t, _, x = arc.flat()
    pts = x[t >= t_from]
    if len(pts) == 0:
        return math.inf
    return float(np.max(cycle.distance(pts)))


# worker state, inherited through fork
_WORK: dict = {}


def _run_trial(args):
    margin, i = args
    w = _WORK
    sys, cycle, cfg, proto, mode = w["sys"], w["cycle"], w["cfg"], w["proto"], w["mode"]
    x0 = w["starts"][i]
    T = cycle.period_T_star
    T_max = (proto.settle_periods + proto.check_periods) * T
    J_max = int(4 * (proto.settle_periods + proto.check_periods)) + 20
    try:
        if mode == "inflation_eps":
            arc = simulate_inflated(sys, margin, x0, T_max, J_max, cfg, proto.policy, keep_samples=True)
        else:
            arc = simulate_perturbed(sys, x0, w["perturbation"](margin), T_max, J_max, cfg, keep_samples=True)
    except InvalidInputError:
        return math.inf
    if proto.metric == "nominal":
        return _nominal_tail_distance(arc, w["nominal"][i], proto.settle_periods * T, T_max)
    return tail_distance(arc, cycle, proto.settle_periods * T, T_max)


def _nominal_tail_distance(arc, nominal, t_from, t_needed):
    from .certify import euclidean_distance_profile

    if arc.t_final < t_needed - 1e-9:
        return math.inf
    t, _, _ = arc.flat()
    tt = t[(t >= t_from) & (t <= min(arc.t_final, nominal.t_final))]
    if len(tt) == 0:
        return math.inf
    return float(np.max(euclidean_distance_profile(arc, nominal, tt)))


def _eval_many(pairs, jobs):
    if jobs <= 1 or len(pairs) <= 1:
        return [_run_trial(p) for p in pairs]
    ctx = mp.get_context("fork")
    with ctx.Pool(min(jobs, len(pairs))) as pool:
        return pool.map(_run_trial, pairs, chunksize=1)


def sample_box(K_box, trials: int, seed: int) -> list:
    K = np.asarray(K_box, dtype=float)
    rng = np.random.default_rng(seed)
    return [rng.uniform(K[:, 0], K[:, 1]) for _ in range(trials)]


MODES = ("perturbation_rho", "inflation_eps")


def sweep_margin(
    sys: HybridSystem,
    cycle: LimitCycle,
    mode: str,
    K_box,
    eps_levels: Sequence[float],
    margin_grid: Sequence[float],
    trials: int = 8,
    seed: int = 0,
    cfg: Optional[IntegratorConfig] = None,
    jobs: int = 1,
    protocol: Optional[SweepProtocol] = None,
    perturbation: Optional[Callable[[float], PerturbationSpec]] = None,
) -> SweepTable:
    """Largest margin per eps level such that all trials end up within eps of O.

    Each trial starts at a seeded sample of K_box, runs settle_periods * T*
    of flow time, then must stay within eps of the cycle for check_periods
    * T*. The margin is found on margin_grid and refined by bisection. The
    tail distance of a trial does not depend on eps, so values are cached
    and the search for each eps starts at the previous level's margin.
    """
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}")
    eps_levels = [float(e) for e in eps_levels]
    grid = [float(m) for m in margin_grid]
    if not eps_levels or not grid:
        raise InvalidInputError("eps_levels and margin_grid must be nonempty")
    if eps_levels != sorted(eps_levels) or grid != sorted(grid):
        raise InvalidInputError("eps_levels and margin_grid must be sorted ascending")
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    cfg = cfg or IntegratorConfig()
    proto = protocol or SweepProtocol()
    if mode == "perturbation_rho" and perturbation is None:
        perturbation = lambda rho: jump_sinusoid(sys.n, rho)
    starts = sample_box(K_box, trials, seed)
    nominal = None
    if proto.metric == "nominal":
        T_max = (proto.settle_periods + proto.check_periods) * cycle.period_T_star
        J_max = int(4 * (proto.settle_periods + proto.check_periods)) + 20
        nominal = [simulate(sys, x0, T_max, J_max, cfg) for x0 in starts]

    _WORK.clear()
    _WORK.update(sys=sys, cycle=cycle, cfg=cfg, proto=proto, mode=mode, starts=starts,
                 perturbation=perturbation, nominal=nominal)
    cycle.sampled_set()
    cache: dict = {}

    def worst(ms):
        todo = [m for m in ms if m not in cache]
        pairs = [(m, i) for m in todo for i in range(trials)]
        vals = _eval_many(pairs, jobs)
        for k, m in enumerate(todo):
            cache[m] = vals[k * trials:(k + 1) * trials]
        return [max(cache[m]) for m in ms]

    worst([0.0] + grid)
    rows = []
    lower = 0.0
    for eps in eps_levels:
        if max(cache[0.0]) > eps:
            rows.append(SweepRow(eps, 0.0, trials, _frac(cache[0.0], eps)))
            continue
        above = [m for m in grid if m > lower]
        hi = None
        for m in above:
            if max(cache[m]) <= eps:
                lower = m
            else:
                hi = m
                break
        if hi is None:
            margin = max(lower, grid[-1]) if max(cache[grid[-1]]) <= eps else lower
        else:
            lo = lower
            for _ in range(proto.bisection_steps):
                mid = 0.5 * (lo + hi)
                if worst([mid])[0] <= eps:
                    lo = mid
                else:
                    hi = mid
            margin = lo
        lower = margin
        rows.append(SweepRow(eps, margin, trials, _frac(cache[margin], eps)))
    _WORK.clear()
    meta = {
        "schema": "hylc/1",
        "system": sys.name,
        "params": {k: v for k, v in sys.params.items()},
        "mode": mode,
        "seed": seed,
        "trials": trials,
        "K_box": np.asarray(K_box, dtype=float).tolist(),
        "eps_levels": eps_levels,
        "margin_grid": grid,
        "protocol": asdict(proto),
        "integrator": {"step": cfg.step, "event_tol": cfg.event_tol},
        "T_star": cycle.period_T_star,
        "distance": "sup of Euclidean distance to the sampled cycle over the check window",
    }
    if mode == "perturbation_rho":
        meta["perturbation_at_margin_1"] = perturbation(1.0).describe()
    return SweepTable(rows, meta)


def _frac(vals, eps):
    return sum(1 for v in vals if v <= eps) / len(vals)


# ------------------------------------------------------------ KL check


@dataclass
class KLReport:
    ok: bool
    C: float
    lam: float
    max_violation: float
    eps: float
    trivial: bool
    note: str = "distance |x|_O on a compact box stands in for a proper indicator"

    def to_dict(self) -> dict:
        return asdict(self)


def check_practical_kl(arcs: Sequence[HybridArc], cycle: LimitCycle, eps: float, allowance: float = 0.0) -> KLReport:
    """Fit beta(r, tau) = C r exp(-lam tau), tau = t + j, and check
    |x|_O <= beta(|x0|_O, tau) + eps (+ allowance) at every sample.

    lam comes from a least-squares fit of log of the future-sup envelope
    over samples above eps; C is the smallest constant that covers the first
    half of each arc. A non-positive decay rate is a failure.
    """
    if not arcs:
        raise InvalidInputError("arcs must be nonempty")
    data = []
    for arc in arcs:
        t, j, x = arc.flat()
        tau = t + j
        d = cycle.distance(x)
        env = np.maximum.accumulate(d[::-1])[::-1]
        data.append((tau, d, env, float(d[0])))
    slack = eps + allowance
    if all(float(np.max(d)) <= slack for _, d, _, _ in data):
        return KLReport(True, 0.0, 0.0, 0.0, eps, True)
    taus, logs = [], []
    for tau, d, env, r0 in data:
        m = (env > max(eps, 1e-12)) & (r0 > 0)
        if np.count_nonzero(m) >= 2:
            taus.append(tau[m])
            logs.append(np.log(env[m] / r0))
    if not taus:
        return KLReport(False, math.inf, 0.0, math.inf, eps, False, "initial distance is zero but the arc leaves eps")
    T, L = np.concatenate(taus), np.concatenate(logs)
    if np.ptp(T) == 0:
        return KLReport(False, math.inf, 0.0, math.inf, eps, False, "degenerate fit")
    A = np.vstack([np.ones_like(T), -T]).T
    (logC, lam), *_ = np.linalg.lstsq(A, L, rcond=None)
    lam = float(lam)
    if lam <= 0:
        return KLReport(False, math.exp(float(logC)), lam, math.inf, eps, False, "no decay")
    C = 0.0
    for tau, d, env, r0 in data:
        half = tau <= tau[0] + 0.5 * (tau[-1] - tau[0])
        if r0 > 0:
            C = max(C, float(np.max((d[half] - slack) / (r0 * np.exp(-lam * tau[half])))))
    C = max(C, 1.0)
    viol = 0.0
    for tau, d, env, r0 in data:
        viol = max(viol, float(np.max(d - (C * r0 * np.exp(-lam * tau) + slack))))
    return KLReport(viol <= 0, C, lam, max(viol, 0.0), eps, False)
