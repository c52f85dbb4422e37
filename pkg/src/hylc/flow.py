"""Fixed-step RK4 integration of the flow with guard-crossing location."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, InvalidInputError
from .model import (
    DEFAULT_TOL,
    HybridSystem,
    as_state,
    flow_membership,
    in_region,
    jump_membership,
    lie_derivative_h,
)


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 1e-3
    event_tol: float = 1e-10
    max_bisections: int = 80
    horizon: float = 1e3

    def __post_init__(self):
        for name in ("step", "event_tol", "horizon"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidInputError(f"{name} must be positive and finite")
        if self.max_bisections < 1:
            raise InvalidInputError("max_bisections must be >= 1")

    def replace(self, **kw) -> "IntegratorConfig":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass
class FlowResult:
    """Sampled flow. Times are absolute (they start at the t0 passed in)."""

    times: np.ndarray
    states: np.ndarray
    impact_time: Optional[float]
    impact_state: Optional[np.ndarray]
    terminated_by: str

    @property
    def samples(self):
        return list(zip(self.times.tolist(), self.states))

    @property
    def T_I(self) -> float:
        if self.impact_time is None:
            return math.inf
        return self.impact_time - float(self.times[0])

    def to_csv(self) -> str:
        n = self.states.shape[1]
        lines = [",".join(["t"] + [f"x{i}" for i in range(n)])]
        for t, x in zip(self.times, self.states):
            lines.append(",".join(repr(float(v)) for v in (t, *x)))
        return "\n".join(lines) + "\n"


def _rk4(F, t: float, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = F(t, x)
    k2 = F(t + 0.5 * dt, x + (0.5 * dt) * k1)
    k3 = F(t + 0.5 * dt, x + (0.5 * dt) * k2)
    k4 = F(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(sys: HybridSystem, x, step: float) -> np.ndarray:
    """One classical RK4 step of size `step` for x' = f(x)."""
    if not step > 0:
        raise InvalidInputError("step must be positive")
    x = as_state(sys, x)
    y = _rk4(lambda _t, z: sys.f(z), 0.0, x, step)
    if not np.all(np.isfinite(y)):
        raise DivergenceError("non-finite state after RK4 step")
    return y


@dataclass
class FlowHooks:
    """Callables that specialise the integrator.

    rhs(t, x): vector field. event(t, x): crossing of event from >= 0 to < 0
    marks a candidate impact. accept(t, x): whether a located crossing is an
    impact. at_start(t, x): impact at the initial point. inside(t, x):
    region check after each step.
    """

    rhs: Callable[[float, np.ndarray], np.ndarray]
    event: Callable[[float, np.ndarray], float]
    accept: Callable[[float, np.ndarray], bool]
    at_start: Callable[[float, np.ndarray], bool]
    inside: Callable[[float, np.ndarray], bool]


def nominal_hooks(sys: HybridSystem, tol: float = DEFAULT_TOL) -> FlowHooks:
    f, h = sys.f, sys.h

    def accept(_t, y):
        if not in_region(sys, y, tol):
            return False
        if sys.jump_region is not None and not sys.jump_region(y):
            return False
        return lie_derivative_h(sys, y) < 0

    return FlowHooks(
        rhs=lambda _t, x: f(x),
        event=lambda _t, x: h(x),
        accept=accept,
        at_start=lambda _t, x: jump_membership(sys, x, tol),
        inside=lambda _t, x: in_region(sys, x, tol),
    )


def integrate(
    x0: np.ndarray,
    cfg: IntegratorConfig,
    hooks: FlowHooks,
    t0: float = 0.0,
    horizon: Optional[float] = None,
    keep_samples: bool = True,
) -> FlowResult:
    """Integrate until an accepted crossing, the horizon, or a region exit."""
    x = np.array(x0, dtype=float)
    horizon = cfg.horizon if horizon is None else horizon
    t_end = t0 + horizon
    times = [t0]
    states = [x]
    if hooks.at_start(t0, x):
        return FlowResult(np.array(times), np.array(states), t0, x.copy(), "impact")

    rhs, event = hooks.rhs, hooks.event
    step = cfg.step
    t = t0
    k = 0
    e0 = event(t, x)
    while t < t_end:
        t_next = t0 + (k + 1) * step
        if t_next > t_end:
            t_next = t_end
        dt = t_next - t
        if dt <= 0:
            break
        x_new = _rk4(rhs, t, x, dt)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"non-finite state at t={t_next}")
        e1 = event(t_next, x_new)
        if e0 >= 0 and e1 < 0:
            sigma, y = _locate(rhs, event, t, x, dt, e0, cfg)
            if hooks.accept(t + sigma, y):
                if sigma > 0:
                    times.append(t + sigma)
                    states.append(y)
                return _result(times, states, keep_samples, t + sigma, y, "impact")
        if not hooks.inside(t_next, x_new):
            return _result(times, states, keep_samples, None, None, "left_region")
        t, x, e0 = t_next, x_new, e1
        k += 1
        if keep_samples:
            times.append(t)
            states.append(x)
    if not keep_samples:
        times.append(t)
        states.append(x)
    return _result(times, states, True, None, None, "horizon")


def _result(times, states, keep, t_imp, x_imp, why) -> FlowResult:
    if not keep:
        times = [times[0], times[-1]] if len(times) > 1 else times
        states = [states[0], states[-1]] if len(states) > 1 else states
    return FlowResult(np.array(times), np.array(states), t_imp, None if x_imp is None else x_imp.copy(), why)


def _locate(rhs, event, t, x, dt, e_lo, cfg: IntegratorConfig):
    """Bisect the substep size so the event value is within event_tol."""
    lo, hi = 0.0, dt
    y_lo, y_hi = x, None
    e_hi = None
    tol = cfg.event_tol
    for _ in range(cfg.max_bisections):
        mid = 0.5 * (lo + hi)
        y = _rk4(rhs, t, x, mid)
        e = event(t + mid, y)
        if abs(e) <= tol:
            return mid, y
        if e >= 0:
            lo, y_lo, e_lo = mid, y, e
        else:
            hi, y_hi, e_hi = mid, y, e
    if y_hi is None:
        y_hi = _rk4(rhs, t, x, hi)
        e_hi = event(t + hi, y_hi)
    if abs(e_lo) <= abs(e_hi):
        return lo, y_lo
    return hi, y_hi


def flow_until_impact(
    sys: HybridSystem, x0, cfg: Optional[IntegratorConfig] = None, keep_samples: bool = True
) -> FlowResult:
    """Flow from x0 to the first impact with M ∩ D.

    Returns a FlowResult whose impact fields are None when the horizon is
    reached first (T_I is then infinite).
    """
    cfg = cfg or IntegratorConfig()
    x0 = as_state(sys, x0)
    if not (flow_membership(sys, x0) or jump_membership(sys, x0)):
        raise InvalidInputError("initial state is neither in C nor in D")
    return integrate(x0, cfg, nominal_hooks(sys), keep_samples=keep_samples)


def time_to_impact(sys: HybridSystem, x, cfg: Optional[IntegratorConfig] = None) -> float:
    """Time to impact T_I(x); math.inf if no impact within the horizon."""
    return flow_until_impact(sys, x, cfg, keep_samples=False).T_I
