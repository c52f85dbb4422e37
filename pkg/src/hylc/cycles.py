"""Hybrid Poincare map, fixed points, stability and limit-cycle extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    HylcError,
    InvalidInputError,
    NoReturnError,
    NonConvergenceError,
    RegionError,
    TransversalityError,
)
from .flow import FlowHooks, IntegratorConfig, integrate, nominal_hooks
from .linalg import eigenvalues, spectral_radius
from .model import (
    DEFAULT_TOL,
    HybridSystem,
    as_state,
    flow_membership,
    guard_gradient,
    jump_membership,
    lie_derivative_h,
)
from .sim import SampledSet

SCHEMA = "hylc/1"


def _check_on_guard(sys: HybridSystem, x: np.ndarray, tol: float) -> None:
    # The guard condition and the box are required; the region predicate is
    # only enforced along the flow (it may carve out isolated guard points).
    if not sys.region.in_box(x, tol):
        raise InvalidInputError("point lies outside the region box")
    if abs(sys.h(x)) > tol or lie_derivative_h(sys, x) > tol:
        raise InvalidInputError("point is not on the jump set")


def _return_flow(sys, x_plus, cfg, keep_samples=False):
    res = integrate(x_plus, cfg, nominal_hooks(sys), keep_samples=keep_samples)
    if res.terminated_by == "left_region":
        raise RegionError("flow left the region before reaching the jump set")
    if res.impact_time is None:
        raise NoReturnError("no impact within the horizon")
    return res


def poincare_map(sys: HybridSystem, x, cfg: Optional[IntegratorConfig] = None, tol: float = DEFAULT_TOL) -> np.ndarray:
    """P(x): jump from x, then flow to the next impact."""
    cfg = cfg or IntegratorConfig()
    x = as_state(sys, x)
    _check_on_guard(sys, x, tol)
    return _return_flow(sys, np.asarray(sys.g(x), dtype=float), cfg).impact_state


def project_normal(sys: HybridSystem, x: np.ndarray, iters: int = 50) -> np.ndarray:
    """Move x onto {h = 0} along the guard gradient (Newton steps)."""
    y = np.array(x, dtype=float)
    for _ in range(iters):
        hv = sys.h(y)
        if abs(hv) <= 1e-15 * (1.0 + np.linalg.norm(y)):
            break
        gr = guard_gradient(sys, y)
        nn = float(gr @ gr)
        if nn == 0.0:
            raise InvalidInputError("guard gradient vanishes")
        y = y - hv * gr / nn
    return y


def project_along_flow(sys: HybridSystem, x: np.ndarray, cfg: IntegratorConfig, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Slide x along the flow (forward or backward) until h = 0."""
    x = np.array(x, dtype=float)
    hv = sys.h(x)
    if abs(hv) <= tol:
        return x
    f, h = sys.f, sys.h
    if hv > 0:
        hooks = FlowHooks(lambda _t, z: f(z), lambda _t, z: h(z), lambda _t, z: True,
                          lambda _t, z: False, lambda _t, z: True)
    else:
        hooks = FlowHooks(lambda _t, z: -f(z), lambda _t, z: -h(z), lambda _t, z: True,
                          lambda _t, z: False, lambda _t, z: True)
    res = integrate(x, cfg, hooks, keep_samples=False)
    if res.impact_state is None:
        raise NoReturnError("could not slide the guess onto the guard")
    return res.impact_state


@dataclass
class FixedPointInfo:
    x: np.ndarray
    residual: float
    iterations: int
    newton_steps: int


def find_fixed_point(
    sys: HybridSystem,
    x_guess,
    cfg: Optional[IntegratorConfig] = None,
    fp_tol: float = 1e-9,
    max_iters: int = 500,
    damping: float = 1.0,
    newton_after: int = 50,
    info: bool = False,
):
    """Fixed point of P by Picard iteration with a Newton fallback.

    Newton on P(x) - x (finite-difference Jacobian) takes over once the
    residual has failed to decrease newton_after times.

    Raises:
        NonConvergenceError: carrying the best iterate as `.best`.
    """
    cfg = cfg or IntegratorConfig()
    x = as_state(sys, x_guess)
    x = project_along_flow(sys, x, cfg)
    best_x, best_r = x, math.inf
    prev_r = math.inf
    stalls = 0
    newton = 0
    for it in range(max_iters):
        try:
            px = poincare_map(sys, x, cfg)
        except HylcError as exc:
            err = NonConvergenceError(f"Poincare map failed during iteration: {exc}")
            err.best = best_x
            raise err from exc
        r = float(np.linalg.norm(px - x))
        if r < best_r:
            best_x, best_r = x, r
        if r <= fp_tol:
            out = FixedPointInfo(x, r, it, newton)
            return out if info else x
        if r >= prev_r:
            stalls += 1
        prev_r = r
        if stalls >= newton_after:
            J = poincare_jacobian(sys, x, cfg=cfg)
            try:
                dx = np.linalg.solve(J - np.eye(sys.n), -(px - x))
            except np.linalg.LinAlgError:
                dx = px - x
            x = project_normal(sys, x + dx)
            newton += 1
        elif damping == 1.0:
            x = px
        else:
            x = project_normal(sys, x + damping * (px - x))
    err = NonConvergenceError(f"fixed point not found in {max_iters} iterations (best residual {best_r:.3g})")
    err.best = best_x
    raise err


def poincare_jacobian(sys: HybridSystem, x_star, fd_step: Optional[float] = None,
                      cfg: Optional[IntegratorConfig] = None, retries: int = 3) -> np.ndarray:
    """Central-difference Jacobian of P on the ambient state.

    Perturbed points are projected back onto the guard along its gradient,
    so the column for the normal direction vanishes structurally.
    """
    cfg = cfg or IntegratorConfig()
    x_star = as_state(sys, x_star)
    base = 1e-5 * (1.0 + np.linalg.norm(x_star)) if fd_step is None else fd_step
    J = np.zeros((sys.n, sys.n))
    for i in range(sys.n):
        step = base
        for attempt in range(retries + 1):
            try:
                e = np.zeros(sys.n)
                e[i] = step
                xp = project_normal(sys, x_star + e)
                xm = project_normal(sys, x_star - e)
                J[:, i] = (poincare_map(sys, xp, cfg) - poincare_map(sys, xm, cfg)) / (2.0 * step)
                break
            except HylcError:
                if attempt == retries:
                    raise
                step /= 4.0
    return J


def classify_stability(eigs, eig_tol: float = 1e-6) -> str:
    if len(eigs) == 0:
        raise InvalidInputError("empty eigenvalue list")
    rho = spectral_radius(eigs)
    if rho < 1.0 - eig_tol:
        return "asymptotically_stable"
    if rho > 1.0 + eig_tol:
        return "unstable"
    return "marginal"


@dataclass
class LimitCycle:
    period_T_star: float
    x_pre: np.ndarray
    x_post: np.ndarray
    times: np.ndarray
    samples: np.ndarray
    transversality_value: float
    _set: Optional[SampledSet] = field(default=None, repr=False, compare=False)

    @property
    def T_star(self) -> float:
        return self.period_T_star

    def sampled_set(self) -> SampledSet:
        if self._set is None:
            self._set = SampledSet(self.samples, ordered=True)
        return self._set

    def distance(self, x) -> np.ndarray:
        """Distance from points to the cycle (polyline through the samples)."""
        return self.sampled_set().distance(x)

    def state_at(self, s: float) -> np.ndarray:
        """State after flowing for s (mod T*) from x_post, interpolated."""
        s = s % self.period_T_star
        k = int(np.searchsorted(self.times, s))
        k = min(max(k, 1), len(self.times) - 1)
        t0, t1 = self.times[k - 1], self.times[k]
        w = 0.0 if t1 == t0 else (s - t0) / (t1 - t0)
        return (1 - w) * self.samples[k - 1] + w * self.samples[k]

    def to_dict(self) -> dict:
        return {
            "x_pre": self.x_pre.tolist(),
            "x_post": self.x_post.tolist(),
            "T_star": self.period_T_star,
            "transversality": self.transversality_value,
            "n_samples": int(len(self.samples)),
        }


def extract_limit_cycle(sys: HybridSystem, x_star, cfg: Optional[IntegratorConfig] = None) -> LimitCycle:
    """The cycle through the fixed point x_star, sampled over one period."""
    cfg = cfg or IntegratorConfig()
    x_star = as_state(sys, x_star)
    x_post = np.asarray(sys.g(x_star), dtype=float)
    res = _return_flow(sys, x_post, cfg, keep_samples=True)
    lf = lie_derivative_h(sys, x_star)
    if not lf < -cfg.event_tol:
        raise TransversalityError(f"L_f h at the impact point is {lf:.3g}, not strictly negative")
    return LimitCycle(
        period_T_star=float(res.T_I),
        x_pre=x_star,
        x_post=x_post,
        times=res.times - res.times[0],
        samples=res.states,
        transversality_value=lf,
    )


def detect_limit_cycle(
    sys: HybridSystem,
    x0,
    cfg: Optional[IntegratorConfig] = None,
    fp_tol: float = 1e-9,
    K: int = 8,
    max_impacts: int = 2000,
) -> Optional[LimitCycle]:
    """Find a cycle by simulation: collect impacts until K in a row agree.

    Returns None when impacts stop (no return, region exit) or fail to
    settle within max_impacts.
    """
    cfg = cfg or IntegratorConfig()
    x = as_state(sys, x0)
    if not (flow_membership(sys, x) or jump_membership(sys, x)):
        raise InvalidInputError("x0 is outside C ∪ D")
    hooks = nominal_hooks(sys)
    cauchy = 10.0 * fp_tol
    impacts = []
    res = integrate(x, cfg, hooks, keep_samples=False)
    while True:
        if res.impact_state is None:
            return None
        impacts.append(res.impact_state)
        if len(impacts) >= K:
            window = np.array(impacts[-K:])
            if np.max(np.linalg.norm(window - window[-1], axis=1)) <= cauchy:
                break
        if len(impacts) >= max_impacts:
            return None
        res = integrate(np.asarray(sys.g(res.impact_state), dtype=float), cfg, hooks, keep_samples=False)
    try:
        x_star = find_fixed_point(sys, impacts[-1], cfg, fp_tol)
        return extract_limit_cycle(sys, x_star, cfg)
    except HylcError:
        return None


@dataclass
class DistanceValue:
    value: float
    truncated: bool

    def __float__(self):
        return self.value


def distance_function_d(sys: HybridSystem, x, cycle: LimitCycle, cfg: Optional[IntegratorConfig] = None) -> DistanceValue:
    """Sup over the flow from x (to impact or horizon) of the distance to O."""
    cfg = cfg or IntegratorConfig()
    x = as_state(sys, x)
    res = integrate(x, cfg, nominal_hooks(sys), keep_samples=True)
    d = cycle.distance(res.states)
    return DistanceValue(float(np.max(d)), res.impact_time is None)


@dataclass
class PoincareAnalysis:
    fixed_point: np.ndarray
    residual: float
    jacobian: np.ndarray
    eigenvalues: list
    spectral_radius: float
    verdict: str


def analyze_fixed_point(sys: HybridSystem, x_star, cfg: Optional[IntegratorConfig] = None,
                        fd_step: Optional[float] = None, eig_tol: float = 1e-6) -> PoincareAnalysis:
    cfg = cfg or IntegratorConfig()
    x_star = as_state(sys, x_star)
    residual = float(np.linalg.norm(poincare_map(sys, x_star, cfg) - x_star))
    J = poincare_jacobian(sys, x_star, fd_step, cfg)
    eigs = eigenvalues(J)
    return PoincareAnalysis(x_star, residual, J, eigs, spectral_radius(eigs), classify_stability(eigs, eig_tol))


def cycle_report(analysis: PoincareAnalysis, cycle: LimitCycle) -> dict:
    return {
        "schema": SCHEMA,
        "fixed_point": analysis.fixed_point.tolist(),
        "residual": analysis.residual,
        "T_star": cycle.period_T_star,
        "jacobian": analysis.jacobian.tolist(),
        "eigenvalues": [[z.real, z.imag] for z in analysis.eigenvalues],
        "spectral_radius": analysis.spectral_radius,
        "verdict": analysis.verdict,
        "transversality": cycle.transversality_value,
        "x_post": cycle.x_post.tolist(),
    }
