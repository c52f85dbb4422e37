"""Computed Poincare maps P_s from fixed-step one-step schemes.

P_s applies the jump map, then takes steps of size s until the first iterate
in the jump set. No event refinement is done: the discretization error is
what is being studied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cycles import find_fixed_point, poincare_map
from .errors import DivergenceError, InvalidInputError, NoReturnError, NonConvergenceError
from .flow import IntegratorConfig
from .model import HybridSystem, as_state, lie_derivative_h

SCHEMES = ("heun", "euler")


@dataclass(frozen=True)
class ComputedMapConfig:
    """s: step size. scheme: "heun" (explicit trapezoid) or "euler".

    The impact test at iterate k is h(x_k) <= tol_rel * s and L_f h(x_k) <= 0.
    """

    s: float
    k_cap: int = 1_000_000
    scheme: str = "heun"
    tol_rel: float = 1e-8

    def __post_init__(self):
        if not (self.s > 0 and math.isfinite(self.s)):
            raise InvalidInputError("s must be positive")
        if self.k_cap < 1:
            raise InvalidInputError("k_cap must be >= 1")
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"scheme must be one of {SCHEMES}")

    @property
    def impact_tol(self) -> float:
        return self.tol_rel * self.s


def _step(f, x, s, scheme):
    k1 = f(x)
    if scheme == "euler":
        return x + s * k1
    return x + 0.5 * s * (k1 + f(x + s * k1))


def _check_in_D(sys, x, s):
    # iterates of P_s overshoot the guard by O(s)
    pad = 2.0 * s * np.abs(sys.f(x)) + 1e-6 * (1.0 + np.abs(x))
    lo, hi = sys.region.box[:, 0], sys.region.box[:, 1]
    if np.any(x < lo - pad) or np.any(x > hi + pad):
        raise InvalidInputError("state outside the box")
    lf = lie_derivative_h(sys, x)
    hx = sys.h(x)
    slack = 2.0 * s * abs(lf) + 1e-6
    if not (-slack <= hx <= 1e-6 and lf <= 1e-9):
        raise InvalidInputError("state is not in D within tolerance")


def poincare_euler(sys: HybridSystem, x, cfg: ComputedMapConfig, return_steps: bool = False):
    """P_s(x): jump, then step until the first iterate in the jump set."""
    x = as_state(sys, x)
    _check_in_D(sys, x, cfg.s)
    y = np.asarray(sys.g(x), dtype=float)
    f, h, s = sys.f, sys.h, cfg.s
    tol = cfg.impact_tol
    for k in range(1, cfg.k_cap + 1):
        y = _step(f, y, s, cfg.scheme)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite iterate at k={k}")
        if h(y) <= tol and lie_derivative_h(sys, y) <= 0:
            return (y, k) if return_steps else y
    raise NoReturnError(f"no impact within k_cap={cfg.k_cap} steps")


def _fixed_point_Ps(sys, x_guess, cfg, tol=1e-12, max_iters=300, max_period=20):
    """Iterate P_s. Returns (orbit, iterations): a single point when a fixed
    point is reached, else the attracting periodic orbit if one is found."""
    x = as_state(sys, x_guess)
    hist = [x]
    for it in range(max_iters):
        y = poincare_euler(sys, x, cfg)
        if np.linalg.norm(y - x) <= tol * (1.0 + np.linalg.norm(x)):
            return [y], it + 1
        hist.append(y)
        x = y
    # P_s is piecewise continuous; generic s can give a short cycle in k
    for per in range(2, max_period + 1):
        if np.linalg.norm(hist[-1] - hist[-1 - per]) <= 1e-9 * (1.0 + np.linalg.norm(hist[-1])):
            return hist[-per:], max_iters
    raise NonConvergenceError("P_s iteration did not converge")


@dataclass
class DriftRow:
    s: float
    x_s: Optional[np.ndarray]
    drift: float
    iterations: int
    flagged: bool
    note: str = ""


def fixed_point_drift(sys, s_grid, x_guess, cfg: Optional[ComputedMapConfig] = None,
                      x_star=None, flow_cfg: Optional[IntegratorConfig] = None) -> list:
    """Fixed points of P_s across s_grid and their distance to x*.

    x* is computed with the RK4 Poincare map unless given. Rows are sorted
    by s descending. When P_s settles on a periodic orbit instead of a fixed
    point the row is flagged and drift is the orbit's largest distance to x*;
    other failures are flagged with infinite drift.
    """
    if x_star is None:
        x_star = find_fixed_point(sys, x_guess, flow_cfg or IntegratorConfig())
    x_star = np.asarray(x_star, dtype=float)
    base = cfg or ComputedMapConfig(s=1.0)
    rows = []
    for s in sorted((float(v) for v in s_grid), reverse=True):
        c = ComputedMapConfig(s=s, k_cap=base.k_cap, scheme=base.scheme, tol_rel=base.tol_rel)
        try:
            orbit, it = _fixed_point_Ps(sys, x_star if x_guess is None else x_guess, c)
            drift = max(float(np.linalg.norm(y - x_star)) for y in orbit)
            if len(orbit) == 1:
                rows.append(DriftRow(s, orbit[0], drift, it, False))
            else:
                rows.append(DriftRow(s, orbit[0], drift, it, True, f"periodic orbit of period {len(orbit)}"))
        except (NonConvergenceError, NoReturnError, DivergenceError, InvalidInputError) as exc:
            rows.append(DriftRow(s, None, math.inf, 0, True, str(exc)))
    return rows


def drift_csv(rows) -> str:
    return "s,drift\n" + "".join(f"{r.s!r},{r.drift!r}\n" for r in rows)


def closeness_study(sys, K_samples, J: int, s_grid, eps: float, cfg: Optional[ComputedMapConfig] = None,
                    flow_cfg: Optional[IntegratorConfig] = None, exact_map=None) -> dict:
    """Compare J iterates of P_s and P from each start.

    exact_map(x) overrides the RK4 Poincare map (e.g. a closed form).
    """
    if J < 1:
        raise InvalidInputError("J must be >= 1")
    flow_cfg = flow_cfg or IntegratorConfig()
    P = exact_map or (lambda x: poincare_map(sys, x, flow_cfg))
    base = cfg or ComputedMapConfig(s=1.0)
    starts = [as_state(sys, x) for x in K_samples]
    exact = []
    for x in starts:
        orbit, y = [], x
        for _ in range(J):
            y = np.asarray(P(y), dtype=float)
            orbit.append(y)
        exact.append(orbit)
    rows = []
    for s in sorted(float(v) for v in s_grid):
        c = ComputedMapConfig(s=s, k_cap=base.k_cap, scheme=base.scheme, tol_rel=base.tol_rel)
        per_start = []
        for x, orbit in zip(starts, exact):
            y, gap = x, 0.0
            for i in range(J):
                y = poincare_euler(sys, y, c)
                gap = max(gap, float(np.linalg.norm(y - orbit[i])))
            per_start.append(gap)
        rows.append({"s": s, "max_gap": max(per_start), "gaps": per_start})
    ok = [r["s"] for r in rows if r["max_gap"] <= eps]
    ordering_violations = []
    if len(rows) > 1:
        small, large = rows[0]["gaps"], rows[-1]["gaps"]
        ordering_violations = [i for i, (a, b) in enumerate(zip(small, large)) if a > b]
    return {
        "J": J,
        "eps": eps,
        "scheme": base.scheme,
        "rows": rows,
        "s_star": max(ok) if ok else None,
        "ordering_violations": ordering_violations,
    }


def d_grid(sys, count: int = 20, x_star=None, spread: float = 0.2, seed: int = 0):
    """Points of D near x* obtained by perturbing and projecting onto h = 0."""
    from .cycles import project_normal

    rng = np.random.default_rng(seed)
    x_star = np.asarray(x_star, dtype=float)
    pts = []
    tries = 0
    while len(pts) < count and tries < 50 * count:
        tries += 1
        y = x_star + spread * rng.uniform(-1.0, 1.0, size=x_star.size) * (1.0 + np.abs(x_star))
        try:
            y = project_normal(sys, y)
        except Exception:
            continue
        if abs(sys.h(y)) <= 1e-9 and lie_derivative_h(sys, y) < 0:
            lo, hi = sys.region.box[:, 0], sys.region.box[:, 1]
            if np.all(y >= lo) and np.all(y <= hi):
                pts.append(y)
    return pts


def consistency_slope(sys, points, s_grid, exact_map=None, flow_cfg: Optional[IntegratorConfig] = None,
                      scheme: str = "heun") -> dict:
    """Log-log slope of max_x |P_s(x) - P(x)| against s."""
    flow_cfg = flow_cfg or IntegratorConfig()
    P = exact_map or (lambda x: poincare_map(sys, x, flow_cfg))
    exact = [np.asarray(P(x), dtype=float) for x in points]
    gaps = []
    for s in s_grid:
        c = ComputedMapConfig(s=float(s), scheme=scheme)
        gaps.append(max(float(np.linalg.norm(poincare_euler(sys, x, c) - e)) for x, e in zip(points, exact)))
    ls, lg = np.log(np.asarray(s_grid, dtype=float)), np.log(np.maximum(gaps, 1e-300))
    slope = float(np.polyfit(ls, lg, 1)[0])
    return {"s": [float(v) for v in s_grid], "gap": gaps, "slope": slope, "C": float(np.max(np.array(gaps) / s_grid))}
