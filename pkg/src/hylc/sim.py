"""Hybrid solutions: alternating located flows and jumps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, InvalidInputError
from .flow import FlowHooks, IntegratorConfig, integrate, nominal_hooks
from .model import HybridSystem, as_state, flow_membership, jump_membership


@dataclass
class Segment:
    j: int
    t_start: float
    t_end: float
    times: np.ndarray
    states: np.ndarray


@dataclass
class JumpRecord:
    t: float
    j: int
    x_minus: np.ndarray
    x_plus: np.ndarray


@dataclass
class HybridArc:
    segments: list
    jumps: list
    terminated_by: str
    n: int

    @property
    def jump_records(self):
        return self.jumps

    @property
    def t_final(self) -> float:
        return self.segments[-1].t_end

    @property
    def j_final(self) -> int:
        return self.segments[-1].j

    @property
    def final_state(self) -> np.ndarray:
        return self.segments[-1].states[-1]

    def initial_state(self) -> np.ndarray:
        return self.segments[0].states[0]

    def first_impact_time(self) -> float:
        return self.jumps[0].t if self.jumps else math.inf

    def flat(self):
        """All samples as arrays (t, j, x)."""
        t = np.concatenate([s.times for s in self.segments])
        j = np.concatenate([np.full(len(s.times), s.j) for s in self.segments])
        x = np.concatenate([s.states for s in self.segments])
        return t, j, x

    def segment(self, j: int) -> Optional[Segment]:
        if 0 <= j < len(self.segments) and self.segments[j].j == j:
            return self.segments[j]
        return None

    def evaluate(self, t: float, j: int) -> np.ndarray:
        """State at hybrid time (t, j), linear within the segment."""
        seg = self.segment(j)
        if seg is None or not (seg.t_start - 1e-12 <= t <= seg.t_end + 1e-12):
            raise InvalidInputError(f"({t}, {j}) is outside the arc's domain")
        return interp_segment(seg, t)

    def to_csv(self) -> str:
        lines = [",".join(["t", "j"] + [f"x{i}" for i in range(self.n)])]
        for seg in self.segments:
            for t, x in zip(seg.times, seg.states):
                lines.append(",".join([repr(float(t)), str(seg.j)] + [repr(float(v)) for v in x]))
        return "\n".join(lines) + "\n"

    def domain(self) -> dict:
        return {
            "intervals": [[s.t_start, s.t_end, s.j] for s in self.segments],
            "jumps": [{"t": r.t, "j": r.j, "x_minus": r.x_minus.tolist(), "x_plus": r.x_plus.tolist()}
                      for r in self.jumps],
            "terminated_by": self.terminated_by,
        }


def interp_segment(seg: Segment, t: float) -> np.ndarray:
    ts = seg.times
    if len(ts) == 1:
        return seg.states[0].copy()
    k = int(np.searchsorted(ts, t))
    if k <= 0:
        return seg.states[0].copy()
    if k >= len(ts):
        return seg.states[-1].copy()
    t0, t1 = ts[k - 1], ts[k]
    w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
    return (1.0 - w) * seg.states[k - 1] + w * seg.states[k]


FlowFactory = Callable[[int], FlowHooks]
JumpFn = Callable[[float, int, np.ndarray], np.ndarray]


def run_hybrid(
    sys: HybridSystem,
    x0: np.ndarray,
    T_max: float,
    J_max: int,
    cfg: IntegratorConfig,
    hooks_for: FlowFactory,
    jump: JumpFn,
    keep_samples: bool = True,
) -> HybridArc:
    """Shared driver: flow with hooks_for(j), jump with jump(t, j, x)."""
    t, j = 0.0, 0
    x = np.array(x0, dtype=float)
    segments, jumps = [], []
    why = "horizon_T"
    while True:
        remaining = T_max - t
        if remaining <= 0:
            segments.append(Segment(j, t, t, np.array([t]), np.array([x])))
            why = "horizon_T"
            break
        try:
            res = integrate(x, cfg, hooks_for(j), t0=t, horizon=min(remaining, cfg.horizon),
                            keep_samples=keep_samples)
        except DivergenceError:
            segments.append(Segment(j, t, t, np.array([t]), np.array([x])))
            why = "divergence"
            break
        seg_end = res.impact_time if res.impact_time is not None else float(res.times[-1])
        segments.append(Segment(j, t, seg_end, res.times, res.states))
        if res.terminated_by == "left_region":
            why = "left_region"
            break
        if res.impact_time is None:
            why = "horizon_T"
            break
        if j >= 1 and res.impact_time - t < sys.min_dwell:
            why = "dwell_violation"
            break
        x_minus = res.impact_state
        try:
            x_plus = np.asarray(jump(res.impact_time, j, x_minus), dtype=float)
        except DivergenceError:
            why = "divergence"
            break
        if not np.all(np.isfinite(x_plus)):
            why = "divergence"
            break
        t = res.impact_time
        jumps.append(JumpRecord(t, j, x_minus, x_plus))
        j += 1
        x = x_plus
        if j >= J_max:
            segments.append(Segment(j, t, t, np.array([t]), np.array([x])))
            why = "horizon_J"
            break
    return HybridArc(segments, jumps, why, sys.n)


def simulate(
    sys: HybridSystem,
    x0,
    T_max: float,
    J_max: int,
    cfg: Optional[IntegratorConfig] = None,
    keep_samples: bool = True,
) -> HybridArc:
    """Hybrid solution from x0 up to T_max flow time or J_max jumps.

    Jumps take priority on C ∩ D. Terminates early on region exit, on two
    jumps closer than sys.min_dwell, or on non-finite states.
    """
    cfg = cfg or IntegratorConfig()
    x0 = as_state(sys, x0)
    if not (T_max >= 0 and J_max >= 0):
        raise InvalidInputError("T_max and J_max must be nonnegative")
    if not (flow_membership(sys, x0) or jump_membership(sys, x0)):
        raise InvalidInputError("x0 is outside C ∪ D")
    hooks = nominal_hooks(sys)
    return run_hybrid(sys, x0, T_max, J_max, cfg, lambda j: hooks, lambda t, j, x: sys.g(x), keep_samples)


def distance_to_samples(x, samples) -> float:
    """Minimum Euclidean distance from x to a finite point set."""
    pts = np.asarray(samples, dtype=float)
    if pts.size == 0:
        raise InvalidInputError("sample set is empty")
    x = np.asarray(x, dtype=float).ravel()
    pts = pts.reshape(len(pts), -1)
    return float(np.sqrt(np.min(np.sum((pts - x) ** 2, axis=1))))


class SampledSet:
    """Distance queries against a sampled curve.

    With ordered=True the samples are treated as a polyline and distances are
    refined against the segments adjacent to the nearest vertex.
    """

    def __init__(self, samples, ordered: bool = True):
        from scipy.spatial import cKDTree

        self.points = np.asarray(samples, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if len(self.points) == 0:
            raise InvalidInputError("sample set is empty")
        self.ordered = ordered
        self.tree = cKDTree(self.points)

    def distance(self, x) -> np.ndarray:
        q = np.atleast_2d(np.asarray(x, dtype=float))
        d, idx = self.tree.query(q)
        if not self.ordered or len(self.points) < 2:
            return d
        P = self.points
        best = d.copy()
        for off in (-1, 0):
            i0 = np.clip(idx + off, 0, len(P) - 2)
            a, b = P[i0], P[i0 + 1]
            ab = b - a
            denom = np.einsum("ij,ij->i", ab, ab)
            w = np.where(denom > 0, np.einsum("ij,ij->i", q - a, ab) / np.where(denom > 0, denom, 1.0), 0.0)
            w = np.clip(w, 0.0, 1.0)
            proj = a + w[:, None] * ab
            best = np.minimum(best, np.linalg.norm(q - proj, axis=1))
        return best


def omega_limit_estimate(arc: HybridArc, tail_fraction: float = 0.5, pitch: Optional[float] = None,
                         event_tol: float = 1e-10) -> np.ndarray:
    """Sampled states from the final tail_fraction of the arc (by t + j).

    States are deduplicated on a grid of pitch sqrt(event_tol).
    """
    if not 0 < tail_fraction < 1:
        raise InvalidInputError("tail_fraction must lie in (0, 1)")
    t, j, x = arc.flat()
    s = t + j
    s_cut = s[-1] - tail_fraction * (s[-1] - s[0])
    tail_jumps = sum(1 for r in arc.jumps if r.t + r.j >= s_cut)
    if tail_jumps < 2:
        raise InvalidInputError("arc has fewer than 2 jumps in its tail")
    pts = x[s >= s_cut]
    pitch = math.sqrt(event_tol) if pitch is None else pitch
    keys = np.round(pts / pitch).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return pts[np.sort(first)]
