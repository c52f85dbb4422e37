"""Hybrid system data and structural checks.

A hybrid system here is the tuple (f, g, h, M): flow set C = {h >= 0} and
jump set D = {h = 0, L_f h <= 0}, both intersected with a region M given as a
bounding box plus an optional predicate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import InvalidInputError

DEFAULT_TOL = 1e-9

Vector = np.ndarray
VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Region:
    """Bounding box plus an optional predicate.

    The predicate receives the state and returns a bool. Box membership is
    tested with the caller's tolerance, the predicate is taken as given.
    """

    box: np.ndarray
    predicate: Optional[Callable[[np.ndarray], bool]] = None

    def __post_init__(self):
        box = np.asarray(self.box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] < 1:
            raise InvalidInputError("box must have shape (n, 2)")
        if not np.all(np.isfinite(box)):
            raise InvalidInputError("box must be bounded")
        if np.any(box[:, 0] > box[:, 1]):
            raise InvalidInputError("box has an empty side")
        object.__setattr__(self, "box", box)

    def in_box(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(x >= self.box[:, 0] - tol) and np.all(x <= self.box[:, 1] + tol))

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        if not self.in_box(x, tol):
            return False
        return True if self.predicate is None else bool(self.predicate(x))


@dataclass(frozen=True)
class HybridSystem:
    """Data (f, g, h, M) of a hybrid system.

    Attributes:
        n: state dimension.
        f: flow map.
        g: jump map.
        h: guard; C = {h >= 0}, D = {h = 0, L_f h <= 0}.
        region: the region M.
        grad_h: optional analytic gradient of h.
        jump_region: optional extra predicate that must hold on M ∩ D only.
            Used for excluded sets that the flow legitimately crosses away
            from the guard (compass gait scuffing).
        params: parameter bag, kept for serialization.
        min_dwell: minimum flow time between jumps.
        name: catalog name, if any.
    """

    n: int
    f: VectorField
    g: VectorField
    h: Callable[[np.ndarray], float]
    region: Region
    grad_h: Optional[VectorField] = None
    jump_region: Optional[Callable[[np.ndarray], bool]] = None
    params: Mapping[str, float] = field(default_factory=dict)
    min_dwell: float = 1e-3
    name: str = "custom"

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidInputError("n must be >= 1")
        if self.region.box.shape[0] != self.n:
            raise InvalidInputError("box dimension does not match n")
        if not (self.min_dwell > 0 and np.isfinite(self.min_dwell)):
            raise InvalidInputError("min_dwell must be positive")

    def with_region(self, region: Region) -> "HybridSystem":
        return _replace(self, region=region)

    def with_min_dwell(self, min_dwell: float) -> "HybridSystem":
        return _replace(self, min_dwell=float(min_dwell))


def _replace(sys: HybridSystem, **kw) -> HybridSystem:
    from dataclasses import replace

    return replace(sys, **kw)


@dataclass(frozen=True, order=True)
class HybridTime:
    t: float
    j: int

    def __post_init__(self):
        if self.t < 0 or self.j < 0:
            raise InvalidInputError("hybrid time must be nonnegative")


def as_state(sys: HybridSystem, x) -> np.ndarray:
    """Validate and convert a state to a float vector of length n."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (sys.n,):
        raise InvalidInputError(f"expected state of length {sys.n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("state has non-finite components")
    return arr


def fd_gradient(fun: Callable[[np.ndarray], float], x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient with step rel_step*(1+|x|)."""
    hstep = rel_step * (1.0 + np.linalg.norm(x))
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = hstep
        grad[i] = (fun(x + e) - fun(x - e)) / (2.0 * hstep)
    return grad


def guard_gradient(sys: HybridSystem, x: np.ndarray) -> np.ndarray:
    if sys.grad_h is not None:
        return np.asarray(sys.grad_h(x), dtype=float)
    return fd_gradient(sys.h, x)


def lie_derivative_h(sys: HybridSystem, x) -> float:
    """L_f h(x) = <grad h(x), f(x)>."""
    x = as_state(sys, x)
    return float(np.dot(guard_gradient(sys, x), sys.f(x)))


def _check_tol(tol: float) -> None:
    if not tol >= 0:
        raise InvalidInputError("tol must be >= 0")


def in_region(sys: HybridSystem, x: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    return sys.region.contains(x, tol)


def flow_membership(sys: HybridSystem, x, tol: float = DEFAULT_TOL) -> bool:
    """True iff x is in M and h(x) >= -tol."""
    _check_tol(tol)
    x = as_state(sys, x)
    return in_region(sys, x, tol) and sys.h(x) >= -tol


def jump_membership(sys: HybridSystem, x, tol: float = DEFAULT_TOL) -> bool:
    """True iff x is in M, |h(x)| <= tol and L_f h(x) <= tol."""
    _check_tol(tol)
    x = as_state(sys, x)
    if not in_region(sys, x, tol):
        return False
    if abs(sys.h(x)) > tol:
        return False
    if sys.jump_region is not None and not sys.jump_region(x):
        return False
    return lie_derivative_h(sys, x) <= tol


@dataclass
class ValidationReport:
    samples: np.ndarray
    lie_derivative_min: float
    lie_derivative_max: float
    guard_violations: list
    g_maps_back_into_D: bool
    g_witnesses: list
    verdict: str
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_samples": int(len(self.samples)),
            "lie_derivative_min": self.lie_derivative_min,
            "lie_derivative_max": self.lie_derivative_max,
            "guard_violations": [list(map(float, w)) for w in self.guard_violations],
            "g_maps_back_into_D": self.g_maps_back_into_D,
            "g_witnesses": [list(map(float, w)) for w in self.g_witnesses],
            "verdict": self.verdict,
            "warnings": list(self.warnings),
        }


def _bisect_line(fun, lo: float, hi: float, flo: float, iters: int = 100) -> float:
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if (fm >= 0) == (flo >= 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= 1e-15 * (1.0 + abs(lo)):
            break
    return 0.5 * (lo + hi)


def sample_guard_surface(sys: HybridSystem, sample_count: int, seed: int, max_tries: int = 50) -> np.ndarray:
    """Sample M ∩ D by bisection of h along random box-aligned lines."""
    rng = np.random.default_rng(seed)
    box = sys.region.box
    found = []
    attempts = 0
    while len(found) < sample_count and attempts < sample_count * max_tries:
        attempts += 1
        base = rng.uniform(box[:, 0], box[:, 1])
        axis = int(rng.integers(sys.n))
        lo, hi = box[axis]

        def along(s, base=base, axis=axis):
            y = base.copy()
            y[axis] = s
            return sys.h(y)

        grid = np.linspace(lo, hi, 33)
        vals = [along(s) for s in grid]
        for k in range(len(grid) - 1):
            if vals[k] == 0.0 or (vals[k] > 0) != (vals[k + 1] > 0):
                s = grid[k] if vals[k] == 0.0 else _bisect_line(along, grid[k], grid[k + 1], vals[k])
                y = base.copy()
                y[axis] = s
                if jump_membership(sys, y, 1e-7):
                    found.append(y)
                    break
    return np.array(found).reshape(-1, sys.n)


def validate_assumptions(sys: HybridSystem, sample_count: int = 200, seed: int = 0) -> ValidationReport:
    """Check the structural assumptions on sampled points of M ∩ D.

    Checks that L_f h < 0 on M ∩ D and that g(M ∩ D) does not meet M ∩ D.
    """
    if sample_count < 1:
        raise InvalidInputError("sample_count must be >= 1")
    pts = sample_guard_surface(sys, sample_count, seed)
    notes = []
    if len(pts) == 0:
        msg = "no jump-set points found inside the box"
        warnings.warn(msg)
        notes.append(msg)
        return ValidationReport(pts, float("nan"), float("nan"), [], False, [], "pass", notes)
    lie = np.array([lie_derivative_h(sys, p) for p in pts])
    violations = [p for p, v in zip(pts, lie) if not v < 0]
    witnesses = []
    for p in pts:
        gp = np.asarray(sys.g(p), dtype=float)
        if np.all(np.isfinite(gp)) and jump_membership(sys, gp, 1e-7):
            witnesses.append(p)
    verdict = "fail" if (violations or witnesses) else "pass"
    return ValidationReport(
        samples=pts,
        lie_derivative_min=float(lie.min()),
        lie_derivative_max=float(lie.max()),
        guard_violations=violations,
        g_maps_back_into_D=bool(witnesses),
        g_witnesses=witnesses,
        verdict=verdict,
        warnings=notes,
    )
