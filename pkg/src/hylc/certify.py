"""Numerical certificates and stability diagnostics for hybrid limit cycles.

Three groups of checks:

* the invariance condition built from a function p vanishing on the cycle,
  W = (p - p(x_bar))^n_bar, with <grad W, f> = 0, its second-order
  counterpart on O ∩ C, and W(g(x)) = W(x) on O ∩ D;
* Zhukovskii-type distances between two solutions after reparameterizing
  flow time to align the first impacts;
* the incremental graphical (delta-S) check with time offsets up to eps.

All checks are evaluated on finitely many samples. A pass means the data are
consistent with the property at the sampled points, nothing more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cycles import LimitCycle
from .errors import DegenerateError, InvalidInputError
from .flow import IntegratorConfig, integrate, nominal_hooks
from .model import HybridSystem, as_state, flow_membership
from .sim import HybridArc, interp_segment, simulate


@dataclass(frozen=True)
class Certificate:
    p: Callable[[np.ndarray], float]
    x_bar: np.ndarray
    n_bar: int = 2
    grad_p: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.n_bar < 2 or self.n_bar % 2:
            raise InvalidInputError("n_bar must be an even integer >= 2")
        object.__setattr__(self, "x_bar", np.asarray(self.x_bar, dtype=float))
        if not abs(self.p(self.x_bar)) > 0:
            raise InvalidInputError("p(x_bar) must be nonzero")

    @property
    def p_bar(self) -> float:
        return float(self.p(self.x_bar))

    def W(self, x) -> float:
        return (self.p(x) - self.p_bar) ** self.n_bar

    def without_gradient(self) -> "Certificate":
        return Certificate(self.p, self.x_bar, self.n_bar, None)

    @classmethod
    def from_polynomial(cls, coefficients: dict, x_bar, n_bar: int = 2) -> "Certificate":
        """Polynomial p from {exponent tuple or "i,j,...": coefficient}."""
        terms = []
        for key, coef in coefficients.items():
            exps = tuple(int(e) for e in (key.split(",") if isinstance(key, str) else key))
            terms.append((np.array(exps), float(coef)))
        if not terms:
            raise InvalidInputError("empty polynomial")
        n = len(terms[0][0])
        if any(len(e) != n for e, _ in terms):
            raise InvalidInputError("inconsistent monomial lengths")

        def p(x):
            x = np.asarray(x, dtype=float)
            return float(sum(c * np.prod(x ** e) for e, c in terms))

        def grad(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(n)
            for e, c in terms:
                for i in range(n):
                    if e[i] == 0:
                        continue
                    e2 = e.copy()
                    e2[i] -= 1
                    out[i] += c * e[i] * np.prod(x ** e2)
            return out

        return cls(p, np.asarray(x_bar, dtype=float), n_bar, grad)

    @classmethod
    def from_json(cls, doc: dict) -> "Certificate":
        unknown = set(doc) - {"coefficients", "x_bar", "n_bar"}
        if unknown:
            raise InvalidInputError(f"unknown certificate keys: {sorted(unknown)}")
        return cls.from_polynomial(doc["coefficients"], doc["x_bar"], int(doc.get("n_bar", 2)))


def _fd_grad(fun, x, step):
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = step
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return g


@dataclass
class CertificateReport:
    residual_nonneg: float
    residual_flow: float
    residual_flow2: float
    residual_jump: float
    positivity_min: float
    cert_tol: float
    n_samples: int
    verdict: str

    def to_dict(self) -> dict:
        return {
            "residual_nonneg": self.residual_nonneg,
            "residual_flow": self.residual_flow,
            "residual_flow2": self.residual_flow2,
            "residual_jump": self.residual_jump,
            "positivity_min": self.positivity_min,
            "cert_tol": self.cert_tol,
            "n_samples": self.n_samples,
            "verdict": self.verdict,
        }


def check_certificate(
    sys: HybridSystem,
    cert: Certificate,
    cycle: LimitCycle,
    cert_tol: float = 1e-5,
    fd_step: float = 1e-4,
    min_samples: int = 200,
) -> CertificateReport:
    """Evaluate the four invariance conditions on the sampled cycle.

    First and second Lie derivatives of W along f use nested central
    differences (or the analytic grad p for the inner level when given).
    """
    samples = np.asarray(cycle.samples)
    if len(samples) < min_samples:
        raise InvalidInputError(f"cycle has {len(samples)} samples, need >= {min_samples}")
    W, f = cert.W, sys.f
    pb = cert.p_bar
    n_bar = cert.n_bar

    if cert.grad_p is not None:
        def lfw(x):
            return n_bar * (cert.p(x) - pb) ** (n_bar - 1) * float(np.dot(cert.grad_p(x), f(x)))
    else:
        def lfw(x):
            return float(np.dot(_fd_grad(W, x, fd_step), f(x)))

    flow_pts = [x for x in samples if sys.h(x) >= -1e-9]
    Wv = np.array([W(x) for x in samples])
    r1 = max(abs(lfw(x)) for x in flow_pts)
    r2 = max(abs(float(np.dot(_fd_grad(lfw, x, fd_step), f(x)))) for x in flow_pts)
    xd = cycle.x_pre
    rj = abs(W(np.asarray(sys.g(xd), dtype=float)) - W(xd))
    r0 = max(0.0, -float(Wv.min()))
    pos = float(Wv.min())
    ok = max(r0, r1, r2, rj) <= cert_tol and pos > 0
    return CertificateReport(r0, r1, r2, rj, pos, cert_tol, len(samples), "pass" if ok else "fail")


# ------------------------------------------------------------ reparam


@dataclass(frozen=True)
class Reparameterization:
    """tau(t) = (T2/T1) t on [0, T1], t + (T2 - T1) afterwards."""

    T1: float
    T2: float

    def __post_init__(self):
        if not (self.T1 > 0 and self.T2 > 0):
            raise DegenerateError("impact times must be positive")

    @property
    def scale(self) -> float:
        return self.T2 / self.T1

    @property
    def shift(self) -> float:
        return self.T2 - self.T1

    @property
    def breakpoints(self):
        return (self.T1,)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t <= self.T1, self.scale * t, t + self.shift)
        return float(out) if out.ndim == 0 else out

    def max_time_shift(self) -> float:
        """sup_t |t - tau(t)|."""
        return abs(self.shift)

    def to_dict(self) -> dict:
        return {"T1": self.T1, "T2": self.T2, "scale": self.scale, "shift": self.shift}


def build_impact_reparameterization(sys: Optional[HybridSystem], phi1: HybridArc, phi2: HybridArc) -> Reparameterization:
    """Align the first impact of phi1 with that of phi2."""
    if sys is not None:
        for arc in (phi1, phi2):
            if not flow_membership(sys, arc.initial_state()):
                raise InvalidInputError("arcs must start in the flow set")
    T1, T2 = phi1.first_impact_time(), phi2.first_impact_time()
    if not (math.isfinite(T1) and math.isfinite(T2)):
        raise InvalidInputError("both arcs need a first impact")
    if T1 == 0 or T2 == 0:
        raise DegenerateError("an arc starts on the jump set; jump first")
    return Reparameterization(T1, T2)


@dataclass
class ZhukovskiiResult:
    sup: float
    unmatched: int
    matched: int
    t: np.ndarray
    j: np.ndarray
    d: np.ndarray
    max_time_shift: float

    def sup_after(self, t0: float) -> float:
        mask = self.t > t0
        return float(self.d[mask].max()) if mask.any() else 0.0


def zhukovskii_distance(phi1: HybridArc, phi2: HybridArc, tau) -> ZhukovskiiResult:
    """sup |phi1(t, j) - phi2(tau(t), j)| over matched samples of phi1."""
    ts, js, ds = [], [], []
    unmatched = 0
    for seg in phi1.segments:
        seg2 = phi2.segment(seg.j)
        for t, x in zip(seg.times, seg.states):
            s = tau(t)
            if seg2 is None:
                unmatched += 1
                continue
            slack = 1e-9 * (1.0 + abs(s))
            if not (seg2.t_start - slack <= s <= seg2.t_end + slack):
                unmatched += 1
                continue
            y = interp_segment(seg2, min(max(s, seg2.t_start), seg2.t_end))
            ts.append(t)
            js.append(seg.j)
            ds.append(float(np.linalg.norm(x - y)))
    if not ds:
        raise InvalidInputError("no samples of phi1 map into the domain of phi2")
    shift = tau.max_time_shift() if hasattr(tau, "max_time_shift") else float("nan")
    d = np.array(ds)
    return ZhukovskiiResult(float(d.max()), unmatched, len(ds), np.array(ts), np.array(js), d, shift)


def identity_reparameterization():
    class _Id:
        def __call__(self, t):
            return t

        def max_time_shift(self):
            return 0.0

    return _Id()


def _arc_value_at(arc: HybridArc, t: float) -> np.ndarray:
    # latest segment whose interval contains t
    for seg in reversed(arc.segments):
        if seg.t_start <= t <= seg.t_end:
            return interp_segment(seg, t)
    raise InvalidInputError(f"t = {t} outside the arc")


def euclidean_distance_profile(phi1: HybridArc, phi2: HybridArc, times) -> np.ndarray:
    """|phi1(t) - phi2(t)| at equal ordinary time, each arc at its latest j."""
    return np.array([float(np.linalg.norm(_arc_value_at(phi1, t) - _arc_value_at(phi2, t))) for t in times])


# ------------------------------------------------------ incremental


@dataclass
class IncrementalResult:
    ok: bool
    witness: Optional[tuple]
    gap: float
    checked: int

    def __bool__(self):
        return self.ok


def _min_gap_in_window(x, seg, lo, hi):
    """min over s in [lo, hi] of |x - seg(s)| with seg linear between samples."""
    ts, xs = seg.times, seg.states
    lo, hi = max(lo, seg.t_start), min(hi, seg.t_end)
    if lo > hi:
        return math.inf
    i0 = int(np.searchsorted(ts, lo, side="right"))
    i1 = int(np.searchsorted(ts, hi, side="left"))
    pts = [interp_segment(seg, lo)]
    if i1 > i0:
        pts.extend(xs[i0:i1])
    pts.append(interp_segment(seg, hi))
    P = np.array(pts)
    if len(P) == 1:
        return float(np.linalg.norm(x - P[0]))
    a, b = P[:-1], P[1:]
    ab = b - a
    den = np.einsum("ij,ij->i", ab, ab)
    w = np.where(den > 0, np.einsum("ij,ij->i", x - a, ab) / np.where(den > 0, den, 1.0), 0.0)
    w = np.clip(w, 0.0, 1.0)
    return float(np.min(np.linalg.norm(x - (a + w[:, None] * ab), axis=1)))


def check_incremental_stability(phi1: HybridArc, phi2: HybridArc, eps: float) -> IncrementalResult:
    """Graphical closeness of phi1 to phi2 with time offsets up to eps.

    For each sample (t, j) of phi1, look for s in phi2's segment j with
    |t - s| <= eps and |phi1(t, j) - phi2(s, j)| <= eps. Samples whose
    window reaches past the end of phi2 are skipped.
    """
    if eps < 0:
        raise InvalidInputError("eps must be >= 0")
    t_end2 = phi2.t_final
    checked = 0
    worst = 0.0
    tol = 1e-9
    for seg in phi1.segments:
        seg2 = phi2.segment(seg.j)
        for t, x in zip(seg.times, seg.states):
            if t + eps > t_end2:
                continue
            checked += 1
            gap = math.inf if seg2 is None else _min_gap_in_window(x, seg2, t - eps - tol, t + eps + tol)
            if gap > eps + tol:
                return IncrementalResult(False, (float(t), int(seg.j)), gap, checked)
            worst = max(worst, gap)
    return IncrementalResult(True, None, worst, checked)


def _flow_for(sys, x, dt, cfg):
    if dt <= 0:
        return np.array(x, dtype=float)
    res = integrate(np.asarray(x, dtype=float), cfg, nominal_hooks(sys), horizon=dt, keep_samples=False)
    if res.impact_state is not None:
        raise InvalidInputError("phase shift must be shorter than the period")
    return res.states[-1]


def check_nonexistence_signal(
    sys: HybridSystem,
    cycle: LimitCycle,
    eps_grid,
    shift: float,
    cfg: Optional[IntegratorConfig] = None,
    periods: float = 3.0,
) -> dict:
    """delta-S test on two copies of the cycle offset in phase by `shift`.

    A hybrid limit cycle forces delta-S to fail for eps below the gap induced
    by the offset. Reports the smallest eps in eps_grid that passes (checked
    in both directions).
    """
    cfg = cfg or IntegratorConfig()
    x1 = cycle.x_post
    x2 = _flow_for(sys, x1, shift, cfg)
    T = periods * cycle.period_T_star
    J = int(4 * periods) + 4
    phi1 = simulate(sys, x1, T, J, cfg)
    phi2 = simulate(sys, x2, T, J, cfg)
    rows = []
    smallest = None
    for eps in sorted(float(e) for e in eps_grid):
        a = check_incremental_stability(phi1, phi2, eps)
        b = check_incremental_stability(phi2, phi1, eps)
        ok = a.ok and b.ok
        wit = a.witness if not a.ok else b.witness
        rows.append({"eps": eps, "pass": ok, "witness": list(wit) if wit else None})
        if ok and smallest is None:
            smallest = eps
    return {
        "shift": float(shift),
        "periods": float(periods),
        "rows": rows,
        "smallest_passing_eps": smallest,
        "note": "delta-S must fail for eps below the gap induced by the phase shift",
    }
