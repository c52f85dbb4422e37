"""Benchmark systems with their closed-form extras.

Each entry carries a constructor, parameter defaults, optional closed-form
flows / impact times / Poincare maps used as test oracles, an optional
invariance certificate, and reference values tagged with their provenance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, InvalidInputError, ParameterError
from .model import HybridSystem, Region

# ---------------------------------------------------------------- TCP


def make_tcp(B=1.0, a=1.0, m=0.25, q_max=1.0, eps=1e-3, restrict=True, strict=True) -> HybridSystem:
    """TCP congestion-window model restricted to M_T minus a small ball.

    Args:
        B: link capacity.
        a: additive increase rate.
        m: multiplicative decrease factor.
        q_max: queue threshold triggering a drop.
        eps: radius of the excluded ball around (q_max, B).
        restrict: if False the region is a plain box, which admits initial
            points below the invariant parabola a*q = (r-B)^2/2.
        strict: enforce m(B + sqrt(2 a q_max)) < B.
    """
    if not (a > 0 and B > 0 and q_max > 0 and 0 < m):
        raise ParameterError("TCP parameters must be positive")
    r_top = B + math.sqrt(2.0 * a * q_max)
    if strict and not m * r_top < B:
        raise ParameterError("TCP parameters violate m(B + sqrt(2 a q_max)) < B")

    def f(x):
        return np.array([x[1] - B, a])

    def g(x):
        return np.array([q_max, m * x[1]])

    def h(x):
        return q_max - x[0]

    def grad_h(x):
        return np.array([-1.0, 0.0])

    if restrict:
        box = [[0.0, q_max], [0.0, r_top]]

        def pred(x):
            q, r = x[0], x[1]
            if a * q < 0.5 * (r - B) ** 2 - 1e-9:
                return False
            return math.hypot(q - q_max, r - B) >= eps

    else:
        lo = -(2.0 * q_max + B * B / a)
        box = [[lo, q_max], [-2.0 * B, 2.0 * B + 2.0 * r_top]]

        def pred(x):
            return math.hypot(x[0] - q_max, x[1] - B) >= eps

    return HybridSystem(
        n=2, f=f, g=g, h=h, grad_h=grad_h, region=Region(np.array(box), pred),
        params=dict(B=B, a=a, m=m, q_max=q_max, eps=eps, restrict=restrict),
        min_dwell=1e-2, name="tcp",
    )


def tcp_flow(p, x0, t):
    B, a = p["B"], p["a"]
    q, r = x0
    return np.array([q + (r - B) * t + 0.5 * a * t * t, r + a * t])


def tcp_impact_time(p, x0):
    """Smallest t >= 0 with q(t) = q_max and r(t) >= B (inf if none)."""
    B, a, qm = p["B"], p["a"], p["q_max"]
    q, r = x0
    disc = (r - B) ** 2 + 2 * a * (qm - q)
    if disc < 0:
        return math.inf
    # root of q(t) = q_max with q increasing through it
    return (-(r - B) + math.sqrt(disc)) / a


def tcp_poincare(p, x):
    return np.array([p["q_max"], 2 * p["B"] - p["m"] * x[1]])


def tcp_period(p):
    B, a, m = p["B"], p["a"], p["m"]
    return 2 * B * (1 - m) / (a + m * a)


def tcp_level(p):
    B, a, m, qm = p["B"], p["a"], p["m"], p["q_max"]
    return qm - B * B * (m - 1) ** 2 / (2 * a * (m + 1) ** 2)


def tcp_certificate(p):
    from .certify import Certificate

    B, a = p["B"], p["a"]
    R = tcp_level(p)
    return Certificate(
        p=lambda x: x[0] - (x[1] - B) ** 2 / (2 * a) - R,
        x_bar=np.array([0.0, 0.0]),
        n_bar=2,
        grad_p=lambda x: np.array([1.0, -(x[1] - B) / a]),
    )


# --------------------------------------------------------- Izhikevich


def make_izhikevich(a=0.02, b=0.2, c=-55.0, d=4.0, I_ext=10.0) -> HybridSystem:
    """Izhikevich neuron with reset at v = 30, restricted to w <= 325 + I_ext."""
    w_top = 325.0 + I_ext

    def f(x):
        v, w = x[0], x[1]
        return np.array([0.04 * v * v + 5.0 * v + 140.0 - w + I_ext, a * (b * v - w)])

    def g(x):
        return np.array([c, x[1] + d])

    def h(x):
        return 30.0 - x[0]

    def grad_h(x):
        return np.array([-1.0, 0.0])

    def pred(x):
        return x[1] <= w_top

    box = [[-100.0, 35.0], [-60.0, w_top]]
    return HybridSystem(
        n=2, f=f, g=g, h=h, grad_h=grad_h, region=Region(np.array(box), pred),
        params=dict(a=a, b=b, c=c, d=d, I_ext=I_ext), min_dwell=0.5, name="izhikevich",
    )


# ------------------------------------------------------- compass gait


def make_compass_gait(gamma=9.81, m_h=12.0, m=5.0, a=0.5, b=0.5, phi=0.0524, eps=1e-3) -> HybridSystem:
    """Passive compass-gait biped on a slope of angle phi.

    State (theta_n, theta_s, dtheta_n, dtheta_s): nonsupport and support leg
    angles and rates. Leg length l = a + b. The region excludes
    dtheta_s > -eps; the excluded sets near the guard (legs crossing with the
    swing leg moving forward, legs aligned) only act on the jump set, since
    the walking cycle crosses them mid-swing.
    """
    if not (-math.pi / 4 < phi < math.pi / 4):
        raise ParameterError("phi must lie in (-pi/4, pi/4)")
    if min(gamma, m_h, m, a, b) <= 0:
        raise ParameterError("compass gait parameters must be positive")
    l = a + b
    m11 = m * b * b
    m22 = (m_h + m) * l * l + m * a * a
    mlb = m * l * b
    g1 = m * b * gamma
    g2 = (m_h * l + m * a + m * l) * gamma

    def f(x):
        tn, ts, dn, ds = x[0], x[1], x[2], x[3]
        al = tn - ts
        m12 = -mlb * math.cos(ts - tn)
        det = m11 * m22 - m12 * m12
        if abs(det) < 1e-12:
            raise DivergenceError("singular inertia matrix")
        s = mlb * math.sin(al)
        # M qdd = -(N qd + G)
        r1 = -(-s * ds * ds) - g1 * math.sin(tn)
        r2 = -(s * dn * dn) + g2 * math.sin(ts)
        ddn = (m22 * r1 - m12 * r2) / det
        dds = (-m12 * r1 + m11 * r2) / det
        return np.array([dn, ds, ddn, dds])

    def g(x):
        tn, ts, dn, ds = x[0], x[1], x[2], x[3]
        ca = math.cos(tn - ts)
        qm = np.array([[-m * a * b, -m * a * b + (m_h * l * l + 2 * m * a * l) * ca], [0.0, -m * a * b]])
        qp = np.array([[m * b * b - m * b * l * ca, (m + m_h) * l * l + m * a * a - m * b * l * ca],
                       [m * b * b, -m * b * l * ca]])
        v = np.linalg.solve(qp, qm @ np.array([dn, ds]))
        return np.array([ts, tn, v[0], v[1]])

    def h(x):
        return math.cos(x[1] + phi) - math.cos(x[0] + phi)

    def grad_h(x):
        return np.array([math.sin(x[0] + phi), -math.sin(x[1] + phi), 0.0, 0.0])

    def pred(x):
        return x[3] <= -eps

    def jump_region(x):
        tn, ts, dn, ds = x[0], x[1], x[2], x[3]
        near_cross = abs(tn + ts + 2 * phi) < eps
        if near_cross and math.sin(tn + phi) * (dn + ds) > -eps:
            return False
        if near_cross and dn > -eps:
            return False
        if abs(tn - ts) < eps and math.sin(tn + phi) * (dn - ds) < eps:
            return False
        return True

    box = [[-1.2, 1.2], [-1.2, 1.2], [-12.0, 12.0], [-12.0, 12.0]]
    return HybridSystem(
        n=4, f=f, g=g, h=h, grad_h=grad_h, region=Region(np.array(box), pred),
        jump_region=jump_region,
        params=dict(gamma=gamma, m_h=m_h, m=m, a=a, b=b, phi=phi, eps=eps),
        min_dwell=1e-2, name="compass_gait",
    )


def compass_kinetic_energy(p, x):
    m, m_h, a, b = p["m"], p["m_h"], p["a"], p["b"]
    l = a + b
    c = math.cos(x[1] - x[0])
    M = np.array([[m * b * b, -m * l * b * c], [-m * l * b * c, (m_h + m) * l * l + m * a * a]])
    qd = np.asarray(x[2:4], dtype=float)
    return 0.5 * float(qd @ M @ qd)


# ---------------------------------------------------------- academic


def make_academic(a=2.0, b=6.0, b1=2.0, b2=1.0) -> HybridSystem:
    """Scalar system x' = -a x + b, x+ = b2 on {x = b1}."""
    if not (a > 0 and b > a * b1 > a * b2 > 0):
        raise ParameterError("academic system needs a > 0 and b > a b1 > a b2 > 0")

    def f(x):
        return np.array([-a * x[0] + b])

    def g(x):
        return np.array([b2])

    def h(x):
        return b1 - x[0]

    def grad_h(x):
        return np.array([-1.0])

    return HybridSystem(
        n=1, f=f, g=g, h=h, grad_h=grad_h, region=Region(np.array([[0.0, b1]])),
        params=dict(a=a, b=b, b1=b1, b2=b2), min_dwell=1e-3, name="academic",
    )


def academic_flow(p, x0, t):
    a, b = p["a"], p["b"]
    return np.array([(x0[0] - b / a) * math.exp(-a * t) + b / a])


def academic_impact_time(p, x0):
    a, b, b1 = p["a"], p["b"], p["b1"]
    return math.log((a * x0[0] - b) / (a * b1 - b)) / a


def academic_poincare(p, x):
    return np.array([p["b1"]])


def academic_period(p):
    return academic_impact_time(p, [p["b2"]])


# ------------------------------------------------------------- timer


def make_timer() -> HybridSystem:
    def f(x):
        return np.array([1.0])

    def g(x):
        return np.array([0.0])

    def h(x):
        return 1.0 - x[0]

    def grad_h(x):
        return np.array([-1.0])

    return HybridSystem(
        n=1, f=f, g=g, h=h, grad_h=grad_h, region=Region(np.array([[0.0, 1.0]])),
        params={}, min_dwell=1e-3, name="timer",
    )


def timer_flow(p, x0, t):
    return np.array([x0[0] + t])


def timer_impact_time(p, x0):
    return 1.0 - x0[0]


# ---------------------------------------------------------- rotation


def make_rotation(b=0.8, c=3.5, eps=1.0, restrict=True) -> HybridSystem:
    """Clockwise rotation with reset to (c, 0) on {x1 = 0}.

    The region is {|x| >= c - eps, x2 <= 0}; restrict=False drops x2 <= 0.
    """
    if not (b > 0 and c > 0 and 0 < eps < c):
        raise ParameterError("rotation needs b > 0, c > 0 and 0 < eps < c")

    def f(x):
        return np.array([b * x[1], -b * x[0]])

    def g(x):
        return np.array([c, 0.0])

    def h(x):
        return x[0]

    def grad_h(x):
        return np.array([1.0, 0.0])

    def pred(x):
        if math.hypot(x[0], x[1]) < c - eps:
            return False
        return (x[1] <= 1e-12) if restrict else True

    R = 2.0 * c + 2.0
    return HybridSystem(
        n=2, f=f, g=g, h=h, grad_h=grad_h, region=Region(np.array([[-R, R], [-R, R]]), pred),
        params=dict(b=b, c=c, eps=eps, restrict=restrict), min_dwell=1e-3, name="rotation",
    )


def rotation_flow(p, x0, t):
    b = p["b"]
    cb, sb = math.cos(b * t), math.sin(b * t)
    return np.array([x0[0] * cb + x0[1] * sb, -x0[0] * sb + x0[1] * cb])


def rotation_impact_time(p, x0):
    # angle swept clockwise until x1 = 0 with x2 < 0
    ang = math.atan2(x0[1], x0[0])
    sweep = ang + math.pi / 2
    if sweep < 0:
        sweep += 2 * math.pi
    return sweep / p["b"]


def rotation_poincare(p, x):
    return np.array([0.0, -p["c"]])


def rotation_certificate(p):
    from .certify import Certificate

    c = p["c"]
    return Certificate(
        p=lambda x: x[0] ** 2 + x[1] ** 2 - c * c,
        x_bar=np.array([0.0, 0.0]),
        n_bar=2,
        grad_p=lambda x: np.array([2 * x[0], 2 * x[1]]),
    )


def rotation_delta_bounds(p, x1, x2, eps):
    """Return (delta_phi, delta_t) for two rotation starts at tolerance eps.

    delta_phi bounds the start gap so the impact times differ by at most
    eps; delta_t bounds it so the post-jump states stay eps-close.
    """
    b, c = p["b"], p["c"]
    r1, r2 = float(np.linalg.norm(x1)), float(np.linalg.norm(x2))
    base = r1 * r1 + r2 * r2
    d_phi = math.sqrt(max(0.0, base - 2 * r1 * r2 * math.cos(b * eps)))
    d_t = math.sqrt(max(0.0, base - 2 * r1 * r2 * (1.0 - eps * eps / (2.0 * c * c))))
    return d_phi, d_t


# ----------------------------------------------------------- entries


@dataclass(frozen=True)
class Reference:
    value: object
    tol: float
    source: str  # "quoted" or "derived"


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    constructor: Callable[..., HybridSystem]
    defaults: dict
    description: str
    flow_solution: Optional[Callable] = None
    impact_time: Optional[Callable] = None
    poincare: Optional[Callable] = None
    certificate: Optional[Callable] = None
    fixed_point_guess: Optional[tuple] = None
    default_x0: Optional[tuple] = None
    K_box: Optional[tuple] = None
    step: Optional[float] = None  # suggested integrator step for long sweeps
    reference: dict = field(default_factory=dict)
    notes: tuple = ()

    def build(self, **params) -> HybridSystem:
        return self.constructor(**self.resolve(params))

    def resolve(self, params: dict) -> dict:
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise InvalidInputError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        out = dict(self.defaults)
        out.update(params)
        return out

    def schema(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "params": {k: _jsonable(v) for k, v in self.defaults.items()},
            "has_closed_form_flow": self.flow_solution is not None,
            "has_closed_form_poincare": self.poincare is not None,
            "has_certificate": self.certificate is not None,
            "notes": list(self.notes),
            "reference": {
                k: {"value": _jsonable(r.value), "tol": r.tol, "source": r.source}
                for k, r in self.reference.items()
            },
        }


def _jsonable(v):
    if isinstance(v, (tuple, list, np.ndarray)):
        return [_jsonable(u) for u in v]
    if isinstance(v, (bool, str)) or v is None:
        return v
    return float(v)


_TCP_P = dict(B=1.0, a=1.0, m=0.25, q_max=1.0)

CATALOG: dict[str, CatalogEntry] = {}


def _register(entry: CatalogEntry) -> None:
    CATALOG[entry.name] = entry


_register(CatalogEntry(
    name="tcp",
    constructor=make_tcp,
    defaults=dict(B=1.0, a=1.0, m=0.25, q_max=1.0, eps=1e-3, restrict=True, strict=True),
    description="TCP congestion control with drop at q = q_max",
    flow_solution=tcp_flow, impact_time=tcp_impact_time, poincare=tcp_poincare,
    certificate=tcp_certificate,
    fixed_point_guess=(1.0, 1.0), default_x0=(1.0, 0.4),
    K_box=((0.68, 0.72), (0.58, 0.64)), step=1e-2,
    reference={
        "fixed_point": Reference((1.0, 1.6), 1e-6, "quoted"),
        "T_star": Reference(tcp_period(_TCP_P), 1e-6, "derived"),
        "eigenvalues": Reference((0.0, -0.25), 1e-4, "quoted"),
    },
))

_register(CatalogEntry(
    name="izhikevich",
    constructor=make_izhikevich,
    defaults=dict(a=0.02, b=0.2, c=-55.0, d=4.0, I_ext=10.0),
    description="Izhikevich spiking neuron, intrinsic bursting parameters",
    fixed_point_guess=(30.0, -7.0), default_x0=(-55.0, -6.0),
    K_box=((-57.0, -53.0), (-6.2, -5.8)), step=1e-2,
    reference={
        "fixed_point": Reference((30.0, -7.50), 0.05, "quoted"),
        "T_star": Reference(31.2, 0.5, "quoted"),
        "eigenvalues": Reference((0.0, -0.025), 0.01, "quoted"),
    },
))

_register(CatalogEntry(
    name="compass_gait",
    constructor=make_compass_gait,
    defaults=dict(gamma=9.81, m_h=12.0, m=5.0, a=0.5, b=0.5, phi=0.0524, eps=1e-3),
    description="Passive compass-gait biped walking down a slope",
    fixed_point_guess=(0.22, -0.33, -1.78, -1.47), default_x0=(0.0, 0.0, 2.0, -0.4),
    reference={
        "fixed_point": Reference((0.22, -0.32, -1.79, -1.49), 0.05, "quoted"),
        "T_star": Reference(0.734, 0.02, "quoted"),
        "eigenvalues": Reference((0.8897, -0.7456, 0.0, 0.0013), 0.05, "quoted"),
    },
    notes=(
        "the printed model reproduces the reference fixed point and period, but its Poincare "
        "multipliers are about {-0.22 +- 0.51i, 0.12, 0} (spectral radius about 0.56), not the "
        "reference list; the cycle is still asymptotically stable",
    ),
))

_register(CatalogEntry(
    name="academic",
    constructor=make_academic,
    defaults=dict(a=2.0, b=6.0, b1=2.0, b2=1.0),
    description="Scalar relaxation x' = -a x + b with reset to b2 at b1",
    flow_solution=academic_flow, impact_time=academic_impact_time, poincare=academic_poincare,
    fixed_point_guess=(2.0,), default_x0=(1.0,),
    reference={
        "fixed_point": Reference((2.0,), 1e-9, "quoted"),
        "T_star": Reference(math.log(2) / 2, 1e-7, "quoted"),
        "eigenvalues": Reference((0.0,), 1e-6, "derived"),
    },
))

_register(CatalogEntry(
    name="timer",
    constructor=make_timer,
    defaults={},
    description="Unit-rate timer reset to 0 at 1",
    flow_solution=timer_flow, impact_time=timer_impact_time,
    poincare=lambda p, x: np.array([1.0]),
    fixed_point_guess=(1.0,), default_x0=(0.0,),
    reference={
        "fixed_point": Reference((1.0,), 1e-9, "quoted"),
        "T_star": Reference(1.0, 1e-9, "quoted"),
        "eigenvalues": Reference((0.0,), 1e-6, "derived"),
    },
))

_register(CatalogEntry(
    name="rotation",
    constructor=make_rotation,
    defaults=dict(b=0.8, c=3.5, eps=1.0, restrict=True),
    description="Planar clockwise rotation with reset to (c, 0) on x1 = 0",
    flow_solution=rotation_flow, impact_time=rotation_impact_time, poincare=rotation_poincare,
    certificate=rotation_certificate,
    fixed_point_guess=(0.0, -3.5), default_x0=(3.5, 0.0),
    reference={
        "fixed_point": Reference((0.0, -3.5), 1e-6, "derived"),
        "T_star": Reference(math.pi / 1.6, 1e-6, "quoted"),
        "eigenvalues": Reference((0.0, 0.0), 1e-4, "derived"),
    },
))


def get_entry(name: str) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise InvalidInputError(f"unknown system '{name}'; known: {sorted(CATALOG)}") from None


def build(name: str, params: Optional[dict] = None) -> HybridSystem:
    return get_entry(name).build(**(params or {}))


def list_entries() -> list[dict]:
    return [CATALOG[k].schema() for k in sorted(CATALOG)]


def _match_eigs(found, expected):
    """Largest error of a greedy nearest pairing of two eigenvalue lists."""
    rest = [complex(z) for z in found]
    worst = 0.0
    for z in sorted((complex(v) for v in expected), key=lambda v: -abs(v)):
        k = min(range(len(rest)), key=lambda i: abs(rest[i] - z))
        worst = max(worst, abs(rest.pop(k) - z))
    return worst


def compare_to_reference(name: str, params: Optional[dict] = None, fixed_point=None, T_star=None,
                         eigenvalues=None) -> dict:
    """Check computed cycle data against the entry's reference values.

    Only meaningful at the default parameters; otherwise reports
    applicable = False. Eigenvalues are compared by greedy nearest pairing
    and by spectral radius.
    """
    entry = get_entry(name)
    if entry.resolve(params or {}) != entry.defaults:
        return {"applicable": False}
    out = {"applicable": True, "checks": {}, "notes": list(entry.notes)}
    ref = entry.reference
    if fixed_point is not None and "fixed_point" in ref:
        r = ref["fixed_point"]
        err = float(np.max(np.abs(np.asarray(fixed_point, dtype=float) - np.asarray(r.value, dtype=float))))
        out["checks"]["fixed_point"] = {"error": err, "tol": r.tol, "source": r.source, "ok": err <= r.tol}
    if T_star is not None and "T_star" in ref:
        r = ref["T_star"]
        err = abs(float(T_star) - float(r.value))
        out["checks"]["T_star"] = {"error": err, "tol": r.tol, "source": r.source, "ok": err <= r.tol}
    if eigenvalues is not None and "eigenvalues" in ref:
        r = ref["eigenvalues"]
        err = _match_eigs(eigenvalues, r.value)
        rho = max(abs(complex(z)) for z in eigenvalues)
        rho_ref = max(abs(complex(z)) for z in r.value)
        out["checks"]["eigenvalues"] = {"error": err, "tol": r.tol, "source": r.source, "ok": err <= r.tol}
        out["checks"]["spectral_radius"] = {"value": rho, "expected": rho_ref, "error": abs(rho - rho_ref),
                                            "tol": r.tol, "ok": abs(rho - rho_ref) <= r.tol}
    out["deviation"] = any(not c["ok"] for c in out["checks"].values())
    return out


# ------------------------------------------------------- system JSON

_SYSTEM_KEYS = {"system", "params", "box", "min_dwell"}


def system_document(name: str, params: Optional[dict] = None, box=None, min_dwell=None) -> dict:
    """JSON-ready description of a catalog system."""
    entry = get_entry(name)
    resolved = entry.resolve(params or {})
    sys = entry.constructor(**resolved)
    return {
        "system": name,
        "params": {k: _jsonable(v) for k, v in resolved.items()},
        "box": sys.region.box.tolist() if box is None else [list(map(float, r)) for r in box],
        "min_dwell": float(sys.min_dwell if min_dwell is None else min_dwell),
    }


def load_system(doc) -> HybridSystem:
    """Build a system from a JSON document (dict, JSON text or file path)."""
    if isinstance(doc, str):
        text = doc
        if not doc.lstrip().startswith("{"):
            with open(doc, encoding="utf-8") as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"malformed system JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InvalidInputError("system JSON must be an object")
    unknown = set(doc) - _SYSTEM_KEYS
    if unknown:
        raise InvalidInputError(f"unknown keys in system JSON: {sorted(unknown)}")
    if "system" not in doc:
        raise InvalidInputError("system JSON needs a 'system' key")
    params = doc.get("params", {}) or {}
    if not isinstance(params, dict):
        raise InvalidInputError("'params' must be an object")
    sys = build(doc["system"], params)
    if "box" in doc:
        box = np.asarray(doc["box"], dtype=float)
        sys = sys.with_region(Region(box, sys.region.predicate))
    if "min_dwell" in doc:
        sys = sys.with_min_dwell(float(doc["min_dwell"]))
    return sys


# --------------------------------------------------- hybrid closed form


def closed_form_segments(name: str, params: Optional[dict], x0, T_max: float, J_max: int):
    """Segments (j, t_start, t_end, x_start) of the closed-form hybrid solution."""
    entry = get_entry(name)
    p = entry.resolve(params or {})
    sys = entry.constructor(**p)
    if entry.flow_solution is None or entry.impact_time is None:
        raise InvalidInputError(f"{name} has no closed-form solution")
    x = np.asarray(x0, dtype=float)
    t, j = 0.0, 0
    segs = []
    while True:
        T = entry.impact_time(p, x)
        if t + T > T_max or j >= J_max:
            segs.append((j, t, T_max if t + T > T_max else t, x))
            if j >= J_max and t + T <= T_max:
                segs[-1] = (j, t, t, x)
            break
        segs.append((j, t, t + T, x))
        x = sys.g(entry.flow_solution(p, x, T))
        t += T
        j += 1
    return segs


def closed_form_value(name: str, params: Optional[dict], segs, t: float, j: int):
    entry = get_entry(name)
    p = entry.resolve(params or {})
    for jj, t0, t1, x in segs:
        if jj == j:
            return entry.flow_solution(p, x, t - t0)
    raise InvalidInputError(f"jump index {j} outside the closed-form domain")
