"""Catalog of semi-flows and the orbit utilities built on them.

A :class:`SemiFlowSpec` describes a single map ``F`` on a box-shaped phase
space: either a discrete map or the time-1 map of an ODE integrated with
fixed-step RK4.  All evaluation goes through :func:`evaluate_batch`, which
works on ``(n, dim)`` arrays.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .boxcover import Box
from .errors import ConfigurationError, DomainViolation, NoCatalogRule, NonFinite

KINDS = ("logistic", "tent", "unimodal-composite", "circle-poles", "henon", "ode-time-one")

VectorField = Callable[[np.ndarray, dict], np.ndarray]


def _sin_pi(x, params):
    return -np.sin(np.pi * x)


def _lorenz(state, params):
    sigma, r, beta = params["sigma"], params["r"], params["beta"]
    x, y, z = state[:, 0], state[:, 1], state[:, 2]
    return np.stack([sigma * (y - x), x * (r - z) - y, x * y - beta * z], axis=1)


VECTOR_FIELDS: dict = {"sin-pi": (_sin_pi, 1), "lorenz": (_lorenz, 3)}


def register_vector_field(name: str, fn: VectorField, dimension: int) -> None:
    """Register ``fn(state[n, dim], params) -> derivative[n, dim]`` under ``name``."""
    if name in ("sin-pi", "lorenz"):
        raise ConfigurationError(f"cannot replace built-in field {name!r}")
    VECTOR_FIELDS[name] = (fn, dimension)


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"
    step_count: int = 32
    vector_field: str = "sin-pi"

    def __post_init__(self):
        if self.method != "rk4":
            raise ConfigurationError("only fixed-step rk4 is supported")
        if self.step_count < 8:
            raise ConfigurationError("step_count must be at least 8")


@dataclass(frozen=True, eq=False)
class SemiFlowSpec:
    kind: str
    params: dict = field(default_factory=dict)
    dimension: int = 1
    trapping_region: Optional[Box] = None
    integrator: Optional[IntegratorConfig] = None
    lipschitz_hint: Optional[float] = None
    periodic_axes: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown system kind {self.kind!r}")
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})
        if self.dimension < 1:
            raise ConfigurationError("dimension must be positive")
        if self.trapping_region is not None and self.trapping_region.dimension != self.dimension:
            raise ConfigurationError("trapping region dimension mismatch")
        if self.kind == "logistic" and not 0.0 <= self.params.get("mu", -1.0) <= 4.0:
            raise ConfigurationError("logistic requires mu in [0, 4]")
        if (self.kind == "ode-time-one") != (self.integrator is not None):
            raise ConfigurationError("an integrator is required exactly for ode-time-one")
        if self.kind == "ode-time-one":
            fn = VECTOR_FIELDS.get(self.integrator.vector_field)
            if fn is None:
                raise ConfigurationError(f"unregistered vector field {self.integrator.vector_field!r}")
            if fn[1] != self.dimension:
                raise ConfigurationError("vector field dimension mismatch")
        if self.kind == "circle-poles" and bin(self.periodic_axes).count("1") != 1:
            raise ConfigurationError("circle-poles needs exactly one periodic axis")
        if self.lipschitz_hint is not None and not self.lipschitz_hint > 0:
            raise ConfigurationError("lipschitz_hint must be positive")

    def param(self, name: str) -> float:
        try:
            return self.params[name]
        except KeyError:
            raise ConfigurationError(f"{self.kind} system lacks parameter {name!r}") from None

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "params": dict(sorted(self.params.items())), "dimension": self.dimension}
        if self.trapping_region is not None:
            out["trapping_region"] = self.trapping_region.to_dict()
        if self.integrator is not None:
            out["integrator"] = {
                "method": self.integrator.method,
                "step_count": self.integrator.step_count,
                "vector_field": self.integrator.vector_field,
            }
        if self.lipschitz_hint is not None:
            out["lipschitz_hint"] = self.lipschitz_hint
        if self.periodic_axes:
            out["periodic_axes"] = self.periodic_axes
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, SemiFlowSpec) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(self.hash)

    @property
    def hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# catalog constructors ---------------------------------------------------------

def logistic(mu: float, region: Optional[Box] = None) -> SemiFlowSpec:
    return SemiFlowSpec("logistic", {"mu": mu}, 1, region)


def tent(slope: float, region: Optional[Box] = None) -> SemiFlowSpec:
    return SemiFlowSpec("tent", {"s": slope}, 1, region)


def unimodal_composite(mu: float = 3.5, slope: float = 0.5, phi: float = 0.1) -> SemiFlowSpec:
    """Logistic map with the branch near 0 replaced by ``slope*x + k*x**2``.

    ``k`` is chosen so that the new branch crosses the diagonal at ``phi``;
    0 becomes an attracting fixed point and ``phi`` a repelling one.
    """
    return SemiFlowSpec("unimodal-composite", {"mu": mu, "slope": slope, "phi": phi}, 1)


def circle_poles(speed: float = 0.25) -> SemiFlowSpec:
    """Time-1 map of ``x' = -speed * sin(2 pi x)**2`` on the circle ``[0, 1)``.

    The poles 0 and 1/2 are fixed; every other point moves clockwise.
    """
    return SemiFlowSpec("circle-poles", {"speed": speed}, 1, periodic_axes=1)


def henon(a: float = 1.4, b: float = 0.3, region: Optional[Box] = None) -> SemiFlowSpec:
    return SemiFlowSpec("henon", {"a": a, "b": b}, 2, region)


def sin_pi_flow(step_count: int = 16) -> SemiFlowSpec:
    return SemiFlowSpec("ode-time-one", {}, 1, integrator=IntegratorConfig("rk4", step_count, "sin-pi"))


def lorenz(sigma: float = 10.0, r: float = 28.0, beta: float = 8.0 / 3.0, step_count: int = 32) -> SemiFlowSpec:
    if step_count < 32:
        raise ConfigurationError("Lorenz time-1 maps need at least 32 RK4 steps")
    return SemiFlowSpec(
        "ode-time-one",
        {"sigma": sigma, "r": r, "beta": beta},
        3,
        integrator=IntegratorConfig("rk4", step_count, "lorenz"),
    )


def system_from_dict(data: dict) -> SemiFlowSpec:
    kind = data["kind"]
    params = dict(data.get("params", {}))
    integ = data.get("integrator")
    region = data.get("trapping_region")
    region = Box.from_dict(region) if region is not None else None
    if kind == "ode-time-one":
        vf = (integ or {}).get("vector_field", params.pop("vector_field", "sin-pi"))
        dim = VECTOR_FIELDS.get(vf, (None, data.get("dimension", 1)))[1]
        if vf == "lorenz":
            params = {"sigma": 10.0, "r": 28.0, "beta": 8.0 / 3.0, **params}
        steps = int((integ or {}).get("step_count", 32 if vf == "lorenz" else 16))
        integ = IntegratorConfig((integ or {}).get("method", "rk4"), steps, vf)
        dim = int(data.get("dimension", dim))
    else:
        integ = None
        dim = int(data.get("dimension", 2 if kind == "henon" else 1))
    defaults = {
        "unimodal-composite": {"mu": 3.5, "slope": 0.5, "phi": 0.1},
        "circle-poles": {"speed": 0.25},
        "henon": {"a": 1.4, "b": 0.3},
    }.get(kind, {})
    params = {**defaults, **params}
    periodic = int(data.get("periodic_axes", 1 if kind == "circle-poles" else 0))
    return SemiFlowSpec(kind, params, dim, region, integ, data.get("lipschitz_hint"), periodic)


# evaluation --------------------------------------------------------------------

def _rk4(system: SemiFlowSpec, x: np.ndarray) -> np.ndarray:
    fn, _ = VECTOR_FIELDS[system.integrator.vector_field]
    n = system.integrator.step_count
    h = 1.0 / n
    p = system.params
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            k1 = fn(x, p)
            k2 = fn(x + 0.5 * h * k1, p)
            k3 = fn(x + 0.5 * h * k2, p)
            k4 = fn(x + h * k3, p)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def _circle_time_one(x: np.ndarray, speed: float) -> np.ndarray:
    theta = 2.0 * np.pi * np.mod(x, 1.0)
    k = np.floor(theta / np.pi)
    phi = theta - k * np.pi
    moving = phi > 0
    out = theta.copy()
    with np.errstate(divide="ignore"):
        cot = np.cos(phi[moving]) / np.sin(phi[moving])
    out[moving] = k[moving] * np.pi + (0.5 * np.pi - np.arctan(cot + 2.0 * np.pi * speed))
    return np.mod(out / (2.0 * np.pi), 1.0)


def map_values(system: SemiFlowSpec, x: np.ndarray) -> np.ndarray:
    """Raw vectorised map on an ``(n, dim)`` array, no checks."""
    kind = system.kind
    p = system.params
    if kind == "logistic":
        return p["mu"] * x * (1.0 - x)
    if kind == "tent":
        return p["s"] * np.minimum(x, 1.0 - x)
    if kind == "unimodal-composite":
        mu, s, phi = p["mu"], p["slope"], p["phi"]
        k = (1.0 - s) / phi
        return np.minimum(s * x + k * x * x, mu * x * (1.0 - x))
    if kind == "henon":
        a, b = p["a"], p["b"]
        return np.stack([1.0 - a * x[:, 0] ** 2 + x[:, 1], b * x[:, 0]], axis=1)
    if kind == "circle-poles":
        return _circle_time_one(x, p["speed"])
    return _rk4(system, x)


def evaluate_batch(system: SemiFlowSpec, points) -> np.ndarray:
    """Apply ``F`` to every row of ``points``; raises :class:`NonFinite`."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, system.dimension)
    with np.errstate(over="ignore", invalid="ignore"):
        y = map_values(system, x)
    bad = ~np.isfinite(y).all(axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NonFinite(f"{system.kind}: image of {x[i].tolist()} is not finite", index=i)
    return y


def _domain(system: SemiFlowSpec) -> Optional[Box]:
    try:
        return analysis_region(system)
    except NoCatalogRule:
        return None


def evaluate(system: SemiFlowSpec, x) -> np.ndarray:
    """One application of ``F`` to a single phase point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (system.dimension,) or not np.isfinite(x).all():
        raise DomainViolation(f"expected a finite point of dimension {system.dimension}")
    region = _domain(system)
    if region is not None and not region.enlarged(2.0).contains(x)[0]:
        raise DomainViolation(f"{x.tolist()} lies outside the enlarged region")
    return evaluate_batch(system, x[None, :])[0]


def orbit(system: SemiFlowSpec, x, n: int) -> np.ndarray:
    """Return ``[x, F(x), ..., F^n(x)]`` as an ``(n + 1, dim)`` array."""
    if n < 0:
        raise ConfigurationError("iteration count must be non-negative")
    out = np.empty((n + 1, system.dimension))
    out[0] = np.atleast_1d(np.asarray(x, dtype=float))
    for t in range(n):
        try:
            out[t + 1] = evaluate_batch(system, out[t][None, :])[0]
        except NonFinite as exc:
            raise NonFinite(str(exc), index=t + 1) from None
    return out


def _metric_box(system: SemiFlowSpec) -> Box:
    region = _domain(system)
    if region is None:
        return Box(np.zeros(system.dimension), np.ones(system.dimension), system.periodic_axes)
    return region


def cluster_points(points: np.ndarray, tol: float, metric: Optional[Box] = None) -> np.ndarray:
    """Greedy representatives with pairwise distance greater than ``tol``."""
    reps = []
    for p in points:
        if reps:
            arr = np.array(reps)
            d = metric.distance(arr, p) if metric is not None else np.linalg.norm(arr - p, axis=1)
            if d.min() <= tol:
                continue
        reps.append(p)
    return np.array(reps)


def estimate_omega_limit(system: SemiFlowSpec, x, burn_in: int = 1000, horizon: int = 100,
                         tol: float = 1e-6) -> np.ndarray:
    """Cluster representatives of ``{F^t(x) : burn_in <= t <= burn_in + horizon}``."""
    if burn_in < 0 or horizon < 1:
        raise ConfigurationError("need burn_in >= 0 and horizon >= 1")
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    for _ in range(burn_in):
        xs = evaluate_batch(system, xs)
    pts = [xs[0]]
    for _ in range(horizon):
        xs = evaluate_batch(system, xs)
        pts.append(xs[0])
    return cluster_points(np.array(pts), tol, _metric_box(system))


def critical_orbit(mu: float, k: int) -> float:
    """``c_k = l_mu^k(1/2)`` for the logistic family."""
    x = 0.5
    for _ in range(k):
        x = mu * x * (1.0 - x)
    return x


def trapping_region(system: SemiFlowSpec) -> Box:
    """Forward-invariant box: the explicit one if given, else the catalog rule."""
    if system.trapping_region is not None:
        return system.trapping_region
    kind = system.kind
    if kind in ("logistic", "unimodal-composite"):
        mu = system.param("mu")
        if not 2.0 < mu < 4.0:
            raise NoCatalogRule(f"no catalog trapping region for mu={mu} outside (2, 4)")
        return Box((critical_orbit(mu, 2),), (critical_orbit(mu, 1),))
    if kind == "circle-poles":
        return Box((0.0,), (1.0,), periodic_axes=1)
    if kind == "ode-time-one" and system.integrator.vector_field == "sin-pi":
        return Box((0.0,), (1.0,))
    if kind == "ode-time-one" and system.integrator.vector_field == "lorenz":
        return lorenz_trapping_box(system.param("sigma"), system.param("r"), system.param("beta"))
    raise NoCatalogRule(f"no catalog trapping region for {kind}")


def analysis_region(system: SemiFlowSpec) -> Box:
    """Box on which covers are built.

    For the logistic family this is ``[0, c_1]`` (the image of the map), which
    contains the repelling fixed point 0 together with the trapping region.
    """
    if system.trapping_region is not None:
        return system.trapping_region
    if system.kind in ("logistic", "unimodal-composite"):
        mu = system.param("mu")
        if not 0.0 < mu <= 4.0:
            raise NoCatalogRule("mu must be positive")
        return Box((0.0,), (critical_orbit(mu, 1),))
    if system.kind == "tent":
        s = system.param("s")
        if not 0.0 < s <= 2.0:
            raise NoCatalogRule("tent slope must lie in (0, 2]")
        return Box((0.0,), (0.5 * s,))
    return trapping_region(system)


def lorenz_trapping_box(sigma: float, r: float, beta: float, margin: float = 1.2) -> Box:
    """Bounding box of a sublevel set of ``r x^2 + sigma y^2 + sigma (z - 2r)^2``.

    The level is ``margin`` times the maximum of that function over the
    ellipsoid where its time derivative is non-negative.
    """
    theta = np.linspace(0.0, np.pi, 200)
    phi = np.linspace(0.0, 2.0 * np.pi, 400)
    t, p = np.meshgrid(theta, phi)
    u = np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1).reshape(-1, 3)
    x = np.sqrt(beta * r) * u[:, 0]
    y = np.sqrt(beta) * r * u[:, 1]
    z = r + r * u[:, 2]
    level = margin * float(np.max(r * x**2 + sigma * y**2 + sigma * (z - 2 * r) ** 2))
    half = np.array([np.sqrt(level / r), np.sqrt(level / sigma), np.sqrt(level / sigma)])
    center = np.array([0.0, 0.0, 2.0 * r])
    return Box(center - half, center + half)


@dataclass
class TrappingCheck:
    ok: bool
    witness: Optional[np.ndarray] = None
    image: Optional[np.ndarray] = None

    def __bool__(self) -> bool:
        return self.ok


def _sample_grid(box: Box, per_axis: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(box.lo, box.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def verify_trapping(system: SemiFlowSpec, box: Box, depth: int = 10, max_samples: int = 1 << 18) -> TrappingCheck:
    """Sampled check that ``F(box)`` stays inside ``box``.

    One-dimensional maps are sampled on ``2**depth + 1`` points and, for every
    sample cell whose local quadratic model has an interior extremum, the
    extremum (padded by 1.5 times the cubic residual) is checked as well.
    Higher dimensions sample the grid plus all cell centres; the per-axis count
    is capped so the total stays below ``max_samples``.
    """
    if depth < 1:
        raise ConfigurationError("depth must be at least 1")
    dim = box.dimension
    per_axis = min((1 << depth) + 1, max(3, int(max_samples ** (1.0 / dim))))
    pts = _sample_grid(box, per_axis)
    if dim > 1:
        h = box.width / (per_axis - 1)
        mids = _sample_grid(Box(box.lower + 0.5 * h, box.upper - 0.5 * h), per_axis - 1)
        pts = np.concatenate([pts, mids])
    img = evaluate_batch(system, pts)
    atol = 1e-12 * max(1.0, float(np.abs(box.width).max()))
    lo_ext, hi_ext = img.copy(), img.copy()
    if dim == 1 and len(pts) >= 4:
        f = img[:, 0]
        # quadratic through (i-1, i, i+1); vertex offset in units of h
        d1 = 0.5 * (f[2:] - f[:-2])
        d2 = f[2:] - 2 * f[1:-1] + f[:-2]
        d3 = np.zeros_like(d2)
        d3[:-1] = np.abs(np.diff(d2))
        d3[-1] = d3[-2] if len(d3) > 1 else 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            off = np.where(d2 != 0, -d1 / d2, np.inf)
        interior = np.abs(off) < 1.0
        vertex = f[1:-1] + d1 * off + 0.5 * d2 * off**2
        pad = 1.5 * d3
        v = np.where(interior, vertex, f[1:-1])
        lo_ext[1:-1, 0] = np.minimum(f[1:-1], np.where(interior, v - pad, f[1:-1]))
        hi_ext[1:-1, 0] = np.maximum(f[1:-1], np.where(interior, v + pad, f[1:-1]))
    lo_v = np.maximum(box.lower - lo_ext, 0.0)
    hi_v = np.maximum(hi_ext - box.upper, 0.0)
    per = box.periodic
    lo_v[:, per] = 0.0
    hi_v[:, per] = 0.0
    violation = np.maximum(lo_v, hi_v).max(axis=1)
    worst = int(np.argmax(violation))
    if violation[worst] > atol:
        return TrappingCheck(False, pts[worst], img[worst])
    return TrappingCheck(True)


def lipschitz_estimate(system: SemiFlowSpec, box: Box, sample_count: int = 64) -> float:
    """1.5 times the largest finite-difference quotient on a sample grid."""
    if sample_count < 2:
        raise ConfigurationError("need at least 2 samples per axis")
    dim = box.dimension
    per_axis = min(sample_count, max(2, int((1 << 18) ** (1.0 / dim))))
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(box.lo, box.hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    img = evaluate_batch(system, mesh.reshape(-1, dim)).reshape(mesh.shape)
    best = 0.0
    for axis in range(dim):
        step = (box.hi[axis] - box.lo[axis]) / (per_axis - 1)
        diff = box.displacement(0.0, np.diff(img, axis=axis))
        q = np.linalg.norm(diff, axis=-1) / step
        best = max(best, float(q.max()))
    if system.lipschitz_hint is not None:
        best = max(best, system.lipschitz_hint / 1.5)
    return 1.5 * best if best > 0 else 1.5e-12


def periodic_orbits(system: SemiFlowSpec, lo: float, hi: float, max_period: int = 6,
                    grid: int = 4096, tol: float = 1e-9) -> list:
    """Periodic orbits (1D) with a point in ``[lo, hi]``, minimal periods only.

    Returns a list of ``(period, points, multiplier)`` with ``points`` sorted.
    Roots of ``F^k(x) - x`` are bracketed by sign changes on a uniform grid
    and refined with Brent's method; tangential zeros are caught as grid
    minima of ``|F^k(x) - x|`` below ``tol``.
    """
    if system.dimension != 1:
        raise ConfigurationError("periodic orbit search is one-dimensional")
    region = _metric_box(system)

    def iterate(x, k):
        for _ in range(k):
            x = evaluate_batch(system, x.reshape(-1, 1))[:, 0]
        return x

    def g(x, k):
        return float(region.displacement(np.array([[x]]), iterate(np.array([x]), k).reshape(1, 1))[0, 0])

    xs = np.linspace(lo, hi, grid + 1)
    found = []
    for k in range(1, max_period + 1):
        gv = region.displacement(xs[:, None], iterate(xs.copy(), k)[:, None])[:, 0]
        span = 0.25 * float(region.width[0])
        roots = list(xs[np.abs(gv) <= tol])
        sc = np.flatnonzero((np.sign(gv[:-1]) * np.sign(gv[1:]) < 0)
                            & (np.abs(gv[:-1]) < span) & (np.abs(gv[1:]) < span))
        for i in sc:
            try:
                roots.append(brentq(g, xs[i], xs[i + 1], args=(k,), xtol=1e-14))
            except ValueError:
                continue
        for r in roots:
            orb = [r]
            for _ in range(k - 1):
                orb.append(float(iterate(np.array([orb[-1]]), 1)[0]))
            orb = np.array(orb)
            if k > 1 and np.min(region.distance(orb[1:, None], orb[:1, None])) < 1e-7:
                continue  # lower period
            pts = np.sort(region.wrap(orb[:, None])[:, 0])
            if any(p == k and np.max(np.abs(q - pts)) < 1e-7 for p, q, _ in found):
                continue
            dx = 1e-7 * float(region.width[0])
            deriv = 1.0
            for x in orb:
                fp = iterate(np.array([x + dx]), 1)[0]
                fm = iterate(np.array([x - dx]), 1)[0]
                deriv *= float(region.displacement(np.array([[fm]]), np.array([[fp]]))[0, 0]) / (2 * dx)
            found.append((k, pts, deriv))
    return found
