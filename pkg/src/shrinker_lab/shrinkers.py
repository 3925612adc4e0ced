"""Exact and shot self-shrinkers, and asymptotic cones of the non-compact ones."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from math import ceil

import numpy as np

from . import grids
from .errors import (IntegrationFailureError, InvalidArgumentError, NoRootError,
                     NotConicalError)
from .geometry import Hypersurface

SHOOT_STEP = 1e-4
CLOSURE_TOL = 1e-10


class Shrinker:
    """A self-shrinker with its residual certificate, core radius and cone link.

    Parameters
    ----------
    surface : Hypersurface
    kind : str
    core_radius : float
        Radius outside which the end is graphical over the asymptotic cone
        (1 for exact cones, 0 for compact shrinkers).
    link : ndarray or None
        Unit vectors sampling the link of the asymptotic cone.
    multiplicity : int
        Must be one.
    """

    def __init__(self, surface, kind, core_radius, link=None, multiplicity=1, meta=None):
        if multiplicity != 1:
            raise InvalidArgumentError("only multiplicity-one shrinkers are supported")
        self.surface = surface
        self.kind = kind
        self.core_radius = float(core_radius)
        if link is not None:
            link = np.asarray(link, dtype=float)
            if not np.allclose(np.linalg.norm(link, axis=1), 1.0, atol=1e-12):
                raise InvalidArgumentError("link samples must have unit norm")
        self.link = link
        self.multiplicity = 1
        self.meta = dict(meta or {})
        self._max_phi = None

    @property
    def grid(self):
        return self.surface.grid

    @property
    def n(self):
        return self.surface.n

    @property
    def max_phi(self):
        if self._max_phi is None:
            self._max_phi = float(np.max(np.abs(self.surface.bundle().phi)))
        return self._max_phi

    @property
    def conical(self):
        return self.link is not None

    def __repr__(self):
        return f"Shrinker({self.kind}, n={self.n}, max|phi|={self.max_phi:.2e})"


def _grid_for(kind, n, spec):
    spec = dict(spec or {})
    if kind == "line":
        return grids.line_grid(**spec)
    if kind == "plane":
        return grids.plane_grid(**spec)
    if kind == "circle" or (kind == "sphere" and n == 1):
        spec.setdefault("radius", np.sqrt(2.0))
        return grids.circle_grid(**spec)
    if kind == "sphere":
        spec.setdefault("radius", 2.0)
        return grids.sphere_grid(**spec)
    if kind == "cylinder":
        spec.setdefault("radius", np.sqrt(2.0))
        return grids.cylinder_grid(**spec)
    raise InvalidArgumentError(f"unknown shrinker kind {kind!r}")


_DIMS = {"line": (1,), "circle": (1,), "plane": (2,), "sphere": (1, 2), "cylinder": (2,)}
_RADIUS = {"circle": np.sqrt(2.0), "sphere": None, "cylinder": np.sqrt(2.0)}


def canonical_shrinker(kind, n, grid=None):
    """Round shrinkers: line and plane through the origin, circle of radius sqrt 2,
    sphere of radius sqrt(2n), cylinder ``S^1(sqrt 2) x R`` (axisymmetric).

    ``grid`` is either a dict of grid-constructor keywords or a ready BaseGrid;
    a grid whose radius is not the self-similar one is rejected.
    """
    if kind not in _DIMS or n not in _DIMS[kind]:
        raise InvalidArgumentError(f"unsupported (kind, n) = ({kind!r}, {n})")
    want = np.sqrt(2.0 * n) if kind == "sphere" else _RADIUS.get(kind)
    if isinstance(grid, grids.BaseGrid):
        g = grid
        if want is not None and abs(g.radius_param - want) > 1e-12:
            raise InvalidArgumentError(f"grid radius {g.radius_param} is not the shrinker radius {want}")
    else:
        spec = dict(grid or {})
        if want is not None:
            spec["radius"] = want
        g = _grid_for(kind, n, spec)
    surf = Hypersurface(g)
    if kind == "line":
        return Shrinker(surf, kind, 1.0, link=np.array([[-1.0, 0.0], [1.0, 0.0]]))
    if kind == "plane":
        th = g.params[1]
        return Shrinker(surf, kind, 1.0, link=np.column_stack([np.cos(th), np.sin(th), np.zeros_like(th)]))
    if kind == "cylinder":
        # asymptotic to a doubled line rather than a cone: no conical link
        return Shrinker(surf, kind, 0.0, link=None)
    return Shrinker(surf, kind, 0.0, link=None)


def sphere_family_phi(radius, n):
    """Constant value of phi on the round sphere of the given radius in R^{n+1}."""
    return radius / 2 - n / radius


# ---------------------------------------------------------------------------
# shooting for closed curves


def _rk4(state, h):
    # plain floats: this loop runs ~10^5 times per shot
    x, y, psi = state

    def f(x, y, psi):
        c, s = math.cos(psi), math.sin(psi)
        return c, s, 0.5 * (x * s - y * c)

    a1, b1, c1 = f(x, y, psi)
    a2, b2, c2 = f(x + 0.5 * h * a1, y + 0.5 * h * b1, psi + 0.5 * h * c1)
    a3, b3, c3 = f(x + 0.5 * h * a2, y + 0.5 * h * b2, psi + 0.5 * h * c2)
    a4, b4, c4 = f(x + h * a3, y + h * b3, psi + h * c3)
    return (x + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4),
            y + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4),
            psi + h / 6 * (c1 + 2 * c2 + 2 * c3 + c4))


def _radial_speed(state):
    x, y, psi = state
    return x * np.cos(psi) + y * np.sin(psi)


def _half_period(r0, step=SHOOT_STEP, max_length=50.0):
    """Integrate from the radial extremum at (r0, 0) to the next one.

    Returns the arclength of the half period and the polar angle swept.
    """
    state = (float(r0), 0.0, math.pi / 2)
    s = 0.0
    angle = 0.0
    g_prev = _radial_speed(state)
    n_steps = int(max_length / step)
    for i in range(n_steps):
        new = _rk4(state, step)
        if not all(map(math.isfinite, new)) or math.hypot(new[0], new[1]) > 1e3:
            raise IntegrationFailureError(f"shooting ODE blew up at s = {s:.4g}")
        g_new = _radial_speed(new)
        angle += _wrap(math.atan2(new[1], new[0]) - math.atan2(state[1], state[0]))
        if i > 0 and g_prev != 0 and np.sign(g_new) != np.sign(g_prev):
            # secant refinement of the partial step
            a, b = 0.0, step
            ga, gb = g_prev, g_new
            for _ in range(60):
                c = b - gb * (b - a) / (gb - ga)
                gc = _radial_speed(_rk4(state, c))
                if abs(gc) < 1e-15 or abs(b - a) < 1e-16:
                    break
                a, ga, b, gb = b, gb, c, gc
            end = _rk4(state, c)
            swept = angle - _wrap(np.arctan2(new[1], new[0]) - np.arctan2(state[1], state[0]))
            swept += _wrap(np.arctan2(end[1], end[0]) - np.arctan2(state[1], state[0]))
            return s + c, swept
        state, g_prev = new, g_new
        s += step
    raise IntegrationFailureError("no radial extremum found within the length budget")


def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def closure_defect(r0, p=2, q=3, step=SHOOT_STEP):
    """Swept polar angle over a half period minus ``pi p / q``."""
    _, swept = _half_period(r0, step)
    return swept - np.pi * p / q


def _sample_half(r0, length, nodes):
    h = length / nodes
    state = (float(r0), 0.0, math.pi / 2)
    pts = [state]
    for _ in range(nodes):
        state = _rk4(state, h)
        pts.append(state)
    return np.array(pts)


def _assemble_curve(half, q, swept):
    """Glue 2q reflected copies of a half period into a closed curve."""
    r = np.hypot(half[:, 0], half[:, 1])
    th = np.unwrap(np.arctan2(half[:, 1], half[:, 0]))
    K = half.shape[0] - 1
    rs, ts = [], []
    for k in range(2 * q):
        if k % 2 == 0:
            rs.append(r[:K])
            ts.append(k * swept + th[:K])
        else:
            rs.append(r[::-1][:K])
            ts.append((k + 1) * swept - th[::-1][:K])
    R = np.concatenate(rs)
    T = np.concatenate(ts)
    return np.column_stack([R * np.cos(T), R * np.sin(T)])


@dataclass(frozen=True)
class ShootingRecord:
    seed: float
    defect: float
    iterations: int
    max_phi: float
    r0: float
    p: int
    q: int

    def to_json(self):
        return json.dumps({"seed": self.seed, "defect": self.defect, "iterations": self.iterations,
                           "max_phi": self.max_phi, "r0": self.r0, "p": self.p, "q": self.q},
                          sort_keys=True)


def solve_profile_shrinker(seed, target=(2, 3), bracket=None, step=SHOOT_STEP, tol=CLOSURE_TOL,
                           sample_ds=1e-3):
    """Shoot a closed self-shrinking curve starting at a radial extremum ``(seed, 0)``.

    Parameters
    ----------
    seed : float
        Initial radius.  The round value sqrt 2 returns the circle.
    target : (p, q)
        Closure after ``2q`` half periods with total turning ``2 pi p``; the
        half period must sweep the polar angle ``pi p / q``.
    bracket : (a, b), optional
        Radii bracketing a sign change of the closure defect; defaults to a
        bracket around ``seed``.
    step : float
        RK4 arclength step.
    tol : float
        Bisection stops when the bracket is shorter than ``tol``.

    Returns
    -------
    (Shrinker, ShootingRecord)
    """
    p, q = target
    if abs(seed * seed - 2.0) < 1e-12:
        # round seed: the trajectory is the circle; integrate one revolution as a check
        L = 2 * np.pi * seed
        nodes = int(ceil(L / sample_ds))
        pts = _sample_half(seed, L, nodes)[:-1]
        radius = float(np.mean(np.hypot(pts[:, 0], pts[:, 1])))
        surf = Hypersurface(grids.closed_curve_grid(pts[:, :2], label="round"))
        shr = Shrinker(surf, "closed-curve", 0.0, meta={"radius": radius, "p": 1, "q": 1})
        rec = ShootingRecord(seed=float(seed), defect=0.0, iterations=0, max_phi=shr.max_phi,
                             r0=radius, p=1, q=1)
        return shr, rec
    if bracket is None:
        bracket = (seed * 0.9, seed * 1.1)
    a, b = map(float, bracket)
    fa = closure_defect(a, p, q, step)
    fb = closure_defect(b, p, q, step)
    if np.sign(fa) == np.sign(fb):
        raise NoRootError(f"closure defect has no sign change on [{a}, {b}] ({fa:.3g}, {fb:.3g})")
    it = 0
    while b - a > tol:
        c = 0.5 * (a + b)
        fc = closure_defect(c, p, q, step)
        it += 1
        if np.sign(fc) == np.sign(fa):
            a, fa = c, fc
        else:
            b, fb = c, fc
    r0 = 0.5 * (a + b)
    L, swept = _half_period(r0, step)
    nodes = int(ceil(L / sample_ds))
    half = _sample_half(r0, L, nodes)
    pts = _assemble_curve(half, q, swept)
    surf = Hypersurface(grids.closed_curve_grid(pts, label=f"AL({p},{q})"))
    shr = Shrinker(surf, "closed-curve", 0.0, meta={"r0": r0, "p": p, "q": q,
                                                    "half_length": L})
    rec = ShootingRecord(seed=float(seed), defect=float(swept - np.pi * p / q), iterations=it,
                         max_phi=shr.max_phi, r0=r0, p=p, q=q)
    return shr, rec


# ---------------------------------------------------------------------------
# asymptotic cones


@dataclass(frozen=True)
class ConeReport:
    link: np.ndarray
    radii: np.ndarray
    w_max: np.ndarray
    slope: float
    core_radius: float

    def to_dict(self):
        return {"link": self.link.tolist(), "radii": self.radii.tolist(),
                "w_max": self.w_max.tolist(), "slope": self.slope, "core_radius": self.core_radius}


def asymptotic_cone(surface, radii=None, w_threshold=0.1):
    """Link of the asymptotic cone and the decay of the height over it.

    ``surface`` is a non-compact Shrinker (line or plane) or a Hypersurface
    graphed over one.  Directions ``x/|x|`` at the sampled radii are
    extrapolated linearly in ``1/r`` to ``r = infinity``; the decay report is
    the least-squares slope of ``log max|w|`` against ``log r`` (``-inf``
    when the height vanishes identically).
    """
    surf = surface.surface if isinstance(surface, Shrinker) else surface
    g = surf.grid
    if g.compact:
        raise NotConicalError("compact surfaces have no asymptotic cone")
    if g.kind not in ("line", "plane-polar"):
        raise NotConicalError(f"no conical end representation for {g.kind}")
    if radii is None:
        radii = np.linspace(g.r_max / 4, g.r_max * 0.95, 8)
    radii = np.asarray(radii, dtype=float)
    u = surf.u
    if g.kind == "line":
        x = g.params[0]
        wmax, dirs = [], []
        for r in radii:
            vals = [np.interp(sgn * r, x, u) for sgn in (-1, 1)]
            wmax.append(max(abs(v) for v in vals))
            dirs.append([np.array([sgn * r, v]) / np.hypot(r, v) for sgn, v in zip((-1, 1), vals)])
        dirs = np.array(dirs)  # (n_radii, 2, 2)
    else:
        rr = g.params[0]
        U = u.reshape(g.shape)
        th = g.params[1]
        wmax, dirs = [], []
        for r in radii:
            prof = np.array([np.interp(r, rr, U[:, j]) for j in range(g.shape[1])])
            wmax.append(float(np.max(np.abs(prof))))
            d = np.column_stack([r * np.cos(th), r * np.sin(th), prof])
            dirs.append(d / np.linalg.norm(d, axis=1)[:, None])
        dirs = np.array(dirs)
    wmax = np.array(wmax)
    # linear extrapolation in 1/r of each direction sample
    inv = 1.0 / radii
    Afit = np.column_stack([np.ones_like(inv), inv])
    flat = dirs.reshape(len(radii), -1)
    coef, *_ = np.linalg.lstsq(Afit, flat, rcond=None)
    link = coef[0].reshape(dirs.shape[1:])
    link = link / np.linalg.norm(link, axis=1)[:, None]
    pos = wmax > 0
    if np.count_nonzero(pos) >= 2:
        slope = float(np.polyfit(np.log(radii[pos]), np.log(wmax[pos]), 1)[0])
    else:
        slope = -np.inf
    # smallest sampled radius beyond which the height stays below the threshold
    core = float(radii[-1])
    for i in range(len(radii) - 1, -1, -1):
        if wmax[i] < w_threshold:
            core = float(radii[i])
        else:
            break
    if isinstance(surface, Shrinker) and not np.any(u):
        core = surface.core_radius
    return ConeReport(link=link, radii=radii, w_max=wmax, slope=slope, core_radius=core)
