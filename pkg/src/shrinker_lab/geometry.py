"""Hypersurfaces as normal graphs over a base grid, and their extrinsic geometry.

Conventions: ``H = div(nu)``, so the round sphere of radius R with outward
normal has ``H = n / R``; the shrinker equation reads ``H = <x, nu> / 2`` and
the normal speed of the rescaled flow is ``phi = <x, nu> / 2 - H``.  A graph
of height ``u`` over the line ``{y = 0}`` with upward normal therefore has
``H = -u'' / (1 + u'^2)^{3/2}``.

Two independent routes compute the geometry of a graph:

* ``geometry_bundle`` differentiates the embedding of each base kind with
  closed-form formulas (graph over a line or plane, polar graph over a
  circle, meridian curves for surfaces of revolution, parametric curves).
* ``normal_graph_geometry`` uses the shape-operator formulas for normal
  graphs over a general hypersurface, in a principal frame of the base.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import erfc, i0e

from . import grids as _grids
from .errors import GraphOutOfReachError, InvalidArgumentError, InvalidGridError
from .fields import ScalarField, arclength_derivative, param_derivatives

REACH_SAFETY = 0.9


class ToleranceWarning(UserWarning):
    """Raised (as a warning) when a quadrature tail exceeds the requested tolerance."""


def gaussian_density(position, n, scale=1.0, center=None):
    """``(4 pi t)^{-n/2} exp(-|x - x0|^2 / 4t)`` evaluated at each row of ``position``."""
    X = np.asarray(position)
    if center is not None:
        X = X - np.asarray(center)
    r2 = np.sum(X * X, axis=-1)
    return (4 * np.pi * scale) ** (-n / 2) * np.exp(-r2 / (4 * scale))


class Hypersurface:
    """A base grid with an optional normal-graph height.

    Parameters
    ----------
    grid : BaseGrid
    height : array_like or ScalarField, optional
        Normal height over the base; ``None`` means the base itself.
    orientation : {1, -1}
        Flips the normal (and with it H, A and the support function).
    """

    def __init__(self, grid, height=None, orientation=1):
        if orientation not in (1, -1):
            raise InvalidArgumentError("orientation must be +1 or -1")
        self.grid = grid
        self.orientation = orientation
        if height is None:
            self._field = None
        else:
            if isinstance(height, ScalarField):
                if height.grid is not grid and height.grid.key() != grid.key():
                    raise InvalidArgumentError("height lives on a different grid")
                self._field = height
            else:
                self._field = ScalarField(grid, height)
            check_reach(grid, self._field.values)
        self._bundle = None

    @property
    def height(self) -> Optional[ScalarField]:
        return self._field

    @property
    def u(self):
        if self._field is None:
            return np.zeros(self.grid.size)
        return self._field.values

    @property
    def n(self):
        return self.grid.n

    def flipped(self):
        return Hypersurface(self.grid, self._field, orientation=-self.orientation)

    def bundle(self):
        if self._bundle is None:
            self._bundle = geometry_bundle(self)
        return self._bundle

    def __repr__(self):
        return f"Hypersurface({self.grid!r}, graph={'yes' if self._field is not None else 'no'})"


def reach(grid):
    """Normal-graph reach of the base: ``1 / max|A|`` (infinite for flat bases)."""
    k = grid.max_base_curvature
    return np.inf if k == 0 else 1.0 / k


def check_reach(grid, u):
    k = grid.max_base_curvature
    m = float(np.max(np.abs(np.real(u)))) if np.size(u) else 0.0
    if not np.all(np.isfinite(np.real(u))):
        raise GraphOutOfReachError("height field is not finite")
    if m * k >= REACH_SAFETY:
        raise GraphOutOfReachError(
            f"max|u| * max|A| = {m * k:.4g} >= {REACH_SAFETY}: graph leaves the reach of the base")


@dataclass(frozen=True)
class GeometryBundle:
    """Per-node extrinsic geometry of a hypersurface.

    ``A`` holds the second fundamental form in an orthonormal frame adapted to
    the base (principal frame, or the polar frame on the plane).
    ``area_element`` is the ratio of the surface measure to the base measure,
    and ``normal_dot`` is ``<nu, nu_base>``.
    """

    position: np.ndarray
    normal: np.ndarray
    H: np.ndarray
    A: np.ndarray
    A2: np.ndarray
    support: np.ndarray
    area_element: np.ndarray
    normal_dot: np.ndarray
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def phi(self):
        return 0.5 * self.support - self.H


def _sqrt(x):
    return np.sqrt(x)


def graph_geometry(grid, u, derivs=None):
    """Closed-form geometry of the graph of ``u`` over ``grid``.

    Works for real and complex ``u`` (complex-step differentiation).  Returns
    a dict with keys position, normal, H, A, A2, support, J, ndot.
    """
    u = np.asarray(u)
    d = derivs if derivs is not None else param_derivatives(grid, u)
    kind = grid.kind
    if kind == "line":
        x = grid.params[0]
        u1, u11 = d["d1"], d["d11"]
        W = _sqrt(1 + u1 * u1)
        k = -u11 / W ** 3
        pos = np.stack([x + 0 * u, u], axis=1)
        nrm = np.stack([-u1 / W, 1 / W + 0 * u1], axis=1)
        return dict(position=pos, normal=nrm, H=k, A=k[:, None, None], A2=k * k,
                    support=(u - x * u1) / W, J=W, ndot=1 / W)
    if kind == "circle":
        R = grid.radius_param
        th = grid.params[0]
        c, s = np.cos(th), np.sin(th)
        r = R + u
        r1, r11 = d["d1"], d["d11"]
        sig = _sqrt(r * r + r1 * r1)
        k = (r * r + 2 * r1 * r1 - r * r11) / sig ** 3
        pos = np.stack([r * c, r * s], axis=1)
        nrm = np.stack([(r * c + r1 * s) / sig, (r * s - r1 * c) / sig], axis=1)
        return dict(position=pos, normal=nrm, H=k, A=k[:, None, None], A2=k * k,
                    support=r * r / sig, J=sig / R, ndot=r / sig)
    if kind == "closed-curve":
        X = grid.position + u[:, None] * grid.normal
        h = grid.spacing["t"]
        from .fields import periodic_d1, periodic_d2
        xp, yp = periodic_d1(X[:, 0], h), periodic_d1(X[:, 1], h)
        xpp, ypp = periodic_d2(X[:, 0], h), periodic_d2(X[:, 1], h)
        sp = _sqrt(xp * xp + yp * yp)
        nrm = np.stack([yp / sp, -xp / sp], axis=1)
        k = (xp * ypp - yp * xpp) / sp ** 3
        sup = X[:, 0] * nrm[:, 0] + X[:, 1] * nrm[:, 1]
        ndot = nrm[:, 0] * grid.normal[:, 0] + nrm[:, 1] * grid.normal[:, 1]
        return dict(position=X, normal=nrm, H=k, A=k[:, None, None], A2=k * k,
                    support=sup, J=sp / grid.scale[:, 0], ndot=ndot)
    if kind == "plane-polar":
        r = grid.scale[:, 1]
        c, s = grid.frame[:, 0, 0], grid.frame[:, 0, 1]
        p1 = d["d1"]
        p2 = d["d2"] / r
        h11 = d["d11"]
        h12 = d["d12"] / r - d["d2"] / r ** 2
        h22 = d["d22"] / r ** 2 + d["d1"] / r
        W2 = 1 + p1 * p1 + p2 * p2
        W = _sqrt(W2)
        A = -np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2) / W[:, None, None]
        gi11 = 1 - p1 * p1 / W2
        gi12 = -p1 * p2 / W2
        gi22 = 1 - p2 * p2 / W2
        a11, a12, a22 = A[:, 0, 0], A[:, 0, 1], A[:, 1, 1]
        H = gi11 * a11 + 2 * gi12 * a12 + gi22 * a22
        m11 = gi11 * a11 + gi12 * a12
        m12 = gi11 * a12 + gi12 * a22
        m21 = gi12 * a11 + gi22 * a12
        m22 = gi12 * a12 + gi22 * a22
        A2 = m11 * m11 + 2 * m12 * m21 + m22 * m22
        X = np.stack([r * c + 0 * u, r * s + 0 * u, u], axis=1)
        nrm = np.stack([(-p1 * c + p2 * s) / W, (-p1 * s - p2 * c) / W, 1 / W], axis=1)
        return dict(position=X, normal=nrm, H=H, A=A, A2=A2, support=(u - r * p1) / W,
                    J=W, ndot=1 / W)
    if kind == "profile-of-revolution" and grid.profile == "sphere":
        R = grid.radius_param
        t = grid.params[0]
        st, ct = np.sin(t), np.cos(t)
        r = R + u
        r1, r11 = d["d1"], d["d11"]
        sig = _sqrt(r * r + r1 * r1)
        k1 = (r * r + 2 * r1 * r1 - r * r11) / sig ** 3
        nr = (r * st - r1 * ct) / sig
        nz = (r * ct + r1 * st) / sig
        k2 = nr / (r * st)
        zero = 0 * u
        A = np.stack([np.stack([k1, zero], -1), np.stack([zero, k2], -1)], -2)
        X = np.stack([r * st, zero, r * ct], axis=1)
        nrm = np.stack([nr, zero, nz], axis=1)
        return dict(position=X, normal=nrm, H=k1 + k2, A=A, A2=k1 * k1 + k2 * k2,
                    support=r * r / sig, J=r * sig / R ** 2, ndot=r / sig)
    if kind == "profile-of-revolution" and grid.profile == "cylinder":
        a = grid.radius_param
        z = grid.params[0]
        rho = a + u
        p1, p11 = d["d1"], d["d11"]
        W = _sqrt(1 + p1 * p1)
        k1 = -p11 / W ** 3
        k2 = 1 / (W * rho)
        zero = 0 * u
        A = np.stack([np.stack([k1, zero], -1), np.stack([zero, k2], -1)], -2)
        X = np.stack([rho, zero, z + zero], axis=1)
        nrm = np.stack([1 / W, zero, -p1 / W], axis=1)
        return dict(position=X, normal=nrm, H=k1 + k2, A=A, A2=k1 * k1 + k2 * k2,
                    support=(rho - z * p1) / W, J=rho * W / a, ndot=1 / W)
    raise InvalidGridError(f"no geometry for grid kind {kind!r}")


def geometry_bundle(surface: Hypersurface) -> GeometryBundle:
    """Per-node normal, mean curvature, second fundamental form and support function."""
    g = surface.grid
    if g.size < 4:
        raise InvalidGridError("grid too small")
    if surface.height is None:
        raw = graph_geometry(g, np.zeros(g.size))
    else:
        raw = graph_geometry(g, surface.u, surface.height.param_derivatives())
    o = surface.orientation
    return GeometryBundle(position=raw["position"], normal=o * raw["normal"], H=o * raw["H"],
                          A=o * raw["A"], A2=raw["A2"], support=o * raw["support"],
                          area_element=raw["J"], normal_dot=raw["ndot"])


def phi_residual(surface: Hypersurface) -> ScalarField:
    """Normal speed ``<x, nu>/2 - H`` of the rescaled flow; zero exactly on shrinkers."""
    return ScalarField(surface.grid, surface.bundle().phi)


def gaussian_tail(surface: Hypersurface) -> float:
    """Estimate of the Gaussian mass of the surface beyond the truncation radius."""
    g = surface.grid
    if g.compact:
        return 0.0
    R = g.r_max
    if g.kind == "line":
        return float(erfc(R / 2))
    if g.kind == "plane-polar":
        return float(np.exp(-R * R / 4))
    # cylinder: Gaussian in z times the cross-section mass
    a = g.radius_param
    return float(2 * np.pi * a / (4 * np.pi) * np.exp(-a * a / 4) * np.sqrt(4 * np.pi) * erfc(R / 2))


def gaussian_area(surface: Hypersurface, tol=None) -> float:
    """Gaussian area ``F(M) = int_M rho``, by the base quadrature.

    If ``tol`` is given and the truncated tail exceeds it, a
    ``ToleranceWarning`` is emitted.
    """
    b = surface.bundle()
    val = float(np.sum(surface.grid.weights * b.area_element * gaussian_density(b.position, surface.n)))
    if tol is not None:
        tail = gaussian_tail(surface)
        if tail > tol:
            warnings.warn(f"Gaussian tail {tail:.3g} beyond r_max exceeds tolerance {tol:.3g}",
                          ToleranceWarning, stacklevel=2)
    return val


def dissipation(surface: Hypersurface, ball_radius=None) -> float:
    """``int_M phi^2 rho``, optionally restricted to ``|x| < ball_radius``."""
    b = surface.bundle()
    dens = surface.grid.weights * b.area_element * gaussian_density(b.position, surface.n)
    integrand = dens * b.phi ** 2
    if ball_radius is not None:
        integrand = integrand[np.linalg.norm(b.position, axis=1) < ball_radius]
    return float(np.sum(integrand))


@dataclass(frozen=True)
class EntropySearch:
    """Sampling of centers (cubic lattice of half-width ``half_width``) and scales."""

    half_width: float = 2.0
    n_centers: int = 33
    scale_min: float = 0.25
    scale_max: float = 4.0
    n_scales: int = 33

    def centers(self, dim):
        if self.n_centers < 1:
            raise InvalidArgumentError("empty center lattice")
        axis = np.linspace(-self.half_width, self.half_width, self.n_centers) if self.n_centers > 1 else np.zeros(1)
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def scales(self):
        if self.n_scales < 1 or self.scale_min <= 0 or self.scale_max < self.scale_min:
            raise InvalidArgumentError("empty scale range")
        return np.geomspace(self.scale_min, self.scale_max, self.n_scales)


def entropy(surface: Hypersurface, search: EntropySearch | None = None):
    """Sampled entropy: max over lattice centers and scales of the recentred Gaussian area.

    Returns ``(value, center, scale)``.  Surfaces of revolution are integrated
    exactly in the rotation angle (modified Bessel function), so off-axis
    centers are handled without a 2-D mesh.
    """
    if search is None:
        search = EntropySearch() if surface.n == 1 else EntropySearch(n_centers=9)
    g = surface.grid
    b = surface.bundle()
    n = surface.n
    centers = search.centers(n + 1)
    scales = search.scales()
    if centers.size == 0 or scales.size == 0:
        raise InvalidArgumentError("empty search spec")
    mass = g.weights * b.area_element
    X = b.position
    best = (-np.inf, None, None)
    if g.kind == "profile-of-revolution":
        # weights already include the 2 pi of the rotation; replace it by the
        # exact angular average of the shifted Gaussian
        rho_ax = X[:, 0]
        z = X[:, 2]
        a = np.hypot(centers[:, 0], centers[:, 1])
        zc = centers[:, 2]
        key = np.unique(np.round(np.column_stack([a, zc]), 12), axis=0)
        for t in scales:
            pref = (4 * np.pi * t) ** (-n / 2)
            for ac, zc0 in key:
                arg = ac * rho_ax / (2 * t)
                expo = -((rho_ax - ac) ** 2 + (z - zc0) ** 2) / (4 * t)
                val = pref * np.sum(mass * i0e(arg) * np.exp(expo))
                if val > best[0]:
                    best = (float(val), np.array([ac, 0.0, zc0]), float(t))
        return best
    chunk = max(1, int(2e6 // max(1, X.shape[0])))
    for t in scales:
        pref = (4 * np.pi * t) ** (-n / 2)
        for i in range(0, centers.shape[0], chunk):
            C = centers[i:i + chunk]
            d2 = (np.sum(X * X, axis=1)[None, :] - 2 * C @ X.T + np.sum(C * C, axis=1)[:, None])
            vals = pref * (np.exp(-d2 / (4 * t)) @ mass)
            j = int(np.argmax(vals))
            if vals[j] > best[0]:
                best = (float(vals[j]), C[j].copy(), float(t))
    return best


@dataclass(frozen=True)
class NormalGraphGeometry:
    """Output of the shape-operator formulas for a normal graph over a base."""

    normal: np.ndarray
    metric_inv: np.ndarray
    second_form: np.ndarray
    H: np.ndarray
    support: np.ndarray
    area_element: np.ndarray
    weight_ratio: np.ndarray
    v: np.ndarray

    @property
    def phi(self):
        return 0.5 * self.support - self.H


def _base_hessian(grid, u_field: ScalarField):
    """Covariant Hessian of ``u`` on the base in its principal frame, shape (N, n, n)."""
    d = u_field.param_derivatives()
    N = grid.size
    if grid.kind in ("line", "circle"):
        s = grid.scale[:, 0]
        return (d["d11"] / s ** 2)[:, None, None]
    if grid.kind == "closed-curve":
        us = arclength_derivative(grid, u_field.values) if "d1" not in u_field._exact else d["d1"] / grid.scale[:, 0]
        return arclength_derivative(grid, us)[:, None, None]
    if grid.kind == "plane-polar":
        r = grid.scale[:, 1]
        h11 = d["d11"]
        h12 = d["d12"] / r - d["d2"] / r ** 2
        h22 = d["d22"] / r ** 2 + d["d1"] / r
        return np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)
    if grid.profile == "sphere":
        R = grid.radius_param
        t = grid.params[0]
        h11 = d["d11"] / R ** 2
        h22 = np.cos(t) * d["d1"] / (R ** 2 * np.sin(t))
        z = np.zeros(N)
        return np.stack([np.stack([h11, z], -1), np.stack([z, h22], -1)], -2)
    if grid.profile == "cylinder":
        z = np.zeros(N)
        return np.stack([np.stack([d["d11"], z], -1), np.stack([z, z], -1)], -2)
    raise InvalidGridError(f"no Hessian for grid kind {grid.kind!r}")


def normal_graph_geometry(base, u) -> NormalGraphGeometry:
    """Geometry of the normal graph ``q = p + u(p) nu(p)`` over a base hypersurface.

    Uses the shape-operator expressions in a principal frame: with
    ``a_i = 1 - lambda_i u`` (``lambda_i`` the principal curvatures in the
    convention ``h = <d^2 F, nu>``, i.e. minus ours),

    * ``nu_N = v^{-1} (-sum_i u_i / a_i e_i + nu)``,
    * ``<q, nu_N> = v^{-1} (u + <p, nu> - sum_i <p, e_i> u_i / a_i)``,
    * ``g^{ij} = delta_ij / (a_i a_j) - v^{-2} u_i u_j / (a_i^2 a_j^2)``,
    * ``h_ij = v^{-1} (lambda_i u_i u_j / a_i + lambda_j u_i u_j / a_j
      + sum_k u u_k (d_i h_jk) / a_k + h_ij - lambda_i lambda_j u delta_ij + u_ij)``,

    and ``H = -g^{ij} h_ij`` in our sign convention, ``J = v prod_i a_i``.

    Parameters
    ----------
    base : Shrinker or BaseGrid
    u : ScalarField or array_like
    """
    grid = getattr(base, "grid", base)
    if hasattr(base, "surface"):
        grid = base.surface.grid
    uf = u if isinstance(u, ScalarField) else ScalarField(grid, u)
    uv = uf.values
    check_reach(grid, uv)
    n = grid.n
    lam = -grid.curvatures  # h = <d^2F, nu> convention
    grad = uf.gradient()
    hess = _base_hessian(grid, uf)
    a = 1 - lam * uv[:, None]
    w = grad / a
    v = np.sqrt(1 + np.sum(w * w, axis=1))
    p = grid.position
    nu = grid.normal
    p_tan = np.einsum("nij,nj->ni", grid.frame, p)
    normal = (nu - np.einsum("ni,nij->nj", w, grid.frame)) / v[:, None]
    support = (uv + np.sum(p * nu, axis=1) - np.sum(p_tan * w, axis=1)) / v
    gi = (np.eye(n)[None] / (a[:, :, None] * a[:, None, :])
          - (grad / a ** 2)[:, :, None] * (grad / a ** 2)[:, None, :] / (v ** 2)[:, None, None])
    # covariant derivative of the base second fundamental form (zero on round bases)
    dh = np.zeros((grid.size, n, n, n))
    if grid.kind == "closed-curve":
        dh[:, 0, 0, 0] = arclength_derivative(grid, lam[:, 0])
    uu = grad[:, :, None] * grad[:, None, :]
    hbase = np.zeros((grid.size, n, n))
    idx = np.arange(n)
    hbase[:, idx, idx] = lam
    term = (lam / a)[:, :, None] * uu + (lam / a)[:, None, :] * uu
    term += np.einsum("nk,nijk->nij", (uv[:, None] / a) * grad, dh)
    term += hbase
    term -= (lam[:, :, None] * lam[:, None, :]) * uv[:, None, None] * np.eye(n)[None]
    term += hess
    h2 = term / v[:, None, None]
    H = -np.einsum("nij,nij->n", gi, h2)
    J = v * np.prod(a, axis=1)
    ratio = np.exp(-(2 * uv * np.sum(p * nu, axis=1) + uv * uv) / 4)
    return NormalGraphGeometry(normal=normal, metric_inv=gi, second_form=h2, H=H,
                               support=support, area_element=J, weight_ratio=ratio, v=v)


# ---------------------------------------------------------------------------
# area growth


def _polyline_ball_length(P, closed, center, R):
    Q = np.roll(P, -1, axis=0) if closed else P[1:]
    P0 = P if closed else P[:-1]
    d = Q - P0
    f = P0 - center
    A = np.sum(d * d, axis=1)
    B = 2 * np.sum(f * d, axis=1)
    C = np.sum(f * f, axis=1) - R * R
    disc = B * B - 4 * A * C
    out = np.zeros(A.size)
    ok = (disc > 0) & (A > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    s0 = np.clip((-B - sq) / (2 * np.where(ok, A, 1.0)), 0, 1)
    s1 = np.clip((-B + sq) / (2 * np.where(ok, A, 1.0)), 0, 1)
    out[ok] = (s1 - s0)[ok] * np.sqrt(A[ok])
    return float(np.sum(out))


@dataclass(frozen=True)
class AreaGrowthReport:
    centers: np.ndarray
    radii: np.ndarray
    ratios: np.ndarray
    smallest_constant: float
    entropy_bound: float

    @property
    def constant_over_entropy(self):
        return self.smallest_constant / self.entropy_bound

    def to_dict(self):
        return {"smallest_constant": self.smallest_constant, "entropy_bound": self.entropy_bound,
                "ratios": self.ratios.tolist(), "radii": self.radii.tolist(),
                "centers": self.centers.tolist()}


def area_growth_check(surface: Hypersurface, lambda0: float, centers=None, radii=(1.0, 2.0, 4.0)):
    """Area ratios ``H^n(M cap B_R(x)) / R^n`` over sampled centers and radii.

    Curves are measured exactly as polylines through the nodes; surfaces use
    the node quadrature restricted to the ball.
    """
    b = surface.bundle()
    X = b.position
    if centers is None:
        centers = np.zeros((1, X.shape[1]))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.asarray(radii, dtype=float)
    n = surface.n
    ratios = np.zeros((centers.shape[0], radii.size))
    closed = surface.grid.compact
    mass = surface.grid.weights * b.area_element
    for i, c in enumerate(centers):
        for j, R in enumerate(radii):
            if n == 1 and surface.grid.kind != "profile-of-revolution":
                length = _polyline_ball_length(X, closed, c, R)
            else:
                length = float(np.sum(mass[np.linalg.norm(X - c, axis=1) < R]))
            ratios[i, j] = length / R ** n
    return AreaGrowthReport(centers=centers, radii=radii, ratios=ratios,
                            smallest_constant=float(ratios.max()), entropy_bound=float(lambda0))


# ---------------------------------------------------------------------------
# serialization


def _grid_header(grid):
    parts = [f"kind={grid.kind}", f"n={grid.n}", f"h={min(grid.spacing.values())!r}",
             f"r_max={grid.r_max!r}", f"profile={grid.profile or '-'}",
             f"shape={'x'.join(str(s) for s in grid.shape)}",
             f"radius={grid.radius_param!r}"]
    return "# " + " ".join(parts)


def surface_to_text(surface: Hypersurface) -> str:
    """Columnar text: a one-line header, then one node per row (coordinates, height)."""
    g = surface.grid
    lines = [_grid_header(g)]
    coords = np.column_stack(g.params[:1]) if g.kind != "plane-polar" else None
    if g.kind == "plane-polar":
        R, T = np.meshgrid(g.params[0], g.params[1], indexing="ij")
        coords = np.column_stack([R.ravel(), T.ravel()])
    if g.kind == "closed-curve":
        coords = g.position
    u = surface.u
    for row, val in zip(coords, u):
        lines.append(" ".join(f"{x:.17g}" for x in row) + f" {val:.17g}")
    return "\n".join(lines) + "\n"


def surface_from_text(text: str) -> Hypersurface:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise InvalidGridError("missing surface header")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    data = np.array([[float(x) for x in ln.split()] for ln in lines[1:]])
    kind = meta["kind"]
    h = float(meta["h"])
    shape = tuple(int(s) for s in meta["shape"].split("x"))
    if kind == "line":
        g = _grids.line_grid(h, float(meta["r_max"]))
    elif kind == "circle":
        g = _grids.circle_grid(float(meta["radius"]), shape[0])
    elif kind == "plane-polar":
        g = _grids.plane_grid(float(data[1 * shape[1], 0] - data[0, 0]) if shape[0] > 1 else h,
                              shape[1], float(meta["r_max"]))
    elif kind == "profile-of-revolution" and meta["profile"] == "sphere":
        g = _grids.sphere_grid(float(meta["radius"]), shape[0])
    elif kind == "profile-of-revolution":
        g = _grids.cylinder_grid(float(meta["radius"]), h, float(meta["r_max"]))
    elif kind == "closed-curve":
        g = _grids.closed_curve_grid(data[:, :2])
    else:
        raise InvalidGridError(f"unknown kind {kind!r}")
    if data.shape[0] != g.size:
        raise InvalidGridError("row count does not match the header")
    u = data[:, -1]
    return Hypersurface(g, None if not np.any(u) else u)
