"""Finite-difference derivatives on base grids and the ScalarField container.

All stencils are second order.  Periodic directions use centred differences;
open ends of the line and cylinder use one-sided second-order stencils.  The
polar plane grid never places a node on the origin: the innermost ring sees a
ghost value through the origin, taken from the node at angle ``theta + pi``.
Profile grids on the sphere reflect evenly across the poles, which is exact
for the axisymmetric (even) heights they represent.

Cartesian partials of order three and higher on the plane are taken from a
least-squares polynomial fit inside ``CORE_FIT_RADIUS``: repeated polar
differences amplify the angular truncation error like ``r^{1-k}`` there.

Every derivative routine is linear and accepts complex arrays, which the flow
module relies on for complex-step linearisation.
"""

from __future__ import annotations

from math import comb

import numpy as np

from .errors import InvalidArgumentError, OrderUnavailableError

MAX_ORDER = 7
CORE_FIT_RADIUS = 1.0
CORE_FIT_DEGREE = 9
CORE_FIT_MIN_ORDER = 3


def _monomials(deg):
    return [(i, t - i) for t in range(deg + 1) for i in range(t, -1, -1)]


def core_polynomial_fit(grid, values, radius=CORE_FIT_RADIUS, degree=CORE_FIT_DEGREE):
    """Least-squares polynomial in Cartesian ``(x, y)`` over the disc of radius ``2 radius``.

    Returns ``(coef, exponents, scale)`` with the polynomial
    ``sum coef_m (x/scale)^i (y/scale)^j``.
    """
    pos = grid.position
    fit = grid.radius < 2 * radius
    s = 2 * radius
    exps = _monomials(degree)
    X, Y = pos[fit, 0] / s, pos[fit, 1] / s
    V = np.column_stack([X ** i * Y ** j for i, j in exps])
    coef = np.linalg.lstsq(V, np.asarray(values)[fit], rcond=None)[0]
    return coef, exps, s


def core_partial(grid, fit, a, b, nodes):
    """Partial ``d^a/dx^a d^b/dy^b`` of a core fit at the given node indices."""
    coef, exps, s = fit
    x = grid.position[nodes, 0] / s
    y = grid.position[nodes, 1] / s
    out = np.zeros(len(nodes), dtype=coef.dtype)
    for c, (i, j) in zip(coef, exps):
        if i < a or j < b:
            continue
        fa = np.prod(np.arange(i - a + 1, i + 1)) if a else 1.0
        fb = np.prod(np.arange(j - b + 1, j + 1)) if b else 1.0
        out = out + c * fa * fb * x ** (i - a) * y ** (j - b)
    return out / s ** (a + b)


def periodic_d1(v, h, axis=-1):
    return (np.roll(v, -1, axis=axis) - np.roll(v, 1, axis=axis)) / (2 * h)


def periodic_d2(v, h, axis=-1):
    return (np.roll(v, -1, axis=axis) - 2 * v + np.roll(v, 1, axis=axis)) / (h * h)


def open_d1(v, h):
    """First derivative along a 1-D open axis (axis 0)."""
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return out


def open_d2(v, h):
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / (h * h)
    out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / (h * h)
    out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / (h * h)
    return out


def _polar_ghost(V):
    # value at radius -dr/2 along theta equals the innermost ring at theta + pi
    nt = V.shape[1]
    return np.roll(V[0], -nt // 2)


def polar_dr(V, dr):
    out = np.empty_like(V)
    out[1:-1] = (V[2:] - V[:-2]) / (2 * dr)
    out[0] = (V[1] - _polar_ghost(V)) / (2 * dr)
    out[-1] = (3 * V[-1] - 4 * V[-2] + V[-3]) / (2 * dr)
    return out


def polar_drr(V, dr):
    out = np.empty_like(V)
    out[1:-1] = (V[2:] - 2 * V[1:-1] + V[:-2]) / (dr * dr)
    out[0] = (V[1] - 2 * V[0] + _polar_ghost(V)) / (dr * dr)
    out[-1] = (2 * V[-1] - 5 * V[-2] + 4 * V[-3] - V[-4]) / (dr * dr)
    return out


def even_d1(v, h):
    """First derivative with even reflection across both ends (poles)."""
    ext = np.concatenate([v[:1], v, v[-1:]])
    return (ext[2:] - ext[:-2]) / (2 * h)


def even_d2(v, h):
    ext = np.concatenate([v[:1], v, v[-1:]])
    return (ext[2:] - 2 * ext[1:-1] + ext[:-2]) / (h * h)


def param_derivatives(grid, values):
    """First and second derivatives with respect to the grid parameters.

    Returns a dict with keys ``d1``, ``d11`` and, on the plane, also ``d2``,
    ``d22``, ``d12`` (parameters ``r`` and ``theta``).  Values may be complex.
    """
    v = np.asarray(values)
    kind = grid.kind
    if kind == "line" or (kind == "profile-of-revolution" and grid.profile == "cylinder"):
        h = next(iter(grid.spacing.values()))
        return {"d1": open_d1(v, h), "d11": open_d2(v, h)}
    if kind in ("circle", "closed-curve"):
        h = next(iter(grid.spacing.values()))
        return {"d1": periodic_d1(v, h), "d11": periodic_d2(v, h)}
    if kind == "profile-of-revolution":
        h = grid.spacing["t"]
        return {"d1": even_d1(v, h), "d11": even_d2(v, h)}
    if kind == "plane-polar":
        dr, dth = grid.spacing["r"], grid.spacing["theta"]
        V = v.reshape(grid.shape)
        Vr = polar_dr(V, dr)
        return {
            "d1": Vr.ravel(),
            "d11": polar_drr(V, dr).ravel(),
            "d2": periodic_d1(V, dth, axis=1).ravel(),
            "d22": periodic_d2(V, dth, axis=1).ravel(),
            "d12": periodic_d1(Vr, dth, axis=1).ravel(),
        }
    raise InvalidArgumentError(f"unsupported grid kind {kind!r}")


def cartesian_gradient(grid, values):
    """Cartesian gradient ``(d/dx, d/dy)`` of a scalar on the polar plane grid."""
    if grid.kind != "plane-polar":
        raise InvalidArgumentError("cartesian_gradient needs a plane-polar grid")
    d = param_derivatives_first(grid, values)
    c, s = grid.frame[:, 0, 0], grid.frame[:, 0, 1]
    r = grid.scale[:, 1]
    ur, ut = d
    return c * ur - s * ut / r, s * ur + c * ut / r


def param_derivatives_first(grid, values):
    dr, dth = grid.spacing["r"], grid.spacing["theta"]
    V = np.asarray(values).reshape(grid.shape)
    return polar_dr(V, dr).ravel(), periodic_d1(V, dth, axis=1).ravel()


def arclength_derivative(grid, values):
    """Derivative along the unit tangent of a curve grid (or the cylinder axis)."""
    d1 = param_derivatives(grid, values)["d1"]
    return d1 / grid.scale[:, 0]


class ScalarField:
    """Values of a function on a base grid with derivative access.

    Parameters
    ----------
    grid : BaseGrid
    values : array_like
        One value per node.
    base : Shrinker, optional
        The shrinker the field lives on (kept for bookkeeping).
    exact : dict, optional
        Analytic parameter derivatives (keys as returned by
        ``param_derivatives``) overriding the finite differences.
    """

    def __init__(self, grid, values, base=None, exact=None):
        v = np.array(values, dtype=float, copy=True).ravel()
        if v.shape != (grid.size,):
            raise InvalidArgumentError(f"field has {v.size} values, grid has {grid.size} nodes")
        v.setflags(write=False)
        self.grid = grid
        self.values = v
        self.base = base
        self._exact = dict(exact or {})
        self._cache = {}

    def __repr__(self):
        return f"ScalarField({self.grid!r}, max|u|={np.max(np.abs(self.values)):.3g})"

    def with_values(self, values):
        return ScalarField(self.grid, values, base=self.base)

    def __mul__(self, s):
        return ScalarField(self.grid, self.values * float(s), base=self.base,
                           exact={k: v * float(s) for k, v in self._exact.items()})

    __rmul__ = __mul__

    def __add__(self, other):
        return ScalarField(self.grid, self.values + other.values, base=self.base)

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - other.values, base=self.base)

    def param_derivatives(self):
        if "param" not in self._cache:
            d = param_derivatives(self.grid, self.values)
            d.update(self._exact)
            self._cache["param"] = d
        return self._cache["param"]

    def gradient(self):
        """Frame components of the gradient with respect to the base metric, shape (N, n)."""
        d = self.param_derivatives()
        g = [d["d1"] / self.grid.scale[:, 0]]
        if self.grid.n == 2:
            g.append(d["d2"] / self.grid.scale[:, 1] if "d2" in d else np.zeros(self.grid.size))
        return np.column_stack(g)

    def position_derivative(self):
        """``x . grad u`` with x the base position (``r du/dr`` on cones)."""
        tang = np.einsum("nij,nj->ni", self.grid.frame, self.grid.position)
        return np.sum(tang * self.gradient(), axis=1)

    def radial_derivatives(self):
        """First and second derivatives along the rays of a conical base.

        On the line the ray through a node points away from the origin, so
        the first derivative picks up ``sign(x)``.
        """
        d = self.param_derivatives()
        if self.grid.kind == "plane-polar":
            return d["d1"], d["d11"]
        if self.grid.kind == "line":
            return np.sign(self.grid.params[0]) * d["d1"], d["d11"]
        raise InvalidArgumentError("radial derivatives need a conical base (line or plane)")

    def derivative_tensor(self, k):
        """Components of the k-th covariant derivative, shape (N, m).

        Components are scaled by the square root of their multiplicity so that
        the Euclidean norm of a row is the tensor norm, and differences of rows
        compare tensors at different nodes in a parallel frame.  On the plane
        the frame is Cartesian; on curves it is the unit tangent.
        """
        if k < 0 or k > MAX_ORDER:
            raise OrderUnavailableError(f"derivative order {k} outside 0..{MAX_ORDER}")
        key = ("tensor", k)
        if key in self._cache:
            return self._cache[key]
        g = self.grid
        if k == 0:
            out = self.values[:, None]
        elif g.kind == "plane-polar":
            comps = self._cartesian_partials(k)
            out = np.column_stack([np.sqrt(comb(k, a)) * comps[(a, k - a)] for a in range(k, -1, -1)])
            if k >= CORE_FIT_MIN_ORDER:
                inner = np.flatnonzero(g.radius < CORE_FIT_RADIUS)
                if "core_fit" not in self._cache:
                    self._cache["core_fit"] = core_polynomial_fit(g, self.values)
                fit = self._cache["core_fit"]
                out = out.copy()
                for col, a in enumerate(range(k, -1, -1)):
                    out[inner, col] = np.sqrt(comb(k, a)) * core_partial(g, fit, a, k - a, inner)
        elif g.kind in ("line", "circle", "closed-curve") or g.profile == "cylinder":
            d = self.param_derivatives()
            s = g.scale[:, 0]
            if k == 1:
                col = d["d1"] / s
            elif k == 2 and g.kind != "closed-curve":
                col = d["d11"] / s ** 2
            else:
                col = arclength_derivative(g, self.derivative_tensor(k - 1)[:, 0])
            out = col[:, None]
        elif g.profile == "sphere":
            if k > 1:
                raise OrderUnavailableError("sphere profile grids provide first derivatives only")
            out = self.gradient()[:, :1]
        else:
            raise OrderUnavailableError(f"no derivative tensor on {g.kind}")
        out = np.ascontiguousarray(out)
        out.setflags(write=False)
        self._cache[key] = out
        return out

    def derivative_norm(self, k):
        """Pointwise norm of the k-th covariant derivative."""
        return np.linalg.norm(self.derivative_tensor(k), axis=1)

    def _cartesian_partials(self, k):
        parts = self._cache.setdefault("cart", {(0, 0): self.values})
        for order in range(1, k + 1):
            if (order, 0) in parts and (0, order) in parts:
                continue
            for a in range(order, -1, -1):
                b = order - a
                if (a, b) in parts:
                    continue
                # differentiate the lower-order partial in x when possible
                src = (a - 1, b) if a > 0 else (a, b - 1)
                gx, gy = cartesian_gradient(self.grid, parts[src])
                if a > 0:
                    parts[(a, b)] = gx
                    parts.setdefault((a - 1, b + 1), gy)
                else:
                    parts[(a, b)] = gy
        return parts
