"""Base grids: node layouts and the embedding of the base hypersurface.

A grid is always attached to a concrete base (line, circle of radius R,
plane, round sphere, round cylinder or a sampled closed curve).  It carries
the quadrature weights of the base measure, the base positions and normals,
the principal curvatures of the base, and an orthonormal tangent frame
together with the metric scale factors of each parameter direction.

Grids are immutable after construction: every array is flagged read-only.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import InvalidGridError, InvalidArgumentError

KINDS = ("line", "circle", "plane-polar", "profile-of-revolution", "closed-curve")
MIN_R_MAX = 10.0


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_monotone(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 4:
        raise InvalidGridError(f"{name}: need at least 4 nodes")
    d = np.diff(x)
    if not np.all(np.isfinite(x)) or np.any(d <= 0):
        raise InvalidGridError(f"{name}: nodes must be strictly increasing (repeated or unordered nodes)")


class BaseGrid:
    """Sampled base hypersurface.

    Attributes
    ----------
    kind : str
        One of ``KINDS``.
    profile : str or None
        ``"sphere"`` or ``"cylinder"`` for profile-of-revolution grids.
    n : int
        Dimension of the hypersurface (ambient dimension is ``n + 1``).
    shape : tuple
        Logical node layout; ``(N,)`` for curves, ``(Nr, Ntheta)`` for the plane.
    params : tuple of ndarray
        Parameter axes (``x``; ``theta``; ``(r, theta)``; ``t``; ``z``).
    spacing : dict
        Uniform steps per parameter axis.
    r_max : float
        Truncation radius (inf for compact bases).
    weights : ndarray
        Quadrature weights of the base measure per node.
    position, normal : ndarray, shape (N, n+1)
        Base embedding and unit normal.
    curvatures : ndarray, shape (N, n)
        Principal curvatures of the base, positive for the round sphere with
        outward normal.
    frame : ndarray, shape (N, n, n+1)
        Orthonormal tangent frame aligned with the principal directions.
    scale : ndarray, shape (N, n)
        Metric scale factor of each parameter direction, so the derivative of
        a field along ``frame[:, i]`` is ``d/dparam_i / scale[:, i]``.
    """

    def __init__(self, kind, n, shape, params, spacing, r_max, weights, position,
                 normal, curvatures, frame, scale, profile=None, radius_param=None,
                 label=""):
        if kind not in KINDS:
            raise InvalidArgumentError(f"unknown grid kind {kind!r}")
        self.kind = kind
        self.profile = profile
        self.n = int(n)
        self.shape = tuple(int(s) for s in shape)
        self.params = tuple(_frozen(p) for p in params)
        self.spacing = dict(spacing)
        self.r_max = float(r_max)
        self.weights = _frozen(weights)
        self.position = _frozen(position)
        self.normal = _frozen(normal)
        self.curvatures = _frozen(curvatures)
        self.frame = _frozen(frame)
        self.scale = _frozen(scale)
        self.radius_param = radius_param
        self.label = label
        self.size = int(np.prod(self.shape))
        if self.weights.shape != (self.size,):
            raise InvalidGridError("weight vector does not match node count")
        self.radius = _frozen(np.linalg.norm(self.position, axis=1))

    @property
    def ambient_dim(self):
        return self.n + 1

    @property
    def compact(self):
        return self.kind in ("circle", "closed-curve") or self.profile == "sphere"

    @property
    def max_base_curvature(self):
        return float(np.max(np.abs(self.curvatures))) if self.size else 0.0

    def key(self):
        """Hashable identifier used for caches and manifests."""
        sp = tuple(sorted((k, float(v)) for k, v in self.spacing.items()))
        return (self.kind, self.profile, self.n, self.shape, sp, self.r_max,
                self.radius_param, self.label)

    def header(self):
        h = min(self.spacing.values())
        return f"# kind={self.kind} profile={self.profile or '-'} n={self.n} h={h!r} r_max={self.r_max!r}"

    def __repr__(self):
        return f"BaseGrid({self.kind}, n={self.n}, shape={self.shape}, r_max={self.r_max})"


def line_grid(h=0.05, r_max=12.0):
    """Uniform grid on the line ``{y = 0}`` over ``[-r_max, r_max]``."""
    if h <= 0:
        raise InvalidGridError("spacing must be positive")
    if r_max < MIN_R_MAX:
        raise InvalidGridError(f"r_max must be >= {MIN_R_MAX}")
    m = int(round(r_max / h))
    if abs(m * h - r_max) > 1e-9 * r_max:
        raise InvalidGridError("r_max must be an integer multiple of h")
    x = np.linspace(-r_max, r_max, 2 * m + 1)
    _check_monotone(x, "line")
    w = np.full(x.size, h)
    w[0] = w[-1] = h / 2
    N = x.size
    pos = np.column_stack([x, np.zeros(N)])
    nrm = np.tile([0.0, 1.0], (N, 1))
    frame = np.tile([[1.0, 0.0]], (N, 1, 1))
    return BaseGrid("line", 1, (N,), (x,), {"x": h}, r_max, w, pos, nrm,
                    np.zeros((N, 1)), frame, np.ones((N, 1)))


def circle_grid(radius=np.sqrt(2.0), n_theta=1024):
    """Periodic grid on the circle of the given radius (outward normal)."""
    if radius <= 0:
        raise InvalidGridError("radius must be positive")
    if n_theta < 8:
        raise InvalidGridError("need at least 8 angular nodes")
    dth = 2 * np.pi / n_theta
    th = np.arange(n_theta) * dth
    c, s = np.cos(th), np.sin(th)
    pos = radius * np.column_stack([c, s])
    nrm = np.column_stack([c, s])
    frame = np.column_stack([-s, c])[:, None, :]
    w = np.full(n_theta, radius * dth)
    return BaseGrid("circle", 1, (n_theta,), (th,), {"theta": dth}, np.inf, w, pos, nrm,
                    np.full((n_theta, 1), 1.0 / radius), frame,
                    np.full((n_theta, 1), radius), radius_param=float(radius))


def plane_grid(dr=0.1, n_theta=128, r_max=12.0):
    """Cell-centred polar grid on the plane ``{z = 0}`` in R^3.

    Radii are ``(i + 1/2) dr`` so no node sits on the origin; the innermost
    ring weight carries the midpoint-rule end correction ``-dr^2 dtheta / 24``
    which lifts radial quadrature of smooth integrands to fourth order.
    """
    if dr <= 0:
        raise InvalidGridError("spacing must be positive")
    if n_theta < 8 or n_theta % 2:
        raise InvalidGridError("n_theta must be even and >= 8")
    if r_max < MIN_R_MAX:
        raise InvalidGridError(f"r_max must be >= {MIN_R_MAX}")
    nr = int(round(r_max / dr))
    if abs(nr * dr - r_max) > 1e-9 * r_max:
        raise InvalidGridError("r_max must be an integer multiple of dr")
    r = (np.arange(nr) + 0.5) * dr
    dth = 2 * np.pi / n_theta
    th = np.arange(n_theta) * dth
    R, T = np.meshgrid(r, th, indexing="ij")
    R, T = R.ravel(), T.ravel()
    c, s = np.cos(T), np.sin(T)
    N = R.size
    w = R * dr * dth
    w[:n_theta] -= dr * dr * dth / 24.0
    pos = np.column_stack([R * c, R * s, np.zeros(N)])
    nrm = np.tile([0.0, 0.0, 1.0], (N, 1))
    frame = np.stack([np.column_stack([c, s, np.zeros(N)]),
                      np.column_stack([-s, c, np.zeros(N)])], axis=1)
    scale = np.column_stack([np.ones(N), R])
    return BaseGrid("plane-polar", 2, (nr, n_theta), (r, th), {"r": dr, "theta": dth},
                    r_max, w, pos, nrm, np.zeros((N, 2)), frame, scale)


def sphere_grid(radius=2.0, n_t=2000):
    """Axisymmetric grid on the round sphere in R^3, midpoint nodes in the polar angle.

    Only rotationally symmetric fields are representable.
    """
    if radius <= 0:
        raise InvalidGridError("radius must be positive")
    if n_t < 8:
        raise InvalidGridError("need at least 8 meridian nodes")
    dt = np.pi / n_t
    t = (np.arange(n_t) + 0.5) * dt
    st, ct = np.sin(t), np.cos(t)
    pos = radius * np.column_stack([st, np.zeros(n_t), ct])
    nrm = np.column_stack([st, np.zeros(n_t), ct])
    e_t = np.column_stack([ct, np.zeros(n_t), -st])
    e_p = np.tile([0.0, 1.0, 0.0], (n_t, 1))
    frame = np.stack([e_t, e_p], axis=1)
    w = 2 * np.pi * radius ** 2 * st * dt
    scale = np.column_stack([np.full(n_t, radius), radius * st])
    return BaseGrid("profile-of-revolution", 2, (n_t,), (t,), {"t": dt}, np.inf, w, pos,
                    nrm, np.full((n_t, 2), 1.0 / radius), frame, scale, profile="sphere",
                    radius_param=float(radius))


def cylinder_grid(radius=np.sqrt(2.0), h=0.05, r_max=12.0):
    """Axisymmetric grid on the round cylinder ``S^1(radius) x R`` in R^3."""
    if radius <= 0 or h <= 0:
        raise InvalidGridError("radius and spacing must be positive")
    if r_max < MIN_R_MAX:
        raise InvalidGridError(f"r_max must be >= {MIN_R_MAX}")
    m = int(round(r_max / h))
    z = np.linspace(-r_max, r_max, 2 * m + 1)
    _check_monotone(z, "cylinder")
    N = z.size
    w = np.full(N, 2 * np.pi * radius * h)
    w[0] = w[-1] = np.pi * radius * h
    pos = np.column_stack([np.full(N, radius), np.zeros(N), z])
    nrm = np.tile([1.0, 0.0, 0.0], (N, 1))
    frame = np.stack([np.tile([0.0, 0.0, 1.0], (N, 1)), np.tile([0.0, 1.0, 0.0], (N, 1))], axis=1)
    curv = np.column_stack([np.zeros(N), np.full(N, 1.0 / radius)])
    scale = np.column_stack([np.ones(N), np.full(N, radius)])
    return BaseGrid("profile-of-revolution", 2, (N,), (z,), {"z": h}, r_max, w, pos, nrm,
                    curv, frame, scale, profile="cylinder", radius_param=float(radius))


def closed_curve_grid(points, label="curve"):
    """Grid on a closed planar curve sampled uniformly in its parameter.

    ``points`` has shape (N, 2) and should be positively oriented; the last
    point must not repeat the first.  Normals point to the right of the
    tangent, which is outward for counter-clockwise curves.
    """
    from .fields import periodic_d1, periodic_d2

    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] < 8:
        raise InvalidGridError("points must have shape (N, 2) with N >= 8")
    if np.any(np.linalg.norm(np.diff(np.vstack([P, P[:1]]), axis=0), axis=1) == 0):
        raise InvalidGridError("repeated nodes on closed curve")
    N = P.shape[0]
    dt = 2 * np.pi / N
    t = np.arange(N) * dt
    xp = periodic_d1(P[:, 0], dt)
    yp = periodic_d1(P[:, 1], dt)
    xpp = periodic_d2(P[:, 0], dt)
    ypp = periodic_d2(P[:, 1], dt)
    speed = np.hypot(xp, yp)
    tan = np.column_stack([xp, yp]) / speed[:, None]
    nrm = np.column_stack([tan[:, 1], -tan[:, 0]])
    kappa = (xp * ypp - yp * xpp) / speed ** 3
    w = speed * dt
    tag = hashlib.sha1(P.tobytes()).hexdigest()[:12]
    return BaseGrid("closed-curve", 1, (N,), (t,), {"t": dt}, np.inf, w, P, nrm,
                    kappa[:, None], tan[:, None, :], speed[:, None], label=f"{label}:{tag}")
