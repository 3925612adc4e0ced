"""Extension of graphs from a ball to the whole cone, and the radial model problem.

Three pieces live here:

* ``solve_model_problem``: Fourier modes of ``L_{1/2} u = 0`` on the plane,
  ``u'' + u'/r - m^2 u / r^2 - (r u' - u) / 2 = 0``.  The polynomially
  bounded (recessive) branch behaves like ``r + a_1 / r + a_3 / r^3`` at
  infinity with ``a_1 = m^2 - 1`` and ``a_3 = (m^2 - 1)^2 / 2``; the other
  branch grows like ``exp(r^2 / 4)``.  Integrating inward from a large
  radius keeps the dominant branch decaying, so the recessive solution is
  computed stably.
* ``extend_to_cone``: freeze ``c = u(R)/R`` on the link, continue
  ``f = u - c r`` beyond ``R`` by the cubic that matches value, slope and
  curvature at ``R``, and damp it out over one unit of radius.
* ``rough_approx_check``: the three conditions of a roughly conical
  approximate shrinker.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (FilteringFailureError, InsufficientDomainError, InvalidArgumentError,
                     OrderUnavailableError)
from .fields import ScalarField
from .weighted_spaces import (ConeDecomposition, NormReport, cutoff, holder_norm, link_norm,
                              node_link_index, node_pairs, r_tilde, rays, smooth_step,
                              weighted_seminorm)

MODEL_R_MIN = 0.5
DECAY_WINDOW = (10.0, 100.0)
SLOPE_TARGET = -2.0
# caps the step so the dense interpolant stays at round-off level on the far field
MODEL_MAX_STEP = 0.5


# ---------------------------------------------------------------------------
# model problem


@dataclass
class RadialModeSolution:
    """Recessive radial solution of one Fourier mode, normalised by ``u(1) = 1``.

    ``c`` is ``lim u / r``; ``c_identity`` recomputes it from
    ``u(r0)/r0 + int_{r0}^{inf} w / s^2`` with ``w = r u' - u``.
    """

    m: int
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    c: float
    c_identity: float
    slope: float
    regular_at_origin: bool
    rtol: float
    meta: dict = field(default_factory=dict)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "u_m", "u_m_over_r"])
        for r, u in zip(self.r, self.u):
            w.writerow(["%.17g" % r, "%.17g" % u, "%.17g" % (u / r)])
        return buf.getvalue()

    def to_dict(self):
        return {"m": self.m, "c": self.c, "c_identity": self.c_identity, "slope": self.slope,
                "regular_at_origin": self.regular_at_origin, "rtol": self.rtol, **self.meta}


def _mode_rhs(r, y, m):
    u, p = y
    return [p, -p / r + m * m * u / (r * r) + 0.5 * (r * p - u)]


def _asymptotic_start(m, R):
    a1 = m * m - 1.0
    a3 = a1 * a1 / 2
    return [R + a1 / R + a3 / R ** 3, 1 - a1 / R ** 2 - 3 * a3 / R ** 4]


def solve_model_problem(m: int, r_max: float = 120.0, rtol: float = 1e-12, samples: int = 2000):
    """Recessive solution of the radial model ODE for Fourier mode ``m``.

    Parameters
    ----------
    m : int
        Mode index, ``m >= 0``.
    r_max : float
        Start radius of the inward integration (at least 50).
    rtol : float
        Relative tolerance of the DOP853 integrator.

    Raises
    ------
    FilteringFailureError
        If ``u / r`` fails to settle (the growing branch leaked in).
    """
    if m < 0 or int(m) != m:
        raise InvalidArgumentError("mode index must be a nonnegative integer")
    if r_max < 50:
        raise InvalidArgumentError("r_max must be at least 50")
    m = int(m)
    sol = solve_ivp(_mode_rhs, (r_max, MODEL_R_MIN), _asymptotic_start(m, r_max), args=(m,),
                    method="DOP853", rtol=rtol, atol=1e-14 * r_max, dense_output=True,
                    max_step=MODEL_MAX_STEP)
    if not sol.success:
        raise FilteringFailureError(f"mode {m}: {sol.message}", {"m": m})
    r = np.geomspace(MODEL_R_MIN, r_max, samples)
    U, P = sol.sol(r)
    u1 = float(sol.sol(1.0)[0])
    if abs(u1) < 1e-8:
        raise FilteringFailureError(f"mode {m}: recessive solution vanishes at r = 1", {"u1": u1})
    U, P = U / u1, P / u1
    c = 1.0 / u1
    # same limit via the telescoping identity from r0 = 10
    r0 = DECAY_WINDOW[0]
    s, wq = _panels(r0, r_max)
    Us, Ps = sol.sol(s)
    w = (s * Ps - Us) / u1
    u0 = sol.sol(r0)[0] / u1
    wR = (r_max * sol.sol(r_max)[1] - sol.sol(r_max)[0]) / u1
    c_id = float(u0 / r0 + np.sum(wq * w / s ** 2) + wR / (2 * r_max))
    lo, hi = DECAY_WINDOW[0], min(DECAY_WINDOW[1], 0.85 * r_max)
    sel = (r >= lo) & (r <= hi)
    dev = np.abs(U[sel] / r[sel] - c)
    diag = {"m": m, "u1": u1, "window": [lo, hi]}
    if m == 1 or np.all(dev < 1e-13 * abs(c)):
        slope = float("-inf")
    else:
        if np.any(dev == 0):
            raise FilteringFailureError(f"mode {m}: deviation hits zero inside the window", diag)
        slope = float(np.polyfit(np.log(r[sel]), np.log(dev), 1)[0])
        diag["slope"] = slope
        if slope > -1.0:
            raise FilteringFailureError(f"mode {m}: u/r does not settle (slope {slope:.3g})", diag)
    return RadialModeSolution(m=m, r=r, u=U, du=P, c=c, c_identity=c_id, slope=slope,
                              regular_at_origin=(m == 1), rtol=rtol,
                              meta={"u_raw_at_1": u1, "r_min": MODEL_R_MIN, "r_max": r_max})


def _panels(a, b, width=1.0, order=8):
    xg, wg = np.polynomial.legendre.leggauss(order)
    k = max(1, int(np.ceil((b - a) / width)))
    e = np.linspace(a, b, k + 1)
    lo, hi = e[:-1, None], e[1:, None]
    return (0.5 * (hi - lo) * xg + 0.5 * (hi + lo)).ravel(), (0.5 * (hi - lo) * wg).ravel()


def model_problem_bound(u: ScalarField, r_lower: float = 5.0, R: float = 2.0):
    """Size of the cone data of a plane field against its ``C^3`` norm near the core.

    Returns ``(b, size)`` with ``b = sum_{k<=3} sup_{B_{r_lower+2}} |D^k u|``
    and ``size = sup|c| + sup_{r >= 2R} r |f|``.
    """
    from .weighted_spaces import cone_decompose

    g = u.grid
    inside = g.radius <= r_lower + 2
    b = sum(float(np.max(u.derivative_norm(k)[inside])) for k in range(4))
    d = cone_decompose(u, R)
    outer = g.radius >= 2 * R
    size = float(np.max(np.abs(d.c)) + np.max(g.radius[outer] * np.abs(d.f.values[outer])))
    return b, size


# ---------------------------------------------------------------------------
# extension


def blend_polynomial(d, slope, curvature, deriv=0):
    """``slope d + curvature (3 - d) d^2 / 6`` and its first two derivatives.

    At ``d = 0`` the value is 0, the slope ``slope`` and the second
    derivative ``curvature``.
    """
    d = np.asarray(d, dtype=float)
    a, b = np.asarray(slope, dtype=float), np.asarray(curvature, dtype=float)
    if deriv == 0:
        return a * d + b * (3 - d) * d * d / 6
    if deriv == 1:
        return a + b * (6 * d - 3 * d * d) / 6
    if deriv == 2:
        return b * (1 - d)
    raise InvalidArgumentError("deriv must be 0, 1 or 2")


def damping(d):
    """Smooth factor equal to 1 at ``d <= 0`` and 0 for ``d >= 1``."""
    return 1.0 - smooth_step(d)


def _one_sided(v, h):
    """Value, first and second derivative at the last sample of an equispaced ray."""
    d1 = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    d2 = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / (h * h)
    return v[-1], d1, d2


def extend_to_cone(u: ScalarField, R_tilde: float, chi_radius: float = 1.0) -> ConeDecomposition:
    """Extend ``u`` known on ``B_{R_tilde}`` of a line or plane base to a cone-space function.

    ``R_tilde`` is snapped down to the nearest node radius.  The returned
    decomposition uses the cutoff radius ``chi_radius``; its ``meta`` records
    the radius used, the per-ray slope and curvature of ``f`` at the seam and
    the exact seam identities of the blend.

    Raises
    ------
    InsufficientDomainError
        If ``R_tilde + 3`` exceeds the grid.
    OrderUnavailableError
        If a ray has fewer than four nodes inside ``B_{R_tilde}``.
    """
    g = u.grid
    rs, idx, link = rays(g)
    r_end = min(r[-1] for r in rs)
    if R_tilde + 3 > r_end + 1e-12:
        raise InsufficientDomainError(f"need R_tilde + 3 <= {r_end}, got {R_tilde + 3}")
    h = float(np.min(np.diff(rs[0])))
    c = np.empty(len(idx))
    slopes = np.empty(len(idx))
    curvs = np.empty(len(idx))
    vals = np.array(u.values, dtype=float)
    R_used = None
    for k, (r, ix) in enumerate(zip(rs, idx)):
        inside = np.flatnonzero(r <= R_tilde + 1e-12)
        if inside.size < 4:
            raise OrderUnavailableError("fewer than four nodes inside the extension radius")
        last = inside[-1]
        R_used = float(r[last])
        v0, v1, v2 = _one_sided(vals[ix[: last + 1]], h)
        c[k] = v0 / R_used
        slopes[k] = v1 - c[k]
        curvs[k] = v2
        beyond = ix[last + 1:]
        d = r[last + 1:] - R_used
        vals[beyond] = c[k] * r[last + 1:] + blend_polynomial(d, slopes[k], curvs[k]) * damping(d)
    li = node_link_index(g)
    f = vals - cutoff(g.radius, chi_radius) * c[li] * g.radius
    # seam identities of the blend, evaluated exactly from the polynomial
    seam = {
        "value": float(np.max(np.abs(blend_polynomial(0.0, slopes, curvs)))),
        "first": float(np.max(np.abs(blend_polynomial(0.0, slopes, curvs, 1) - slopes))),
        "second": float(np.max(np.abs(blend_polynomial(0.0, slopes, curvs, 2) - curvs))),
    }
    return ConeDecomposition(c=c, f=ScalarField(g, f, base=u.base), R=float(chi_radius),
                             link=link, link_index=li, tail_estimate=0.0,
                             meta={"R_tilde": R_used, "slopes": slopes, "curvatures": curvs,
                                   "seam": seam})


def annulus_norm(dec: ConeDecomposition, R_tilde: float, alpha=0.5) -> NormReport:
    """Cone norm of a decomposition restricted to nodes with ``r <= R_tilde``."""
    g = dec.grid
    f = dec.f
    mask = g.radius <= R_tilde + 1e-12
    pairs, total = node_pairs(g, mask=mask)
    rt = r_tilde(g.radius)
    comps = link_norm(dec.c, dec.link, alpha)
    for j in range(3):
        T = f.derivative_tensor(j)
        comps[f"f_sup_{j}"] = float(np.max((rt * np.linalg.norm(T, axis=1))[mask]))
        comps[f"f_semi_{j}"] = weighted_seminorm(T, g.position, g.radius, pairs, alpha, 1.0)
    xd = f.position_derivative()
    comps["f_radial_sup"] = float(np.max((rt * np.abs(xd))[mask]))
    comps["f_radial_semi"] = weighted_seminorm(xd, g.position, g.radius, pairs, alpha, 1.0)
    return NormReport("CS-annulus", comps, {"k": 2, "alpha": alpha, "gamma": 1.0,
                                            "R_tilde": R_tilde}, len(pairs), total > len(pairs))


def extension_ratio(u: ScalarField, R_tilde: float, alpha=0.5):
    """``|extension|_CS / |u|_{CS, annulus}`` together with both norms."""
    dec = extend_to_cone(u, R_tilde)
    full = holder_norm(dec, "CS", alpha=alpha)
    ann = annulus_norm(dec, dec.meta["R_tilde"], alpha)
    return {"extension": full.total, "annulus": ann.total,
            "ratio": full.total / ann.total if ann.total > 0 else 0.0,
            "seam": dec.meta["seam"], "R_tilde": dec.meta["R_tilde"]}


# ---------------------------------------------------------------------------
# roughly conical approximate shrinkers


def rough_approx_check(M, shrinker, R, s, b, r_lower, ell=4, Theta=None, theta=0.5, C_ell=10.0):
    """Check the three conditions of a roughly conical approximate shrinker up to scale ``R``.

    1. ``Theta R <= rough conical scale``;
    2. the core graphical hypothesis with ``(b, r_lower)``;
    3. ``|phi| + (1 + |x|) |grad phi| <= s (1 + |x|)^{-1}`` on ``B_{Theta R}``.

    ``Theta`` defaults to ``theta_constant(theta)``.  Returns a dict with the
    sub-verdicts and, for the first failed pointwise condition, the node.
    """
    from .loja import theta_constant
    from .scales import core_graphical_check, rough_conical_scale
    from .geometry import phi_residual

    T = theta_constant(theta) if Theta is None else float(Theta)
    rough = rough_conical_scale(M, ell, C_ell, float(getattr(shrinker, "core_radius", 1.0)))
    cond1 = T * R <= rough.value
    core = core_graphical_check(M, shrinker, b, r_lower, ell, C_ell)
    phi = phi_residual(M)
    pos = M.bundle().position
    rad = np.linalg.norm(pos, axis=1)
    gphi = phi.derivative_norm(1)
    lhs = np.abs(phi.values) + (1 + rad) * gphi
    rhs = s / (1 + rad)
    inside = rad <= T * R
    bad = np.flatnonzero(inside & (lhs > rhs))
    first = None
    if bad.size:
        k = bad[np.argmin(rad[bad])]
        first = {"node": int(k), "radius": float(rad[k]), "lhs": float(lhs[k]), "rhs": float(rhs[k])}
    return {"Theta": T, "rough_scale": rough.value, "scale_condition": bool(cond1),
            "core_condition": bool(core.holds), "phi_condition": bad.size == 0,
            "first_violation": first, "holds": bool(cond1 and core.holds and bad.size == 0)}


def random_annulus_field(grid, seed=0, amplitude=0.01, modes=3) -> ScalarField:
    """Random cone-like heights ``chi (c r + d / (1 + r) + e sin r / (1 + r)^2)`` on a line or plane.

    ``c, d, e`` are random trigonometric polynomials of degree ``modes`` on
    the plane (values at the two ends on the line); ``chi`` vanishes on the
    unit ball so the field is smooth at the origin.
    """
    rng = np.random.default_rng(seed)
    r = grid.radius
    if grid.kind == "plane-polar":
        th = np.arctan2(grid.position[:, 1], grid.position[:, 0])
        basis = [np.ones_like(th)]
        for k in range(1, modes + 1):
            basis += [np.cos(k * th), np.sin(k * th)]
        B = np.column_stack(basis)
    elif grid.kind == "line":
        s = np.sign(grid.params[0])
        B = np.column_stack([np.ones_like(s), s])
    else:
        raise InvalidArgumentError("random annulus data need a line or plane base")
    c, d, e = (B @ rng.uniform(-1, 1, B.shape[1]) for _ in range(3))
    vals = cutoff(r, 1.0) * (c * r + d / (1 + r) + e * np.sin(r) / (1 + r) ** 2)
    return ScalarField(grid, amplitude * vals)
