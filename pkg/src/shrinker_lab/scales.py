"""Shrinker scale, rough conical scale, conical scale and the core graphical test.

Every surface ``M`` here is a normal graph over the grid of a base shrinker,
so radii are searched on the discrete set of node radii of that grid.  Ties
go to the smaller radius.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (InsufficientDomainError, InvalidArgumentError, NotConicalError,
                     OrderUnavailableError)
from .extension import extend_to_cone
from .fields import ScalarField
from .geometry import Hypersurface, dissipation
from .weighted_spaces import cone_decompose, holder_norm

DEFAULTS = {"ell": 4, "C_ell": 10.0, "beta0": 0.05, "b": 1e-3, "r_lower": 5.0}
CONE_CHI_RADIUS = 1.0


@dataclass(frozen=True)
class Scale:
    """A radius with an optional regime flag (``saturated``, ``out-of-regime``, ``below-core``)."""

    value: float
    flag: str | None = None
    detail: dict = field(default_factory=dict, compare=False)

    def __float__(self):
        return self.value


def scale_cap(grid):
    """Largest node radius of the base; the scales never exceed it."""
    return float(np.max(grid.radius))


def _core_radius(shrinker):
    return float(getattr(shrinker, "core_radius", 0.0))


def _heights(M):
    return M.height if M.height is not None else ScalarField(M.grid, np.zeros(M.grid.size))


# ---------------------------------------------------------------------------
# shrinker scale


def shrinker_scale_from_dissipation(D, cap):
    if D >= 1:
        return Scale(0.0, "out-of-regime", {"dissipation": D})
    if D <= 0 or D < np.exp(-cap * cap / 4):
        return Scale(float(cap), "saturated", {"dissipation": D})
    return Scale(float(2 * np.sqrt(-np.log(D))), None, {"dissipation": D})


def shrinker_scale(M: Hypersurface) -> Scale:
    """Radius ``R`` with ``exp(-R^2 / 4) = int |phi|^2 rho``, clamped to the grid."""
    return shrinker_scale_from_dissipation(dissipation(M), scale_cap(M.grid))


# ---------------------------------------------------------------------------
# rough conical scale


def _cartesian_A(M):
    """Second fundamental form components in an ambient-aligned frame, shape (N, n, n)."""
    b = M.bundle()
    g = M.grid
    A = np.real(b.A)
    if g.kind == "plane-polar":
        F = g.frame[:, :, :2]  # rows e_r, e_theta in (x, y)
        return np.einsum("npi,npq,nqj->nij", F, A, F)
    return A


def curvature_derivative_norms(M, order):
    """``|D^k A|`` per node for ``k = 0..order`` (base derivatives of the components)."""
    g = M.grid
    A = _cartesian_A(M)
    n = A.shape[1]
    out = np.zeros((order + 1, g.size))
    for p in range(n):
        for q in range(n):
            fld = ScalarField(g, A[:, p, q])
            for k in range(order + 1):
                out[k] += np.sum(fld.derivative_tensor(k) ** 2, axis=1)
    return np.sqrt(out)


def _boundary_margin(grid, ell):
    if not np.isfinite(grid.r_max):
        return 0.0
    h = max(grid.spacing.get("r", 0.0), grid.spacing.get("x", 0.0), grid.spacing.get("z", 0.0))
    return (ell + 4) * h


def rough_conical_scale(M: Hypersurface, ell=DEFAULTS["ell"], C_ell=DEFAULTS["C_ell"],
                        core_radius=1.0) -> Scale:
    """Largest node radius below which ``|D^k A| <= C (1 + r)^{-1-k}`` for ``k <= ell + 1``.

    Nodes within ``(ell + 4)`` grid steps of the truncation radius are not
    tested (one-sided difference stencils stack up there).
    """
    g = M.grid
    cap = scale_cap(g)
    radius = np.linalg.norm(M.bundle().position, axis=1)
    norms = curvature_derivative_norms(M, ell + 1)
    k = np.arange(ell + 2)[:, None]
    bound = C_ell * (1 + radius[None, :]) ** (-1.0 - k)
    tested = g.radius <= g.r_max - _boundary_margin(g, ell)
    bad = np.any(norms > bound, axis=0) & tested
    if not np.any(bad):
        return Scale(float(cap), None)
    first = float(np.min(radius[bad]))
    below = g.radius[g.radius < first]
    value = float(np.max(below)) if below.size else 0.0
    if value < core_radius:
        return Scale(float(core_radius), "below-core", {"first_violation": first})
    return Scale(value, None, {"first_violation": first})


# ---------------------------------------------------------------------------
# graphicality and conical scale


def graphical_radius(M: Hypersurface, shrinker) -> float:
    """Largest radius inside which nearest-point projection to the base is one-to-one.

    A node of ``M`` fails when its nearest base node is not the node it was
    built from, which includes two nodes of ``M`` landing on one base node.
    """
    g = M.grid
    pos = np.real(M.bundle().position)
    tree = cKDTree(g.position)
    _, j = tree.query(pos)
    bad = j != np.arange(g.size)
    if not np.any(bad):
        return scale_cap(g)
    first = float(np.min(g.radius[bad]))
    below = g.radius[g.radius < first]
    return float(np.max(below)) if below.size else 0.0


def _candidates(radii, lo, hi, step):
    r = np.unique(radii[(radii >= lo - 1e-12) & (radii <= hi + 1e-12)])[::-1]
    keep = []
    for x in r:
        if not keep or keep[-1] - x >= step - 1e-12:
            keep.append(float(x))
    return keep


def cone_norm_within(u: ScalarField, radius: float, alpha=0.5):
    """Cone norm of ``u`` seen on ``B_radius``: full decomposition at the grid edge,
    otherwise the extension from ``B_radius``."""
    g = u.grid
    r_end = float(np.max(g.radius))
    if radius >= r_end - 1e-12:
        return holder_norm(cone_decompose(u, CONE_CHI_RADIUS), "CS", alpha=alpha).total
    return holder_norm(extend_to_cone(u, radius, CONE_CHI_RADIUS), "CS", alpha=alpha).total


def conical_scale(M: Hypersurface, shrinker, beta0=DEFAULTS["beta0"], ell=DEFAULTS["ell"],
                  C_ell=DEFAULTS["C_ell"], rough: Scale | None = None, radius_step=0.5,
                  alpha=0.5) -> Scale:
    """Largest radius in ``[core, rough scale]`` where ``M`` is a graph with small cone norm.

    Candidates are node radii thinned to ``radius_step`` and tried from the
    top; the first success wins.  Radii closer than 3 to the grid edge cannot
    be extended and are skipped, except the edge itself which uses the full
    decomposition.
    """
    if not getattr(shrinker, "conical", False):
        raise NotConicalError("the conical scale needs an asymptotically conical base")
    g = M.grid
    core = _core_radius(shrinker)
    rough = rough if rough is not None else rough_conical_scale(M, ell, C_ell, core)
    u = _heights(M)
    graph_r = graphical_radius(M, shrinker)
    r_end = float(np.max(g.radius))
    tried = []
    for r in _candidates(g.radius, core, min(rough.value, r_end), radius_step):
        if r > graph_r:
            continue
        if r < r_end - 1e-12 and r + 3 > r_end:
            continue
        try:
            val = cone_norm_within(u, r, alpha)
        except (InsufficientDomainError, OrderUnavailableError):
            continue
        tried.append((r, val))
        if val < beta0:
            return Scale(r, None, {"cone_norm": val, "tried": len(tried)})
    return Scale(core, "below-core", {"tried": len(tried)})


# ---------------------------------------------------------------------------
# core graphical hypothesis


@dataclass
class CoreVerdict:
    holds: bool
    measured: float
    rough_ok: bool
    graphical_ok: bool
    norm_ok: bool
    params: dict

    def to_dict(self):
        return asdict(self)


def core_norm(u: ScalarField, radius, order):
    """``sum_{k <= order} sup_{B_radius} |D^k u|``."""
    inside = u.grid.radius <= radius
    return float(sum(np.max(u.derivative_norm(k)[inside]) for k in range(order + 1)))


def core_graphical_check(M: Hypersurface, shrinker, b=DEFAULTS["b"], r_lower=DEFAULTS["r_lower"],
                         ell=DEFAULTS["ell"], C_ell=DEFAULTS["C_ell"]) -> CoreVerdict:
    """The core graphical hypothesis with parameters ``(b, r_lower)``.

    Holds when the rough conical scale reaches ``r_lower``, ``M`` is a graph
    over ``B_{r_lower}`` and the height has ``C^{ell+1}(B_{r_lower})`` norm at
    most ``b``.  The measured norm is returned either way.
    """
    n = M.grid.n
    if r_lower <= np.sqrt(2 * n):
        raise InvalidArgumentError(f"r_lower = {r_lower} must exceed sqrt(2n) = {np.sqrt(2 * n):.4f}")
    rough = rough_conical_scale(M, ell, C_ell, _core_radius(shrinker))
    measured = core_norm(_heights(M), r_lower, ell + 1)
    rough_ok = rough.value >= r_lower
    graph_ok = graphical_radius(M, shrinker) >= min(r_lower, scale_cap(M.grid))
    norm_ok = measured <= b
    return CoreVerdict(bool(rough_ok and graph_ok and norm_ok), measured, bool(rough_ok),
                       bool(graph_ok), bool(norm_ok),
                       {"b": b, "r_lower": r_lower, "ell": ell, "C_ell": C_ell})


# ---------------------------------------------------------------------------
# combined report


@dataclass
class ScaleReport:
    shrinker_scale: float
    rough_scale: float
    conical_scale: float
    core_holds: bool
    core_measured: float
    flags: dict
    params: dict

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def scale_report(M: Hypersurface, shrinker, ell=DEFAULTS["ell"], C_ell=DEFAULTS["C_ell"],
                 beta0=DEFAULTS["beta0"], b=DEFAULTS["b"], r_lower=DEFAULTS["r_lower"],
                 conical=True) -> ScaleReport:
    """All four scale quantities of ``M`` relative to ``shrinker``."""
    R = shrinker_scale(M)
    rough = rough_conical_scale(M, ell, C_ell, _core_radius(shrinker))
    if conical and getattr(shrinker, "conical", False):
        con = conical_scale(M, shrinker, beta0, ell, C_ell, rough)
    else:
        con = Scale(float("nan"), "not-conical")
    core = core_graphical_check(M, shrinker, b, r_lower, ell, C_ell)
    return ScaleReport(R.value, rough.value, con.value, core.holds, core.measured,
                       {"shrinker": R.flag, "rough": rough.flag, "conical": con.flag},
                       {"ell": ell, "C_ell": C_ell, "beta0": beta0, "b": b, "r_lower": r_lower})
