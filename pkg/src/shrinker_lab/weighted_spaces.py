"""Weighted Hölder and Sobolev norms on shrinker bases.

Conventions
-----------
``r_tilde = max(1, |x|)``.  The homogeneous norm of order ``k`` with decay
``gamma`` is

    sum_{j <= k} ( sup r_tilde^gamma |D^j u|  +  [D^j u]_{alpha; -gamma} ),

where the weighted seminorm divides ``|T(x) - T(y)| / |x - y|^alpha`` by
``r_tilde(x)^(-gamma-alpha) + r_tilde(y)^(-gamma-alpha)``.  The seminorm is
taken over node pairs at extrinsic distance at most 1, subsampled uniformly
(fixed seed) when there are more than ``MAX_PAIRS`` of them.  Since the
seminorm is a supremum, subsampling can only lower it.

The anisotropic norm adds the decay-1 norm of ``x . grad u`` to the
homogeneous ``C^{2,alpha}`` norm with decay 1.  The cone norm of
``u = chi(r) c(omega) r + f`` is ``|c|_{C^{2,alpha}(link)} + |f|_an``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .errors import InsufficientDomainError, InvalidArgumentError, NotConicalError
from .fields import ScalarField, periodic_d1, periodic_d2
from .geometry import gaussian_density

DEFAULT_ALPHA = 0.5
MAX_PAIRS = 100_000
PAIR_RADIUS = 1.0
PAIR_SEED = 0

_PAIR_CACHE: dict = {}


def smooth_step(t):
    """Quintic step: 0 for t <= 0, 1 for t >= 1, C^2 at both ends."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t ** 3 * (10 - 15 * t + 6 * t * t)


def smooth_step_derivatives(t):
    """First and second derivatives of ``smooth_step``."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    d1 = np.where(inside, 30 * t * t * (1 - t) ** 2, 0.0)
    d2 = np.where(inside, 60 * t * (1 - t) * (1 - 2 * t), 0.0)
    return d1, d2


def cutoff(r, R):
    """Cutoff supported in ``[R, inf)`` and equal to 1 beyond ``2R``."""
    return smooth_step((np.asarray(r, dtype=float) - R) / R)


def r_tilde(r):
    return np.maximum(1.0, np.asarray(r, dtype=float))


# ---------------------------------------------------------------------------
# reports


@dataclass
class NormReport:
    """Named nonnegative components of a discrete norm and their sum."""

    kind: str
    components: dict
    params: dict
    pair_count: int = 0
    pairs_subsampled: bool = False
    notes: dict = field(default_factory=dict)

    @property
    def total(self):
        return float(sum(self.components.values()))

    def __float__(self):
        return self.total

    def to_dict(self):
        return {
            "kind": self.kind,
            "components": {k: float(v) for k, v in self.components.items()},
            "total": self.total,
            "params": self.params,
            "pair_count": self.pair_count,
            "pairs_subsampled": self.pairs_subsampled,
            "pair_radius": PAIR_RADIUS,
            "notes": self.notes,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# pair sets


def node_pairs(grid, max_pairs=MAX_PAIRS, radius=PAIR_RADIUS, mask=None):
    """Index pairs ``(i, j)``, ``i < j``, with ``|x_i - x_j| <= radius``.

    Returns ``(pairs, total)`` where ``total`` counts all pairs before
    subsampling.  Cached per grid, mask and limit.
    """
    mkey = None if mask is None else hash(np.asarray(mask, dtype=bool).tobytes())
    key = (grid.key(), max_pairs, radius, mkey)
    if key in _PAIR_CACHE:
        return _PAIR_CACHE[key]
    idx = np.arange(grid.size) if mask is None else np.flatnonzero(mask)
    tree = cKDTree(grid.position[idx])
    P = tree.query_pairs(radius, output_type="ndarray")
    total = len(P)
    if max_pairs is not None and total > max_pairs:
        rng = np.random.default_rng(PAIR_SEED)
        keep = np.sort(rng.choice(total, size=max_pairs, replace=False))
        P = P[keep]
    P = idx[P] if len(P) else np.zeros((0, 2), dtype=int)
    P.setflags(write=False)
    _PAIR_CACHE[key] = (P, total)
    return P, total


def weighted_seminorm(T, positions, radii, pairs, alpha, gamma):
    """Weighted Hölder seminorm of a tensor field (rows of ``T``) over ``pairs``."""
    if len(pairs) == 0:
        return 0.0
    i, j = pairs[:, 0], pairs[:, 1]
    T = np.asarray(T).reshape(len(positions), -1)
    diff = np.linalg.norm(T[i] - T[j], axis=1)
    dist = np.linalg.norm(positions[i] - positions[j], axis=1)
    rt = r_tilde(radii)
    denom = rt[i] ** (-gamma - alpha) + rt[j] ** (-gamma - alpha)
    return float(np.max(diff / dist ** alpha / denom))


def _hom_components(u: ScalarField, k, alpha, gamma, pairs, prefix=""):
    g = u.grid
    rt = r_tilde(g.radius)
    out = {}
    for j in range(k + 1):
        T = u.derivative_tensor(j)
        out[f"{prefix}sup_{j}"] = float(np.max(rt ** gamma * np.linalg.norm(T, axis=1)))
        out[f"{prefix}semi_{j}"] = weighted_seminorm(T, g.position, g.radius, pairs, alpha, gamma)
    return out


def _radial_components(u: ScalarField, alpha, pairs, prefix=""):
    g = u.grid
    xd = u.position_derivative()
    return {
        f"{prefix}radial_sup": float(np.max(r_tilde(g.radius) * np.abs(xd))),
        f"{prefix}radial_semi": weighted_seminorm(xd, g.position, g.radius, pairs, alpha, 1.0),
    }


def link_norm(c, link, alpha=DEFAULT_ALPHA):
    """``C^{2,alpha}`` norm of a function sampled on the link of a cone.

    For a circle link (plane base) derivatives are periodic differences in the
    angle, and the Hölder seminorm of ``c''`` uses chord distances over all
    pairs.  A link of isolated points (line base) only carries the sup term.
    """
    c = np.asarray(c, dtype=float)
    link = np.asarray(link, dtype=float)
    if len(c) <= 2:
        return {"link_sup_0": float(np.max(np.abs(c)))}
    h = 2 * np.pi / len(c)
    c1 = periodic_d1(c, h)
    c2 = periodic_d2(c, h)
    i, j = np.triu_indices(len(c), 1)
    chord = np.linalg.norm(link[i] - link[j], axis=1)
    semi = float(np.max(np.abs(c2[i] - c2[j]) / chord ** alpha))
    return {
        "link_sup_0": float(np.max(np.abs(c))),
        "link_sup_1": float(np.max(np.abs(c1))),
        "link_sup_2": float(np.max(np.abs(c2))),
        "link_semi_2": semi,
    }


def _parse_kind(kind, k, alpha, gamma):
    if isinstance(kind, (tuple, list)):
        name, *rest = kind
        if name == "hom":
            k, alpha, gamma = rest
        elif name in ("an", "CS"):
            (alpha,) = rest
        kind = name
    if kind not in ("hom", "an", "CS"):
        raise InvalidArgumentError(f"unknown norm kind {kind!r}")
    if not 0 < alpha < 1:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    return kind, int(k), float(alpha), float(gamma)


def holder_norm(u, kind="hom", k=2, alpha=DEFAULT_ALPHA, gamma=1.0, max_pairs=MAX_PAIRS):
    """Discrete weighted Hölder norm.

    Parameters
    ----------
    u : ScalarField or ConeDecomposition
        A ``ConeDecomposition`` is required for ``kind="CS"``.
    kind : {"hom", "an", "CS"} or tuple
        Tuples ``("hom", k, alpha, gamma)``, ``("an", alpha)``, ``("CS", alpha)``
        are accepted as well.
    k, alpha, gamma
        Order, Hölder exponent and decay rate (``k`` and ``gamma`` only
        matter for ``hom``).

    Returns
    -------
    NormReport
    """
    kind, k, alpha, gamma = _parse_kind(kind, k, alpha, gamma)
    if kind == "CS":
        if not isinstance(u, ConeDecomposition):
            raise InvalidArgumentError("the cone norm needs a ConeDecomposition")
        f = u.f
        pairs, total = node_pairs(f.grid, max_pairs)
        comps = link_norm(u.c, u.link, alpha)
        comps.update(_hom_components(f, 2, alpha, 1.0, pairs, prefix="f_"))
        comps.update(_radial_components(f, alpha, pairs, prefix="f_"))
        return NormReport("CS", comps, {"k": 2, "alpha": alpha, "gamma": 1.0, "R": u.R},
                          len(pairs), total > len(pairs), {"tail_estimate": u.tail_estimate})
    if isinstance(u, ConeDecomposition):
        raise InvalidArgumentError(f"{kind} norm takes a ScalarField")
    pairs, total = node_pairs(u.grid, max_pairs)
    if kind == "hom":
        comps = _hom_components(u, k, alpha, gamma, pairs)
        return NormReport("hom", comps, {"k": k, "alpha": alpha, "gamma": gamma},
                          len(pairs), total > len(pairs))
    comps = _hom_components(u, 2, alpha, 1.0, pairs)
    comps.update(_radial_components(u, alpha, pairs))
    return NormReport("an", comps, {"k": 2, "alpha": alpha, "gamma": 1.0},
                      len(pairs), total > len(pairs))


# ---------------------------------------------------------------------------
# cone decomposition


@dataclass
class ConeDecomposition:
    """``u = cutoff(r, R) c(omega) r + f`` on a conical base.

    ``c`` is sampled on ``link`` (unit vectors); ``link_index`` maps every
    grid node to the ray it lies on.
    """

    c: np.ndarray
    f: ScalarField
    R: float
    link: np.ndarray
    link_index: np.ndarray
    tail_estimate: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.f.grid

    def cone_part(self):
        g = self.grid
        return cutoff(g.radius, self.R) * self.c[self.link_index] * g.radius

    def reconstruct(self):
        return self.cone_part() + self.f.values

    def field(self):
        return ScalarField(self.grid, self.reconstruct(), base=self.f.base)

    def to_dict(self):
        return {"R": self.R, "c": [float(x) for x in self.c], "tail_estimate": self.tail_estimate}


def rays(grid):
    """Radial profiles of a conical base grid.

    Returns ``(r, index, link)`` where ``index[ray]`` lists node indices along
    each ray ordered by increasing radius and ``r[ray]`` the radii.
    """
    if grid.kind == "plane-polar":
        nr, nt = grid.shape
        r = grid.params[0]
        th = grid.params[1]
        idx = np.arange(grid.size).reshape(nr, nt)
        link = np.column_stack([np.cos(th), np.sin(th), np.zeros(nt)])
        return [r] * nt, [idx[:, j] for j in range(nt)], link
    if grid.kind == "line":
        x = grid.params[0]
        pos = np.flatnonzero(x >= 0)
        neg = np.flatnonzero(x <= 0)[::-1]
        link = np.array([[-1.0, 0.0], [1.0, 0.0]])
        return [np.abs(x[neg]), x[pos]], [neg, pos], link
    raise NotConicalError(f"{grid.kind} base is not a cone")


def node_link_index(grid):
    if grid.kind == "plane-polar":
        return np.arange(grid.size) % grid.shape[1]
    if grid.kind == "line":
        return (grid.params[0] >= 0).astype(int)
    raise NotConicalError(f"{grid.kind} base is not a cone")


def _gauss_panels(a, b, width=1.0, order=8):
    """Gauss-Legendre nodes and weights on ``[a, b]`` split into panels."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    m = max(1, int(np.ceil((b - a) / width)))
    edges = np.linspace(a, b, m + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * wg
    return nodes.ravel(), weights.ravel()


def asymptotic_coefficient(r, values, R):
    """Cone coefficient along one ray and the truncation-tail bound.

    Integrates ``c = u(R)/R + int_R^{r_end} w(s)/s^2 ds`` with
    ``w = s u'(s) - u`` on a cubic spline, then adds the tail
    ``w(r_end) / (2 r_end)`` valid when ``w`` decays like ``1/s``.  The bound
    ``|w(r_end)| / r_end`` on that tail is returned alongside.
    """
    S = CubicSpline(r, values)
    r_end = r[-1]
    s, wq = _gauss_panels(R, r_end)
    w = s * S(s, 1) - S(s)
    c = S(R) / R + np.sum(wq * w / s ** 2)
    w_end = r_end * S(r_end, 1) - S(r_end)
    return float(c + w_end / (2 * r_end)), float(abs(w_end) / r_end)


def cone_decompose(u: ScalarField, R: float) -> ConeDecomposition:
    """Split ``u`` on a line or plane base into its cone part and remainder.

    Raises
    ------
    InsufficientDomainError
        If the outermost node radius is below ``2R``.
    """
    g = u.grid
    if R <= 0:
        raise InvalidArgumentError("cutoff radius must be positive")
    rs, idx, link = rays(g)
    r_end = min(r[-1] for r in rs)
    if r_end < 2 * R:
        raise InsufficientDomainError(f"need r_max >= 2R = {2 * R}, grid reaches {r_end}")
    c = np.empty(len(idx))
    tail = 0.0
    for m, (r, ix) in enumerate(zip(rs, idx)):
        c[m], t = asymptotic_coefficient(r, u.values[ix], R)
        tail = max(tail, t)
    li = node_link_index(g)
    f = u.values - cutoff(g.radius, R) * c[li] * g.radius
    return ConeDecomposition(c=c, f=ScalarField(g, f, base=u.base), R=float(R), link=link,
                             link_index=li, tail_estimate=tail)


# ---------------------------------------------------------------------------
# Gaussian Sobolev norms


def _density_weights(grid):
    return grid.weights * gaussian_density(grid.position, grid.n)


def sobolev_norm(u: ScalarField, k=0) -> float:
    """``(sum_{j <= k} int |D^j u|^2 rho)^(1/2)`` by the base quadrature."""
    if k not in (0, 1, 2):
        raise InvalidArgumentError("k must be 0, 1 or 2")
    w = _density_weights(u.grid)
    tot = sum(np.sum(w * np.sum(u.derivative_tensor(j) ** 2, axis=1)) for j in range(k + 1))
    return float(np.sqrt(tot))


def weighted_inner(u, v, grid=None):
    """Gaussian-weighted inner product of two fields (or value arrays)."""
    g = grid if grid is not None else u.grid
    a = getattr(u, "values", u)
    b = getattr(v, "values", v)
    return float(np.sum(_density_weights(g) * a * b))


def verify_ecker_sobolev(u: ScalarField) -> dict:
    """Both sides of ``int u^2 |x|^2 rho <= 4 int (n u^2 + 4 |grad u|^2) rho``."""
    g = u.grid
    w = _density_weights(g)
    grad2 = np.sum(u.derivative_tensor(1) ** 2, axis=1)
    lhs = float(np.sum(w * u.values ** 2 * g.radius ** 2))
    rhs = float(4 * np.sum(w * (g.n * u.values ** 2 + 4 * grad2)))
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0}


# ---------------------------------------------------------------------------
# interpolation inequalities


def exponent_a(k, n):
    """Exponent ``k / (k + n)`` of the L^1 term in the sup bound."""
    return k / (k + n)


def exponent_b(k, n):
    """Exponent ``(k - 1) / (k + n)`` of the L^1 term in the gradient bound."""
    return (k - 1) / (k + n)


def _ball(grid, center, radius):
    c = np.zeros(grid.ambient_dim) if center is None else np.asarray(center, dtype=float)
    return np.linalg.norm(grid.position - c, axis=1) <= radius


def _plain_seminorm(T, pos, mask, beta):
    ix = np.flatnonzero(mask)
    if len(ix) < 2:
        return 0.0
    i, j = np.triu_indices(len(ix), 1)
    i, j = ix[i], ix[j]
    T = np.asarray(T).reshape(len(pos), -1)
    diff = np.linalg.norm(T[i] - T[j], axis=1)
    return float(np.max(diff / np.linalg.norm(pos[i] - pos[j], axis=1) ** beta))


def _interp_one(u: ScalarField, spec, center, radius):
    g = u.grid
    inner = _ball(g, center, radius)
    outer = _ball(g, center, 2 * radius)
    nrm = lambda j, m: float(np.max(u.derivative_norm(j)[m]))
    if spec[0] == "L1Ck":
        k = int(spec[1])
        n = g.n
        a, b = exponent_a(k, n), exponent_b(k, n)
        l1 = float(np.sum(g.weights[outer] * np.abs(u.values[outer])))
        top = nrm(k, outer)
        sup_lhs = nrm(0, inner)
        grad_lhs = radius * nrm(1, inner)
        rhs_a = radius ** (-n) * l1 + l1 ** a * top ** (1 - a)
        rhs_b = radius ** (-n) * l1 + l1 ** b * top ** (1 - b)
        return {"sup_lhs": sup_lhs, "sup_rhs": rhs_a, "grad_lhs": grad_lhs, "grad_rhs": rhs_b,
                "a": a, "b": b,
                "constant": max(sup_lhs / rhs_a if rhs_a > 0 else 0.0,
                                grad_lhs / rhs_b if rhs_b > 0 else 0.0)}
    if len(spec) == 2:
        j, k = map(int, spec)
        if not 0 <= j < k:
            raise InvalidArgumentError("need 0 <= j < k")
        lhs = nrm(j, inner)
        rhs = nrm(0, outer) ** (1 - j / k) * nrm(k, outer) ** (j / k)
    else:
        j, k, beta, alpha = spec
        j, k = int(j), int(k)
        if not j + beta < k + alpha:
            raise InvalidArgumentError("need j + beta < k + alpha")
        lhs = _plain_seminorm(u.derivative_tensor(j), g.position, inner, beta)
        s = (j + beta) / (k + alpha)
        rhs = nrm(0, outer) ** (1 - s) * _plain_seminorm(u.derivative_tensor(k), g.position, outer, alpha) ** s
    return {"lhs": lhs, "rhs": rhs, "constant": lhs / rhs if rhs > 0 else 0.0}


def verify_interpolation(family, spec=(1, 2), center=None, radius=1.0) -> dict:
    """Smallest constant making an interpolation inequality hold on a family.

    Parameters
    ----------
    family : ScalarField or sequence of ScalarField
    spec : tuple
        ``(j, k)`` for the sup form on ``B_radius`` against ``B_2radius``;
        ``(j, k, beta, alpha)`` for the Hölder form; ``("L1Ck", k)`` for the
        mixed ``L^1``/``C^k`` bounds with exponents ``exponent_a`` and
        ``exponent_b``.
    """
    members = [family] if isinstance(family, ScalarField) else list(family)
    rows = [_interp_one(u, tuple(spec), center, radius) for u in members]
    return {"spec": list(spec), "radius": radius, "members": rows,
            "constant": max(r["constant"] for r in rows)}
