"""Both sides of the Łojasiewicz–Simon inequalities for graphs over a shrinker.

Three forms are evaluated:

* entire graphs: ``|F(M) - F(S)|`` against ``(int_M phi^2 rho)^{1/(2(1-theta))}``;
* localized to ``B_R``, which adds ``R^{(n-4)/(2(1-theta))} exp(-R^2/(8(1-theta)))``
  and ``exp(-R^2/(4 gamma))``;
* the final form with exponent ``1/(2(1 - theta/3))``, valid once the core
  is graphical and the shrinker scale sits one unit below the rough
  conical scale.

``fit_theta`` estimates the exponent from a random family by a total least
squares fit in log-log space.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import HypothesisViolationError, InsufficientSignalError, InvalidArgumentError
from .fields import ScalarField
from .geometry import Hypersurface, dissipation, gaussian_area, gaussian_density
from .operators import assemble_L, euler_lagrange_values, kernel_basis, projection_Pi, spectrum
from .weighted_spaces import (ConeDecomposition, cone_decompose, exponent_a, holder_norm,
                              smooth_step)

DEFAULT_THETA = 0.5
DEFAULT_GAMMA = 1.5
DEFAULT_BETA0 = 0.05
LHS_FLOOR = 1e-12
MIN_SAMPLES = 20


def _check_theta(theta):
    if not 0.0 < theta <= 0.5:
        raise InvalidArgumentError(f"theta = {theta} must lie in (0, 1/2]")


def theta_constant(theta: float) -> float:
    """``((1 - theta/2) / (1 - theta))^{1/4}``, the radius ratio used when localizing."""
    _check_theta(theta)
    return float(((1 - theta / 2) / (1 - theta)) ** 0.25)


def internal_gamma(theta):
    """``2 Theta^{-4} (1 - theta/3)``: the localization parameter that closes the final inequality."""
    return 2.0 * theta_constant(theta) ** -4 * (1 - theta / 3)


def localization_terms(R, n, theta, gamma):
    """The two error terms of the localized inequality at radius ``R`` (log-space evaluation)."""
    p = (n - 4) / (2 * (1 - theta))
    cut = float(np.exp(p * np.log(R) - R * R / (8 * (1 - theta))))
    gam = float(np.exp(-R * R / (4 * gamma)))
    return cut, gam


def _values(u):
    if isinstance(u, ConeDecomposition):
        return u.reconstruct().values
    return np.asarray(getattr(u, "values", u), dtype=float)


def graph_norm(shrinker, u, alpha=0.5) -> float:
    """Size of ``u`` in the space the entire inequality is stated in.

    Conical bases use the cone norm (decomposing ``u`` with a unit cutoff
    radius when a plain field is given); compact bases the unweighted
    ``C^{2,alpha}`` norm.
    """
    g = shrinker.grid
    if shrinker.conical:
        dec = u if isinstance(u, ConeDecomposition) else cone_decompose(ScalarField(g, _values(u)), 1.0)
        return holder_norm(dec, "CS", alpha=alpha).total
    return holder_norm(ScalarField(g, _values(u)), ("hom", 2, alpha, 0.0)).total


@dataclass
class LojReport:
    lhs: float
    rhs_primary: float
    cutoff_term: float
    gamma_term: float
    constant: float
    theta: float
    gamma: float
    R: float
    entire: bool
    dissipation: float
    graph_norm: float
    extras: dict = field(default_factory=dict)

    @property
    def rhs(self):
        return self.rhs_primary + self.cutoff_term + self.gamma_term

    def to_dict(self):
        d = asdict(self)
        d["rhs"] = self.rhs
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _ratio(a, b):
    if b > 0:
        return a / b
    return 0.0 if a == 0 else float("inf")


def evaluate_loj(shrinker, u, theta=DEFAULT_THETA, R="entire", gamma=DEFAULT_GAMMA,
                 beta0=DEFAULT_BETA0, alpha=0.5, ell=4, C_ell=10.0, F_base=None) -> LojReport:
    """Evaluate the entire (``R="entire"``) or localized inequality for the graph of ``u``.

    A finite ``R`` at or beyond the largest node radius is the entire
    regime on a truncated grid; the error terms are still reported.  A
    smaller ``R`` must satisfy ``1 <= R <= r_ell(M) - 1`` on conical bases.

    Raises
    ------
    HypothesisViolationError
        When the graph norm of ``u`` is not below ``beta0``.
    """
    _check_theta(theta)
    if not 1.0 < gamma < 2.0:
        raise InvalidArgumentError(f"gamma = {gamma} must lie in (1, 2)")
    g = shrinker.grid
    vals = _values(u)
    size = graph_norm(shrinker, u, alpha)
    if size >= beta0:
        raise HypothesisViolationError(f"graph norm {size:.4g} is not below beta0 = {beta0}",
                                       failed=("graph_norm",))
    M = Hypersurface(g, vals)
    entire = isinstance(R, str)
    if entire and R != "entire":
        raise InvalidArgumentError(f"R must be a number or 'entire', got {R!r}")
    extras = {}
    if not entire:
        R = float(R)
        if R < 1.0:
            raise InvalidArgumentError("R must be at least 1")
        cap = float(np.max(g.radius))
        if R < cap - 1e-9 and shrinker.conical:
            from .scales import conical_scale
            r_ell = conical_scale(M, shrinker, beta0, ell, C_ell).value
            extras["conical_scale"] = r_ell
            if R > r_ell - 1:
                raise InvalidArgumentError(f"R = {R} exceeds conical scale - 1 = {r_ell - 1:.4g}")
    F0 = gaussian_area(Hypersurface(g)) if F_base is None else F_base
    lhs = abs(gaussian_area(M) - F0)
    D = dissipation(M, None if entire else R)
    primary = D ** (1.0 / (2 * (1 - theta)))
    if entire:
        cut = gam = 0.0
        Rv = float("inf")
    else:
        cut, gam = localization_terms(R, g.n, theta, gamma)
        Rv = R
    return LojReport(lhs, primary, cut, gam, _ratio(lhs, primary + cut + gam), theta, gamma, Rv,
                     entire, D, size, extras)


# ---------------------------------------------------------------------------
# exponent fit


def tls_fit(x, y, groups=None):
    """Total least squares line ``y = slope x + intercept``.

    With ``groups`` each group is centred separately (one intercept per
    group, common slope); the returned intercept is their mean.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    groups = np.zeros(x.size, dtype=int) if groups is None else np.asarray(groups)
    labels = np.unique(groups)
    xm = np.array([x[groups == k].mean() for k in labels])
    ym = np.array([y[groups == k].mean() for k in labels])
    pos = np.searchsorted(labels, groups)
    _, _, Vt = np.linalg.svd(np.stack([x - xm[pos], y - ym[pos]], axis=1), full_matrices=False)
    nx, ny = Vt[-1]
    slope = -nx / ny
    return float(slope), float(np.mean(ym - slope * xm))


@dataclass(frozen=True)
class FamilySpec:
    """Random family of heights.

    ``kind="stable"`` draws ``shapes`` random mixtures of the first
    ``modes`` eigenfields of ``L`` with eigenvalue below ``-1/4``, tapers
    them beyond ``taper_radius`` and removes the kernel.  ``kind="kernel"``
    draws mixtures of kernel fields.  Each shape is normalized in ``L^2_W``
    and taken at ``count / shapes`` log-spaced amplitudes.
    """

    kind: str = "stable"
    count: int = 24
    shapes: int = 4
    amplitudes: tuple = (1e-4, 3e-3)
    modes: int = 4
    taper_radius: float = 5.0
    seed: int = 0

    def scaled(self, factor):
        lo, hi = self.amplitudes
        return FamilySpec(self.kind, self.count, self.shapes, (lo * factor, hi * factor),
                          self.modes, self.taper_radius, self.seed)


def _taper(grid, radius):
    if radius is None or not np.isfinite(grid.r_max):
        return np.ones(grid.size)
    return 1.0 - smooth_step((grid.radius - radius) / 2.0)


def family_fields(shrinker, spec: FamilySpec, op=None):
    """Heights of a family, shape ``(count, N)``, with the shape index of each row."""
    g = shrinker.grid
    op = op or assemble_L(shrinker)
    rng = np.random.default_rng(spec.seed)
    K = kernel_basis(op)
    per = max(1, spec.count // spec.shapes)
    amps = np.tile(np.geomspace(spec.amplitudes[0], spec.amplitudes[1], per), spec.shapes)
    groups = np.repeat(np.arange(spec.shapes), per)
    if spec.kind == "kernel":
        if K.dimension == 0:
            raise InsufficientSignalError("the base has no kernel")
        shapes = rng.standard_normal((spec.shapes, K.dimension)) @ K.eigenfields.T
    elif spec.kind == "stable":
        count = min(g.size, K.dimension + spec.modes + 4)
        spec_ = spectrum(op, count)
        stable = spec_.eigenfields[:, spec_.eigenvalues < -0.25][:, :spec.modes]
        if stable.shape[1] == 0:
            raise InsufficientSignalError("no stable modes found")
        raw = rng.standard_normal((spec.shapes, stable.shape[1])) @ stable.T
        raw = raw * _taper(g, spec.taper_radius)[None, :]
        shapes = np.array([v - projection_Pi(v, K, op).values for v in raw]) if K.dimension else raw
    else:
        raise InvalidArgumentError(f"unknown family kind {spec.kind!r}")
    shapes = shapes / np.sqrt(np.sum(op.mass[None, :] * shapes ** 2, axis=1))[:, None]
    return amps[:, None] * shapes[groups], groups, K, op


@dataclass
class ThetaFit:
    slope: float
    intercept: float
    theta_hat: float
    slope_band: tuple
    theta_band: tuple
    used: int
    dropped: int
    log_rhs: list
    log_lhs: list
    groups: list
    family: dict
    max_graph_norm: float = float("nan")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _theta_from_slope(s):
    return 1.0 - 1.0 / s if s != 0 else float("-inf")


def fit_theta(shrinker, family: FamilySpec = FamilySpec(), bootstrap=200,
              measure_norms=True) -> ThetaFit:
    """Fit ``log |F(M) - F(S)|`` against ``log ||M(u)||_{L^2_W}`` over a family.

    The slope ``s`` gives ``theta_hat = 1 - 1/s``.  The band is the central
    95% of a seeded bootstrap of the fit.  The largest graph norm in the
    family is reported, not enforced: the fit probes the energy landscape
    and the cone norm of L^2_W-normalized modes is large on truncated grids.
    """
    fields, groups, K, op = family_fields(shrinker, family)
    g = shrinker.grid
    if K.dimension:
        off = [op.norm(v - projection_Pi(v, K, op).values) for v in fields]
        if max(off[i] / max(op.norm(v), 1e-300) for i, v in enumerate(fields)) < 1e-8:
            raise InsufficientSignalError("every sample lies in the kernel of L")
    F0 = gaussian_area(Hypersurface(g))
    xs, ys, gs = [], [], []
    dropped = 0
    sizes = []
    for i, v in enumerate(fields):
        sizes.append(graph_norm(shrinker, v) if measure_norms else float("nan"))
        lhs = abs(gaussian_area(Hypersurface(g, v)) - F0)
        rhs = op.norm(euler_lagrange_values(g, v))
        if lhs < LHS_FLOOR or rhs <= 0:
            dropped += 1
            continue
        xs.append(np.log(rhs))
        ys.append(np.log(lhs))
        gs.append(int(groups[i]))
    if len(xs) < MIN_SAMPLES:
        raise InsufficientSignalError(f"only {len(xs)} samples above the lhs floor {LHS_FLOOR}")
    x, y, gr = np.array(xs), np.array(ys), np.array(gs)
    slope, icpt = tls_fit(x, y, gr)
    rng = np.random.default_rng(family.seed + 1)
    boots = []
    for _ in range(bootstrap):
        idx = rng.integers(0, len(x), len(x))
        if np.ptp(x[idx]) > 0:
            boots.append(tls_fit(x[idx], y[idx], gr[idx])[0])
    lo, hi = np.percentile(boots, [2.5, 97.5]) if boots else (slope, slope)
    return ThetaFit(slope, icpt, _theta_from_slope(slope), (float(lo), float(hi)),
                    (_theta_from_slope(lo), _theta_from_slope(hi)), len(x), dropped,
                    x.tolist(), y.tolist(), gr.tolist(), asdict(family),
                    float(np.max(sizes)) if measure_norms else float("nan"))


# ---------------------------------------------------------------------------
# final inequality


@dataclass
class FinalLojReport:
    lhs: float
    rhs: float
    constant: float
    exponent: float
    theta: float
    theta_prime: float
    dissipation: float
    shrinker_scale: float
    rough_scale: float
    Theta: float
    localized: dict
    pointwise: dict

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def pointwise_phi_bound(M: Hypersurface, radius, ell=4, samples=200):
    """Compare ``(1 + |z|) sup_{B_{r_z}(z)} |phi|`` with its interpolation bound.

    ``r_z = 1 / (1 + |z|)`` and ``psi(z)^2`` is the weighted dissipation in
    ``B_{r_z}(z)``.  The bound is
    ``(1+|z|)^{n/2+1} e^{|z|^2/8} psi + (1+|z|)^{-a n/2} (e^{|z|^2/8} psi)^a (1+|z|)^{(1-ell)(1-a)}``
    with ``a = ell / (ell + n)``.  Nodes of ``M`` inside ``B_radius`` are
    subsampled evenly to at most ``samples``.
    """
    g = M.grid
    n = g.n
    b = M.bundle()
    pos = np.real(b.position)
    phi = np.abs(np.real(b.phi))
    dens = g.weights * np.real(b.area_element) * gaussian_density(pos, n)
    rad = np.linalg.norm(pos, axis=1)
    idx = np.flatnonzero(rad <= radius)
    if idx.size > samples:
        idx = idx[np.linspace(0, idx.size - 1, samples).round().astype(int)]
    tree = cKDTree(pos)
    a = exponent_a(ell, n)
    lhs = np.zeros(idx.size)
    rhs = np.zeros(idx.size)
    for i, k in enumerate(idx):
        z = 1.0 + rad[k]
        ball = tree.query_ball_point(pos[k], 1.0 / z)
        psi = np.sqrt(np.sum(dens[ball] * phi[ball] ** 2))
        e = np.exp(rad[k] ** 2 / 8) * psi
        lhs[i] = z * np.max(phi[ball])
        rhs[i] = z ** (n / 2 + 1) * e + z ** (-a * n / 2) * e ** a * z ** ((1 - ell) * (1 - a))
    ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
    return {"nodes": idx.tolist(), "lhs": lhs.tolist(), "rhs": rhs.tolist(),
            "max_ratio": float(np.max(ratio)) if ratio.size else 0.0, "exponent_a": a}


def final_loj_check(M: Hypersurface, shrinker, theta_prime=1.0 / 6.0, b=1e-3, r_lower=5.0,
                    ell=4, C_ell=10.0, samples=200, F_base=None) -> FinalLojReport:
    """Evaluate the final localized inequality for ``M``.

    ``theta = 3 theta'``.  The hypotheses are the core graphical condition
    and ``R(M) <= rough scale - 1``; when both scales are saturated at the
    grid edge the second holds vacuously.

    Raises
    ------
    HypothesisViolationError
        Naming each failed hypothesis.
    """
    from .scales import core_graphical_check, rough_conical_scale, scale_cap, shrinker_scale

    theta = 3.0 * theta_prime
    _check_theta(theta)
    g = M.grid
    R = shrinker_scale(M)
    rough = rough_conical_scale(M, ell, C_ell, shrinker.core_radius)
    core = core_graphical_check(M, shrinker, b, r_lower, ell, C_ell)
    cap = scale_cap(g)
    both_saturated = R.flag == "saturated" and rough.value >= cap - 1e-12
    failed = []
    if not core.holds:
        failed.append("core_graphical")
    if R.flag == "out-of-regime":
        failed.append("shrinker_scale_out_of_regime")
    elif R.value > rough.value - 1 and not both_saturated:
        failed.append(f"scale_gap: R = {R.value:.4g} > rough scale - 1 = {rough.value - 1:.4g}")
    if failed:
        raise HypothesisViolationError("final inequality hypotheses fail: " + "; ".join(failed),
                                       failed=tuple(failed))
    F0 = gaussian_area(Hypersurface(g)) if F_base is None else F_base
    lhs = abs(gaussian_area(M) - F0)
    D = dissipation(M)
    expo = 1.0 / (2 * (1 - theta_prime))
    rhs = D ** expo
    T = theta_constant(theta)
    R_loc = R.value / T ** 2
    gam = internal_gamma(theta)
    cut, gterm = localization_terms(max(R_loc, 1e-300), g.n, theta, gam)
    localized = {"R": R_loc, "gamma": gam, "cutoff_term": cut, "gamma_term": gterm,
                 "primary": dissipation(M, R_loc) ** (1 / (2 * (1 - theta))),
                 "cutoff_over_rhs": _ratio(cut, rhs), "gamma_over_rhs": _ratio(gterm, rhs)}
    pw = pointwise_phi_bound(M, T * R_loc, ell, samples)
    return FinalLojReport(lhs, rhs, _ratio(lhs, rhs), expo, theta, theta_prime, D, R.value,
                          rough.value, T, localized, pw)
