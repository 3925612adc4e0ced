"""Drift Laplacians of the Gaussian-weighted inner product.

``L_gamma u = Delta u - x . grad u / 2 + gamma u`` and the Jacobi operator
``L = L_{1/2} + |A|^2`` are discretised by finite volumes:

    (L_gamma u)_i = -(K u)_i / m_i + gamma u_i,

where ``m_i`` is the quadrature weight times the Gaussian density at node
``i`` and ``K`` is the stiffness matrix with conductances
``rho(face) * |face| / distance`` between neighbouring cells.  Since
``rho^{-1} div(rho grad u) = Delta u - x . grad u / 2``, the drift is carried
by the density on the faces and ``diag(m) L`` is exactly symmetric.  The
symmetric form ``S = M^{1/2} L M^{-1/2}`` is what the eigensolvers see.

The nonlinear operator ``M(u)`` (the Euler-Lagrange operator of the
Gaussian area along normal graphs) is ``phi / v * J * rho(q)/rho(p)``
evaluated with the normal-graph formulas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import (AmbiguousKernelError, InvalidArgumentError, SolvabilityError)
from .fields import ScalarField
from .geometry import gaussian_density, graph_geometry, normal_graph_geometry
from .weighted_spaces import sobolev_norm

DENSE_LIMIT = 10_000
KERNEL_REL_TOL = 1e-3
SOLVABILITY_TOL = 1e-8
COMPLEX_STEP = 1e-20


def _grid_of(base):
    if hasattr(base, "surface"):
        return base.surface.grid
    return getattr(base, "grid", base)


def _rho(pos, n):
    return gaussian_density(pos, n)


def _edges(grid, boundary):
    """Neighbour pairs with conductance ``rho(face) |face| / distance``.

    Returns ``(i, j, kappa, ghost)`` where ``ghost[i]`` is the conductance
    to a zero-valued exterior cell (used by the Dirichlet variant only).
    """
    n = grid.n
    N = grid.size
    ghost = np.zeros(N)
    kind = grid.kind
    if kind == "line" or grid.profile == "cylinder":
        h = next(iter(grid.spacing.values()))
        s = grid.params[0]
        mid = 0.5 * (s[1:] + s[:-1])
        i = np.arange(N - 1)
        if kind == "line":
            face, fpos = 1.0, np.column_stack([mid, np.zeros_like(mid)])
            end_pos = np.array([[s[0] - h / 2, 0.0], [s[-1] + h / 2, 0.0]])
        else:
            a = grid.radius_param
            face = 2 * np.pi * a
            fpos = np.column_stack([np.full_like(mid, a), np.zeros_like(mid), mid])
            end_pos = np.array([[a, 0.0, s[0] - h / 2], [a, 0.0, s[-1] + h / 2]])
        kap = _rho(fpos, n) * face / h
        if boundary == "dirichlet":
            ghost[[0, -1]] = _rho(end_pos, n) * face / (h / 2)
        return i, i + 1, kap, ghost
    if kind in ("circle", "closed-curve"):
        P = grid.position
        i = np.arange(N)
        j = np.roll(i, -1)
        dist = np.linalg.norm(P[j] - P[i], axis=1)
        if kind == "circle":
            dist = np.full(N, grid.radius_param * grid.spacing["theta"])
        kap = _rho(0.5 * (P[i] + P[j]), n) / dist
        if kind == "circle":
            kap = _rho(P[i], n) / dist
        return i, j, kap, ghost
    if kind == "plane-polar":
        nr, nt = grid.shape
        dr, dth = grid.spacing["r"], grid.spacing["theta"]
        r = grid.params[0]
        idx = np.arange(N).reshape(nr, nt)
        rf = r[:-1] + dr / 2
        krad = (_rho(np.column_stack([rf, 0 * rf, 0 * rf]), 2) * rf * dth / dr)
        ia = idx[:-1].ravel()
        ja = idx[1:].ravel()
        ka = np.repeat(krad, nt)
        kang = _rho(np.column_stack([r, 0 * r, 0 * r]), 2) * dr / (r * dth)
        ib = idx.ravel()
        jb = np.roll(idx, -1, axis=1).ravel()
        kb = np.repeat(kang, nt)
        if boundary == "dirichlet":
            re = r[-1] + dr / 2
            ghost[idx[-1]] = _rho(np.array([[re, 0, 0]]), 2)[0] * re * dth / (dr / 2)
        return np.r_[ia, ib], np.r_[ja, jb], np.r_[ka, kb], ghost
    if grid.profile == "sphere":
        R = grid.radius_param
        dt = grid.spacing["t"]
        t = grid.params[0]
        tf = t[:-1] + dt / 2
        i = np.arange(N - 1)
        # every point of the sphere has |x| = R
        kap = gaussian_density(np.array([[R, 0.0, 0.0]]), 2)[0] * 2 * np.pi * R * np.sin(tf) / (R * dt)
        return i, i + 1, kap, ghost
    raise InvalidArgumentError(f"no operator for grid kind {kind!r}")


@dataclass
class WeightedOperator:
    """Finite-volume ``L_gamma + potential`` on a base grid.

    Attributes
    ----------
    stiffness : sparse matrix
        Symmetric positive semidefinite ``K``.
    mass : ndarray
        ``m_i = weight_i * rho_i``.
    matrix : sparse matrix
        The operator on node values.
    symmetric : sparse matrix
        ``M^{1/2} matrix M^{-1/2}``.
    """

    grid: object
    gamma: float
    potential: np.ndarray
    stiffness: sp.csr_matrix
    mass: np.ndarray
    matrix: sp.csr_matrix
    symmetric: sp.csr_matrix
    boundary: str = "natural"

    @property
    def size(self):
        return self.grid.size

    def apply(self, u):
        vals = getattr(u, "values", u)
        return ScalarField(self.grid, self.matrix @ np.asarray(vals, dtype=float))

    def inner(self, u, v):
        a = getattr(u, "values", u)
        b = getattr(v, "values", v)
        return float(np.sum(self.mass * a * b))

    def norm(self, u):
        return np.sqrt(max(self.inner(u, u), 0.0))

    def dirichlet_energy(self, u):
        """Discrete ``int |grad u|^2 rho``."""
        a = np.asarray(getattr(u, "values", u), dtype=float)
        return float(a @ (self.stiffness @ a))

    def symmetry_defect(self):
        S = self.symmetric
        d = abs(S - S.T).max()
        return float(d / max(abs(S).max(), 1e-300))

    def diagonal_bound(self):
        return float(np.max(self.gamma + self.potential))


def _potential_values(grid, potential, gamma):
    if potential is None or (isinstance(potential, (int, float)) and potential == 0):
        return np.zeros(grid.size)
    if isinstance(potential, str):
        if potential not in ("A2", "|A|^2"):
            raise InvalidArgumentError(f"unknown potential {potential!r}")
        return np.sum(grid.curvatures ** 2, axis=1)
    if isinstance(potential, ScalarField):
        if potential.grid is not grid and potential.grid.key() != grid.key():
            raise InvalidArgumentError("potential lives on a different grid")
        return np.array(potential.values)
    p = np.asarray(potential, dtype=float)
    if p.ndim == 0:
        return np.full(grid.size, float(p))
    if p.shape != (grid.size,):
        raise InvalidArgumentError(f"potential has {p.size} values, grid has {grid.size} nodes")
    return p.copy()


def assemble_L(base, gamma=0.5, potential="A2", boundary="natural") -> WeightedOperator:
    """Assemble ``L_gamma + potential`` on the grid of a shrinker (or a bare grid).

    ``potential="A2"`` (default) adds the squared second fundamental form of
    the base, so ``assemble_L(shrinker)`` is the Jacobi operator ``L``;
    ``potential=None`` gives ``L_gamma``.  ``boundary="dirichlet"`` swaps the
    natural truncation condition for a zero exterior value.
    """
    if boundary not in ("natural", "dirichlet"):
        raise InvalidArgumentError("boundary must be 'natural' or 'dirichlet'")
    g = _grid_of(base)
    V = _potential_values(g, potential, gamma)
    i, j, kap, ghost = _edges(g, boundary)
    N = g.size
    off = sp.coo_matrix((np.r_[kap, kap], (np.r_[i, j], np.r_[j, i])), shape=(N, N)).tocsr()
    deg = np.asarray(off.sum(axis=1)).ravel() + ghost
    K = (sp.diags(deg) - off).tocsr()
    m = g.weights * gaussian_density(g.position, g.n)
    A = (sp.diags(-1.0 / m) @ K + sp.diags(gamma + V)).tocsr()
    d = 1 / np.sqrt(m)
    S = (-(sp.diags(d) @ K @ sp.diags(d)) + sp.diags(gamma + V)).tocsr()
    S = ((S + S.T) * 0.5).tocsr()
    return WeightedOperator(g, float(gamma), V, K, m, A, S, boundary)


# ---------------------------------------------------------------------------
# spectra


@dataclass
class SpectralResult:
    """Eigenpairs in descending order; eigenfields are L^2_W-orthonormal columns."""

    eigenvalues: np.ndarray
    eigenfields: np.ndarray
    residuals: np.ndarray
    grid: object
    tol: float = None

    @property
    def dimension(self):
        return len(self.eigenvalues)

    def field(self, k):
        return ScalarField(self.grid, self.eigenfields[:, k])

    def to_dict(self):
        out = {"eigenvalues": [float(x) for x in self.eigenvalues],
               "residuals": [float(x) for x in self.residuals]}
        if self.tol is not None:
            out["kernel_dimension"] = self.dimension
            out["tol"] = float(self.tol)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _fix_signs(V):
    k = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[k, np.arange(V.shape[1])])
    s[s == 0] = 1
    return V * s


def spectrum(op: WeightedOperator, count: int) -> SpectralResult:
    """Top ``count`` eigenpairs of ``op`` in L^2_W."""
    N = op.size
    if count < 1 or count > N:
        raise InvalidArgumentError(f"count must lie in [1, {N}]")
    if N <= DENSE_LIMIT or count > N // 4:
        w, Y = la.eigh(op.symmetric.toarray(), subset_by_index=[N - count, N - 1])
    else:
        sigma = op.diagonal_bound() + 0.01
        v0 = np.ones(N) / np.sqrt(N)
        w, Y = sla.eigsh(op.symmetric.tocsc(), k=count, sigma=sigma, which="LM", v0=v0)
    order = np.argsort(w)[::-1]
    w, Y = w[order], Y[:, order]
    E = _fix_signs(Y / np.sqrt(op.mass)[:, None])
    R = op.matrix @ E - E * w
    res = np.sqrt(np.sum(op.mass[:, None] * R * R, axis=0))
    return SpectralResult(w, E, res, op.grid)


def _gap_scale(vals):
    d = -np.diff(vals)
    d = d[d > 1e-2]
    return float(np.median(d)) if d.size else 1.0


def kernel_basis(op: WeightedOperator, tol=None, count=None) -> SpectralResult:
    """Eigenfields with ``|lambda| < tol``.

    ``tol`` defaults to ``1e-3`` times the typical spacing of the computed
    spectrum.  The spectrum is extended until it reaches clearly negative
    values.

    Raises
    ------
    AmbiguousKernelError
        If an eigenvalue outside the kernel lies within ``2 tol`` of zero.
    """
    N = op.size
    count = count or min(N, 10)
    while True:
        spec = spectrum(op, count)
        t = tol if tol is not None else KERNEL_REL_TOL * _gap_scale(spec.eigenvalues)
        if spec.eigenvalues[-1] < -2 * t or count >= N:
            break
        count = min(N, 2 * count)
    lam = spec.eigenvalues
    inside = np.abs(lam) < t
    near = (~inside) & (np.abs(lam) < 2 * t)
    if np.any(near):
        raise AmbiguousKernelError(
            f"eigenvalue {lam[near][0]:.3g} lies within 2*tol = {2 * t:.3g} of zero")
    return SpectralResult(lam[inside], spec.eigenfields[:, inside], spec.residuals[inside],
                          op.grid, tol=t)


def projection_Pi(u, K: SpectralResult, op: WeightedOperator | None = None) -> ScalarField:
    """L^2_W projection ``sum_i <u, e_i> e_i`` onto the span of ``K``."""
    vals = np.asarray(getattr(u, "values", u), dtype=float)
    g = K.grid
    m = op.mass if op is not None else g.weights * gaussian_density(g.position, g.n)
    if K.dimension == 0:
        return ScalarField(g, np.zeros(g.size))
    coef = K.eigenfields.T @ (m * vals)
    return ScalarField(g, K.eigenfields @ coef)


@dataclass
class FredholmSolution:
    u: ScalarField
    residual: float
    h2_constant: float
    kernel_dimension: int


def fredholm_solve(op: WeightedOperator, f, kernel: SpectralResult | None = None) -> FredholmSolution:
    """Solve ``L u = f`` with ``u`` orthogonal to the kernel.

    Returns the solution with the relative residual ``|Lu - f|_W / |f|_W``
    and the ratio ``|u|_{H^2_W} / |f|_W``.

    Raises
    ------
    SolvabilityError
        If ``f`` has a kernel component above ``1e-8 |f|_W``.
    """
    g = op.grid
    fv = np.asarray(getattr(f, "values", f), dtype=float)
    K = kernel if kernel is not None else kernel_basis(op)
    fn = op.norm(fv)
    if fn == 0:
        return FredholmSolution(ScalarField(g, np.zeros(g.size)), 0.0, 0.0, K.dimension)
    proj = projection_Pi(fv, K, op).values
    pn = op.norm(proj)
    if pn > SOLVABILITY_TOL * fn:
        raise SolvabilityError(f"kernel component {pn:.3g} exceeds {SOLVABILITY_TOL:g} * |f|_W = {SOLVABILITY_TOL * fn:.3g}")
    sm = np.sqrt(op.mass)
    b = sm * (fv - proj)
    Y = K.eigenfields * sm[:, None]
    if op.size <= DENSE_LIMIT:
        S = op.symmetric.toarray() + Y @ Y.T
        y = la.solve(S, b, assume_a="sym")
    else:
        y = sla.spsolve(op.symmetric.tocsc(), b)
    u = y / sm
    u -= projection_Pi(u, K, op).values
    r = op.matrix @ u - fv
    uf = ScalarField(g, u)
    return FredholmSolution(uf, op.norm(r) / fn, sobolev_norm(uf, 2) / fn, K.dimension)


# ---------------------------------------------------------------------------
# Euler-Lagrange operator


def euler_lagrange_M(base, u) -> ScalarField:
    """``M(u) = phi_graph / v * J * rho(q) / rho(p)`` on the base nodes.

    ``phi_graph / v`` is the base-normal component of ``H_vec + x_perp / 2``
    on the normal graph of ``u``; ``J`` its area element and the last factor
    the Gaussian weight ratio.
    """
    g = _grid_of(base)
    ng = normal_graph_geometry(g, u)
    return ScalarField(g, ng.phi / ng.v * ng.area_element * ng.weight_ratio)


def euler_lagrange_values(grid, u):
    """``M(u)`` from the parametric graph formulas; accepts complex heights."""
    geo = graph_geometry(grid, u)
    phi = 0.5 * geo["support"] - geo["H"]
    q = geo["position"]
    p = grid.position
    ratio = np.exp(-(np.sum(q * q, axis=1) - np.sum(p * p, axis=1)) / 4)
    return phi * geo["ndot"] * geo["J"] * ratio


def complex_step_linearization(grid, u, func=euler_lagrange_values, h=COMPLEX_STEP):
    """Directional derivative of ``func`` at 0 along ``u`` (complex step)."""
    v = np.asarray(getattr(u, "values", u), dtype=float)
    return np.imag(func(grid, 1j * h * v)) / h


def stencil_candidates(grid):
    """A superset of the nodes each finite-difference row can read, shape ``(N, K)``.

    Entries of ``-1`` pad short rows.
    """
    N = grid.size
    kind = grid.kind
    if kind == "plane-polar":
        nr, nt = grid.shape
        ir, it = np.divmod(np.arange(N), nt)
        cols = []
        for a in range(-3, 2):
            for b in (-1, 0, 1):
                rr = ir + a
                c = rr * nt + (it + b) % nt
                cols.append(np.where((rr >= 0) & (rr < nr), c, -1))
        for b in (-1, 0, 1):
            cols.append(np.where(ir == 0, (it + nt // 2 + b) % nt, -1))
        return np.column_stack(cols)
    i = np.arange(N)
    periodic = kind in ("circle", "closed-curve")
    width = 2 if periodic or grid.profile == "sphere" else 3
    cols = []
    for a in range(-width, width + 1):
        j = i + a
        cols.append(j % N if periodic else np.where((j >= 0) & (j < N), j, -1))
    return np.column_stack(cols)


def _greedy_colors(cand):
    """Colour nodes so that no two candidates of one row share a colour."""
    N = cand.shape[0]
    members = [[] for _ in range(N)]  # rows reading each node
    for row, cs in enumerate(cand):
        for c in cs:
            if c >= 0:
                members[c].append(row)
    color = np.full(N, -1)
    for node in range(N):
        used = {color[c] for row in members[node] for c in cand[row] if c >= 0 and color[c] >= 0}
        k = 0
        while k in used:
            k += 1
        color[node] = k
    return color


def complex_step_jacobian(grid, func=euler_lagrange_values, h=COMPLEX_STEP, check=True):
    """Sparse Jacobian of the local operator ``func`` at 0 by coloured complex-step probes.

    Raises ``InvalidArgumentError`` if the assembled matrix does not reproduce
    a direct complex-step derivative along a random direction (which would
    mean ``func`` reads beyond ``stencil_candidates``).
    """
    cand = stencil_candidates(grid)
    color = _greedy_colors(cand)
    N = grid.size
    rows, cols, vals = [], [], []
    for k in range(color.max() + 1):
        probe = (color == k).astype(float)
        resp = np.imag(func(grid, 1j * h * probe)) / h
        # each row reads at most one node of colour k
        hit = (cand >= 0) & (color[np.maximum(cand, 0)] == k)
        r, slot = np.nonzero(hit)
        rows.append(r)
        cols.append(cand[r, slot])
        vals.append(resp[r])
    J = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N))
    J.eliminate_zeros()
    if check:
        v = np.random.default_rng(0).standard_normal(N)
        direct = np.imag(func(grid, 1j * h * v)) / h
        err = np.max(np.abs(J @ v - direct)) / max(np.max(np.abs(direct)), 1e-300)
        if err > 1e-10:
            raise InvalidArgumentError(f"operator reads outside the stencil superset (defect {err:.2e})")
    return J


def linearization_check(base, u, eps=(1e-2, 1e-3, 1e-4, 1e-5), op: WeightedOperator | None = None):
    """Quadratic remainder ``|M(eps u) - eps L u|_W / eps^2`` over an eps ladder.

    The linear term uses the exact derivative of the discrete ``M`` at 0
    (complex step), so the remainder is purely nonlinear.  The distance
    between that derivative and the finite-volume ``L`` is reported as
    ``consistency``.
    """
    g = _grid_of(base)
    v = np.asarray(getattr(u, "values", u), dtype=float)
    op = op or assemble_L(g)
    Lu = complex_step_linearization(g, v)
    defects = []
    for e in eps:
        Me = euler_lagrange_M(g, e * v).values
        defects.append(op.norm(Me - e * Lu))
    defects = np.array(defects)
    e = np.asarray(eps, dtype=float)
    scaled = defects / e ** 2
    floor = 1e-12 * max(1.0, op.norm(v))
    live = defects > floor
    ratios = [float(defects[k] / defects[k + 1]) if live[k + 1] else float("nan")
              for k in range(len(e) - 1)]
    if live.sum() >= 2:
        order = float(np.polyfit(np.log(e[live]), np.log(defects[live]), 1)[0])
    else:
        order = float("inf")
    # bounded remainder over eps^2, and at least quadratic decay; flat bases
    # are odd under u -> -u so their remainder is cubic
    sl = scaled[live]
    bounded = bool(np.all(sl[1:] <= 1.2 * sl[0])) if sl.size else True
    return {"eps": e.tolist(), "defects": defects.tolist(), "scaled": scaled.tolist(),
            "ratios": ratios, "order": order, "quadratic": bounded and order >= 1.8,
            "consistency": op.norm(Lu - op.matrix @ v)}
