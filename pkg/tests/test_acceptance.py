"""Acceptance criteria 1-12 at their stated tolerances.

Each criterion is a function returning ``(passed, detail)``.  Under pytest
every criterion prints one ``PASS``/``FAIL`` line before asserting; running
the file directly prints the twelve lines and exits nonzero on any failure.
"""

import math
import sys

import numpy as np
import pytest

from shrinker_lab import (Hypersurface, ScalarField, SolvabilityError, assemble_L,
                          canonical_shrinker, evaluate_loj, final_loj_check, fit_theta,
                          fredholm_solve, gaussian_area, kernel_basis, normal_graph_geometry,
                          phi_residual, projection_Pi, solve_model_problem, spectrum,
                          verify_ecker_sobolev)
from shrinker_lab.errors import HypothesisViolationError
from shrinker_lab.extension import extension_ratio, random_annulus_field
from shrinker_lab.flow import (dissipation_check, integrated_bound_constant, measure_decay_rate,
                               run_flow)
from shrinker_lab.grids import closed_curve_grid, line_grid, plane_grid


def _max_phi(surface):
    return float(np.max(np.abs(phi_residual(surface).values)))


# ---------------------------------------------------------------------------


def criterion_1():
    """Certified round shrinkers, with an observed second-order refinement."""
    lines = []
    ok = True
    for kind, n, coarse, fine in [("circle", 1, {"n_theta": 512}, {"n_theta": 1024}),
                                  ("sphere", 2, {"n_t": 1000}, {"n_t": 2000}),
                                  ("line", 1, {"h": 0.1}, {"h": 0.05}),
                                  ("plane", 2, {"dr": 0.2, "n_theta": 64}, {"dr": 0.1, "n_theta": 128})]:
        d0 = _max_phi(canonical_shrinker(kind, n, grid=coarse).surface)
        d1 = _max_phi(canonical_shrinker(kind, n, grid=fine).surface)
        # analytic grids reproduce the shrinker to round-off, so no ratio is observable
        good = d1 <= 1e-8 and (d0 <= 1e-12 or d0 / d1 >= 3.5)
        ok &= good
        lines.append(f"{kind}:{d1:.1e}")
    # a circle rebuilt from sampled points differentiates the embedding by finite
    # differences; its defect exposes the order, but round-off floors it near
    # 1e-8, so the order is read where truncation dominates
    defects = []
    for N in (1024, 2048):
        t = np.arange(N) * 2 * np.pi / N
        pts = math.sqrt(2) * np.column_stack([np.cos(t), np.sin(t)])
        defects.append(_max_phi(Hypersurface(closed_curve_grid(pts))))
    ratio = defects[0] / defects[1]
    ok &= ratio >= 3.5
    lines.append(f"sampled circle ratio {ratio:.2f}")
    return ok, ", ".join(lines)


def criterion_2():
    line = gaussian_area(canonical_shrinker("line", 1).surface)
    circ = gaussian_area(canonical_shrinker("circle", 1).surface)
    sph = gaussian_area(canonical_shrinker("sphere", 2).surface)
    errs = (abs(line - 1), abs(circ - math.sqrt(2 * math.pi) * math.exp(-0.5)), abs(sph - 4 / math.e))
    ok = errs[0] <= 1e-8 and errs[1] <= 1e-6 and errs[2] <= 1e-6
    return ok, "errors line {:.1e}, circle {:.1e}, sphere {:.1e}".format(*errs)


def criterion_3():
    ev = [spectrum(assemble_L(canonical_shrinker("line", 1, grid=line_grid(h, 12.0))), 5).eigenvalues
          for h in (0.05, 0.025)]
    rich = (4 * ev[1] - ev[0]) / 3
    e_line = float(np.max(np.abs(rich - np.array([0.5, 0.0, -0.5, -1.0, -1.5]))))
    circ = canonical_shrinker("circle", 1)
    e_circ = float(np.max(np.abs(spectrum(assemble_L(circ), 5).eigenvalues
                                 - np.array([1.0, 0.5, 0.5, -1.0, -1.0]))))
    dims = {k: kernel_basis(assemble_L(canonical_shrinker(k, n))).dimension
            for k, n in (("line", 1), ("circle", 1), ("plane", 2))}
    ok = e_line <= 1e-3 and e_circ <= 1e-3 and dims == {"line": 1, "circle": 0, "plane": 2}
    return ok, f"line err {e_line:.1e}, circle err {e_circ:.1e}, kernel dims {dims}"


def _smooth_sample(rng, P):
    k = rng.normal(size=(3, P.shape[1]))
    c = rng.normal(size=4)
    v = c[0] + sum(c[j + 1] * np.cos(P @ k[j] + j) for j in range(3))
    return v * np.exp(-np.sum(P ** 2, axis=1) / rng.uniform(6, 20))


def criterion_4():
    rng = np.random.default_rng(4)
    bases = [canonical_shrinker("line", 1), canonical_shrinker("plane", 2)]
    ops = [assemble_L(S) for S in bases]
    kers = [kernel_basis(op) for op in ops]
    agree, worst_res = 0, 0.0
    for i in range(50):
        j = i % 2
        op, K, P = ops[j], kers[j], bases[j].grid.position
        f = _smooth_sample(rng, P)
        f = f - projection_Pi(f, K, op).values
        # half the suite keeps a kernel component of random size around the threshold
        if i % 4 >= 2:
            size = 10 ** rng.uniform(-10, -2)
            kdir = K.eigenfields[:, rng.integers(K.dimension)]
            f = f + size * op.norm(f) * kdir / op.norm(kdir)
        comp = op.norm(projection_Pi(f, K, op).values) / op.norm(f)
        try:
            sol = fredholm_solve(op, f, K)
            solved = True
            worst_res = max(worst_res, sol.residual)
        except SolvabilityError:
            solved = False
        agree += solved == (comp <= 1e-8)
    consts = []
    for g in (plane_grid(0.1, 128, 12.0), plane_grid(0.05, 256, 12.0)):
        S = canonical_shrinker("plane", 2, grid=g)
        op = assemble_L(S)
        K = kernel_basis(op)
        P = S.grid.position
        f = np.cos(P[:, 0]) * np.exp(-np.sum(P ** 2, axis=1) / 8)
        consts.append(fredholm_solve(op, f - projection_Pi(f, K, op).values, K).h2_constant)
    drift = abs(consts[1] / consts[0] - 1)
    ok = agree == 50 and worst_res <= 1e-8 and drift <= 0.1
    return ok, f"{agree}/50 verdicts agree, max residual {worst_res:.1e}, H2 constant drift {drift:.1e}"


def criterion_5():
    rng = np.random.default_rng(5)
    worst = 0.0
    for kind, n in (("line", 1), ("plane", 2), ("sphere", 2)):
        g = canonical_shrinker(kind, n).grid
        for _ in range(34 if kind != "sphere" else 32):
            k = rng.normal(size=(3, g.ambient_dim))
            c = rng.normal(size=5)
            v = c[0] + sum(c[j + 1] * np.cos(g.position @ k[j] + j) for j in range(3))
            if kind != "sphere":
                v = v * np.sqrt(1 + abs(c[4]) * g.radius ** 2)
            worst = max(worst, verify_ecker_sobolev(ScalarField(g, v))["ratio"])
    g = canonical_shrinker("line", 1).grid
    x = g.params[0]
    one = verify_ecker_sobolev(ScalarField(g, np.ones(g.size)))["lhs"]
    lin = verify_ecker_sobolev(ScalarField(g, x))["lhs"]
    ok = worst <= 1 + 1e-3 and abs(one - 2) <= 1e-6 and abs(lin - 12) <= 1e-6
    return ok, f"max ratio {worst:.4f} over 100 fields, lhs(1) = {one:.9f}, lhs(x) = {lin:.9f}"


def criterion_6():
    L = canonical_shrinker("line", 1)
    P = canonical_shrinker("plane", 2)
    x = L.grid.params[0]
    X = P.grid.position[:, 0]
    runs = [("line-He2", L, 0.01 * (x ** 2 - 2), "none", 1.0),
            ("line-He3", L, 1e-3 * (x ** 3 - 3 * x), "project-nonneg-modes", 1.0),
            ("plane-He2", P, 1e-3 * (X ** 2 - 2), "project-nonneg-modes", 0.4)]
    ok, parts = True, []
    for name, S, u0, stab, T in runs:
        checks = [dissipation_check(run_flow(S, u0, T, dt, stabilization=stab, track_scales=False))
                  for dt in (0.02, 0.01)]
        ratio = checks[0]["max_defect"] / checks[1]["max_defect"]
        good = 1.5 <= ratio <= 2.5
        if stab != "none":
            good &= all(c["monotone"] for c in checks)
        ok &= good
        parts.append(f"{name} {ratio:.3f}")
    return ok, "defect ratios " + ", ".join(parts)


def criterion_7():
    slopes = []
    for S in (canonical_shrinker("line", 1, grid=line_grid(0.05, 15.0)),
              canonical_shrinker("plane", 2, grid=plane_grid(0.1, 128, 15.0))):
        fit = fit_theta(S, measure_norms=False)
        slopes.append((fit.slope, fit.theta_hat))
    S = canonical_shrinker("line", 1, grid=line_grid(0.05, 15.0))
    x = S.grid.params[0]
    u = 1e-6 * (x ** 2 - 2)
    whole = evaluate_loj(S, u)
    capped = evaluate_loj(S, u, R=15.0)
    diff = max(abs(whole.lhs - capped.lhs), abs(whole.rhs_primary - capped.rhs_primary),
               abs(whole.rhs - capped.rhs))
    ok = all(abs(s - 2) <= 0.1 and abs(t - 0.5) <= 0.05 for s, t in slopes) and diff <= 1e-12
    return ok, (f"slopes line {slopes[0][0]:.4f}, plane {slopes[1][0]:.4f}; "
                f"entire vs R = r_max differ by {diff:.1e}")


def criterion_8():
    one = solve_model_problem(1)
    f_one = float(np.max(np.abs(one.u / one.r - one.c)))
    ok = abs(one.c - 1) <= 1e-12 and f_one <= 1e-12
    parts = [f"m=1 c-1 {one.c - 1:.1e}, |f| {f_one:.1e}"]
    for m in (0, 2, 3):
        a = solve_model_problem(m)
        b = solve_model_problem(m, r_max=160.0, rtol=1e-13)
        ok &= abs(a.slope + 2) <= 0.2 and abs(a.c - b.c) <= 1e-4
        parts.append(f"m={m} slope {a.slope:.3f}, dc {abs(a.c - b.c):.1e}")
    return ok, "; ".join(parts)


def criterion_9():
    S = canonical_shrinker("plane", 2)
    seam, ratio = 0.0, 0.0
    for i in range(20):
        rep = extension_ratio(random_annulus_field(S.grid, seed=i), 6.0)
        s = rep["seam"]
        seam = max(seam, s["value"], s["first"], s["second"])
        ratio = max(ratio, rep["ratio"])
    ok = seam <= 1e-10 and ratio <= 3
    return ok, f"max seam defect {seam:.1e}, max norm ratio {ratio:.3f}"


def _criterion_10_flow(S, dtau):
    X = S.grid.position[:, 0]
    return run_flow(S, 2e-5 * (X ** 2 - 2), 1.5, dtau, stabilization="project-nonneg-modes",
                    track_scales=False, store_snapshots=True, record_every=int(round(0.1 / dtau)))


def criterion_10():
    S = canonical_shrinker("plane", 2)
    coarse = _criterion_10_flow(S, 0.05)
    consts, admissible = [], 0
    for _, u in coarse.snapshots:
        try:
            rep = final_loj_check(Hypersurface(S.grid, u), S, F_base=coarse.F_base)
        except HypothesisViolationError:
            continue
        admissible += 1
        consts.append(rep.constant)
    spread = max(consts) / min(consts) if consts else math.inf
    fine = _criterion_10_flow(S, 0.025)
    c0 = integrated_bound_constant(coarse)["C"]
    c1 = integrated_bound_constant(fine)["C"]
    drift = abs(c1 / c0 - 1)
    ok = admissible == len(coarse.snapshots) and spread <= 2 and drift <= 0.2
    return ok, (f"{admissible}/{len(coarse.snapshots)} snapshots admissible, C spread {spread:.3f}, "
                f"integrated C {c0:.4e} vs {c1:.4e}")


def criterion_11():
    S = canonical_shrinker("line", 1)
    x = S.grid.params[0]
    trace = run_flow(S, 0.01 * (x ** 2 - 2), 2.0, 0.005, track_scales=False)
    d = measure_decay_rate(trace, (0.5, 2.0), 1.0 / 6.0)
    ok = d["beats_polynomial"] and abs(d["exponent"] + 1) <= 0.1
    return ok, f"exponent {d['exponent']:.4f}, polynomial bound exponent {d['bound_exponent']:.2f}"


def _parametric_curve(g, u, du, ddu, t):
    """Normal, support, mean curvature and area ratio of ``p + u nu`` by direct differentiation."""
    P, nu0 = g.position, g.normal
    if g.kind == "circle":
        R = g.radius_param
        p1 = R * np.column_stack([-np.sin(t), np.cos(t)])
        p2 = -P
        n1 = p1 / R * np.sign(np.sum(nu0 * P, axis=1))[:, None]
        n2 = -nu0
    else:
        p1 = np.tile([1.0, 0.0], (t.size, 1))
        p2 = n1 = n2 = np.zeros_like(p1)
    q1 = p1 + du[:, None] * nu0 + u[:, None] * n1
    q2 = p2 + ddu[:, None] * nu0 + 2 * du[:, None] * n1 + u[:, None] * n2
    speed = np.linalg.norm(q1, axis=1)
    T = q1 / speed[:, None]
    side = np.sign(np.sum(nu0 * np.column_stack([p1[:, 1], -p1[:, 0]]), axis=1))[:, None]
    nu = side * np.column_stack([T[:, 1], -T[:, 0]])
    dT = (q2 * speed[:, None] ** 2 - q1 * np.sum(q1 * q2, axis=1)[:, None]) / speed[:, None] ** 3
    dnu = side * np.column_stack([dT[:, 1], -dT[:, 0]])
    H = np.sum(dnu * q1, axis=1) / speed ** 2
    q = P + u[:, None] * nu0
    return nu, np.sum(q * nu, axis=1), H, speed / np.linalg.norm(p1, axis=1)


def criterion_12():
    rng = np.random.default_rng(12)
    worst = 0.0
    for kind in ("line", "circle"):
        S = canonical_shrinker(kind, 1)
        g = S.grid
        t = g.params[0]
        for _ in range(10):
            a = rng.uniform(-0.2, 0.2, 3)
            k = rng.integers(1, 4, 3) * (0.5 if kind == "line" else 1.0)
            ph = rng.uniform(0, 2 * np.pi, 3)
            u = sum(a[j] * np.sin(k[j] * t + ph[j]) for j in range(3))
            du = sum(a[j] * k[j] * np.cos(k[j] * t + ph[j]) for j in range(3))
            ddu = -sum(a[j] * k[j] ** 2 * np.sin(k[j] * t + ph[j]) for j in range(3))
            G = normal_graph_geometry(S, ScalarField(g, u, exact={"d1": du, "d11": ddu}))
            nu, sup, H, J = _parametric_curve(g, u, du, ddu, t)
            worst = max(worst, float(np.max(np.abs(G.normal - nu))), float(np.max(np.abs(G.support - sup))),
                        float(np.max(np.abs(G.H - H))), float(np.max(np.abs(G.area_element - J))))
    return worst <= 1e-6, f"max sup-norm mismatch {worst:.1e} over 20 graphs"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12]


def _line(i, ok, detail):
    return f"criterion {i:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.parametrize("index", range(1, 13))
def test_criterion(index, capsys):
    ok, detail = CRITERIA[index - 1]()
    with capsys.disabled():
        print("\n" + _line(index, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failures = 0
    for i, crit in enumerate(CRITERIA, 1):
        ok, detail = crit()
        failures += not ok
        print(_line(i, ok, detail), flush=True)
    sys.exit(1 if failures else 0)
