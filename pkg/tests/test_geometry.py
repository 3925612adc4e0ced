import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shrinker_lab import (Hypersurface, ScalarField, canonical_shrinker, entropy, gaussian_area,
                          geometry_bundle, normal_graph_geometry, phi_residual)
from shrinker_lab.errors import GraphOutOfReachError, InvalidArgumentError, InvalidGridError
from shrinker_lab.geometry import (EntropySearch, ToleranceWarning, area_growth_check,
                                   surface_from_text, surface_to_text)
from shrinker_lab.grids import circle_grid, closed_curve_grid, line_grid, plane_grid, sphere_grid


def test_round_circle_bundle():
    b = geometry_bundle(Hypersurface(circle_grid(math.sqrt(2), 256)))
    assert np.allclose(b.H, 1 / math.sqrt(2), atol=1e-12)
    assert np.allclose(b.support, math.sqrt(2), atol=1e-12)
    assert np.allclose(np.linalg.norm(b.normal, axis=1), 1, atol=1e-12)


def test_flat_line_bundle():
    b = geometry_bundle(Hypersurface(line_grid()))
    assert np.max(np.abs(b.H)) == 0
    assert np.max(np.abs(b.support)) == 0


def test_round_sphere_curvatures():
    R = 2.0
    b = geometry_bundle(Hypersurface(sphere_grid(R, 400)))
    assert np.allclose(b.H, 2 / R, atol=1e-10)
    assert np.allclose(b.A2, 2 / R ** 2, atol=1e-10)


def test_sin_graph_curvature_second_order():
    errs = []
    for h in (0.02, 0.01):
        g = line_grid(h, 12.0)
        x = g.params[0]
        b = geometry_bundle(Hypersurface(g, np.sin(x)))
        exact = -np.sin(x) / (1 + np.cos(x) ** 2) ** 1.5
        inner = np.abs(x) < 10
        errs.append(np.max(np.abs(np.abs(b.H[inner]) - np.abs(exact[inner]))))
    assert errs[1] < 1e-3
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_repeated_nodes_rejected():
    pts = np.column_stack([np.cos(np.linspace(0, 6, 16)), np.sin(np.linspace(0, 6, 16))])
    pts[3] = pts[2]
    with pytest.raises(InvalidGridError):
        closed_curve_grid(pts)


def test_phi_examples():
    assert np.max(np.abs(phi_residual(Hypersurface(circle_grid(math.sqrt(2)))).values)) < 1e-14
    unit = phi_residual(Hypersurface(closed_curve_grid(
        np.column_stack([np.cos(np.arange(4096) * 2 * np.pi / 4096),
                         np.sin(np.arange(4096) * 2 * np.pi / 4096)]))))
    assert np.allclose(unit.values, -0.5, atol=1e-6)
    c = 0.3
    g = plane_grid(0.2, 32, 10.0)
    assert np.allclose(phi_residual(Hypersurface(g, np.full(g.size, c))).values, c / 2, atol=1e-12)


def test_gaussian_areas():
    assert abs(gaussian_area(Hypersurface(line_grid())) - 1) < 1e-8
    assert abs(gaussian_area(Hypersurface(circle_grid(math.sqrt(2)))) - math.sqrt(2 * math.pi) * math.exp(-0.5)) < 1e-6
    assert abs(gaussian_area(Hypersurface(sphere_grid(2.0, 2000))) - 4 / math.e) < 1e-6


def test_tolerance_warning():
    with pytest.warns(ToleranceWarning):
        gaussian_area(Hypersurface(line_grid(0.05, 10.0)), tol=1e-20)


def test_entropy_examples():
    val, _, _ = entropy(Hypersurface(line_grid(0.05, 12.0)))
    assert abs(val - 1) < 1e-6
    val, center, scale = entropy(Hypersurface(circle_grid(math.sqrt(2))))
    assert abs(val - math.sqrt(2 * math.pi) * math.exp(-0.5)) < 1e-6
    assert np.allclose(center, 0) and abs(scale - 1) < 1e-12
    val, _, _ = entropy(Hypersurface(sphere_grid(2.0, 1000)))
    assert abs(val - 4 / math.e) < 1e-5


def test_entropy_empty_search():
    with pytest.raises(InvalidArgumentError):
        entropy(Hypersurface(line_grid()), EntropySearch(n_centers=0))


def test_normal_graph_plane_constant():
    S = canonical_shrinker("plane", 2, grid={"dr": 0.2, "n_theta": 32})
    c = 0.2
    G = normal_graph_geometry(S, np.full(S.grid.size, c))
    assert np.allclose(G.H, 0, atol=1e-14)
    assert np.allclose(G.normal, S.grid.normal)
    assert np.allclose(G.support, c) and np.allclose(G.area_element, 1)


def test_normal_graph_concentric_circle():
    S = canonical_shrinker("circle", 1)
    e = 0.1
    G = normal_graph_geometry(S, np.full(S.grid.size, e))
    assert np.allclose(G.H, 1 / (math.sqrt(2) + e), atol=1e-12)
    assert np.allclose(G.area_element, (math.sqrt(2) + e) / math.sqrt(2), atol=1e-12)


def test_normal_graph_out_of_reach():
    S = canonical_shrinker("circle", 1)
    with pytest.raises(GraphOutOfReachError):
        normal_graph_geometry(S, np.full(S.grid.size, -1.5))


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(0.2, 2.0), st.floats(0, 6.28))
def test_line_graph_matches_parametric_curve(a, k, ph):
    S = canonical_shrinker("line", 1)
    x = S.grid.params[0]
    u = a * np.sin(k * x + ph)
    du = a * k * np.cos(k * x + ph)
    ddu = -a * k * k * np.sin(k * x + ph)
    G = normal_graph_geometry(S, ScalarField(S.grid, u, exact={"d1": du, "d11": ddu}))
    s = np.sign(S.grid.normal[0, 1])
    expect_H = -s * ddu / (1 + du ** 2) ** 1.5
    assert np.allclose(G.H, expect_H, atol=1e-10)
    assert np.allclose(G.area_element, np.sqrt(1 + du ** 2), atol=1e-12)


def test_area_growth_examples():
    line = Hypersurface(line_grid())
    rep = area_growth_check(line, 1.0, radii=(1.0, 2.0, 4.0))
    assert np.allclose(rep.ratios, 2.0, atol=1e-12)
    circ = Hypersurface(circle_grid(math.sqrt(2)))
    rep = area_growth_check(circ, 1.52, radii=(100.0,))
    assert abs(rep.ratios[0, 0] - 2 * math.pi * math.sqrt(2) / 100) < 1e-4
    g = line_grid(0.01, 12.0)
    x = g.params[0]
    a = 0.5
    rep = area_growth_check(Hypersurface(g, a * np.sin(x)), 1.0, radii=(1.0, 2.0, 4.0))
    assert 2 - 1e-6 <= rep.smallest_constant <= 2 * math.sqrt(1 + a * a) + 1e-6


def test_surface_text_roundtrip():
    g = plane_grid(0.5, 16, 10.0)
    M = Hypersurface(g, 0.01 * g.position[:, 0])
    back = surface_from_text(surface_to_text(M))
    assert back.grid.size == g.size
    assert np.array_equal(np.asarray(getattr(back.u, "values", back.u)),
                          np.asarray(getattr(M.u, "values", M.u)))
