import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shrinker_lab import (ScalarField, canonical_shrinker, cone_decompose, holder_norm,
                          verify_ecker_sobolev, verify_interpolation)
from shrinker_lab.errors import InsufficientDomainError, InvalidArgumentError
from shrinker_lab.grids import line_grid, plane_grid
from shrinker_lab.weighted_spaces import (cutoff, exponent_a, exponent_b, r_tilde, smooth_step,
                                          smooth_step_derivatives, sobolev_norm, weighted_inner)

LINE = line_grid()
PLANE = plane_grid(0.1, 128, 12.0)


def test_smooth_step_is_c2():
    t = np.array([0.0, 1.0])
    d1, d2 = smooth_step_derivatives(t)
    assert np.all(d1 == 0) and np.all(d2 == 0)
    assert smooth_step(0.5) == 0.5
    s = np.linspace(0, 1, 2001)
    fd = np.gradient(smooth_step(s), s)
    assert np.max(np.abs(fd - smooth_step_derivatives(s)[0])) < 1e-5
    assert np.all(cutoff(np.array([0.5, 1.0]), 1.0) == 0) and cutoff(2.0, 1.0) == 1


def test_constant_on_line():
    rep = holder_norm(ScalarField(LINE, np.ones(LINE.size)), ("hom", 0, 0.5, 0.0))
    assert rep.components["sup_0"] == 1 and rep.components["semi_0"] == 0
    assert rep.total == 1


def test_inverse_radius_sup_term():
    u = 1 / r_tilde(PLANE.radius)
    rep = holder_norm(ScalarField(PLANE, u), ("hom", 0, 0.5, 1.0))
    assert abs(rep.components["sup_0"] - 1) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(0.1, 3), st.floats(0.1, 0.9))
def test_norm_total_is_sum_of_nonneg_components(a, k, alpha):
    u = ScalarField(LINE, a * np.sin(k * LINE.params[0]) / (1 + LINE.params[0] ** 2))
    rep = holder_norm(u, "hom", 2, alpha, 1.0)
    assert all(v >= 0 for v in rep.components.values())
    assert math.isclose(rep.total, sum(rep.components.values()))


def test_subsampled_pairs_bound_dense_pairs():
    g = plane_grid(0.5, 32, 10.0)
    u = ScalarField(g, np.sin(g.position[:, 0]) * np.exp(-g.radius ** 2 / 20))
    dense = holder_norm(u, "hom", 1, 0.5, 1.0, max_pairs=None)
    sparse = holder_norm(u, "hom", 1, 0.5, 1.0, max_pairs=200)
    assert sparse.pairs_subsampled and not dense.pairs_subsampled
    for key in dense.components:
        assert sparse.components[key] <= dense.components[key] + 1e-15


def test_unknown_norm_kind():
    with pytest.raises(InvalidArgumentError):
        holder_norm(ScalarField(LINE, np.ones(LINE.size)), "sobolev")
    with pytest.raises(InvalidArgumentError):
        holder_norm(ScalarField(LINE, np.ones(LINE.size)), "CS")


def test_cone_decompose_pure_cone():
    d = cone_decompose(ScalarField(PLANE, PLANE.position[:, 0]), 1.0)
    th = np.arctan2(d.link[:, 1], d.link[:, 0])
    assert np.allclose(d.c, np.cos(th), atol=1e-12)
    assert np.max(np.abs(d.f.values[PLANE.radius >= 2])) < 1e-12


def test_cone_decompose_with_inverse_tail():
    r = PLANE.radius
    x = PLANE.position[:, 0]
    d = cone_decompose(ScalarField(PLANE, x + 1 / r), 1.0)
    th = np.arctan2(d.link[:, 1], d.link[:, 0])
    assert np.allclose(d.c, np.cos(th), atol=1e-4)
    far = r >= 2
    assert np.allclose(d.f.values[far] * r[far], 1, atol=2e-3)
    assert holder_norm(d, "CS").total < np.inf


def test_cone_decompose_needs_room():
    with pytest.raises(InsufficientDomainError):
        cone_decompose(ScalarField(PLANE, PLANE.position[:, 0]), 7.0)


def test_gaussian_sobolev_norms():
    x = LINE.params[0]
    assert abs(sobolev_norm(ScalarField(LINE, np.ones(LINE.size))) - 1) < 1e-8
    assert abs(sobolev_norm(ScalarField(LINE, x)) - math.sqrt(2)) < 1e-8
    assert abs(sobolev_norm(ScalarField(LINE, x), 1) - math.sqrt(3)) < 1e-6
    assert abs(weighted_inner(np.ones(LINE.size), x, LINE)) < 1e-14


def test_ecker_analytic_cases():
    x = LINE.params[0]
    r1 = verify_ecker_sobolev(ScalarField(LINE, np.ones(LINE.size)))
    r2 = verify_ecker_sobolev(ScalarField(LINE, x))
    assert abs(r1["lhs"] - 2) < 1e-6 and abs(r1["rhs"] - 4) < 1e-6
    assert abs(r2["lhs"] - 12) < 1e-6 and abs(r2["rhs"] - 24) < 1e-6
    circ = canonical_shrinker("circle", 1).grid
    assert abs(verify_ecker_sobolev(ScalarField(circ, np.ones(circ.size)))["ratio"] - 0.5) < 1e-12


def test_interpolation_extremal_trig():
    g = line_grid(0.002, 12.0)
    K = 8.0
    rep = verify_interpolation(ScalarField(g, np.sin(K * g.params[0])), (1, 2))
    assert abs(rep["constant"] - 1) < 1e-3


def test_interpolation_quadratic():
    g = line_grid(0.01, 12.0)
    rep = verify_interpolation(ScalarField(g, g.params[0] ** 2), (1, 2), radius=2.0)
    assert 0 < rep["constant"] <= 4


def test_interpolation_mixed_bump():
    g = line_grid(0.01, 12.0)
    rep = verify_interpolation(ScalarField(g, np.exp(-g.params[0] ** 2 / 0.05)), ("L1Ck", 2))
    m = rep["members"][0]
    assert m["a"] == exponent_a(2, 1) == 2 / 3 and m["b"] == exponent_b(2, 1) == 1 / 3
    assert math.isfinite(rep["constant"]) and rep["constant"] > 0


def test_interpolation_rejects_bad_orders():
    with pytest.raises(InvalidArgumentError):
        verify_interpolation(ScalarField(LINE, LINE.params[0]), (2, 1))
