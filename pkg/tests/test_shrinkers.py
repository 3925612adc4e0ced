import math

import numpy as np
import pytest

from shrinker_lab import Hypersurface, canonical_shrinker, gaussian_area, phi_residual
from shrinker_lab.errors import InvalidArgumentError, NoRootError, NotConicalError
from shrinker_lab.grids import plane_grid
from shrinker_lab.shrinkers import asymptotic_cone, solve_profile_shrinker, sphere_family_phi


def test_round_radii():
    assert abs(canonical_shrinker("circle", 1).grid.radius_param - math.sqrt(2)) < 1e-15
    assert abs(canonical_shrinker("sphere", 2).grid.radius_param - 2) < 1e-15


def test_line_is_shrinker_with_unit_area():
    S = canonical_shrinker("line", 1)
    assert np.max(np.abs(phi_residual(S.surface).values)) == 0
    assert abs(gaussian_area(S.surface) - 1) < 1e-8


def test_cylinder_is_shrinker():
    S = canonical_shrinker("cylinder", 2)
    assert np.max(np.abs(phi_residual(S.surface).values)) < 1e-12
    assert abs(gaussian_area(S.surface) - math.sqrt(2 * math.pi) * math.exp(-0.5)) < 1e-6


def test_unsupported_kind():
    with pytest.raises(InvalidArgumentError):
        canonical_shrinker("torus", 2)
    with pytest.raises(InvalidArgumentError):
        canonical_shrinker("circle", 2)


def test_sphere_family_changes_sign_once():
    for n in (1, 2):
        R = np.linspace(0.5, 4, 700)
        phi = sphere_family_phi(R, n)
        flips = R[np.flatnonzero(np.diff(np.sign(phi)))]
        assert flips.size == 1
        assert abs(flips[0] - math.sqrt(2 * n)) < 0.01


def test_shooting_round_seed():
    S, rec = solve_profile_shrinker(math.sqrt(2))
    assert abs(rec.r0 - math.sqrt(2)) < 1e-6
    assert rec.max_phi < 1e-6


def test_shooting_nonround_closed_curve():
    S, rec = solve_profile_shrinker(0.44, target=(2, 3), bracket=(0.43, 0.46))
    assert rec.max_phi < 1e-6
    r = np.linalg.norm(S.grid.position, axis=1)
    assert r.max() - r.min() > 0.5
    # closed: first and last nodes are neighbours
    gap = np.linalg.norm(S.grid.position[0] - S.grid.position[-1])
    assert gap < 5e-3


def test_shooting_empty_bracket():
    with pytest.raises(NoRootError):
        solve_profile_shrinker(0.65, target=(2, 3), bracket=(0.6, 0.7))


def test_cone_of_line_and_plane():
    rep = asymptotic_cone(canonical_shrinker("line", 1))
    assert np.allclose(np.sort(rep.link[:, 0]), [-1, 1]) and np.allclose(rep.link[:, 1], 0)
    assert np.all(rep.w_max == 0)
    rep = asymptotic_cone(canonical_shrinker("plane", 2))
    assert np.allclose(np.linalg.norm(rep.link[:, :2], axis=1), 1) and np.allclose(rep.link[:, 2], 0)


def test_cone_decay_slope_of_grafted_end():
    g = plane_grid(0.1, 64, 40.0)
    r = g.radius
    w = np.where(r > 2, 1 / np.maximum(r, 1e-9), 0.5)
    rep = asymptotic_cone(Hypersurface(g, w), radii=np.linspace(5, 35, 10))
    assert abs(rep.slope + 1) < 0.05


def test_compact_has_no_cone():
    with pytest.raises(NotConicalError):
        asymptotic_cone(canonical_shrinker("sphere", 2))
