import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shrinker_lab import (Hypersurface, ScalarField, canonical_shrinker, extend_to_cone,
                          rough_approx_check, solve_model_problem)
from shrinker_lab.errors import (FilteringFailureError, InsufficientDomainError,
                                 InvalidArgumentError)
from shrinker_lab.extension import (blend_polynomial, damping, extension_ratio,
                                    model_problem_bound, random_annulus_field)

PLANE = canonical_shrinker("plane", 2)
G = PLANE.grid
X = G.position[:, 0]


def test_linear_field_extends_to_its_cone():
    dec = extend_to_cone(ScalarField(G, X), 6.0)
    th = np.arctan2(dec.link[:, 1], dec.link[:, 0])
    assert np.allclose(dec.c, np.cos(th), atol=1e-12)
    assert np.max(np.abs(dec.f.values[G.radius >= 2])) < 1e-10
    assert max(dec.meta["seam"].values()) == 0


def test_blend_seam_identities():
    s, k = 0.3, -1.2
    assert blend_polynomial(0.0, s, k) == 0
    assert blend_polynomial(0.0, s, k, 1) == s
    assert blend_polynomial(0.0, s, k, 2) == k
    assert damping(0.0) == 1 and damping(3.0) == 0


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_extension_ratio_is_bounded(seed):
    rep = extension_ratio(random_annulus_field(G, seed), 6.0)
    assert max(rep["seam"].values()) <= 1e-10
    assert rep["ratio"] <= 3


def test_extension_needs_room():
    with pytest.raises(InsufficientDomainError):
        extend_to_cone(ScalarField(G, X), 10.0)


def test_rough_approx_check_on_base_and_raised_plane():
    rep = rough_approx_check(Hypersurface(G), PLANE, R=5.0, s=0.1, b=1e-3, r_lower=5.0)
    assert rep["holds"] and rep["first_violation"] is None
    c = 1e-4
    rep = rough_approx_check(Hypersurface(G, np.full(G.size, c)), PLANE, R=5.0, s=c / 4,
                             b=1e-3, r_lower=5.0)
    assert not rep["phi_condition"] and not rep["holds"]
    assert rep["first_violation"]["radius"] < 0.1


def test_model_bound_grows_with_data():
    u = random_annulus_field(G, 3)
    out = [model_problem_bound(ScalarField(G, t * u.values)) for t in (1.0, 2.0, 4.0)]
    bs = [o[0] for o in out]
    sizes = [o[1] for o in out]
    assert bs == sorted(bs) and sizes == sorted(sizes)
    assert np.allclose(np.array(sizes) / np.array(bs), sizes[0] / bs[0], rtol=1e-10)


def test_model_problem_modes():
    s1 = solve_model_problem(1)
    assert abs(s1.c - 1) < 1e-12 and s1.regular_at_origin
    for m in (0, 2):
        s = solve_model_problem(m)
        assert abs(s.slope + 2) < 0.2
        assert abs(s.c - s.c_identity) < 1e-6 * abs(s.c)
    lines = s.to_csv().splitlines()
    assert lines[0] == "r,u_m,u_m_over_r" and len(lines) == 2001


def test_model_problem_errors():
    with pytest.raises(InvalidArgumentError):
        solve_model_problem(-1)
    with pytest.raises(InvalidArgumentError):
        solve_model_problem(1.5)
    with pytest.raises(InvalidArgumentError):
        solve_model_problem(2, r_max=20.0)
    with pytest.raises(FilteringFailureError):
        solve_model_problem(0, rtol=0.5)
