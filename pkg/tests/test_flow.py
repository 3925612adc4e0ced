import numpy as np
import pytest

from shrinker_lab import (canonical_shrinker, dissipation_check, measure_decay_rate, run_flow,
                          step_rescaled_flow)
from shrinker_lab.errors import InsufficientSignalError, InvalidArgumentError
from shrinker_lab.flow import RescaledFlow, integrated_bound_constant

LINE = canonical_shrinker("line", 1)
X = LINE.grid.params[0]
SMALL_PLANE = canonical_shrinker("plane", 2, grid={"dr": 0.25, "n_theta": 32})


def test_constant_height_step():
    c, dt = 1e-3, 4e-4
    u = np.full(LINE.grid.size, c)
    out = step_rescaled_flow(LINE, u, dt, mode="explicit").values
    assert np.allclose(out, c * (1 + dt / 2), rtol=1e-12)
    dt = 0.01
    out = step_rescaled_flow(LINE, u, dt).values
    assert np.allclose(out, c / (1 - dt / 2), rtol=1e-10)


def test_zero_is_fixed():
    for S in (LINE, SMALL_PLANE):
        out = step_rescaled_flow(S, np.zeros(S.grid.size), 0.01).values
        assert np.max(np.abs(out)) == 0


def test_step_limits():
    with pytest.raises(InvalidArgumentError):
        RescaledFlow(LINE, 1e-2, mode="explicit")
    with pytest.raises(InvalidArgumentError):
        RescaledFlow(LINE, 0.1)
    with pytest.raises(InvalidArgumentError):
        RescaledFlow(LINE, 0.01, mode="leapfrog")
    with pytest.raises(InvalidArgumentError):
        RescaledFlow(LINE, 0.01, stabilization="clip")


def test_stabilized_mode_two_decays_at_half_rate():
    dt = 0.01
    flow = RescaledFlow(LINE, dt, stabilization="project-nonneg-modes")
    u = 1e-6 * (X * X - 2)
    new = flow.step(u)
    inner = np.abs(X) < 4
    ratio = new[inner] / u[inner]
    assert np.allclose(ratio, np.exp(-dt / 2), atol=2e-3)


def test_zero_initial_data_gives_constant_trace():
    tr = run_flow(LINE, np.zeros(LINE.grid.size), 0.1, 0.01, track_scales=False)
    F = tr.column("F")
    assert len(tr.records) == 11
    assert np.all(F == F[0]) and abs(F[0] - tr.F_base) == 0
    with pytest.raises(InsufficientSignalError):
        measure_decay_rate(tr)


def test_stabilized_mode_two_energy_descends():
    u0 = 0.01 * (X * X - 2)
    tr = run_flow(LINE, u0, 18.0, 0.05, stabilization="project-nonneg-modes", track_scales=False)
    assert tr.blowup is None
    F = tr.column("F")
    assert np.all(np.diff(F) <= 1e-15)
    assert F[-1] - tr.F_base < 1e-10
    assert dissipation_check(tr)["monotone"]
    size = tr.column("L2W")
    assert np.all(size <= size[0] * np.exp(-0.4 * tr.tau) * (1 + 1e-12))
    R = tr.column("R")
    assert np.all(np.diff(R[20:]) >= 0)


def test_constant_perturbation_blows_up():
    tr = run_flow(LINE, np.full(LINE.grid.size, 0.01), 20.0, 0.05, track_scales=False)
    assert tr.blowup is not None
    assert tr.blowup["tau"] < 20.0
    assert tr.records[-1].tau < tr.blowup["tau"]
    assert "last_valid" in tr.blowup and "last_valid" not in tr.sidecar()["blowup"]


def test_out_of_reach_start_rejected():
    S = canonical_shrinker("circle", 1)
    with pytest.raises(InvalidArgumentError):
        run_flow(S, np.full(S.grid.size, 0.5), 0.1, 0.01)


def test_trace_serialization_and_bound_constant():
    u0 = 1e-3 * (X * X - 2)
    tr = run_flow(LINE, u0, 1.0, 0.05, stabilization="project-nonneg-modes", track_scales=False)
    lines = tr.to_csv().strip().split("\n")
    assert lines[0].split(",")[:2] == ["tau", "F"] and len(lines) == len(tr.records) + 1
    ib = integrated_bound_constant(tr)
    assert ib["C"] > 0 and np.isfinite(ib["C"])


def test_tracked_scales_on_plane():
    g = SMALL_PLANE.grid
    u0 = 1e-4 * (g.position[:, 0] ** 2 - 2)
    tr = run_flow(SMALL_PLANE, u0, 0.1, 0.05, stabilization="project-nonneg-modes")
    for r in tr.records:
        assert 0 < r.r_rough and 0 < r.r_conical and 0 < r.R
