import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knotfield import dynamics
from knotfield.dynamics import (EnsembleSpec, ParticleState, SimulationParams, generate_ensemble,
                                integrate_trajectory, lorentz_rhs, run_ensemble)
from knotfield.errors import DomainError, FieldPropagationError
from knotfield.fields import KnotField
from knotfield.verification import NoField, UniformB

vec = st.lists(st.floats(-3, 3), min_size=3, max_size=3).map(np.array)


@given(vec, vec, vec, st.floats(-50, 50))
@settings(max_examples=100, deadline=None)
def test_lorentz_rhs_examples(U, E, B, kappa):
    state = ParticleState(np.zeros(3), U)
    dX, dU = lorentz_rhs(state, np.zeros(3), np.zeros(3), kappa)
    np.testing.assert_array_equal(dU, 0)
    np.testing.assert_allclose(dX, state.V)
    dX, dU = lorentz_rhs(ParticleState(np.zeros(3), np.zeros(3)), E, B, kappa)
    np.testing.assert_allclose(dU, kappa * E)
    _, dU = lorentz_rhs(ParticleState(np.zeros(3), 0.5 * B), np.zeros(3), B, kappa)
    np.testing.assert_allclose(dU, 0, atol=1e-12)


@given(vec)
def test_speed_is_below_one(U):
    s = ParticleState(np.zeros(3), U * 100)
    assert np.linalg.norm(s.V) < 1


def test_from_velocity_rejects_light_speed():
    with pytest.raises(DomainError):
        ParticleState.from_velocity([0, 0, 0], [0.6, 0.8, 0.0])
    s = ParticleState.from_velocity([0, 0, 0], [0.6, 0.0, 0.0])
    assert s.gamma == pytest.approx(1.25)


def test_params_validation():
    with pytest.raises(DomainError):
        SimulationParams(kappa=1.0, t_start=1.0, t_end=1.0)
    with pytest.raises(DomainError):
        SimulationParams(kappa=1.0, t_start=0.0, t_end=1.0, rel_tol=0.0)


def test_free_motion():
    s = ParticleState.from_velocity([1.0, 2.0, -1.0], [0.5, -0.3, 0.1], T=0.5)
    rec = integrate_trajectory(s, NoField(), SimulationParams(kappa=0.0, t_start=-1.0, t_end=2.0))
    expected = s.X + np.outer(rec.T - 0.5, s.V)
    np.testing.assert_allclose(rec.X, expected, atol=1e-12)
    assert rec.T[0] == -1.0 and rec.T[-1] == 2.0
    assert np.all(np.diff(rec.T) > 0)


def test_cyclotron_radius_and_frequency():
    kappa, b0 = 2.0, 1.5
    U0 = np.array([3.0, 0.0, 0.0])
    gamma = np.sqrt(1 + U0 @ U0)
    omega = kappa * b0 / gamma
    T = 2 * np.pi / omega
    params = SimulationParams(kappa=kappa, t_start=0.0, t_end=3 * T, rel_tol=1e-11, abs_tol=1e-13)
    rec = integrate_trajectory(ParticleState(np.zeros(3), U0), UniformB(b0), params)
    radius = np.linalg.norm(U0) / (kappa * b0)
    centre = np.array([0.0, -radius, 0.0])  # positive charge gyrates clockwise about +z
    np.testing.assert_allclose(np.linalg.norm(rec.X[:, :2] - centre[:2], axis=1), radius, rtol=1e-8)
    np.testing.assert_allclose(rec(3 * T)[0, :3], [0, 0, 0], atol=1e-7)
    np.testing.assert_allclose(rec(T / 4)[0, 3:6], [0.0, -3.0, 0.0], atol=1e-7)


def test_work_energy_identity_in_knot_field():
    fld = KnotField("1/2,-1/2,-3/2,R")
    params = SimulationParams(kappa=30.0, t_start=-1.0, t_end=1.0)
    rec = integrate_trajectory(ParticleState([0.01, 0.01, 0.01], np.zeros(3)), fld, params)
    g = rec.gamma
    assert abs((g[-1] - g[0]) - (rec.work[-1] - rec.work[0])) < 10 * params.rel_tol * g[-1]
    assert np.all(rec.speed < 1)


def test_reversibility():
    fld = KnotField("1,0,1,I")
    fwd = integrate_trajectory(ParticleState.from_velocity([0.2, -0.1, 0.3], [0.1, 0.2, 0.0]), fld,
                               SimulationParams(kappa=5.0, t_start=0.0, t_end=1.0))
    end = ParticleState(fwd.X[-1], fwd.U[-1], T=1.0)
    back = integrate_trajectory(end, fld, SimulationParams(kappa=5.0, t_start=1.0, t_end=0.0))
    np.testing.assert_allclose(back.X[0], fwd.X[0], atol=100 * 1e-9)
    np.testing.assert_allclose(back.U[0], fwd.U[0], atol=100 * 1e-9)


def test_dense_output_matches_samples():
    fld = KnotField("0,0,1,I")
    rec = integrate_trajectory(ParticleState([0.1, 0, 0], np.zeros(3)), fld,
                               SimulationParams(kappa=10.0, t_start=-0.5, t_end=0.5))
    np.testing.assert_allclose(rec(rec.T[::7])[:, :3], rec.X[::7], atol=1e-12)
    with pytest.raises(DomainError):
        rec(0.6)


def test_nan_field_raises():
    class Broken:
        def __call__(self, t, x):
            return np.full(3, np.nan), np.zeros(3)

    with pytest.raises(FieldPropagationError):
        integrate_trajectory(ParticleState(np.zeros(3), np.zeros(3)), Broken(),
                             SimulationParams(kappa=1.0, t_start=0.0, t_end=1.0))


def test_initial_time_outside_window():
    with pytest.raises(DomainError):
        integrate_trajectory(ParticleState(np.zeros(3), np.zeros(3), T=2.0), NoField(),
                             SimulationParams(kappa=1.0, t_start=0.0, t_end=1.0))


def test_parallel_ensemble_is_deterministic_and_ordered():
    states = generate_ensemble(EnsembleSpec("random_ball", radius=0.2, count=4, seed=3))
    params = SimulationParams(kappa=10.0, t_start=0.0, t_end=0.5)
    fld = KnotField("0,0,1,R")
    serial = run_ensemble(states, fld, params, workers=1)
    parallel = run_ensemble(states, fld, params, workers=2)
    again = run_ensemble(states, fld, params, workers=1)
    for a, b, c in zip(serial, parallel, again):
        np.testing.assert_array_equal(a.X, b.X)
        assert a.summary() == c.summary()


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv("KNOTFIELD_THREADS", "3")
    assert dynamics.default_workers() == 3
    monkeypatch.setenv("KNOTFIELD_THREADS", "x")
    with pytest.raises(DomainError):
        dynamics.default_workers()


# --- initial conditions ---

def test_sphere18_is_antipodal_and_on_sphere():
    pts = np.array([s.X for s in generate_ensemble(EnsembleSpec("sphere18", radius=0.7))])
    assert pts.shape == (18, 3)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 0.7)
    for p in pts:
        assert np.min(np.linalg.norm(pts + p, axis=1)) < 1e-15
    assert len({tuple(np.round(p, 12)) for p in pts}) == 18


def test_sphere18_rmax_resolution():
    pts = generate_ensemble(EnsembleSpec("sphere18", radius="rmax"), rmax_hint=0.4)
    assert np.linalg.norm(pts[0].X) == pytest.approx(0.4)
    with pytest.raises(DomainError):
        generate_ensemble(EnsembleSpec("sphere18", radius="rmax"))


def test_circle_is_planar():
    states = generate_ensemble(EnsembleSpec("circle", count=10, radius=0.5, normal=(0, 0, 1)))
    pts = np.array([s.X for s in states])
    np.testing.assert_allclose(pts[:, 2], 0, atol=1e-15)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 0.5)
    np.testing.assert_allclose(pts.sum(axis=0), 0, atol=1e-14)


def test_line_includes_origin():
    states = generate_ensemble(EnsembleSpec("line", spacing="rmax", direction=(0, 0, 2)), rmax_hint=0.8)
    z = np.array([s.X[2] for s in states])
    np.testing.assert_allclose(z, 0.2 * np.arange(-5, 6), atol=1e-15)


def test_radial_line_ladder_and_speed_check():
    states = generate_ensemble(EnsembleSpec("radial_line", speed="rmax", direction=(0, 1, 0)), rmax_hint=0.6)
    v = np.array([s.V for s in states])
    np.testing.assert_allclose(v[:, 1], 0.15 * np.arange(-5, 6), atol=1e-15)
    with pytest.raises(DomainError):  # 5 * 0.8 / 4 reaches light speed
        generate_ensemble(EnsembleSpec("radial_line", speed="rmax"), rmax_hint=0.8)
    with pytest.raises(DomainError):
        generate_ensemble(EnsembleSpec("radial_line", speed=0.25))


@pytest.mark.parametrize("kind,count", [("radial_plane", 8), ("radial_space", 6), ("radial_space", 12),
                                        ("radial_space", 18), ("radial_space", 20)])
def test_radial_sets_are_symmetric(kind, count):
    states = generate_ensemble(EnsembleSpec(kind, speed=0.75, count=count))
    v = np.array([s.V for s in states])
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), 0.75)
    np.testing.assert_allclose(v.sum(axis=0), 0, atol=1e-12)
    with pytest.raises(DomainError):
        generate_ensemble(EnsembleSpec(kind, speed=1.0, count=count))


def test_random_ball_deterministic_and_inside():
    spec = EnsembleSpec("random_ball", radius=0.01, count=20, seed=7)
    a = generate_ensemble(spec)
    b = generate_ensemble(spec)
    pts = np.array([s.X for s in a])
    assert pts.shape == (20, 3) and np.all(np.linalg.norm(pts, axis=1) <= 0.01)
    np.testing.assert_array_equal(pts, [s.X for s in b])
    other = np.array([s.X for s in generate_ensemble(EnsembleSpec("random_ball", radius=0.01, count=20, seed=8))])
    assert not np.array_equal(pts, other)


def test_ensemble_spec_json_round_trip():
    spec = EnsembleSpec("explicit", count=1, states=(((0.1, 0.0, 0.0), (0.0, 0.5, 0.0)),))
    assert EnsembleSpec.from_json(spec.to_json()) == spec
    with pytest.raises(DomainError):
        EnsembleSpec("cube")


def test_trajectory_csv(tmp_path):
    fld = KnotField("0,0,1,I")
    states = generate_ensemble(EnsembleSpec("sphere18", radius=0.1))[:2]
    recs = run_ensemble(states, fld, SimulationParams(kappa=1.0, t_start=0.0, t_end=0.2))
    path = tmp_path / "t.csv"
    dynamics.write_trajectories_csv(recs, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == dynamics.TRAJECTORY_CSV_HEADER
    assert len(rows) == 1 + sum(r.T.size for r in recs)
    assert {r[0] for r in rows[1:]} == {"0", "1"}
