import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knotfield import analysis
from knotfield.dynamics import EnsembleSpec, ParticleState, SimulationParams, integrate_trajectory
from knotfield.errors import DomainError
from knotfield.fields import KnotField, parse_configuration


def test_identical_directions_make_one_cluster():
    rep = analysis.cluster_directions(np.tile([0.3, 0.4, 0.5], (6, 1)))
    assert rep.n_clusters == 1
    assert rep.mean_spread == 0.0
    np.testing.assert_allclose(rep.directions[0], np.array([0.3, 0.4, 0.5]) / np.linalg.norm([0.3, 0.4, 0.5]))


def test_antipodal_groups_make_two_clusters():
    v = np.array([[0, 0, 0.5], [0.01, 0, 0.5], [0, 0, -0.5], [0, 0.02, -0.5]])
    rep = analysis.cluster_directions(v)
    assert rep.n_clusters == 2
    assert rep.members == [[0, 1], [2, 3]]
    assert np.all(rep.spreads > 0)


def test_slow_particles_are_unclustered():
    v = np.array([[0, 0, 0.5], [0, 0, 0.005], [0.5, 0, 0]])
    rep = analysis.cluster_directions(v)
    assert rep.n_clusters == 2
    assert rep.unclustered_fraction == pytest.approx(1 / 3)


def test_single_linkage_chains():
    ang = np.radians([0, 12, 24, 36])
    v = np.column_stack([np.cos(ang), np.sin(ang), np.zeros(4)]) * 0.5
    assert analysis.cluster_directions(v, 15).n_clusters == 1
    assert analysis.cluster_directions(v, 10).n_clusters == 4


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=30))
@settings(max_examples=100, deadline=None)
def test_beam_report_invariants(vs):
    v = np.array(vs)
    rep = analysis.cluster_directions(v)
    assert np.all(rep.spreads >= 0)
    assert rep.sizes.sum() + round(rep.unclustered_fraction * len(v)) == len(v)
    if rep.unclustered_fraction < 1:
        assert rep.n_clusters >= 1
    perm = analysis.cluster_directions(v)
    assert perm.members == rep.members


def test_empty_input_rejected():
    with pytest.raises(DomainError):
        analysis.cluster_directions(np.zeros((0, 3)))


def test_resample_is_uniform_in_arc_length():
    pts = np.array([[0, 0, 0], [1, 0, 0], [1, 3, 0]], dtype=float)
    out = analysis.resample_polyline(pts, 5)
    np.testing.assert_allclose(out, [[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 2, 0], [1, 3, 0]])


def test_hausdorff_simple():
    a = np.array([[0, 0, 0], [1, 0, 0]], dtype=float)
    b = np.array([[0, 0, 0], [1, 0, 0], [1, 2, 0]], dtype=float)
    assert analysis.hausdorff(a, b) == pytest.approx(2.0)
    assert analysis.hausdorff(a, a) == 0.0


def test_reversal_defect_identical_and_mismatched():
    paths = [np.cumsum(np.ones((10, 3)), axis=0), np.linspace([0, 0, 0], [0, 1, 2], 7)]
    assert analysis.time_reversal_defect(paths, paths) == 0.0
    with pytest.raises(DomainError):
        analysis.time_reversal_defect(paths, paths[:1])


def test_reversal_defect_is_exact_for_spin_zero_weights():
    # For (1;0,0)_I the field is symmetric under t -> -t for a particle starting at rest.
    fld = KnotField("1,0,0,I")
    rec = integrate_trajectory(ParticleState([0.1, 0.05, 0.2], np.zeros(3)), fld,
                               SimulationParams(kappa=10.0, t_start=-1.0, t_end=1.0))
    fw, bw = analysis.split_time_reversal([rec], 1.0)
    assert analysis.time_reversal_defect(fw, bw) < 1e-6


def test_reversal_defect_fires_with_initial_velocity():
    fld = KnotField("1,0,0,I")
    rec = integrate_trajectory(ParticleState.from_velocity([0.1, 0.05, 0.2], [0.3, 0, 0]), fld,
                               SimulationParams(kappa=10.0, t_start=-1.0, t_end=1.0))
    fw, bw = analysis.split_time_reversal([rec], 1.0)
    assert analysis.time_reversal_defect(fw, bw) > 0.05


def test_ensemble_defect_finds_rotation():
    fw = [np.linspace([0, 0, 0], [1, 0, 1], 20)]
    bw = [np.linspace([0, 0, 0], [-1, 0, 1], 20)]
    out = analysis.ensemble_reversal_defect(fw, bw)
    assert out["best_map"] == "rot_z" or out["defect"] == pytest.approx(0.0, abs=1e-12)
    assert out["defect"] < 1e-12


def test_maxwell_scan_linearity_and_negative_control():
    ev = analysis.sample_events(100, 4)
    a = analysis.maxwell_residual_scan("1,1,0,R", ev)
    b = analysis.maxwell_residual_scan("1/2,-1/2,1/2,I", ev)
    both = analysis.maxwell_residual_scan(parse_configuration(["1,1,0,R", "1/2,-1/2,1/2,I"]), ev)
    assert both.worst < 10 * (a.worst + b.worst) + 1e-9
    bad = analysis.maxwell_residual_scan(analysis.FlippedB(analysis.batch_provider("1,1,0,R")), ev)
    assert bad.max_relative["faraday"] > 10 * 1e-4 and bad.max_relative["ampere"] > 1e-1


def test_sample_events_deterministic():
    np.testing.assert_array_equal(analysis.sample_events(10, 3), analysis.sample_events(10, 3))
    ev = analysis.sample_events(1000, 1, radius=2.0)
    assert np.all(np.linalg.norm(ev[:, 1:], axis=1) <= 2.0)


def test_energy_scales_quadratically_and_is_conserved():
    one = analysis.energy_budget("1,0,1,I", [0.0, 0.7], n_radial=48, n_polar=24, n_azimuth=48)
    two = analysis.energy_budget(parse_configuration(["2*1,0,1,I"]), [0.0], n_radial=48, n_polar=24,
                                 n_azimuth=48)
    assert two.totals[0] == pytest.approx(4 * one.totals[0], rel=1e-12)
    assert one.totals[1] == pytest.approx(one.totals[0], rel=1e-3)
    assert np.all(one.tail_bounds >= 0)


def test_energy_requires_large_ball():
    with pytest.raises(DomainError):
        analysis.energy_budget("0,0,1,R", [0.0], radius=4.0)


def test_kappa_sweep_zero_row():
    spec = EnsembleSpec("radial_space", speed=0.5, count=6)
    rows = analysis.kappa_sweep("0,0,1,I", spec, [0.0, 10.0], t_span=(0.0, 0.5))
    assert rows[0]["max_speed"] == pytest.approx(0.5, abs=1e-12)
    assert rows[0]["beam"].n_clusters == 6
    assert rows[1]["max_speed"] > 0.5
    with pytest.raises(DomainError):
        analysis.kappa_sweep("0,0,1,I", spec, [])


def test_report_json(tmp_path):
    rep = analysis.cluster_directions(np.eye(3))
    path = tmp_path / "r.json"
    analysis.write_report({"beam": rep, "value": np.float64(1.5), "threshold": 0.05}, path)
    doc = json.load(open(path))
    assert doc["beam"]["n_clusters"] == 3 and doc["value"] == 1.5
