import math

import numpy as np
import pytest

from oracles import first_overlap_dense
from threatgrid.clustering import search_mask
from threatgrid.grid import serialize_frame
from threatgrid.pipeline import PipelineConfig
from threatgrid.prediction import PredictionConfig
from threatgrid.sim import (
    FRAME_PERIOD, NOISELESS, NoiseConfig, ScenarioError, ScenarioParams, ScenarioResult, UndefinedRiTTR,
    actor_cells, build_scenario, cluster_heading_lag, iter_frames, lagged_headings, rittr, run_scenario,
    synthesize_frame,
)

KINDS = ("turning-in", "turning-over", "straight-crossing")


def cfg(horizon=3.0, phi_deg=0.0):
    return PipelineConfig(prediction=PredictionConfig(horizon, math.radians(phi_deg)))


@pytest.mark.parametrize("ours,prior,expected", [(2.1, 0.4, 4.25), (0.8, 0.5, 0.60), (1.1, 0.5, 1.20),
                                                 (0.7, 0.7, 0.0)])
def test_rittr_values(ours, prior, expected):
    assert rittr(ours, prior) == pytest.approx(expected, abs=1e-9)


def test_rittr_undefined():
    with pytest.raises(UndefinedRiTTR):
        rittr(1.0, 0.0)
    with pytest.raises(UndefinedRiTTR):
        rittr(-0.1, 0.5)


def test_rittr_scale_invariant():
    rng = np.random.default_rng(0)
    for a, b, k in rng.uniform(0.1, 5, (100, 3)):
        assert rittr(k * a, k * b) == pytest.approx(rittr(a, b), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_toc_matches_dense_overlap_sweep(kind):
    sc = build_scenario(kind)
    dense = first_overlap_dense(sc.ego, sc.actor, sc.duration)
    assert dense is not None
    assert abs(sc.toc - dense) <= 2e-3
    assert 0 < sc.toc < sc.duration


def test_straight_crossing_far_offset_raises():
    with pytest.raises(ScenarioError):
        build_scenario("straight-crossing", ScenarioParams(crossing_x=500.0))


def test_overlap_at_start_raises():
    with pytest.raises(ScenarioError):
        build_scenario("straight-crossing", ScenarioParams(crossing_x=0.0, crossing_delay=0.0))


def test_turning_over_heading_change_about_90_degrees():
    sc = build_scenario("turning-over")
    _, h = sc.actor.pose_at([0.0, sc.toc])
    change = abs(math.degrees(math.remainder(h[1] - h[0], 2 * math.pi)))
    assert 80.0 <= change <= 90.0 + 1e-9


@pytest.mark.parametrize("kind", KINDS)
def test_noiseless_mask_is_exactly_the_actor(kind):
    sc = build_scenario(kind)
    mask_cfg = PipelineConfig().mask
    n = 0
    for frame in iter_frames(sc, NOISELESS):
        truth = actor_cells(sc, frame.timestamp)
        assert np.array_equal(search_mask(frame, mask_cfg), truth)
        n += int(truth.any())
    assert n > 10


def test_noiseless_velocity_is_exact():
    sc = build_scenario("turning-in")
    t = 2.0
    f = synthesize_frame(sc, t, NOISELESS)
    truth = actor_cells(sc, t)
    _, h = sc.actor.pose_at(t)
    v = sc.actor_speed * np.array([math.cos(h[0]), math.sin(h[0])])
    assert np.array_equal(f.vel[truth], np.tile(v, (int(truth.sum()), 1)))


def test_synthesize_frame_matches_iter_frames():
    sc = build_scenario("turning-over")
    noise = NoiseConfig(seed=4)
    frames = list(iter_frames(sc, noise))
    assert synthesize_frame(sc, 2.7, noise) == frames[27]


def test_lag_exceeds_ten_degrees_in_turning_over():
    sc = build_scenario("turning-over")
    lags = cluster_heading_lag(sc, NoiseConfig(lag=0.9, seed=0), PipelineConfig())
    assert np.nanmax(lags) > math.radians(10)


def test_lagged_headings_follow_truth_without_lag():
    sc = build_scenario("turning-over")
    n = 40
    _, true = sc.actor.pose_at(np.arange(n) * FRAME_PERIOD)
    assert np.allclose(lagged_headings(sc, 0.0, n), true)
    lagged = lagged_headings(sc, 0.9, n)
    assert np.all(np.abs(lagged - true) <= np.abs(true - true[0]) + 1e-12)


def test_fixed_seed_frames_are_byte_identical():
    sc = build_scenario("turning-in")
    noise = NoiseConfig(seed=11)
    a = [serialize_frame(f) for f in list(iter_frames(sc, noise))[::10]]
    b = [serialize_frame(f) for f in list(iter_frames(sc, noise))[::10]]
    assert a == b
    c = serialize_frame(synthesize_frame(sc, 1.0, NoiseConfig(seed=12)))
    assert c != a[1]


def test_turning_in_run():
    res = run_scenario(build_scenario("turning-in"), NoiseConfig(seed=0), cfg()).result
    assert res.tod_ours < res.tod_prior <= res.toc
    assert res.rittr >= 3.0
    assert res.ttr_ours >= 4 * res.ttr_prior


def test_turning_over_phi_u_ordering():
    sc = build_scenario("turning-over")
    noise = NoiseConfig(lag=0.85, seed=0)
    r0 = run_scenario(sc, noise, cfg(phi_deg=0)).result
    r10 = run_scenario(sc, noise, cfg(phi_deg=10)).result
    assert r10.rittr > r0.rittr > 0


def test_straight_crossing_detects_before_prior():
    res = run_scenario(build_scenario("straight-crossing"), NoiseConfig(seed=0), cfg()).result
    assert res.tod_ours < res.tod_prior


@pytest.mark.parametrize("kind", KINDS)
def test_ours_never_later_than_prior(kind):
    sc = build_scenario(kind)
    for seed in (1, 2):
        res = run_scenario(sc, NoiseConfig(seed=seed), cfg()).result
        assert res.tod_ours is not None and res.tod_prior is not None
        assert res.tod_ours <= res.tod_prior <= res.toc


def test_longer_horizon_detects_no_later():
    sc = build_scenario("turning-in")
    tods = [run_scenario(sc, NoiseConfig(seed=0), cfg(horizon=T)).result.tod_ours for T in (1.0, 2.0, 3.0)]
    assert tods[0] >= tods[1] >= tods[2]


def test_run_is_deterministic_and_result_round_trips():
    sc = build_scenario("straight-crossing")
    a = run_scenario(sc, NoiseConfig(seed=5), cfg())
    b = run_scenario(sc, NoiseConfig(seed=5), cfg())
    assert a.result.to_json() == b.result.to_json()
    assert [r.to_json() for r in a.reports] == [r.to_json() for r in b.reports]
    assert ScenarioResult.from_json(a.result.to_json()) == a.result


def test_no_threat_gives_undefined_rittr():
    # v_min above the actor speed masks every cell, so nothing is ever flagged
    from threatgrid.clustering import MaskConfig

    c = PipelineConfig(mask=MaskConfig(v_min=50.0))
    res = run_scenario(build_scenario("turning-in"), NoiseConfig(seed=0), c).result
    assert res.tod_ours is None and res.rittr is None and res.ttr_ours is None
    assert '"rittr": null' in res.to_json()
