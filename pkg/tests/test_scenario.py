import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from extrudeot.scenario import (
    INIT_RADIUS, PRESETS, Arc, Hold, SensorSpec, Stop, Straight, TrajectorySpec, VehiclePreset,
    generate_truth, ring_sensors, road_sensors, sample_frame, sample_surface, static, straight_left_turn,
    surface_residual,
)
from extrudeot.shape import Pose, polygon_area, to_body_frame, wrap_angle


# trajectories


def test_straight_spacing():
    truth = generate_truth(TrajectorySpec((Straight(50.0, 10.0),), 10.0))
    steps = np.hypot(np.diff(truth.x), np.diff(truth.y))
    assert len(truth) == 50
    assert np.allclose(steps, 1.0, atol=1e-12)
    assert np.all(truth.v == 10.0) and np.all(truth.omega == 0.0)


def test_arc_end_heading():
    traj = TrajectorySpec((Arc(5.0, math.pi / 2, 2.0), Hold(1.0)), 10.0)
    truth = generate_truth(traj)
    assert truth.yaw[-1] == pytest.approx(math.pi / 2, abs=1e-12)
    # a left quarter turn of radius 5 from the origin heading +x ends at (5, 5)
    assert truth.x[-1] == pytest.approx(5.0, abs=1e-12)
    assert truth.y[-1] == pytest.approx(5.0, abs=1e-12)


def test_right_turn_negative_rate():
    truth = generate_truth(TrajectorySpec((Arc(5.0, -math.pi / 2, 2.0), Hold(1.0)), 10.0))
    assert truth.yaw[-1] == pytest.approx(-math.pi / 2, abs=1e-12)
    assert np.all(truth.omega[truth.t < 1.0] < 0)


def test_stop_ends_at_rest():
    truth = generate_truth(TrajectorySpec((Straight(20.0, 10.0), Stop(2.0), Hold(1.0)), 10.0))
    assert truth.v[-1] == 0.0
    # braking distance v0 * T / 2
    assert truth.x[-1] == pytest.approx(20.0 + 10.0, abs=1e-9)
    assert np.all(np.diff(truth.x) >= -1e-12)


def test_heading_continuous_across_joints():
    traj = TrajectorySpec(straight_left_turn(6.0, 30.0), 10.0)
    truth = generate_truth(traj)
    dyaw = np.abs(wrap_angle(np.diff(truth.yaw)))
    assert dyaw.max() <= 6.0 / 25.0 * 0.1 + 1e-12
    steps = np.hypot(np.diff(truth.x), np.diff(truth.y))
    assert np.allclose(steps, 0.6, atol=1e-3)


def test_finite_difference_velocity_on_constant_speed_segments():
    dt = 0.001
    traj = TrajectorySpec((Straight(10.0, 5.0), Arc(8.0, 1.0, 4.0)), 1.0 / dt)
    truth = generate_truth(traj)
    for lo, hi in [(0.0, 2.0), (2.0, 4.0)]:
        k = np.nonzero((truth.t > lo + 2 * dt) & (truth.t < hi - 2 * dt))[0]
        vx = (truth.x[k + 1] - truth.x[k - 1]) / (2 * dt)
        vy = (truth.y[k + 1] - truth.y[k - 1]) / (2 * dt)
        speed = np.hypot(vx, vy)
        if lo == 0.0:
            assert np.max(np.abs(speed - truth.v[k])) < 1e-6
        else:
            # a central difference along a circle of radius r underestimates
            # the speed by a factor sinc(w dt); remove that exactly
            w = truth.omega[k][0]
            factor = math.sin(w * dt) / (w * dt)
            assert np.max(np.abs(speed / factor - truth.v[k])) < 1e-6


@pytest.mark.parametrize("seg", [Straight(0.0, 1.0), Straight(1.0, 0.0), Arc(0.0, 1.0, 1.0), Arc(1.0, 0.0, 1.0), Stop(0.0), Hold(-1.0)])
def test_invalid_segments(seg):
    with pytest.raises(ValueError):
        TrajectorySpec((seg,))


def test_static_holds_pose():
    truth = generate_truth(TrajectorySpec(static(3.0), 10.0, Pose(1.0, 2.0, 0.5, 0.4)))
    assert len(truth) == 30
    assert np.all(truth.x == 1.0) and np.all(truth.y == 2.0)
    assert np.allclose(truth.yaw, 0.4, atol=1e-15) and np.all(truth.v == 0.0)


# vehicles


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_are_simple_and_centred(name):
    v = PRESETS[name]
    assert shapely.LinearRing(v.profile).is_simple
    assert polygon_area(v.profile) > 0
    assert np.allclose(v.bbox_center, 0.0, atol=1e-12)
    assert v.width > 0 and name in INIT_RADIUS


def test_preset_rejects_bowtie():
    with pytest.raises(ValueError):
        VehiclePreset("bad", np.array([[0, 0], [1, 1], [1, 0], [0, 1]], float), 1.0)


def test_preset_orients_counterclockwise():
    cw = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], float)
    assert polygon_area(VehiclePreset("box", cw, 1.0).profile) > 0


# sampling


def test_sensor_validation():
    with pytest.raises(ValueError):
        SensorSpec((0, 0, 0), budget=-1)
    with pytest.raises(ValueError):
        SensorSpec((0, 0, 0), max_range=0.0)


def test_surface_samples_are_area_weighted():
    v = VehiclePreset("box", np.array([[-2, -0.5], [2, -0.5], [2, 0.5], [-2, 0.5]], float), 1.0)
    pts, nrm = sample_surface(v, 200_000, np.random.default_rng(0))
    # perimeter 10 times width 1 against two caps of 4 each
    cap_share = np.mean(np.abs(nrm[:, 1]) == 1.0)
    assert cap_share == pytest.approx(8.0 / 18.0, abs=0.005)
    top = np.mean(nrm[:, 2] == 1.0)
    assert top == pytest.approx(4.0 / 18.0, abs=0.005)


def test_sensor_left_sees_no_right_cap():
    car = PRESETS["compact_car"]
    sensor = SensorSpec((0.0, 20.0, 0.0), budget=5000)
    frame = sample_frame(Pose(0, 0, 0, 0), car, sensor, 0)
    body = to_body_frame(frame.points, Pose(0, 0, 0, 0))
    on_neg_cap = np.isclose(body[:, 1], -car.width / 2, atol=1e-12)
    assert len(frame.points) > 0
    assert not np.any(on_neg_cap)
    assert np.any(np.isclose(body[:, 1], car.width / 2, atol=1e-12))


def test_back_face_rule_holds_for_every_point():
    car = PRESETS["van"]
    pose = Pose(3.0, -1.0, 1.0, 0.7)
    sensor_pos = np.array([-5.0, 8.0, 2.5])
    rng = np.random.default_rng(5)
    body, nrm = sample_surface(car, 4000, rng)
    frame = sample_frame(pose, car, SensorSpec(tuple(sensor_pos), budget=4000), 5)
    # replay the draw and check each kept point against its own normal
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    world = body @ rot.T + [pose.x, pose.y, pose.z]
    facing = np.einsum("ij,ij->i", sensor_pos - world, nrm @ rot.T) > 0
    assert np.allclose(frame.points, world[facing], atol=1e-12, rtol=0)


def test_max_range_filters_everything():
    frame = sample_frame(Pose(0, 0, 0, 0), PRESETS["compact_car"], SensorSpec((100.0, 0, 0), max_range=50.0), 0)
    assert frame.points.shape == (0, 3)


def test_zero_budget_gives_empty_frame():
    frame = sample_frame(Pose(0, 0, 0, 0), PRESETS["bus"], SensorSpec((10.0, 0, 0), budget=0), 0, t=1.5)
    assert frame.points.shape == (0, 3) and frame.t == 1.5


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_zero_noise_points_lie_on_surface(name):
    v = PRESETS[name]
    pose = Pose(10.0, -4.0, 1.2, -2.1)
    frame = sample_frame(pose, v, ring_sensors(1000, 0.0, spread=(pose.x + 15, pose.y + 12)), 1)
    assert len(frame.points) > 100
    assert np.max(surface_residual(frame.points, pose, v)) < 1e-9


def test_noisy_points_within_five_sigma():
    v = PRESETS["compact_car"]
    pose = Pose(0, 0, 0.75, 0.3)
    sigma = 0.05
    frame = sample_frame(pose, v, ring_sensors(2000, sigma), 2)
    res = surface_residual(frame.points, pose, v)
    # the residual is at most the norm of a 3-vector of N(0, sigma^2)
    assert np.max(res) <= 5 * sigma
    assert np.mean(res) > 0.1 * sigma


def test_fixed_seed_is_deterministic():
    v = PRESETS["compact_car"]
    a = sample_frame(Pose(0, 0, 0, 0), v, road_sensors(500, 0.05), [3, 7])
    b = sample_frame(Pose(0, 0, 0, 0), v, road_sensors(500, 0.05), [3, 7])
    c = sample_frame(Pose(0, 0, 0, 0), v, road_sensors(500, 0.05), [3, 8])
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3.1, 3.1))
def test_sampling_is_rigid(seed, yaw):
    # turning the vehicle under a sensor straight above it changes nothing in the body frame
    v = PRESETS["van"]
    sensor = SensorSpec((0.0, 0.0, 30.0), budget=300)
    p1, p2 = Pose(0, 0, 0, 0.0), Pose(0, 0, 0, yaw)
    a = to_body_frame(sample_frame(p1, v, sensor, seed).points, p1)
    b = to_body_frame(sample_frame(p2, v, sensor, seed).points, p2)
    assert a.shape == b.shape
    assert np.allclose(a, b, atol=1e-9)
    # and the flat underside is never seen from above
    assert np.all(a[:, 2] > v.profile[:, 1].min())
