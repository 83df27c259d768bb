import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extrudeot import io
from extrudeot.config import ConfigError, RunConfig, dump_config, load_config, parse_config, parse_segments
from extrudeot.filter import Frame, TrackState
from extrudeot.scenario import Arc, Hold, Stop, Straight, TrajectorySpec, generate_truth


# config


def test_empty_config_is_default():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.tracker.n_control_points == 10 and cfg.tracker.degree == 3


def test_round_trip_preserves_every_field():
    text = "\n".join([
        "# a comment",
        "scenario.vehicle=bus",
        "scenario.trajectory=straight:20,5;arc:10,-0.5,5;stop:2;hold:1",
        "scenario.start_z=1.25",
        "scenario.sensors=0,10,3;5,-10,3",
        "tracker.n_control_points=7",
        "tracker.use_alpha=yes",
        "tracker.init_radius=3.5",
        "process.sigma_v=0.5",
        "metrics.yaw_mod_pi=true",
        "run.seed=42",
        "",
    ])
    cfg = parse_config(text)
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert dump_config(again) == dump_config(cfg)
    assert cfg.tracker.use_alpha is True and cfg.process.sigma_v == 0.5 and cfg.process.sigma_x is None


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 100, allow_nan=False), st.integers(4, 20), st.booleans())
def test_round_trip_floats_exactly(noise, n, flag):
    cfg = parse_config("", [f"scenario.noise={noise!r}", f"tracker.n_control_points={n}", f"metrics.yaw_mod_pi={flag}"])
    assert parse_config(dump_config(cfg)) == cfg
    assert cfg.scenario.noise == noise


def test_overrides_win_over_file(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("run.seed=1\nrun.output=a\n")
    cfg = load_config(p, ["run.seed=2"])
    assert cfg.run.seed == 2 and cfg.run.output == "a"


@pytest.mark.parametrize("line", [
    "tracker.bogus=1", "nosection=1", "tracker.degree=three", "just text",
    "tracker.n_control_points=3", "tracker.sigma_m=-1", "process.sigma_x=-0.1",
    "scenario.vehicle=truck", "metrics.reference=centroid", "tracker.forgetting_factor=0.5",
    "scenario.trajectory=zigzag:1", "scenario.sensors=1,2", "tracker.use_alpha=maybe",
    "scenario.noise=nan", "scenario.max_range=0",
])
def test_bad_config_raises(line):
    with pytest.raises(ConfigError):
        parse_config(line)


def test_error_names_the_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("run.seed=1\noops\n")


def test_segment_grammar():
    segs = parse_segments("straight:60,6; arc:25,1.5,6;stop:3;hold:2")
    assert segs == (Straight(60, 6), Arc(25, 1.5, 6), Stop(3), Hold(2))
    for bad in ["", "arc:1,2", "straight:a,b", "turn:1"]:
        with pytest.raises(ConfigError):
            parse_segments(bad)


def test_start_z_defaults_to_ground_contact():
    cfg = parse_config("scenario.vehicle=van")
    assert cfg.trajectory().start.z == pytest.approx(1.0)


def test_tracker_config_uses_preset_radius_and_width():
    cfg = parse_config("scenario.vehicle=bus")
    tc = cfg.tracker_config()
    assert tc.init.radius == 4.0 and tc.width == 2.5
    assert tc.process is None


def test_process_override_scales_with_dt():
    tc = parse_config("process.sigma_v=2.0").tracker_config(0.2)
    assert tc.process.sigma_v == 2.0
    # untouched channels keep the default levels for the given interval
    ref = parse_config("process.sigma_v=0.88").tracker_config(0.2).process
    assert tc.process.sigma_x == ref.sigma_x


def test_sensor_presets_and_list():
    assert len(parse_config("scenario.sensors=ring").sensors()) == 4
    s = parse_config("scenario.sensors=1,2,3\nscenario.budget=7\nscenario.max_range=9").sensors()
    assert s[0].position == (1.0, 2.0, 3.0) and s[0].budget == 7 and s[0].max_range == 9.0


# files


def test_frame_round_trip(tmp_path):
    pts = np.array([[1.0, 2.0, 3.0], [-1e-7, 123456.789, 0.1]])
    io.write_frame(tmp_path / "f.txt", Frame(0.30000000000000004, pts))
    back = io.read_frame(tmp_path / "f.txt")
    assert back.t == pytest.approx(0.3, abs=1e-12)
    assert np.allclose(back.points, pts, rtol=1e-8)
    assert (tmp_path / "f.txt").read_text().splitlines()[0] == "# t=0.3"


def test_empty_frame_has_header(tmp_path):
    io.write_frame(tmp_path / "f.txt", Frame(1.5, np.zeros((0, 3))))
    assert (tmp_path / "f.txt").read_text() == "# t=1.5\n"
    assert io.read_frame(tmp_path / "f.txt").points.shape == (0, 3)


def test_frame_format_errors(tmp_path):
    (tmp_path / "a.txt").write_text("1 2 3\n")
    (tmp_path / "b.txt").write_text("# t=0\n1 2\n")
    for name in ["a.txt", "b.txt"]:
        with pytest.raises(io.FormatError):
            io.read_frame(tmp_path / name)


def test_frames_read_in_index_order(tmp_path):
    io.write_frames(tmp_path, [Frame(k * 0.1, np.full((2, 3), k)) for k in range(12)])
    (tmp_path / "notes.txt").write_text("ignored")
    frames = io.read_frames(tmp_path)
    assert [f.points[0, 0] for f in frames] == list(range(12))
    assert io.frame_path(tmp_path, 3).name == "frame_00003.txt"


def test_frames_must_increase_in_time(tmp_path):
    io.write_frames(tmp_path, [Frame(0.2, np.zeros((0, 3))), Frame(0.1, np.zeros((0, 3)))])
    with pytest.raises(io.FormatError):
        io.read_frames(tmp_path)


def test_truth_round_trip(tmp_path):
    truth = generate_truth(TrajectorySpec((Straight(10, 5), Arc(5, 1.0, 5)), 10.0))
    io.write_truth(tmp_path / "truth.csv", truth)
    back = io.read_truth(tmp_path / "truth.csv")
    for k in ("t", "x", "y", "z", "yaw", "v", "omega"):
        assert np.allclose(getattr(back, k), getattr(truth, k), rtol=1e-8, atol=1e-12)
    assert (tmp_path / "truth.csv").read_text().splitlines()[0] == "t,x,y,z,yaw,v_xy,omega"


def test_track_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    states = [TrackState(rng.normal(size=8 + 2 * 5), np.eye(18), 3, 0.1 * k) for k in range(4)]
    io.write_track(tmp_path / "track.csv", states)
    header = (tmp_path / "track.csv").read_text().splitlines()[0]
    assert header == "t,x_x,x_y,x_z,v_xy,psi,omega,v_z,q," + ",".join(f"c{i}_x,c{i}_z" for i in range(1, 6))
    back = io.read_track(tmp_path / "track.csv")
    for a, b in zip(states, back):
        assert np.allclose(a.x, b.x, rtol=1e-8, atol=1e-12) and a.t == pytest.approx(b.t)
    # the file lists z right after the planar position
    row = np.loadtxt(tmp_path / "track.csv", delimiter=",", skiprows=1)[0]
    assert row[3] == pytest.approx(states[0].x[5], rel=1e-8)


def test_track_bad_header(tmp_path):
    (tmp_path / "t.csv").write_text("t,a,b\n1,2,3\n")
    with pytest.raises(io.FormatError):
        io.read_track(tmp_path / "t.csv")


def test_csv_bad_number(tmp_path):
    (tmp_path / "m.csv").write_text("t,err_xy,err_z,err_yaw,iou\n0,x,0,0,1\n")
    with pytest.raises(io.FormatError):
        io.read_metrics(tmp_path / "m.csv")


def test_geometry_record(tmp_path):
    rng = np.random.default_rng(1)
    st0 = TrackState(rng.normal(size=18), np.eye(18), 3, 2.0)
    io.write_geometry(tmp_path / "g.jsonl", [st0, st0], M=50)
    lines = (tmp_path / "g.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    assert len(lines) == 2 and rec["t"] == 2.0 and len(rec["profile"]) == 50
    assert set(rec["pose"]) == {"x", "y", "z", "yaw"}
    assert math.isclose(rec["width"], st0.x[7], rel_tol=1e-8)
