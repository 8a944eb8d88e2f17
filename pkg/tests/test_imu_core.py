import numpy as np
import pytest

from gaitkal.errors import ParseError, ValidationError
from gaitkal.imu_core import (
    WALK_COLUMNS,
    GroundTruth,
    SensorStream,
    WalkRecord,
    list_walks,
    load_walk,
    parse_walk_log,
    save_walk,
    validate_stream,
    write_walk_log,
)
from gaitkal.synthwalk import GaitProfile, SensorErrorModel, generate

from .conftest import still_stream

HEADER = ",".join(WALK_COLUMNS)


def _write(tmp_path, rows, name="walk.csv"):
    path = tmp_path / name
    path.write_text(HEADER + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return path


def _row(t):
    return f"{t},0.1,0.2,0.3,0,0,0,0,-9.81,0"


class TestParse:
    def test_three_rows(self, tmp_path):
        rec = parse_walk_log(_write(tmp_path, [_row(0.0), _row(0.01), _row(0.02)]))
        assert len(rec.stream) == 3
        assert rec.stream.nominal_rate == 100.0
        np.testing.assert_array_equal(rec.stream.acc[1], [0.1, 0.2, 0.3])

    def test_duplicate_timestamp_names_row_2(self, tmp_path):
        with pytest.raises(ValidationError) as exc:
            parse_walk_log(_write(tmp_path, [_row(0.0), _row(0.0), _row(0.02)]))
        assert exc.value.row == 2
        assert "row 2" in str(exc.value)

    @pytest.mark.parametrize(
        "bad, line",
        [
            ("0.01,1,2", 3),
            ("0.01,1,2,3,4,5,6,7,8,x", 3),
        ],
    )
    def test_malformed_row_reports_line(self, tmp_path, bad, line):
        with pytest.raises(ParseError) as exc:
            parse_walk_log(_write(tmp_path, [_row(0.0), bad]))
        assert exc.value.line == line

    def test_bad_header(self, tmp_path):
        path = tmp_path / "w.csv"
        path.write_text("t,ax\n0,1\n")
        with pytest.raises(ParseError):
            parse_walk_log(path)

    def test_single_row_is_accepted(self, tmp_path):
        assert len(parse_walk_log(_write(tmp_path, [_row(0.0)])).stream) == 1


def test_generate_write_parse_is_bit_identical(tmp_path):
    rec = generate(GaitProfile(n_steps=5, walk_distance=5.0), SensorErrorModel(), seed=3)
    path = write_walk_log(tmp_path / "g.csv", rec.stream)
    back = parse_walk_log(path)
    for k in ("t", "acc", "gyro", "gravity"):
        np.testing.assert_array_equal(getattr(back.stream, k), getattr(rec.stream, k))


def test_save_load_round_trip(tmp_path):
    rec = generate(GaitProfile(n_steps=4, walk_distance=4.0), SensorErrorModel(), seed=11)
    save_walk(tmp_path / f"{rec.label}.csv", rec)
    back = load_walk(tmp_path / f"{rec.label}.csv")
    assert back.stream.equals(rec.stream, atol=1e-12)
    assert back.label == rec.label and back.seed == 11
    assert back.declared_distance == rec.declared_distance
    np.testing.assert_array_equal(back.truth.true_p, rec.truth.true_p)
    np.testing.assert_array_equal(back.truth.true_step_boundaries, rec.truth.true_step_boundaries)
    assert back.meta["truth_scale_K"] == rec.meta["truth_scale_K"]
    assert list_walks(tmp_path) == [tmp_path / f"{rec.label}.csv"]


class TestValidate:
    def test_clean_stream(self):
        assert validate_stream(still_stream(gravity=(0.0, -9.81, 0.0))) == []

    def test_one_gap(self):
        t = np.arange(50) / 100.0
        t[20:] += 0.04  # 0.05 s between samples 19 and 20
        s = SensorStream(t, np.zeros((50, 3)), np.zeros((50, 3)), np.tile((0, -9.81, 0), (50, 1)))
        w = validate_stream(s)
        assert [(x.kind, x.index) for x in w] == [("gap", 20)]

    def test_nan_at_17(self):
        acc = np.zeros((40, 3))
        acc[17, 1] = np.nan
        s = SensorStream(np.arange(40) / 100.0, acc, np.zeros((40, 3)), np.tile((0, -9.81, 0), (40, 1)))
        w = validate_stream(s)
        assert 17 in [x.index for x in w if x.kind == "nonfinite"]

    def test_gravity_outlier(self):
        g = np.tile((0.0, -9.81, 0.0), (10, 1))
        g[4] = (0.0, -5.0, 0.0)
        s = SensorStream(np.arange(10) / 100.0, np.zeros((10, 3)), np.zeros((10, 3)), g)
        assert [(x.kind, x.index) for x in validate_stream(s)] == [("gravity", 4)]

    def test_pure(self):
        acc = np.zeros((40, 3))
        acc[3, 0] = np.inf
        s = SensorStream(np.arange(40) / 100.0, acc, np.zeros((40, 3)), np.tile((0, -9.81, 0), (40, 1)))
        before = np.array(s.acc)
        assert validate_stream(s) == validate_stream(s)
        np.testing.assert_array_equal(s.acc, before)


def test_stream_is_immutable():
    s = still_stream(5)
    with pytest.raises(ValueError):
        s.acc[0, 0] = 1.0


def test_truth_must_cover_stream():
    s = still_stream(10)
    short = GroundTruth(s.t[:5], np.zeros(5), np.zeros(5))
    with pytest.raises(ValidationError):
        WalkRecord(s, short)
