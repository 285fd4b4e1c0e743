import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import det
from pointit.errors import ConfigError, FormatError
from pointit.pcio import (
    Category,
    PointCloud,
    TrackOutput,
    read_detections,
    read_kitti_tracking_labels,
    read_tracks,
    read_velodyne,
    rle_decode,
    rle_encode,
    wrap_angle,
    write_detections,
    write_tracks,
    write_velodyne,
)

# standard KITTI axes: cam x = -velo y, cam y = -velo z, cam z = velo x
KITTI_TR = "0 -1 0 0 0 0 -1 0 1 0 0 0"
IDENTITY_TR = "1 0 0 0 0 1 0 0 0 0 1 0"


def write_calib(path, tr=IDENTITY_TR, key="Tr_velo_cam"):
    path.write_text("P0: 1 0 0 0 0 1 0 0 0 0 1 0\n"
                    "R_rect 1 0 0 0 1 0 0 0 1\n"
                    f"{key} {tr}\n")
    return path


def label(frame, tid, kind, h=1.5, w=1.6, l=3.9, x=0.0, y=0.0, z=5.0, ry=0.0):
    return f"{frame} {tid} {kind} 0 0 0 10 10 50 50 {h} {w} {l} {x} {y} {z} {ry}\n"


def test_read_velodyne_single_point(tmp_path):
    p = tmp_path / "a.bin"
    p.write_bytes(struct.pack("<4f", 1.0, 2.0, 3.0, 0.5))
    pc = read_velodyne(p)
    assert len(pc) == 1
    assert pc.points[0].tolist() == [1.0, 2.0, 3.0, 0.5]


def test_read_velodyne_empty(tmp_path):
    p = tmp_path / "a.bin"
    p.write_bytes(b"")
    assert len(read_velodyne(p)) == 0


def test_read_velodyne_truncated(tmp_path):
    p = tmp_path / "a.bin"
    p.write_bytes(b"\0" * 24)
    with pytest.raises(FormatError, match="byte offset 16"):
        read_velodyne(p)


def test_read_velodyne_drops_nonfinite(tmp_path):
    p = tmp_path / "a.bin"
    p.write_bytes(struct.pack("<8f", 1, 2, 3, 0.5, float("nan"), 0, 0, 0))
    pc = read_velodyne(p)
    assert len(pc) == 1 and pc.dropped == 1


finite32 = st.floats(-200, 200, allow_nan=False, width=32)


@given(st.lists(st.tuples(finite32, finite32, finite32, st.floats(0, 1, width=32)), max_size=50))
def test_velodyne_round_trip_bit_exact(tmp_path_factory, pts):
    pc = PointCloud(np.array(pts, np.float32).reshape(-1, 4))
    p = tmp_path_factory.mktemp("v") / "x.bin"
    write_velodyne(pc, p)
    back = read_velodyne(p)
    assert back.points.tobytes() == pc.points.tobytes()


def test_labels_skip_dontcare_and_group(tmp_path):
    calib = write_calib(tmp_path / "calib.txt")
    lab = tmp_path / "label.txt"
    lab.write_text(label(1, 5, "Car") + label(0, 3, "Pedestrian") + label(0, 1, "Car")
                   + label(0, -1, "DontCare"))
    out = read_kitti_tracking_labels(lab, calib)
    assert [len(v) for v in out.values()] == [2, 1]
    assert [o.track_id for o in out[0]] == [1, 3]
    assert out[0][1].category is Category.PEDESTRIAN


def test_labels_order_insensitive(tmp_path):
    calib = write_calib(tmp_path / "calib.txt", KITTI_TR)
    lines = [label(f, t, "Car", x=t, z=5 + f) for f in range(3) for t in range(3)]
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("".join(lines))
    b.write_text("".join(reversed(lines)))
    assert read_kitti_tracking_labels(a, calib) == read_kitti_tracking_labels(b, calib)


def test_identity_calib_center(tmp_path):
    # inverse of identity is identity; geometric centre is the bottom centre raised by h/2
    calib = write_calib(tmp_path / "calib.txt")
    lab = tmp_path / "l.txt"
    lab.write_text(label(0, 1, "Car", h=2.0, x=0, y=0, z=5))
    box = read_kitti_tracking_labels(lab, calib)[0][0].box3d
    assert box.center == pytest.approx((0.0, 0.0, 6.0))


def test_kitti_axes_calib_center(tmp_path):
    # velo = R^T (cam - t) with t = (0.1, 0.2, 0.3); by hand for cam (1, 1.7, 10):
    # cam - t = (0.9, 1.5, 9.7); velo x = 9.7, y = -0.9, z = -1.5; then z += h/2 = 0.75
    calib = write_calib(tmp_path / "calib.txt", "0 -1 0 0.1 0 0 -1 0.2 1 0 0 0.3")
    lab = tmp_path / "l.txt"
    lab.write_text(label(0, 1, "Car", h=1.5, x=1, y=1.7, z=10, ry=0.0))
    box = read_kitti_tracking_labels(lab, calib)[0][0].box3d
    assert box.center == pytest.approx((9.7, -0.9, -0.75))
    assert box.yaw == pytest.approx(-math.pi / 2)


def test_object_style_calib_key(tmp_path):
    calib = write_calib(tmp_path / "calib.txt", KITTI_TR, key="Tr_velo_to_cam:")
    lab = tmp_path / "l.txt"
    lab.write_text(label(0, 1, "Car"))
    assert read_kitti_tracking_labels(lab, calib)[0][0].box3d.center[0] == pytest.approx(5.0)


def test_yaw_wrap():
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


def test_missing_calib(tmp_path):
    lab = tmp_path / "l.txt"
    lab.write_text(label(0, 1, "Car"))
    with pytest.raises(ConfigError):
        read_kitti_tracking_labels(lab, tmp_path / "none.txt")
    (tmp_path / "c.txt").write_text("P0: 1 2 3\n")
    with pytest.raises(ConfigError):
        read_kitti_tracking_labels(lab, tmp_path / "c.txt")


def test_malformed_label_line(tmp_path):
    calib = write_calib(tmp_path / "calib.txt")
    lab = tmp_path / "l.txt"
    lab.write_text(label(0, 1, "Car") + "0 2 Car 0 0\n")
    with pytest.raises(FormatError, match=":2:"):
        read_kitti_tracking_labels(lab, calib)


def test_rle_scheme():
    m = rle_decode("5:3:10", (3, 6))
    assert m.ravel().tolist() == [0] * 5 + [1] * 3 + [0] * 10
    assert rle_encode(m) == "5:3:10"
    assert rle_encode(np.ones((2, 2), bool)) == "0:4"


@given(st.lists(st.booleans(), min_size=1, max_size=60))
def test_rle_round_trip(bits):
    m = np.array(bits).reshape(1, -1)
    assert (rle_decode(rle_encode(m), m.shape) == m).all()


def test_read_detections_rejects_all_run(tmp_path):
    # a run covering every cell cannot sit inside a small box
    p = tmp_path / "d.txt"
    p.write_text("0 Car 0.9 10 10 20 20 0:32768\n")
    with pytest.raises(FormatError):
        read_detections(p)
    p.write_text("0 Car 0.9 10 10 20 20 32768\n")
    with pytest.raises(FormatError, match="empty mask"):
        read_detections(p)


def test_read_detections_wrong_cell_count(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("0 Car 0.9 10 10 20 20 100:5:100\n")
    with pytest.raises(FormatError, match="cells"):
        read_detections(p)


def test_read_detections_box_out_of_bounds(tmp_path):
    p = tmp_path / "d.txt"
    d = det(0, (500, 0, 512, 4))
    write_detections([d], p)
    text = p.read_text().replace(" 500 0 512 4 ", " 500 0 513 4 ")
    p.write_text(text)
    with pytest.raises(FormatError, match="outside"):
        read_detections(p)


def test_read_detections_mask_cardinality_and_grouping(tmp_path):
    p = tmp_path / "d.txt"
    dets = [det(3, (10, 10, 20, 14)), det(3, (40, 10, 45, 12)), det(7, (0, 0, 4, 2))]
    write_detections(dets, p)
    got = read_detections(p)
    assert {k: len(v) for k, v in got.items()} == {3: 2, 7: 1}
    assert int(got[3][0].mask.sum()) == 40


def test_detection_round_trip_with_track_ids(tmp_path):
    rng = np.random.default_rng(1)
    dets = []
    for k in range(20):
        c0, r0 = int(rng.integers(0, 500)), int(rng.integers(0, 60))
        d = det(k // 4, (c0, r0, c0 + 8, r0 + 3), track_id=k)
        d.mask[r0, c0] = False
        dets.append(d)
    p = tmp_path / "gt.txt"
    write_detections(dets, p)
    back = [d for v in read_detections(p).values() for d in v]
    assert len(back) == len(dets)
    for a, b in zip(dets, back):
        assert (a.frame, a.track_id, a.category, a.box2d) == (b.frame, b.track_id, b.category, b.box2d)
        assert (a.mask == b.mask).all()
        assert a.score == b.score


def test_comment_lines_ignored(tmp_path):
    p = tmp_path / "d.txt"
    write_detections([det(0, (1, 1, 3, 3))], p)
    p.write_text("# a comment\n" + p.read_text())
    assert len(read_detections(p)[0]) == 1


def _track(frame, tid):
    return TrackOutput(frame, tid, Category.CAR, (1.0, 2.0, 3.0, 4.0), (1.23456, 2.0, -3.0))


def test_write_tracks_empty(tmp_path):
    p = tmp_path / "t.txt"
    write_tracks([], p)
    assert p.read_text() == ""


def test_write_tracks_one_track_three_frames(tmp_path):
    p = tmp_path / "t.txt"
    write_tracks([[_track(f, 7)] for f in range(3)], p)
    lines = p.read_text().splitlines()
    assert len(lines) == 3
    assert {ln.split()[1] for ln in lines} == {"7"}
    assert lines[0].split()[7:] == ["1.2346", "2.0000", "-3.0000"]


def test_write_tracks_sorted(tmp_path):
    p = tmp_path / "t.txt"
    write_tracks({0: [_track(0, 9), _track(0, 2)]}, p)
    assert [ln.split()[1] for ln in p.read_text().splitlines()] == ["2", "9"]
    assert [t.track_id for t in read_tracks(p)[0]] == [2, 9]


def test_write_tracks_io_error(tmp_path):
    with pytest.raises(OSError, match="nodir"):
        write_tracks([[_track(0, 1)]], tmp_path / "nodir" / "t.txt")
