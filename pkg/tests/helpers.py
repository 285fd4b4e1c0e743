import math

import numpy as np

from pointit.pcio import Category, DetectionRecord


def det(frame, box, category=Category.CAR, shape=(64, 512), score=0.9, track_id=None):
    """Detection whose mask fills its (integer, half-open) box."""
    c0, r0, c1, r1 = box
    mask = np.zeros(shape, bool)
    mask[r0:r1, c0:c1] = True
    return DetectionRecord(frame, category, score, (c0, r0, c1, r1), mask, track_id)


KITTI_TR = "0 -1 0 0 0 0 -1 0 1 0 0 0"


def kitti_label_line(frame, obj):
    """Tracking label line for a LiDAR-frame object under the KITTI_TR calibration."""
    x, y, z = obj.box3d.center
    h, w, l = obj.box3d.size
    ry = -obj.box3d.yaw - math.pi / 2
    return (f"{frame} {obj.track_id} {obj.category.value} 0 0 0 0 0 10 10 "
            f"{h} {w} {l} {-y} {-(z - h / 2)} {x} {ry}\n")


def write_kitti_root(root, seq, frames):
    """Lay out simulated frames as a KITTI tracking tree: velodyne/, label_02/, calib/."""
    from pointit.pcio import write_velodyne

    (root / "velodyne" / seq).mkdir(parents=True, exist_ok=True)
    (root / "label_02").mkdir(exist_ok=True)
    (root / "calib").mkdir(exist_ok=True)
    (root / "calib" / f"{seq}.txt").write_text(f"Tr_velo_cam {KITTI_TR}\n")
    lines = []
    for sf in frames:
        write_velodyne(sf.cloud, root / "velodyne" / seq / f"{sf.frame:06d}.bin")
        lines += [kitti_label_line(sf.frame, o) for o in sf.objects]
    (root / "label_02" / f"{seq}.txt").write_text("".join(lines))
    return root
