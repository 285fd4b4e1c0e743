import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pointit.pcio import PointCloud
from pointit.projection import (
    ProjectionConfig,
    angles,
    bin_angles,
    center_from_mask,
    pixel_of,
    project,
    read_dump,
    write_dump,
)

CFG = ProjectionConfig()


def test_angles_on_axis():
    a, b = angles((1.0, 0.0, 0.0))
    assert (float(a), float(b)) == (0.0, 0.0)


def test_angles_ground_plane_diagonal():
    a, b = angles((1.0, 1.0, 0.0))
    assert float(a) == 0.0
    assert float(b) == pytest.approx(math.pi / 4)


def test_angles_against_scalar_evaluation():
    # math.asin on the two ratios, evaluated independently
    a, b = angles((0.5, 0.2, -0.1))
    assert float(a) == pytest.approx(-0.18360401027891857, abs=1e-15)
    assert float(b) == pytest.approx(0.38050637711236485, abs=1e-15)


def test_bin_center_pixel():
    # floor(2.0 / (26.9 / 64)) = floor(4.758) = 4 ; floor(45 / (90 / 512)) = 256
    assert bin_angles(0.0, 0.0, CFG) == (4, 256)


def test_bin_front_view_edges():
    assert bin_angles(0.0, math.radians(45.0), CFG)[1] == 0
    assert bin_angles(0.0, math.radians(-45.0) - 1e-9, CFG) is None
    assert bin_angles(math.radians(-30.0), 0.0, CFG) is None
    assert bin_angles(math.radians(2.0) + 1e-9, 0.0, CFG) is None


def test_behind_sensor_is_out_of_view():
    assert pixel_of((-5.0, 0.0, 0.0), CFG) is None
    assert pixel_of((5.0, 0.0, 0.0), CFG) == (4, 256)


def test_config_validation():
    with pytest.raises(ValueError):
        ProjectionConfig(rows=0)
    with pytest.raises(ValueError):
        ProjectionConfig(azimuth_max=-1.0, azimuth_min=0.0)
    with pytest.raises(ValueError):
        ProjectionConfig(zenith_halfwidth=math.pi / 2)


def test_empty_cloud_projects_to_invalid_image():
    img = project(PointCloud.empty())
    assert img.channels.shape == (64, 512, 4)
    assert not img.valid.any()
    assert (img.point_index == -1).all()


def test_nearest_point_wins():
    cloud = PointCloud([[5.0, 0.0, 0.0, 0.1], [3.0, 0.0, 0.0, 0.9]])
    img = project(cloud)
    assert img.valid.sum() == 1
    assert img.channels[4, 256].tolist() == pytest.approx([3.0, 0.0, 0.0, 0.9])
    assert img.point_index[4, 256] == 1


def random_cloud(rng, n=1000):
    """Points around the sensor, with deliberate same-direction collisions and duplicates."""
    base = np.column_stack([rng.uniform(-10, 40, n), rng.uniform(-40, 40, n),
                            rng.uniform(-3, 1, n), rng.uniform(0, 1, n)])
    k = n // 4
    base[:k, :3] = base[k:2 * k, :3] * rng.uniform(0.5, 2.0, (k, 1))
    base[2 * k:2 * k + 20] = base[2 * k + 20:2 * k + 40]
    return PointCloud(base.astype(np.float32))


def check_self_consistent(cloud, img):
    rr, cc = np.nonzero(img.valid)
    for r, c in zip(rr, cc):
        assert pixel_of(img.channels[r, c, :3], CFG) == (r, c)
        assert img.channels[r, c].tobytes() == cloud.points[img.point_index[r, c]].tobytes()
    assert ((img.point_index >= 0) == img.valid).all()
    assert not img.channels[~img.valid].any()


def test_self_consistency_random_cloud():
    rng = np.random.default_rng(0)
    cloud = random_cloud(rng)
    img = project(cloud)
    assert img.valid.sum() > 50
    check_self_consistent(cloud, img)


def test_nearest_wins_against_brute_force():
    rng = np.random.default_rng(5)
    cloud = random_cloud(rng)
    img = project(cloud)
    best = {}
    for i, p in enumerate(cloud.points.astype(np.float64)):
        cell = pixel_of(p[:3], CFG)
        if cell is None:
            continue
        rng_ = math.sqrt(p[0] ** 2 + p[1] ** 2 + p[2] ** 2)
        if cell not in best or rng_ < best[cell]:
            best[cell] = rng_
    assert set(best) == set(zip(*np.nonzero(img.valid)))
    for (r, c), d in best.items():
        x, y, z = img.channels[r, c, :3].astype(np.float64)
        assert math.sqrt(x * x + y * y + z * z) == d


@given(st.integers(0, 2**32 - 1))
def test_projection_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    cloud = random_cloud(rng, 300)
    perm = rng.permutation(len(cloud))
    a = project(cloud)
    b = project(PointCloud(cloud.points[perm]))
    assert a.channels.tobytes() == b.channels.tobytes()
    assert (a.valid == b.valid).all()


def test_center_from_mask_singleton():
    img = project(PointCloud([[4.0, 1.0, -1.0, 0.5]]))
    r, c = pixel_of((4.0, 1.0, -1.0), CFG)
    mask = np.zeros(img.shape, bool)
    mask[r, c] = True
    assert center_from_mask(img, mask) == (4.0, 1.0, -1.0)


def test_center_from_mask_midpoint():
    img = project(PointCloud([[2.0, 0.0, 0.0, 0.5], [4.0, 0.0, -0.5, 0.5]]))
    # put the second point's xyz to (4, 0, 0) in a different cell by hand
    r, c = pixel_of((4.0, 0.0, -0.5), CFG)
    img.channels[r, c, :3] = (4.0, 0.0, 0.0)
    mask = img.valid.copy()
    assert center_from_mask(img, mask) == pytest.approx((3.0, 0.0, 0.0))


def test_center_from_mask_only_invalid_cells():
    img = project(PointCloud([[4.0, 1.0, -1.0, 0.5]]))
    mask = ~img.valid
    assert center_from_mask(img, mask) is None


@given(st.tuples(*[st.floats(-50, 50, allow_nan=False, width=32)] * 3), st.integers(1, 40))
def test_center_of_constant_mask_is_exact(p, n):
    img = project(PointCloud.empty())
    img.channels[:, :n, :3] = p
    img.valid[:, :n] = True
    mask = np.zeros(img.shape, bool)
    mask[:, :n] = True
    assert center_from_mask(img, mask) == tuple(float(v) for v in np.float32(p))


def test_dump_round_trip(tmp_path):
    cloud = random_cloud(np.random.default_rng(2))
    img = project(cloud)
    write_dump(img, tmp_path / "x.sph")
    back = read_dump(tmp_path / "x.sph")
    assert back.channels.tobytes() == img.channels.tobytes()
    assert (back.valid == img.valid).all()
    assert (back.point_index == img.point_index).all()


@pytest.mark.parametrize("halfwidth", [math.radians(45.0), 1.49, 1.55])
def test_occupied_cells_match_scalar_binning_near_view_edges(halfwidth):
    cfg = ProjectionConfig(zenith_halfwidth=halfwidth)
    rng = np.random.default_rng(11)
    beta = halfwidth + rng.uniform(-2e-3, 2e-3, 2000) * rng.choice([-1, 1], 2000)
    d = rng.uniform(1, 30, 2000)
    pts = np.column_stack([d * np.cos(beta), d * np.sin(beta), rng.uniform(-2, 0.2, 2000),
                           np.zeros(2000)]).astype(np.float32)
    img = project(PointCloud(pts), cfg)
    expected = {pixel_of(p[:3], cfg) for p in pts.astype(np.float64)} - {None}
    assert set(zip(*np.nonzero(img.valid))) == expected
    assert expected
