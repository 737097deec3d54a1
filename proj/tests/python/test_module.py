import json

import numpy as np
import pytest

import c3dag


@pytest.fixture(scope="module")
def shape():
    return c3dag.BalloonShape.build(c3dag.Skeleton.default())


def test_skeleton_round_trip():
    s = c3dag.Skeleton.default()
    assert len(s.names) == 18
    moved = s.with_keypoint("tail_end", [-0.6, 0.0, 0.5])
    back = c3dag.Skeleton.loads(moved.dumps())
    np.testing.assert_allclose(back.keypoint("tail_end"), [-0.6, 0.0, 0.5])
    with pytest.raises(KeyError):
        s.keypoint("wing")
    with pytest.raises(c3dag.ParseError):
        c3dag.Skeleton.loads('{"version": 1}')


def test_degenerate_bone_is_reported():
    s = c3dag.Skeleton.default()
    s = s.with_keypoint("tail_end", s.keypoint("back_end"))
    with pytest.raises(c3dag.DegenerateBoneError, match="back_end"):
        c3dag.BalloonShape.build(s)


def test_mesh_is_closed(shape):
    v, f, stats = shape.mesh(48)
    assert v.shape[1] == 3 and f.shape[1] == 3
    assert stats["watertight"]
    assert stats["signed_volume"] > 0
    # Vertices lie on the zero level set up to the cell size.
    lo, hi = shape.bounds
    cell = np.max(np.asarray(hi) - np.asarray(lo)) / 48
    assert np.max(np.abs(shape.sdf(v))) < cell


def test_sdf_sign(shape):
    lo, hi = shape.bounds
    outside = np.asarray(hi) + 0.5
    d = shape.sdf(np.array([outside, shape_center(shape)]))
    assert d[0] > 0 and d[1] < 0


def shape_center(shape):
    # The torso sits between the shoulder and hip keypoints.
    s = c3dag.Skeleton.default()
    return 0.5 * (np.asarray(s.keypoint("neck_end")) + np.asarray(s.keypoint("back_end")))


def test_depth_and_pose_views(shape):
    cam = c3dag.Camera.from_spherical(1.5, 180.0, 90.0, 45.0, 64, 64)
    depth = shape.render_depth(cam)
    assert depth.shape == (64, 64)
    hit = np.isfinite(depth)
    assert 0 < hit.mean() < 1
    assert np.all(depth[hit] > 0)
    pose = c3dag.render_pose(c3dag.Skeleton.default(), cam)
    assert pose.shape == (64, 64, 3) and pose.dtype == np.uint8
    assert c3dag.Skeleton.default().view(cam) == "back"


def test_schedules():
    sched = c3dag.NoiseSchedule()
    assert sched.steps == 1000
    assert sched.discrete_step(0.98) == 980
    assert abs(sched.sigma2(10) - (1 - sched.alpha_bar(10))) < 1e-15
    assert c3dag.anneal_timestep(0, 100) == pytest.approx(0.98, abs=1e-12)
    assert c3dag.guidance_scale(100, 100) == pytest.approx(100.0, abs=1e-12)
    assert c3dag.control_scale(100, 100) == pytest.approx(0.25, abs=1e-12)


def test_pipeline_smoke():
    cfg = {"grid": {"resolution": 8}, "render": {"width": 8, "height": 8, "n_samples": 8},
           "stage1": {"iters": 4}, "stage2": {"iters": 4}, "seed": 3}
    p = c3dag.Pipeline(json.dumps(cfg))
    g1, r1 = p.stage1()
    g2, r2 = p.stage2(g1)
    assert len(r1["records"]) == 4 and len(r2["records"]) == 4
    assert r2["records"][0]["omega"] == pytest.approx(50.0)
    assert g2.resolution == [8, 8, 8]
    again = c3dag.RadianceGrid.loads(r2["grid"])
    # Checkpoints store float32 parameters.
    assert again.dumps() == r2["grid"]
    np.testing.assert_allclose(again.params, g2.params, rtol=1e-6, atol=1e-6)
    color, opacity = g2.render(c3dag.Camera.from_spherical(1.5, 0.0, 90.0, 45.0, 8, 8), 8)
    assert color.shape == (8, 8, 3) and opacity.shape == (8, 8)
    # Same seed, same trajectory.
    _, r1b = c3dag.Pipeline(json.dumps(cfg)).stage1()
    assert r1b["grid"] == r1["grid"]
    with pytest.raises(c3dag.ConfigError, match="unknown field"):
        c3dag.Pipeline('{"stage3": {}}')


def test_curate():
    names = c3dag.Skeleton.default().names
    full = {"image_size": [64, 64], "species": "dog",
            "keypoints": {n: [20 + i, 30] for i, n in enumerate(names)}}
    sparse = {"image_size": [64, 64], "species": "cat",
              "keypoints": {n: ([10, 10] if i < 2 else None) for i, n in enumerate(names)}}
    images, sources, report = c3dag.curate([json.dumps(full), json.dumps(sparse), "{"], 0.3, 5)
    assert sources == [0]
    assert images[0].shape == (64, 64, 3)
    rep = json.loads(report)
    assert rep["total"] == 3 and rep["kept"] == 1
