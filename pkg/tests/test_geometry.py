"""Alignment geometry: closed-form recovery, template data, pose fits."""

import json
import math
from importlib import resources

import numpy as np
import pytest

from swapkit import geometry, imgcore


def random_similarity(rng):
    ang = rng.uniform(-np.pi, np.pi)
    scale = rng.uniform(0.5, 2.0)
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    tra = rng.uniform(-50, 50, size=2)
    return geometry.SimilarityTransform(scale, rot, tra)


def test_umeyama_recovers_exact_transform():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-10, 10, size=(20, 2))
    t = random_similarity(rng)
    got = geometry.umeyama(pts, t.apply(pts))
    assert got.scale == pytest.approx(t.scale, rel=1e-12)
    assert np.allclose(got.rotation, t.rotation, atol=1e-12)
    assert np.allclose(got.translation, t.translation, atol=1e-9)


def test_umeyama_two_points_suffice():
    src = np.array([[0.0, 0.0], [1.0, 0.0]])
    dst = np.array([[1.0, 1.0], [1.0, 3.0]])  # rotate 90deg, scale 2, shift
    t = geometry.umeyama(src, dst)
    assert t.scale == pytest.approx(2.0, rel=1e-12)
    assert np.allclose(t.apply(src), dst, atol=1e-12)


def test_umeyama_least_squares_beats_perturbation():
    # with noise the fit error must not exceed the generating noise level
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 100, size=(68, 2))
    t = random_similarity(rng)
    noisy = t.apply(pts) + rng.normal(0, 0.5, size=pts.shape)
    got = geometry.umeyama(pts, noisy)
    rms = np.sqrt(((got.apply(pts) - noisy) ** 2).mean())
    assert rms < 1.0


def test_umeyama_equivariance_under_pre_rotation():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-5, 5, size=(30, 2))
    t = random_similarity(rng)
    dst = t.apply(pts)
    q = np.array([[0.0, -1.0], [1.0, 0.0]])
    got = geometry.umeyama(pts @ q.T, dst)
    assert np.allclose(got.rotation, t.rotation @ q.T, atol=1e-10)


def test_umeyama_degenerate_raises():
    with pytest.raises(geometry.GeometryError):
        geometry.umeyama(np.zeros((5, 2)), np.random.default_rng(0).random((5, 2)))
    with pytest.raises(geometry.GeometryError):
        geometry.umeyama(np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]]))


def test_similarity_inverse_composes_to_identity():
    rng = np.random.default_rng(3)
    t = random_similarity(rng)
    pts = rng.uniform(-20, 20, size=(10, 2))
    assert np.allclose(t.inverse().apply(t.apply(pts)), pts, atol=1e-9)


def test_similarity_matrix_matches_apply():
    rng = np.random.default_rng(4)
    t = random_similarity(rng)
    pts = rng.uniform(-5, 5, size=(7, 2))
    m = t.matrix()
    via_matrix = pts @ m[:, :2].T + m[:, 2]
    assert np.allclose(via_matrix, t.apply(pts), atol=1e-12)


def test_similarity_rejects_reflection_and_bad_scale():
    refl = np.array([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(geometry.GeometryError):
        geometry.SimilarityTransform(1.0, refl, np.zeros(2))
    with pytest.raises(geometry.GeometryError):
        geometry.SimilarityTransform(-2.0, np.eye(2), np.zeros(2))


def test_transform_json_round_trip():
    rng = np.random.default_rng(5)
    t = random_similarity(rng)
    d = json.loads(json.dumps(t.to_json_dict("full_face", 256)))
    assert d["mode"] == "full_face" and d["out_size"] == 256
    back = geometry.transform_from_json_dict(d)
    assert np.allclose(back.matrix(), t.matrix(), atol=1e-12)


# ---------------------------------------------------------------------------
# templates

def test_template_data_consistency():
    # the 2D template is the frozen frontal projection of the 3D rig
    rig = geometry.canonical_rig3d()
    meta = geometry.rig_metadata()
    e = meta["half_extent"]
    derived = (rig[:, :2] + e) / (2 * e)
    assert np.abs(derived - geometry.canonical_template2d()).max() < 1e-5


def test_template_inside_unit_square():
    pts = geometry.canonical_template2d()
    assert pts.min() >= 0.0 and pts.max() <= 1.0


def test_template_symmetry():
    pts = geometry.canonical_template2d()
    # jaw mirror pairs share y and mirror x about 0.5
    for i in range(8):
        assert pts[i, 1] == pytest.approx(pts[16 - i, 1], abs=1e-6)
        assert pts[i, 0] == pytest.approx(1.0 - pts[16 - i, 0], abs=1e-6)
    # chin on the centreline, below the nose tip
    assert pts[8, 0] == pytest.approx(0.5, abs=1e-6)
    assert pts[8, 1] > pts[30, 1] > pts[27, 1]


def test_coverage_modes_nest():
    sizes = {}
    for mode, cov in geometry.COVERAGE.items():
        t = geometry.alignment_template(mode)
        assert t.coverage == cov
        crop = t.crop_points(256)
        sizes[mode] = crop[:, 1].max() - crop[:, 1].min()
    # smaller coverage zooms in: face spans more of the crop
    assert sizes["half_face"] > sizes["full_face"] > sizes["whole_face"]
    with pytest.raises(geometry.GeometryError):
        geometry.alignment_template("face")


def test_align_face_puts_landmarks_on_template():
    # synthesize frame landmarks from a known similarity, then align
    rng = np.random.default_rng(6)
    out_size = 64
    template = geometry.alignment_template("full_face")
    target = template.crop_points(out_size)
    t = random_similarity(rng)
    frame_lms = t.apply(target)
    img = rng.random((128, 128, 3))
    aligned, got = geometry.align_face(img, frame_lms, "full_face", out_size)
    assert aligned.shape == (out_size, out_size, 3)
    assert np.abs(got.apply(frame_lms) - target).max() < 1e-6


def test_align_face_min_size():
    with pytest.raises(geometry.GeometryError):
        geometry.align_face(np.zeros((32, 32, 3)), np.zeros((68, 2)), "full_face", 8)


def test_align_face_warp_content():
    # paint a dot at a landmark; after alignment it sits at the template spot
    out_size = 96
    template = geometry.alignment_template("whole_face")
    target = template.crop_points(out_size)
    t = geometry.SimilarityTransform(1.5, np.eye(2), np.array([20.0, 12.0]))
    frame_lms = t.apply(target)
    img = np.zeros((256, 256, 1))
    cx, cy = frame_lms[30]          # nose tip
    img[int(round(cy)) - 2:int(round(cy)) + 3, int(round(cx)) - 2:int(round(cx)) + 3] = 1.0
    aligned, _ = geometry.align_face(img, frame_lms, "whole_face", out_size)
    tx, ty = target[30]
    assert aligned[int(round(ty)), int(round(tx)), 0] > 0.5


# ---------------------------------------------------------------------------
# smoothing

def test_smooth_window_one_is_identity():
    rng = np.random.default_rng(7)
    seq = [rng.random((68, 2)) for _ in range(5)]
    out = geometry.smooth_landmarks(seq, 1)
    for a, b in zip(out, seq):
        assert np.array_equal(a, b) and a is not b


def test_smooth_constant_sequence_unchanged():
    pts = np.random.default_rng(8).random((68, 2))
    out = geometry.smooth_landmarks([pts] * 9, 5)
    for o in out:
        assert np.allclose(o, pts, atol=1e-12)


def test_smooth_impulse_weights_are_gaussian():
    n, window = 11, 5
    sigma = window / 6.0
    seq = [np.zeros((68, 2)) for _ in range(n)]
    seq[5] = np.ones((68, 2))
    out = geometry.smooth_landmarks(seq, window)
    offs = np.arange(-2, 3)
    w = np.exp(-0.5 * (offs / sigma) ** 2)
    w /= w.sum()
    for j, expect in zip(range(3, 8), w):
        assert out[j][0, 0] == pytest.approx(expect, abs=1e-12)
    assert out[2][0, 0] == 0.0  # outside the window


def test_smooth_shrinks_at_boundaries():
    # first frame keeps a symmetric one-sided window: itself only
    seq = [np.full((68, 2), float(i)) for i in range(6)]
    out = geometry.smooth_landmarks(seq, 5)
    assert np.allclose(out[0], 0.0, atol=1e-12)
    # second frame averages frames 1-3 with symmetric weights
    sigma = 5 / 6.0
    w = np.exp(-0.5 * (np.arange(-1, 2) / sigma) ** 2)
    w /= w.sum()
    assert out[1][0, 0] == pytest.approx(w @ [0.0, 1.0, 2.0], abs=1e-12)


def test_smooth_rejects_even_window():
    with pytest.raises(geometry.GeometryError):
        geometry.smooth_landmarks([np.zeros((68, 2))], 4)


# ---------------------------------------------------------------------------
# pose

def test_euler_rotation_round_trip():
    rng = np.random.default_rng(9)
    for _ in range(200):
        ang = geometry.EulerAngles(yaw=rng.uniform(-80, 80),
                                   pitch=rng.uniform(-80, 80),
                                   roll=rng.uniform(-80, 80))
        back = geometry.euler_from_rotation(geometry.rotation_from_euler(ang))
        assert np.abs(back.as_array() - ang.as_array()).max() < 1e-9


def test_euler_from_landmarks_frontal_is_zero():
    rig = geometry.canonical_rig3d()
    e = geometry.rig_metadata()["half_extent"]
    lms = 100.0 * (rig[:, :2] + e) / (2 * e)
    got = geometry.euler_from_landmarks(lms)
    assert abs(got.yaw) < 1e-6 and abs(got.pitch) < 1e-6 and abs(got.roll) < 1e-6


@pytest.mark.parametrize("yaw,pitch,roll", [
    (25.0, 0.0, 0.0), (0.0, -20.0, 0.0), (0.0, 0.0, 10.0), (30.0, 15.0, -8.0),
])
def test_euler_from_landmarks_recovers_pose(yaw, pitch, roll):
    rig = geometry.canonical_rig3d()
    rot = geometry.rotation_from_euler(geometry.EulerAngles(yaw, pitch, roll))
    projected = (rig @ rot.T)[:, :2] * 73.0 + np.array([40.0, 60.0])
    got = geometry.euler_from_landmarks(projected)
    assert got.yaw == pytest.approx(yaw, abs=0.5)
    assert got.pitch == pytest.approx(pitch, abs=0.5)
    assert got.roll == pytest.approx(roll, abs=0.5)


def test_euler_roll_sign_matches_inplane_rotation():
    # rotating the frontal projection by +10deg in-plane reads as roll +10
    rig = geometry.canonical_rig3d()
    phi = math.radians(10.0)
    rot2 = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    lms = rig[:, :2] @ rot2.T
    got = geometry.euler_from_landmarks(lms)
    assert got.roll == pytest.approx(10.0, abs=1e-6)


def test_euler_degenerate_rig_raises():
    flat = np.zeros((68, 3))
    flat[:, 0] = np.arange(68)
    with pytest.raises(geometry.GeometryError):
        geometry.euler_from_landmarks(np.random.default_rng(0).random((68, 2)), flat)


# ---------------------------------------------------------------------------
# landmark files

def test_landmark_file_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    lms = rng.uniform(0, 512, size=(68, 2))
    p = tmp_path / "f.json"
    geometry.write_landmarks(p, lms)
    with open(p) as f:
        raw = json.load(f)
    assert set(raw) == {"points"} and len(raw["points"]) == 68
    assert np.allclose(geometry.read_landmarks(p), lms, atol=1e-12)


def test_validate_landmarks_shape():
    with pytest.raises(geometry.GeometryError):
        geometry.validate_landmarks(np.zeros((67, 2)))
