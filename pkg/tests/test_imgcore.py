"""Image primitives against hand-derived cases and closed-form identities."""

import numpy as np
import pytest

from swapkit import imgcore


def test_as_image_promotes_grayscale():
    img = imgcore.as_image(np.zeros((4, 5)))
    assert img.shape == (4, 5, 1) and img.dtype == np.float64


def test_as_image_rejects_bad_inputs():
    with pytest.raises(ValueError):
        imgcore.as_image(np.zeros((4, 5, 2)))
    with pytest.raises(ValueError):
        imgcore.as_image(np.full((4, 5, 3), np.nan))


def test_bilinear_sample_hand_case():
    # 1x2 image holding 0 and 1: sampling x=0.25 lerps to 0.25
    img = np.array([[[0.0], [1.0]]])
    assert imgcore.bilinear_sample(img, 0.25, 0.0)[0] == pytest.approx(0.25, abs=1e-15)


def test_bilinear_sample_clamps():
    img = np.array([[[0.0], [1.0]]])
    assert imgcore.bilinear_sample(img, -3.0, 0.0)[0] == 0.0
    assert imgcore.bilinear_sample(img, 9.0, 5.0)[0] == 1.0


def test_warp_affine_identity_bit_exact():
    rng = np.random.default_rng(0)
    img = rng.random((9, 7, 3))
    out = imgcore.warp_affine(img, np.array([[1.0, 0, 0], [0, 1.0, 0]]), 9, 7)
    assert np.array_equal(out, img)


def test_warp_affine_integer_translation():
    rng = np.random.default_rng(1)
    img = rng.random((6, 6, 1))
    # output (x, y) samples input (x+2, y+1): a crop
    m = np.array([[1.0, 0.0, 2.0], [0.0, 1.0, 1.0]])
    out = imgcore.warp_affine(img, m, 4, 4)
    assert np.array_equal(out, img[1:5, 2:6])


def test_warp_affine_round_trip_interior():
    # smooth content: interpolation error per warp is bounded by curvature,
    # about f''_max / 8 = 0.5 / 25 / 8 per axis for this pattern
    ys, xs = np.mgrid[0:32, 0:32]
    img = (0.5 + 0.5 * np.cos(xs / 5.0) * np.cos(ys / 7.0))[..., None] * np.ones(3)
    ang = 0.3
    s = 1.2
    fwd = np.array([[s * np.cos(ang), -s * np.sin(ang), 3.0],
                    [s * np.sin(ang), s * np.cos(ang), -2.0]])
    a = np.vstack([fwd, [0, 0, 1]])
    inv = np.linalg.inv(a)[:2]
    once = imgcore.warp_affine(img, fwd, 32, 32)
    back = imgcore.warp_affine(once, inv, 32, 32)
    err = np.abs(back - img)[8:24, 8:24]
    assert err.max() < 0.01


def test_warp_affine_rejects_bad_matrix():
    img = np.zeros((4, 4, 1))
    with pytest.raises(ValueError):
        imgcore.warp_affine(img, np.zeros((3, 3)), 4, 4)
    with pytest.raises(ValueError):
        imgcore.warp_affine(img, np.full((2, 3), np.inf), 4, 4)


def test_gaussian_kernel1d_properties():
    k = imgcore.gaussian_kernel1d(0.8)
    assert k.size == 2 * 3 + 1  # radius ceil(3 * 0.8) = 3
    assert k.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(k, k[::-1])
    assert k.argmax() == k.size // 2


def test_gaussian_blur_sigma_zero_is_copy():
    rng = np.random.default_rng(3)
    img = rng.random((5, 5, 3))
    out = imgcore.gaussian_blur(img, 0.0)
    assert np.array_equal(out, img) and out is not img


def test_gaussian_blur_preserves_constants():
    img = np.full((12, 9, 3), 0.37)
    out = imgcore.gaussian_blur(img, 2.0)
    assert np.allclose(out, 0.37, atol=1e-12)


def test_gaussian_blur_impulse_gives_kernel():
    sigma = 1.5
    k = imgcore.gaussian_kernel1d(sigma)
    r = k.size // 2
    size = 2 * r + 5
    img = np.zeros((size, size, 1))
    img[size // 2, size // 2, 0] = 1.0
    out = imgcore.gaussian_blur(img, sigma)
    got = out[size // 2 - r:size // 2 + r + 1, size // 2 - r:size // 2 + r + 1, 0]
    assert np.allclose(got, np.outer(k, k), atol=1e-12)


def test_gaussian_blur_linearity():
    rng = np.random.default_rng(4)
    a = rng.random((10, 8, 3))
    b = rng.random((10, 8, 3))
    lhs = imgcore.gaussian_blur(a + 2.0 * b, 1.2)
    rhs = imgcore.gaussian_blur(a, 1.2) + 2.0 * imgcore.gaussian_blur(b, 1.2)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_unsharp_amount_zero_is_identity():
    rng = np.random.default_rng(5)
    img = rng.random((8, 8, 3))
    assert np.array_equal(imgcore.unsharp_sharpen(img, 2.0, 0.0), img)


def test_unsharp_constant_unchanged():
    img = np.full((8, 8, 3), 0.5)
    assert np.allclose(imgcore.unsharp_sharpen(img, 2.0, 1.5), 0.5, atol=1e-12)


def test_unsharp_boosts_step_edge_contrast():
    img = np.zeros((8, 16, 1))
    img[:, 8:] = 0.8
    out = imgcore.unsharp_sharpen(img, 1.5, 1.0)
    # overshoot on the bright side, undershoot (clamped) on the dark side
    assert out[:, 8:].max() > 0.8 + 0.05
    assert out[:, :8].min() == 0.0
    assert out.max() <= 1.0


def test_rgb_lab_white_and_black():
    white = imgcore.rgb_to_lab(np.ones((1, 1, 3)))
    assert white[0, 0, 0] == pytest.approx(1.0, abs=1e-6)   # L* scaled to [0, 1]
    assert abs(white[0, 0, 1]) < 1e-4 and abs(white[0, 0, 2]) < 1e-4
    black = imgcore.rgb_to_lab(np.zeros((1, 1, 3)))
    assert black[0, 0, 0] == pytest.approx(0.0, abs=1e-8)


def test_rgb_lab_round_trip():
    rng = np.random.default_rng(6)
    img = rng.random((16, 16, 3))
    back = imgcore.lab_to_rgb(imgcore.rgb_to_lab(img))
    assert np.abs(back - img).max() < 1e-3


def test_lab_ordering_sanity():
    # red has positive a*, blue negative b*
    red = imgcore.rgb_to_lab(np.array([[[1.0, 0.0, 0.0]]]))
    blue = imgcore.rgb_to_lab(np.array([[[0.0, 0.0, 1.0]]]))
    assert red[0, 0, 1] > 0.3
    assert blue[0, 0, 2] < -0.3


def test_png_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    img = rng.random((9, 11, 3))
    p = tmp_path / "x.png"
    imgcore.write_png(p, img)
    back = imgcore.read_png(p)
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12


def test_png_quantization_rounds_half_up(tmp_path):
    # 0.5/255 sits exactly on the boundary and must round up to 1
    img = np.full((2, 2, 1), 0.5 / 255)
    p = tmp_path / "q.png"
    imgcore.write_png(p, img)
    assert imgcore.read_png(p)[0, 0, 0] == pytest.approx(1 / 255, abs=1e-9)


def test_png_grayscale_shape(tmp_path):
    img = np.linspace(0, 1, 12).reshape(3, 4, 1)
    p = tmp_path / "g.png"
    imgcore.write_png(p, img)
    back = imgcore.read_png(p)
    assert back.shape == (3, 4, 1)
