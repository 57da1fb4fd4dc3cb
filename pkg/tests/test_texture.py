import numpy as np
import pytest

from feedpilot.errors import ConfigError, EmptyInputError, ParseError, ValidationError
from feedpilot.geometry import make_ripple_pair
from feedpilot.records import BoundingBox
from feedpilot.texture import (
    FILTER_BANK,
    FeaturePyramid,
    GrayImage,
    ReferenceExtractor,
    activity_series,
    crop_region,
    extract_features,
    global_sigma,
    load_pyramid,
    map_variance,
    pyramid_sigma,
    read_pgm,
    rgb_to_gray,
    save_pyramid,
    stage_sigma,
    write_pgm,
)


def test_gray_image_validation():
    with pytest.raises(ValidationError):
        GrayImage(np.array([1.0, 2.0]))  # 1-d
    with pytest.raises(ValidationError):
        GrayImage(np.array([[1.5]]))  # out of range
    with pytest.raises(ValidationError):
        GrayImage(np.array([[np.nan]]))
    img = GrayImage(np.zeros((4, 6)))
    assert img.height == 4 and img.width == 6


def _pair_with_corners(tl1, br2):
    """Ripple pair whose tl(r1) and br(r2) hit the given points exactly."""
    r1 = BoundingBox(tl1[0] + 1.0, tl1[1] + 1.0, 2.0, 2.0)
    r2 = BoundingBox(br2[0] - 1.0, br2[1] - 1.0, 2.0, 2.0)
    return make_ripple_pair(r1, r2)


def test_crop_hand_case():
    rng = np.random.default_rng(3)
    img = GrayImage(rng.uniform(0, 1, (100, 100)))
    crop = crop_region(img, _pair_with_corners((10, 10), (20, 15)))
    assert crop.width == 10 and crop.height == 5
    assert np.array_equal(crop.pixels, img.pixels[10:15, 10:20])


def test_crop_degenerate_rectangle():
    img = GrayImage(np.linspace(0, 1, 64).reshape(8, 8))
    r = BoundingBox(3.0, 3.0, 0.0, 0.0)
    crop = crop_region(img, make_ripple_pair(r, r))
    assert crop.width == 1 and crop.height == 1
    assert crop.pixels[0, 0] == img.pixels[3, 3]


def test_crop_outside_falls_back_to_nearest_pixel():
    img = GrayImage(np.linspace(0, 1, 100).reshape(10, 10))
    crop = crop_region(img, _pair_with_corners((150, 200), (160, 210)))
    assert crop.width == 1 and crop.height == 1
    assert crop.pixels[0, 0] == img.pixels[9, 9]
    crop2 = crop_region(img, _pair_with_corners((-50, -40), (-30, -20)))
    assert crop2.pixels[0, 0] == img.pixels[0, 0]


def test_constant_image_all_difference_maps_zero():
    ext = ReferenceExtractor()
    pyr = extract_features(ext, GrayImage(np.full((32, 32), 0.7)))
    for stage in pyr.stages:
        # two-tap differences cancel exactly; laplacian/ring leave at most ulp dirt
        for m in stage[1:5]:
            assert np.all(m == 0.0)
        for m in stage[5:7]:
            assert np.allclose(m, 0.0, atol=1e-15)
            assert map_variance(m) == 0.0
    assert pyramid_sigma(pyr) == 0.0


def test_constant_image_sigma_exactly_zero_any_level():
    ext = ReferenceExtractor()
    for c in (0.0, 0.3, 1 / 3, 0.7, 1.0):
        assert pyramid_sigma(ext.extract(GrayImage(np.full((24, 24), c)))) == 0.0


def test_extractor_deterministic():
    rng = np.random.default_rng(7)
    img = GrayImage(rng.uniform(0, 1, (40, 40)))
    ext = ReferenceExtractor()
    a = ext.extract(img)
    b = ext.extract(img)
    assert a.omega == b.omega
    for sa, sb in zip(a.stages, b.stages):
        for ma, mb in zip(sa, sb):
            assert np.array_equal(ma, mb)


def _manual_convolve(image, kernel):
    """Independent correlation-free convolution with reflect padding."""
    k = np.flip(kernel)  # true convolution flips the kernel
    padded = np.pad(image, 1, mode="symmetric")
    out = np.zeros_like(image)
    for i in range(image.shape[0]):
        for j in range(image.shape[1]):
            out[i, j] = np.sum(padded[i : i + 3, j : j + 3] * k)
    return out


def test_stripes_fixture_gradients():
    stripes = np.tile(np.array([0.0, 1.0, 0.0, 1.0, 0.0, 1.0]), (6, 1))
    img = GrayImage(stripes)
    pyr = ReferenceExtractor(stages=1).extract(img)
    maps = pyr.stages[0]
    h_grad, v_grad = maps[1], maps[2]
    assert map_variance(h_grad) > 0.0
    assert np.all(v_grad == 0.0)
    # cross-check the two gradient maps against a hand convolution
    assert np.allclose(h_grad, _manual_convolve(stripes, FILTER_BANK[1]), atol=1e-12)
    assert np.allclose(v_grad, _manual_convolve(stripes, FILTER_BANK[2]), atol=1e-12)


def test_map_variance_hand_cases():
    assert map_variance(np.full((3, 3), 0.4)) == 0.0
    assert map_variance(np.array([[0.0, 2.0]])) == pytest.approx(1.0, abs=1e-12)
    assert map_variance(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(1.25, abs=1e-12)


def test_stage_sigma_hand_cases():
    assert stage_sigma([1.0, 3.0]) == pytest.approx(1.0, abs=1e-12)
    assert stage_sigma([2.0, 2.0, 2.0]) == 0.0
    assert stage_sigma([5.0]) == 0.0
    with pytest.raises(EmptyInputError):
        stage_sigma([])


def test_global_sigma_hand_cases():
    assert global_sigma([0.0, 0.0, 0.0, 0.0, 2.0]) == pytest.approx(0.8, abs=1e-12)
    assert global_sigma([1.0, 1.0]) == 0.0
    with pytest.raises(EmptyInputError):
        global_sigma([])


def test_intensity_shift_leaves_sigma_unchanged():
    rng = np.random.default_rng(19)
    base = rng.uniform(0.0, 0.7, (48, 48))
    ext = ReferenceExtractor()
    s0 = pyramid_sigma(ext.extract(GrayImage(base)))
    s1 = pyramid_sigma(ext.extract(GrayImage(base + 0.25)))
    assert s1 == pytest.approx(s0, abs=1e-9)


def test_checkerboard_orders_above_flat():
    ext = ReferenceExtractor()
    for size in (16, 32, 64):
        flat = pyramid_sigma(ext.extract(GrayImage(np.full((size, size), 0.5))))
        checker = pyramid_sigma(
            ext.extract(GrayImage((np.indices((size, size)).sum(axis=0) % 2).astype(float)))
        )
        assert checker > flat


def test_truncation_flag_small_image():
    pyr = ReferenceExtractor(stages=5).extract(GrayImage(np.random.default_rng(0).uniform(0, 1, (8, 8))))
    assert pyr.truncated
    assert pyr.omega == 2  # 8x8 -> 4x4 -> 2x2 stops
    tiny = GrayImage(np.full((2, 2), 0.5))
    with pytest.raises(ValidationError):
        ReferenceExtractor().extract(tiny)


def test_activity_series_hand_cases():
    assert activity_series([1.0, 3.0], 2) == [1.0, 2.0]
    assert activity_series([4.0, 5.0, 6.0], 1) == [4.0, 5.0, 6.0]
    assert activity_series([], 5) == []
    with pytest.raises(ConfigError):
        activity_series([1.0], 0)


def test_activity_series_matches_naive():
    rng = np.random.default_rng(23)
    vals = list(rng.uniform(0, 2, 200))
    for window in (1, 3, 20):
        naive = [float(np.mean(vals[max(0, i - window + 1) : i + 1])) for i in range(len(vals))]
        assert activity_series(vals, window) == pytest.approx(naive, abs=1e-12)


def test_pyramid_file_round_trip(tmp_path):
    rng = np.random.default_rng(29)
    stages = (
        tuple(rng.normal(size=(4, 5)) for _ in range(3)),
        tuple(rng.normal(size=(2, 2)) for _ in range(7)),
    )
    pyr = FeaturePyramid(stages=stages)
    path = tmp_path / "pyr.pyr"
    save_pyramid(path, pyr)
    again = load_pyramid(path)
    assert again.omega == 2
    assert [len(s) for s in again.stages] == [3, 7]
    for sa, sb in zip(pyr.stages, again.stages):
        for ma, mb in zip(sa, sb):
            assert np.array_equal(ma, mb)


def test_pyramid_loader_arbitrary_phi(tmp_path):
    path = tmp_path / "external.pyr"
    path.write_text("omega 2\n1 1 2\n0.5 -1.5\n2 1 1\n3\n4\n")
    pyr = load_pyramid(path)
    assert pyr.omega == 2
    assert pyr.stages[0][0].shape == (1, 2)
    assert pyr.stages[1][1][0, 0] == 4.0
    assert pyramid_sigma(pyr) >= 0.0


def test_pyramid_loader_corrupt(tmp_path):
    path = tmp_path / "bad.pyr"
    path.write_text("omega 1\n2 2 2\n1 2 3\n")
    with pytest.raises(ParseError):
        load_pyramid(path)


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(31)
    img = GrayImage(rng.integers(0, 256, size=(9, 13)).astype(float) / 255.0)
    path = tmp_path / "frame.pgm"
    write_pgm(path, img)
    again = read_pgm(path)
    assert again.width == 13 and again.height == 9
    assert np.array_equal(again.pixels, img.pixels)


def test_pgm_with_comment(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 2\n255\n" + bytes([0, 128, 255, 64]))
    img = read_pgm(path)
    assert img.pixels[0, 1] == pytest.approx(128 / 255)


def test_pgm_errors(tmp_path):
    bad_magic = tmp_path / "p2.pgm"
    bad_magic.write_bytes(b"P2\n2 2\n255\n0 0 0 0")
    with pytest.raises(ParseError):
        read_pgm(bad_magic)
    short = tmp_path / "short.pgm"
    short.write_bytes(b"P5\n4 4\n255\n\x00\x01")
    with pytest.raises(ParseError):
        read_pgm(short)


def test_rgb_to_gray_weights():
    rgb = np.zeros((1, 1, 3))
    rgb[0, 0] = (1.0, 0.5, 0.25)
    assert rgb_to_gray(rgb)[0, 0] == pytest.approx(0.299 + 0.587 * 0.5 + 0.114 * 0.25)
    with pytest.raises(ValidationError):
        rgb_to_gray(np.zeros((2, 2)))
