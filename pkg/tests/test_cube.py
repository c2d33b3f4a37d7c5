import math

import numpy as np
import pytest

from superpca.cube import (HsiCube, add_awgn, cube_from_matrix, estimate_filter_sigma, first_pc_image, reshape_cube,
                           scale_to_range, weighted_mean_filter)
from superpca.errors import ContractError, ParameterError


def brute_force_filter(cube, radius, sigma_f):
    pixels = cube.to_pixels()
    rows, cols, _ = pixels.shape
    out = np.zeros_like(pixels)
    for r in range(rows):
        for c in range(cols):
            total, weight_sum = 0.0, 0.0
            for rr in range(max(0, r - radius), min(rows, r + radius + 1)):
                for cc in range(max(0, c - radius), min(cols, c + radius + 1)):
                    diff = pixels[r, c] - pixels[rr, cc]
                    weight = math.exp(-float(diff @ diff) / (2 * sigma_f ** 2))
                    total = total + weight * pixels[rr, cc]
                    weight_sum += weight
            out[r, c] = total / weight_sum
    return out


def test_cube_validation():
    with pytest.raises(ContractError, match='shape'):
        HsiCube(np.zeros((3, 4)))
    with pytest.raises(ContractError, match='NaN'):
        HsiCube(np.array([[[1.0, np.nan]]]))
    cube = HsiCube.from_pixels(np.zeros((2, 3, 4)))
    assert (cube.rows, cube.cols, cube.bands, cube.pixels) == (2, 3, 4, 6)


def test_reshape_cube():
    single = HsiCube.from_pixels(np.array([[[1.0, 2.0, 3.0]]]))
    np.testing.assert_array_equal(reshape_cube(single), [[1.0], [2.0], [3.0]])

    grid = HsiCube.from_pixels(np.array([[[1.0], [2.0]], [[3.0], [4.0]]]))
    np.testing.assert_array_equal(reshape_cube(grid), [[1.0, 2.0, 3.0, 4.0]])

    rng = np.random.default_rng(3)
    cube = HsiCube.from_pixels(rng.normal(size=(3, 4, 5)))
    matrix = reshape_cube(cube)
    assert matrix.shape == (5, 12)
    np.testing.assert_array_equal(matrix[:, 1 * 4 + 2], cube.to_pixels()[1, 2])
    assert np.max(np.abs(cube_from_matrix(matrix, 3, 4).data - cube.data)) == 0.0
    with pytest.raises(ContractError):
        cube_from_matrix(matrix, 4, 4)


def test_weighted_mean_filter_fixed_points():
    constant = HsiCube.from_pixels(np.full((4, 5, 3), 0.25))
    np.testing.assert_array_equal(weighted_mean_filter(constant, 2, 0.1).data, constant.data)
    np.testing.assert_array_equal(weighted_mean_filter(constant).data, constant.data)

    rng = np.random.default_rng(0)
    cube = HsiCube.from_pixels(rng.uniform(size=(4, 5, 3)))
    np.testing.assert_array_equal(weighted_mean_filter(cube, 0, 0.5).data, cube.data)


def test_weighted_mean_filter_matches_windowed_sum():
    line = HsiCube.from_pixels(np.array([[[0.0], [0.0], [10.0]]]))
    filtered = weighted_mean_filter(line, 1, 1e6).to_pixels()
    np.testing.assert_allclose(filtered, brute_force_filter(line, 1, 1e6), atol=1e-12)
    assert filtered[0, 1, 0] == pytest.approx(10.0 / 3.0, rel=1e-9)

    rng = np.random.default_rng(1)
    cube = HsiCube.from_pixels(rng.uniform(size=(4, 5, 3)))
    np.testing.assert_allclose(weighted_mean_filter(cube, 1, 0.7).to_pixels(), brute_force_filter(cube, 1, 0.7),
                               atol=1e-12)


def test_weighted_mean_filter_equal_weights():
    line = HsiCube.from_pixels(np.array([[[0.0], [3.0], [9.0]]]))
    filtered = weighted_mean_filter(line, 1, math.inf).to_pixels()[0, :, 0]
    np.testing.assert_allclose(filtered, [1.5, 4.0, 6.0])


def test_weighted_mean_filter_convexity():
    rng = np.random.default_rng(2)
    cube = HsiCube.from_pixels(rng.normal(size=(6, 7, 4)))
    filtered = weighted_mean_filter(cube, 2)
    assert np.all(filtered.data.min(axis=(1, 2)) >= cube.data.min(axis=(1, 2)))
    assert np.all(filtered.data.max(axis=(1, 2)) <= cube.data.max(axis=(1, 2)))


def test_weighted_mean_filter_errors():
    cube = HsiCube.from_pixels(np.zeros((2, 2, 1)))
    with pytest.raises(ParameterError, match='sigma_f'):
        weighted_mean_filter(cube, 2, 0.0)
    with pytest.raises(ParameterError, match='sigma_f'):
        weighted_mean_filter(cube, 2, -1.0)
    with pytest.raises(ParameterError, match='radius'):
        weighted_mean_filter(cube, -1, 1.0)


def test_estimate_filter_sigma():
    assert estimate_filter_sigma(HsiCube.from_pixels(np.ones((5, 5, 2)))) == 1e-12
    ramp = HsiCube.from_pixels(np.arange(20, dtype=float).reshape(4, 5, 1))
    assert estimate_filter_sigma(ramp, 1, sample_fraction=1.0) > 0
    assert estimate_filter_sigma(ramp, 1, seed=4) == estimate_filter_sigma(ramp, 1, seed=4)


def test_add_awgn():
    rng = np.random.default_rng(5)
    cube = HsiCube.from_pixels(rng.uniform(size=(3, 3, 2)))
    np.testing.assert_array_equal(add_awgn(cube, 0.0, 1).data, cube.data)
    np.testing.assert_array_equal(add_awgn(cube, 10.0, 7).data, add_awgn(cube, 10.0, 7).data)
    assert not np.array_equal(add_awgn(cube, 10.0, 7).data, add_awgn(cube, 10.0, 8).data)

    noisy = add_awgn(HsiCube(np.zeros((16, 64, 64))), 10.0, 7)
    assert abs(noisy.data.std() - 10.0) < 0.5
    with pytest.raises(ParameterError):
        add_awgn(cube, -1.0, 0)


def test_scale_to_range():
    cube = HsiCube.from_pixels(np.array([[[2.0, 4.0]], [[6.0, 10.0]]]))
    scaled = scale_to_range(cube, 0.0, 1.0)
    assert scaled.data.min() == 0.0 and scaled.data.max() == 1.0
    np.testing.assert_allclose(scaled.to_pixels()[0, 0], [0.0, 0.25])
    with pytest.raises(ParameterError):
        scale_to_range(cube, 1.0, 1.0)


def test_first_pc_image():
    same = HsiCube.from_pixels(np.tile([0.2, 0.5, 0.9], (3, 4, 1)))
    np.testing.assert_array_equal(first_pc_image(same).values, np.zeros((3, 4)))

    band = np.array([[3.0, 1.0, 4.0], [1.5, 9.0, 2.0]])
    single = first_pc_image(HsiCube.from_pixels(band[:, :, None]))
    np.testing.assert_allclose(single.values, (band - band.min()) / (band.max() - band.min()), atol=1e-8)

    x1 = np.array([[3.0, 1.0], [4.0, 2.0]])
    line = HsiCube.from_pixels(np.stack([x1, 2 * x1], axis=2))
    guide = first_pc_image(line)
    assert guide.values.min() == pytest.approx(0.0) and guide.values.max() == pytest.approx(1.0)
    np.testing.assert_array_equal(np.argsort(guide.values.ravel()), np.argsort(x1.ravel()))


def test_first_pc_image_offset_invariance():
    rng = np.random.default_rng(9)
    pixels = rng.integers(0, 8, size=(4, 4, 3)).astype(float)
    shifted = pixels + np.array([5.0, 7.0, 11.0])
    np.testing.assert_array_equal(first_pc_image(HsiCube.from_pixels(pixels)).values,
                                  first_pc_image(HsiCube.from_pixels(shifted)).values)


def test_first_pc_image_real_offsets():
    rng = np.random.default_rng(21)
    direction = np.array([0.9, -0.3, 0.5, 0.2])
    pixels = rng.uniform(size=(6, 5, 1)) * direction + rng.normal(scale=0.01, size=(6, 5, 4))
    reference = first_pc_image(HsiCube.from_pixels(pixels)).values
    assert reference.min() == 0.0 and reference.max() == 1.0
    for trial in range(10):
        offset = rng.uniform(-50.0, 50.0, size=4)
        np.testing.assert_array_equal(first_pc_image(HsiCube.from_pixels(pixels + offset)).values, reference)
