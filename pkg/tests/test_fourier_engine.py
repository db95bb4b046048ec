import math

import numpy as np
import pytest
from scipy import integrate

from tools.cone_geometry import cone_shell_volume, knapp_plate, plate_rotation, sphere_measure
from tools.fourier_engine import (
    FrequencyGrid, annulus_data, as_exponent, average_cone_decay, box_factor_values, box_indicator,
    calibrate_knapp_radius, cone_shell_ft_oracle, cone_shell_indicator, cone_surface_measure, from_spatial,
    ft_at_points, ft_grid_converged, grid_function, half_wave_evolve, interval_ft, l2_norm_freq, littlewood_paley,
    low_part, lp_multiplier, lp_top_band, lq_norm_mu, mollify_convolve, radial_transform,
    reflect_first_axis, sample_on_grid, sample_wave_at, separable_lq_norm, smooth_step, sobolev_norm,
    solve_wave, spectral_grid, to_spatial, tukey_ft, tukey_l2_squared, tukey_window, windowed_plate,
)
from tools.fractal_measures import AtomicMeasure, make_cantor, make_delta_product, make_radial_power, total_mass
from tools.lab_errors import InvalidInputError, QuadratureNotConvergedError


def test_interval_ft_at_zero_is_length():
    assert np.isclose(interval_ft(0.0, 0.3, 0.75), 1.5)


@pytest.mark.parametrize("y", [0.0, 1.3, 2 * math.pi, 9.7])
def test_tukey_ft_matches_trapezoid(y):
    flat, taper = 0.5, 0.5
    s = np.linspace(-1.0, 1.0, 200_001)
    numeric = integrate.trapezoid(tukey_window(s, flat, taper) * np.exp(-1j * y * s), s)
    assert np.isclose(tukey_ft(y, 0.0, flat, taper), numeric, atol=1e-8)


def test_tukey_l2_squared_matches_trapezoid():
    s = np.linspace(-1.0, 1.0, 200_001)
    numeric = integrate.trapezoid(tukey_window(s, 0.5, 0.5) ** 2, s)
    assert math.isclose(tukey_l2_squared(0.5, 0.5), numeric, rel_tol=1e-8)


def test_box_transform_at_origin_is_volume():
    f = box_indicator([1.0, 2.0, 3.0], [1.0, 0.5, 0.25])
    value = ft_at_points(f, np.zeros((1, 3))).values[0]
    assert np.isclose(value, 1.0)
    assert math.isclose(l2_norm_freq(f), 1.0)


def test_box_transform_matches_grid_oracle(rng):
    f = box_indicator([1.0, -2.0, 3.0], [1.0, 0.5, 0.25], rotation=plate_rotation(2))
    points = rng.uniform(-2.0, 2.0, size=(6, 3))
    oracle, report = ft_grid_converged(f, points)
    assert np.allclose(ft_at_points(f, points).values, oracle, atol=1e-6)
    assert report["orders"] == [2, 4]


def test_windowed_plate_matches_grid_oracle(rng):
    plate = knapp_plate(16.0, 2)
    f = windowed_plate(plate)
    eta = rng.uniform(-1.0, 1.0, size=(4, 3)) * 0.5 / plate.half_widths[None, :]
    points = eta @ plate.rotation.T
    oracle, _ = ft_grid_converged(f, points)
    exact = ft_at_points(f, points).values
    assert np.allclose(exact, oracle, atol=1e-6 * plate.volume)


def test_windowed_plate_norm():
    plate = knapp_plate(64.0, 2)
    f = windowed_plate(plate)
    expected = math.prod(tukey_l2_squared(a, b) for a, b in zip(f.params["flat"], f.params["taper"]))
    assert math.isclose(l2_norm_freq(f) ** 2, expected)


def test_reflection_mirrors_support():
    plate = knapp_plate(64.0, 2)
    f = windowed_plate(plate)
    mirrored = reflect_first_axis(f)
    probe = plate.center @ plate.rotation.T
    assert f.declared_support.contains(probe)
    assert mirrored.declared_support.contains(probe * np.array([-1.0, 1.0, 1.0]))
    with pytest.raises(InvalidInputError):
        reflect_first_axis(cone_shell_indicator(16.0, 2))


def test_shell_transform_at_origin_is_volume():
    f = cone_shell_indicator(16.0, 2)
    value = ft_at_points(f, np.zeros((1, 3))).values[0]
    assert np.isclose(value, cone_shell_volume(16.0, 2), rtol=1e-9)


def test_shell_transform_matches_nested_quadrature():
    R, n = 16.0, 2
    x = np.array([0.05, -0.03, 0.04])
    exact = ft_at_points(cone_shell_indicator(R, n), x[None, :]).values[0]
    oracle = cone_shell_ft_oracle(R, n, x)
    assert abs(exact - oracle) <= 1e-6 * cone_shell_volume(R, n)


def test_dimension_mismatch():
    f = box_indicator([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    with pytest.raises(InvalidInputError):
        ft_at_points(f, np.zeros((2, 4)))


def test_coarse_grid_is_refused():
    f = sample_on_grid(box_indicator([0.0, 0.0], [1.0, 1.0]), 4)
    with pytest.raises(QuadratureNotConvergedError):
        ft_at_points(f, np.array([[100.0, 0.0]]))


def test_grid_samples_must_respect_support():
    grid = FrequencyGrid(origin=[-1.5, -1.5], spacing=[1.0, 1.0], shape=(4, 4))
    support = box_indicator([0.0, 0.0], [0.6, 0.6]).declared_support
    with pytest.raises(InvalidInputError):
        grid_function(grid, np.ones((4, 4)), support=support)


@pytest.mark.parametrize("q,expected", [("inf", math.inf), (2, 2.0), ("abc", None)])
def test_as_exponent(q, expected):
    if expected is None:
        with pytest.raises(InvalidInputError):
            as_exponent(q)
    else:
        assert as_exponent(q) == expected


def test_as_exponent_below_one():
    with pytest.raises(InvalidInputError):
        as_exponent(0.5)


def test_lq_norm_of_constant_field():
    mu = make_cantor(1.5, 2, 3)
    field = ft_at_points(box_indicator([0.0, 0.0, 0.0], [1e-3, 1e-3, 1e-3]), mu.points)
    scale = abs(field.values[0])
    assert math.isclose(lq_norm_mu(field, mu, 2), scale * math.sqrt(total_mass(mu)), rel_tol=1e-6)
    assert math.isclose(lq_norm_mu(field, mu, "inf"), scale, rel_tol=1e-6)


def test_lq_norm_needs_matching_atoms():
    mu = make_cantor(1.5, 2, 3)
    field = ft_at_points(box_indicator([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]), mu.points[:10])
    with pytest.raises(InvalidInputError):
        lq_norm_mu(field, mu, 2)


@pytest.mark.parametrize("q", [2, 4, "inf"])
def test_separable_norm_matches_direct_sum(q):
    mu = make_delta_product(2.0, 2, 1 / 4, domain="cube")
    f = box_indicator([0.0, 3.0, 1.0], [0.5, 2.0, 4.0], rotation=mu.factors.basis)
    separable = separable_lq_norm(box_factor_values(f, mu.factors), mu.factors, q)
    direct = lq_norm_mu(ft_at_points(f, mu.points), mu, q)
    assert math.isclose(separable, direct, rel_tol=1e-9)


def test_spectral_round_trip(rng):
    samples = rng.normal(size=(16, 16))
    data = from_spatial(samples, 2 * math.pi)
    assert np.allclose(to_spatial(data), samples, atol=1e-12)


def test_spectral_grid_needs_even_size():
    with pytest.raises(InvalidInputError):
        spectral_grid(2, 15, 2 * math.pi)


def test_half_wave_conserves_l2():
    data = annulus_data(spectral_grid(2, 32, 4 * math.pi), 2, seed=3)
    evolved = half_wave_evolve(data, 1.7)
    assert math.isclose(sobolev_norm(evolved, 0.0), sobolev_norm(data, 0.0), rel_tol=1e-12)


def test_wave_solution_at_time_zero():
    grid = spectral_grid(2, 16, 2 * math.pi)
    f, g = annulus_data(grid, 2), annulus_data(grid, 1, seed=1)
    assert np.allclose(solve_wave(f, g, 0.0).values, f.values)


def test_pointwise_wave_matches_fft():
    grid = spectral_grid(2, 16, 2 * math.pi)
    f, g = annulus_data(grid, 2), annulus_data(grid, 1, seed=1)
    t = 0.7
    spatial = to_spatial(solve_wave(f, g, t))
    k = np.array([[8, 8], [3, 11], [12, 5]])
    x = (k - 8) * (2 * math.pi / 16)
    points = np.concatenate([x, np.full((3, 1), t)], axis=1)
    sampled = sample_wave_at(f, g, points).values
    assert np.allclose(sampled, spatial[k[:, 0], k[:, 1]], atol=1e-10)


def test_smooth_step_plateaus():
    assert np.allclose(smooth_step([0.0, 0.5, 1.0]), 1.0)
    assert np.allclose(smooth_step([2.0, 3.0]), 0.0)


def test_lp_multiplier_support():
    assert np.allclose(lp_multiplier([0.5, 1.0, 8.0, 20.0], 2), 0.0)
    assert lp_multiplier([4.0], 2)[0] > 0


def test_littlewood_paley_partition():
    data = annulus_data(spectral_grid(2, 32, 2 * math.pi), 3, seed=2)
    total = low_part(data).values.copy()
    for j in range(1, lp_top_band(data) + 1):
        total += littlewood_paley(data, j).values
    assert np.allclose(total, data.values, atol=1e-12)
    with pytest.raises(InvalidInputError):
        littlewood_paley(data, 0)


def test_mollified_mass_of_cantor_measure():
    mu = make_cantor(1.5, 2, 3)
    assert math.isclose(mollify_convolve(mu, 2.0, 1), total_mass(mu), rel_tol=1e-6)


def test_mollified_mass_of_product_measure():
    mu = make_delta_product(2.0, 2, 1 / 4, domain="cube")
    assert math.isclose(mollify_convolve(mu, 4.0, 1), total_mass(mu), rel_tol=1e-6)


def test_mollified_mass_of_radial_measure():
    mu = make_radial_power(2.0, 2, 1 / 8)
    assert math.isclose(mollify_convolve(mu, 4.0, 1), mu.radial.total_mass, rel_tol=1e-3)


def test_mollifier_spacing_bound():
    with pytest.raises(QuadratureNotConvergedError):
        mollify_convolve(make_cantor(1.5, 2, 3), 4.0, 2, spacing=0.5)


def test_radial_transform_at_origin_is_mass():
    assert math.isclose(float(radial_transform(1.5, 3, 0.0)[0]), sphere_measure(3) / 1.5, rel_tol=1e-10)


def test_cone_decay_of_point_mass_is_surface_measure():
    delta = AtomicMeasure(points=[[0.0, 0.0, 0.0]], weights=[1.0], alpha_claimed=0.5,
                          support_radius=1.0, resolution=0.1)
    assert math.isclose(average_cone_decay(delta, 32.0), cone_surface_measure(2), rel_tol=1e-10)


def test_knapp_radius_keeps_default_constant():
    assert calibrate_knapp_radius(16.0, 2) == 0.25


def test_knapp_radius_halves_a_large_start():
    c = calibrate_knapp_radius(16.0, 2, c=8.0)
    assert c <= 0.5
    assert math.log2(8.0 / c).is_integer()
