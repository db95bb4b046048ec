import math

import numpy as np
import pytest

from tools.cone_geometry import (
    ConeShell, NullFrame, angular_project, angular_support, anisotropic_scale, ball_volume, cap_level,
    cap_multiplicity, caps_adjacent, caps_related, cone_distance, cone_shell_volume, dual_box, export_caps,
    from_null_coords, knapp_plate, null_coords, pappus_shell_volume_n2, plate_in_shell, plate_rotation,
    shell_contains, sphere_measure, sphere_quadrature, stadium_quadrature, transversal_pair_supports,
    whitney_caps, whitney_cover_pairs,
)
from tools.fourier_engine import random_cone_function
from tools.lab_errors import InvalidInputError


@pytest.mark.parametrize("dim", [2, 3, 4, 5])
def test_sphere_quadrature_total_weight(dim):
    nodes, weights = sphere_quadrature(dim, 6)
    assert np.allclose(np.linalg.norm(nodes, axis=1), 1.0)
    assert math.isclose(weights.sum(), sphere_measure(dim), rel_tol=1e-12)


def test_sphere_quadrature_integrates_second_moment():
    nodes, weights = sphere_quadrature(3, 6)
    # integral of x_1^2 over S^2 is 4 pi / 3
    assert math.isclose(np.sum(weights * nodes[:, 0] ** 2), 4 * math.pi / 3, rel_tol=1e-12)


def test_ball_volume_known_values():
    assert math.isclose(ball_volume(2), math.pi)
    assert math.isclose(ball_volume(3), 4 * math.pi / 3)


@pytest.mark.parametrize("R", [16.0, 64.0, 512.0])
def test_shell_volume_matches_pappus(R):
    assert math.isclose(cone_shell_volume(R, 2), pappus_shell_volume_n2(R), rel_tol=1e-9)


def test_cone_distance_on_and_off_the_cone():
    R = 32.0
    on = np.array([[40.0, 0.0, 40.0], [0.0, 50.0, 50.0]])
    assert np.allclose(cone_distance(R, on), 0.0)
    below = np.array([[R, 0.0, R - 3.0]])
    assert math.isclose(float(cone_distance(R, below)[0]), 3.0)


@pytest.mark.parametrize("delta", [0.5, 1.0])
def test_stadium_area(delta):
    R = 16.0
    _, _, weights = stadium_quadrature(R, delta)
    assert math.isclose(float(np.sum(weights)), 2 * math.sqrt(2) * R * delta + math.pi * delta ** 2, rel_tol=1e-12)


def test_shell_membership():
    shell = ConeShell(32.0, 1.0, 2)
    inside = np.array([[32.0, 0.0, 32.0], [0.0, 48.5, 48.0], [-40.0, 0.0, 40.5]])
    outside = np.array([[70.0, 0.0, 70.0], [10.0, 0.0, 40.0], [0.0, 0.0, 48.0]])
    assert np.all(shell_contains(shell, inside))
    assert not np.any(shell_contains(shell, outside))


def test_shell_rejects_small_scale():
    with pytest.raises(InvalidInputError):
        ConeShell(0.5, 1.0, 2)


def test_null_frame_round_trip(rng):
    frame = NullFrame.aligned([0.3, -0.4, 0.5])
    xi = rng.normal(size=(20, 4))
    assert np.allclose(frame.from_null(frame.to_null(xi)), xi)


def test_null_frame_puts_cone_ray_on_tau_axis():
    frame = NullFrame.aligned([1.0, 2.0, 2.0])
    ray = np.array([1.0, 2.0, 2.0, 3.0])
    eta = frame.to_null(ray)
    assert np.allclose(eta[:-1], 0.0, atol=1e-12)
    assert eta[-1] > 0


def test_null_coords_inverse(rng):
    frame = NullFrame.aligned([1.0, -1.0, 0.5])
    xi = rng.normal(size=(30, 4))
    xi_pp, sigma, tau = null_coords(frame, xi)
    assert xi_pp.shape == (30, 2)
    assert np.allclose(from_null_coords(frame, xi_pp, sigma, tau), xi)


def test_anisotropic_scale_factors():
    eta = np.array([1.0, 1.0, 1.0])
    assert np.allclose(anisotropic_scale(eta, 2), [4.0, 1.0, 16.0])


@pytest.mark.parametrize("n", [2, 3])
def test_plate_rotation_is_orthogonal(n):
    q = plate_rotation(n)
    assert np.allclose(q.T @ q, np.eye(n + 1))


@pytest.mark.parametrize("R", [16.0, 64.0, 256.0, 4096.0])
@pytest.mark.parametrize("n", [2, 3])
def test_knapp_plate_inside_shell(R, n):
    assert plate_in_shell(knapp_plate(R, n))


def test_knapp_plate_domain_errors():
    with pytest.raises(InvalidInputError):
        knapp_plate(8.0, 2)
    with pytest.raises(InvalidInputError):
        knapp_plate(64.0, 1)


def test_dual_box_sides():
    plate = knapp_plate(64.0, 3)
    box = dual_box(plate, constant=1.0)
    assert np.allclose(box.sides, [1 / 64, 1 / 8, 1 / 8, 1.0])


@pytest.mark.parametrize("j,n,count", [(0, 2, 4), (1, 2, 8), (3, 2, 32), (1, 3, 24), (2, 3, 96)])
def test_cap_counts(j, n, count):
    assert len(whitney_caps(j, n)) == count


def test_caps_cover_generic_directions_once(rng):
    directions = rng.normal(size=(200, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    assert all(cap_multiplicity(d, 3, 3) == 1 for d in directions)


def test_children_nest_in_parents():
    level = cap_level(3, 3)
    for parent in range(cap_level(2, 3).count):
        for child in level.children_indices(parent):
            assert level.parent_index(int(child)) == parent


def test_related_caps_are_not_adjacent():
    caps = whitney_caps(2, 2)
    for a in caps:
        for b in caps:
            if caps_related(a, b):
                assert not caps_adjacent(a, b)
                assert caps_related(b, a)


@pytest.mark.parametrize("R,j0", [(16.0, 2), (64.0, 3), (128.0, 4), (256.0, 4)])
def test_whitney_depth(R, j0):
    assert whitney_cover_pairs(R, 2).j0 == j0


def test_whitney_pairs_are_symmetric():
    decomposition = whitney_cover_pairs(64.0, 2)
    for pairs in decomposition.pairs.values():
        as_set = set(pairs)
        assert all((m, k) in as_set for k, m in pairs)


def test_whitney_locates_separated_directions():
    decomposition = whitney_cover_pairs(256.0, 2)
    a = np.array([1.0, 0.0])
    b = np.array([math.cos(0.3), math.sin(0.3)])
    assert decomposition.locate_pair(a, b) is not None
    assert decomposition.locate_pair(a, a) is None


def test_export_caps_is_json_ready():
    caps = whitney_caps(1, 2)
    payload = export_caps(caps, [(0, 2)])
    assert len(payload["caps"]) == 8
    assert payload["related_pairs"] == [[0, 2]]


def test_transversal_sectors_hold_mirrored_plates(rng):
    R, n = 64.0, 2
    plate = knapp_plate(R, n)
    first, second = transversal_pair_supports(R, n)
    points = plate.sample(500, rng)
    mirrored = points * np.array([-1.0, 1.0, 1.0])
    assert np.all(first.contains(points))
    assert np.all(second.contains(mirrored))
    assert not np.any(second.contains(points))


def test_transversal_separation_domain():
    with pytest.raises(InvalidInputError):
        transversal_pair_supports(64.0, 2, separation=0.0)


def test_angular_projections_sum_to_the_function():
    f = random_cone_function(8.0, 2, spacing=0.5, seed=3)
    parts = [angular_project(f, cap) for cap in whitney_caps(2, 2)]
    assert np.allclose(sum(p.values for p in parts), f.values)
    assert sum(int(np.count_nonzero(p.values)) for p in parts) == int(np.count_nonzero(f.values))


def test_angular_support_is_unit_directions():
    f = random_cone_function(8.0, 2, spacing=0.5, seed=3)
    dirs = angular_support(f)
    assert len(dirs) == int(np.count_nonzero(f.values))
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    assert len(angular_support(f, threshold=np.inf)) == 0
