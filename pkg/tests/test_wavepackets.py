import math

import numpy as np
import pytest

from tools.lab_errors import InvalidInputError
from tools.wavepackets import (
    PACKET_SETTINGS, WavePacketDictionary, cube_cover, decompose, packet_data, packet_dictionary,
    random_slab_data, reconstruction_error, related_mask, sim_split, slab_data, split_energy,
    support_inflation, tube_decay_check,
)


@pytest.fixture(scope="module")
def dictionary():
    return packet_dictionary(64, 2)


@pytest.fixture(scope="module")
def random_expansion(dictionary):
    data = random_slab_data(dictionary, seed=5)
    return data, decompose(data, jobs=2)


@pytest.fixture(scope="module")
def packet(dictionary):
    index = dictionary.nearest_index([0.0, 0.0], [1.5, 0.0])
    return index, decompose(packet_data(dictionary, index))


@pytest.mark.parametrize("R,n", [(64, 4), (8, 2), (1024, 2), (128, 3)])
def test_dictionary_domain(R, n):
    with pytest.raises(InvalidInputError):
        WavePacketDictionary(R, n)


def test_lattices(dictionary):
    assert dictionary.positions_per_axis == 32
    assert dictionary.position_spacing == pytest.approx(8.0)
    assert len(dictionary) == dictionary.direction_count * 32 ** 2
    norms = np.linalg.norm(dictionary.directions, axis=1)
    assert norms.min() >= PACKET_SETTINGS["direction_min"]
    assert norms.max() <= PACKET_SETTINGS["direction_max"]
    assert dictionary.positions().shape == (32 ** 2, 2)


def test_index_wraps_positions(dictionary):
    w = dictionary.index(0, (-1, 33))
    assert w.position == (31, 1)
    assert np.allclose(w.y, [-8.0, 8.0])


def test_tube_geometry(dictionary):
    w = dictionary.nearest_index([16.0, 0.0], [0.0, 1.5])
    tube = dictionary.tube(w)
    assert np.allclose(tube.axis, [0.0, -1.0])
    assert tube.radius == 8.0
    inside = [[16.0, 0.0, 0.0], [16.0, -64.0, 64.0], [20.0, 32.0, -32.0]]
    assert tube.contains(inside).all()
    assert not tube.contains([[16.0 + 9.0, 0.0, 0.0]])[0]
    assert not tube.contains([[16.0, 0.0, 65.0]])[0]
    assert tube.distance([[28.0, 0.0, 0.0]])[0] == pytest.approx(4.0)


def test_random_data_is_normalized(dictionary):
    data = random_slab_data(dictionary, seed=1)
    assert data.norm == pytest.approx(1.0)
    assert support_inflation(data) == 1.0
    sector = random_slab_data(dictionary, seed=1, direction=[1.0, 1.0], half_angle=0.3)
    assert sector.norm == pytest.approx(1.0)


def test_slab_data_rejects_off_shell_profiles(dictionary):
    with pytest.raises(InvalidInputError):
        slab_data(dictionary, np.ones(dictionary.grid.shape))
    with pytest.raises(InvalidInputError):
        slab_data(dictionary, np.zeros((3, 3)))


def test_reconstruction(random_expansion):
    data, expansion = random_expansion
    assert expansion.ripple <= PACKET_SETTINGS["ripple_limit"]
    assert reconstruction_error(data, expansion) < 1e-3
    assert 0.0 < expansion.coefficient_ratio < 10.0


def test_parallel_decomposition_matches_serial(dictionary, random_expansion):
    data, expansion = random_expansion
    serial = decompose(data, jobs=1)
    assert np.array_equal(serial.coefficients, expansion.coefficients)


def test_empty_data_has_no_packets(dictionary):
    data = slab_data(dictionary, np.zeros(dictionary.grid.shape))
    expansion = decompose(data)
    assert expansion.coefficient_norm == 0.0
    assert expansion.coefficient_ratio == 0.0
    assert reconstruction_error(data, expansion) == 0.0
    assert support_inflation(data) == 1.0


def test_single_packet_is_localized(packet):
    index, expansion = packet
    assert expansion.mass_near(index) > 0.9
    top = expansion.summary(limit=1)[0]
    assert top["position"] == list(index.position)
    assert np.allclose(top["v"], index.v)


def test_packet_decays_off_its_tube(packet):
    _, expansion = packet
    report = tube_decay_check(expansion, delta=0.2, packets=1)
    assert report["threshold"] == pytest.approx(64.0 ** -2)
    assert report["max_ratio_beyond"] <= report["threshold"]
    assert report["packets"][0]["on_tube_ratio"] == pytest.approx(1.0)


@pytest.mark.parametrize("delta", [0.05, 0.5])
def test_tube_decay_delta_domain(packet, delta):
    with pytest.raises(InvalidInputError):
        tube_decay_check(packet[1], delta=delta)


def test_cube_cover():
    cubes = cube_cover(64.0, 2, 0.1)
    side = 64.0 ** 0.9
    assert len(cubes) == 4 ** 3
    assert all(math.isclose(c.side, side) for c in cubes)
    reach = np.max(np.abs([c.center for c in cubes])) + side / 2
    assert reach >= 64.0


def test_sim_split_partitions_coefficients(random_expansion):
    _, expansion = random_expansion
    cube = cube_cover(64.0, 2, 0.1)[0]
    near, far = sim_split(expansion, cube, 0.1)
    assert np.array_equal(near.coefficients + far.coefficients, expansion.coefficients)
    assert not np.any((near.coefficients != 0) & (far.coefficients != 0))


def test_central_cube_meets_central_tube(dictionary, packet):
    index, expansion = packet
    cubes = cube_cover(64.0, 2, 0.1)
    central = min(cubes, key=lambda c: np.linalg.norm(c.center))
    mask = related_mask(expansion, central)
    row = int(np.nonzero(expansion.rows == index.direction)[0][0])
    assert mask[(row,) + index.position]


def test_sim_split_checks_cube_side(random_expansion):
    cube = cube_cover(64.0, 2, 0.2)[0]
    with pytest.raises(InvalidInputError):
        sim_split(random_expansion[1], cube, 0.1)


@pytest.mark.slow
def test_split_energy_is_bounded(random_expansion):
    report = split_energy(random_expansion[1], delta=0.1)
    assert report["cubes"] == 64
    assert 0.0 < report["ratio"] < 64.0
