import math

import numpy as np
import pytest

from tools.cone_geometry import ball_volume, sphere_measure
from tools.fractal_measures import (
    AtomicMeasure, LatticeKind, anisotropic_pushforward, cube_singular_mass, delta_product_exponents,
    growth_audit_centers,
    energy, estimate_growth_constant, lattice_plan, make_cantor, make_delta_product,
    make_null_product, make_plate_union_measure, make_radial_power, make_squashed_measure,
    measure_summary, null_frame_basis, radial_profile, restrict_rescale, total_mass,
)
from tools.cone_geometry import NullFrame
from tools.lab_errors import InvalidInputError, RegimeMismatchError, ResourceInfeasibleError


def test_radial_profile_mass_is_exact_for_integer_alpha():
    profile = radial_profile(2.0, 4, 1 / 8)
    assert math.isclose(profile.total_mass, sphere_measure(4) / 2.0, rel_tol=1e-12)


def test_radial_profile_ball_mass_scales_like_rho_to_alpha():
    profile = radial_profile(1.5, 3, 1 / 64)
    # octave edges are panel edges, so the mass of B(0, 1/4) is resolved exactly up to quadrature
    ratio = profile.ball_mass(0.25) / profile.total_mass
    assert math.isclose(ratio, 0.25 ** 1.5, rel_tol=1e-6)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_cube_singular_mass_reduces_to_volume(dim):
    assert math.isclose(cube_singular_mass(float(dim), dim), 1.0, rel_tol=1e-12)


def test_lebesgue_ball_total_mass(lebesgue_ball_3):
    assert math.isclose(total_mass(lebesgue_ball_3), ball_volume(4), rel_tol=0.05)
    assert lebesgue_ball_3.alpha_claimed == 4.0


def test_radial_grid_total_mass(radial_alpha2_n3):
    assert math.isclose(total_mass(radial_alpha2_n3), sphere_measure(4) / 2.0, rel_tol=0.1)
    assert radial_alpha2_n3.grid is not None


def test_radial_resolution_domain():
    with pytest.raises(InvalidInputError):
        make_radial_power(1.5, 2, 0.5)
    with pytest.raises(InvalidInputError):
        make_radial_power(4.0, 2, 1 / 8)


def test_meridian_layout_is_axisymmetric():
    mu = make_radial_power(2.0, 2, 1 / 8, layout="meridian")
    assert mu.axisymmetric
    assert math.isclose(total_mass(mu), sphere_measure(3) / 2.0, rel_tol=1e-6)


@pytest.mark.parametrize("alpha,n,expected", [
    (2.0, 3, [-1.0, -1.0, 0.0, 0.0]),
    (3.5, 3, [-0.5, 0.0, 0.0, 0.0]),
    (1.5, 2, [-1.0, -0.5, 0.0]),
    (1.0, 2, [-1.0, -1.0, 0.0]),
])
def test_delta_product_exponents(alpha, n, expected):
    assert delta_product_exponents(alpha, n) == expected


def test_delta_product_cube_mass():
    mu = make_delta_product(2.0, 2, 1 / 16, domain="cube")
    # two uniform axes of length 2/sqrt(3) and one delta
    assert math.isclose(total_mass(mu), 4.0 / 3.0, rel_tol=1e-12)
    assert mu.factors is not None


def test_delta_product_unknown_domain():
    with pytest.raises(InvalidInputError):
        make_delta_product(2.0, 2, 1 / 16, domain="torus")


def test_squashed_needs_alpha_above_two():
    with pytest.raises(InvalidInputError):
        make_squashed_measure(2.0, 2, 1 / 16)


def test_cantor_atoms_and_mass():
    mu = make_cantor(1.5, 2, 5)
    assert mu.atom_count == 4 ** 5
    assert math.isclose(total_mass(mu), 1.0, rel_tol=1e-12)
    assert mu.meta["ratio"] <= 0.5


@pytest.mark.parametrize("alpha,n,depth", [(0.0, 2, 3), (3.5, 2, 3), (1.5, 2, 13)])
def test_cantor_domain_errors(alpha, n, depth):
    with pytest.raises(InvalidInputError):
        make_cantor(alpha, n, depth)


def test_growth_audit_flags_overclaimed_dimension():
    mu = make_cantor(1.5, 2, 6)
    honest = estimate_growth_constant(mu, trials=32, seed=0)
    inflated = estimate_growth_constant(mu.relabeled(2.5), trials=32, seed=0)
    assert not honest.diverging_trend
    assert inflated.diverging_trend
    assert inflated.estimated_constant > honest.estimated_constant


def test_growth_audit_flags_mislabeled_radial_power():
    mu = make_radial_power(1.5, 2, 2.0 ** -5)
    honest = estimate_growth_constant(mu, trials=32, seed=0)
    inflated = estimate_growth_constant(mu, 2.0, trials=32, seed=0)
    assert not honest.diverging_trend
    assert inflated.diverging_trend


def test_first_growth_center_is_heaviest_atom(rng):
    mu = AtomicMeasure(points=[[0.5, 0.0, 0.0], [0.3, 0.0, 0.0], [-0.2, 0.0, 0.0]], weights=[1.0, 5.0, 5.0],
                       alpha_claimed=1.0, support_radius=1.0, resolution=0.1)
    centers = growth_audit_centers(mu, 4, rng)
    assert np.allclose(centers[0], [-0.2, 0.0, 0.0])


def test_null_product_passes_its_own_audit():
    mu = make_null_product(2, [-0.5, 0.0, -1.0])
    assert mu.alpha_claimed == 1.5
    assert mu.resolution == 2.0 ** -12
    audit = estimate_growth_constant(mu, trials=16, seed=0)
    assert audit.ball_shape == "cube"
    assert not audit.diverging_trend
    # the origin cube of half-side rho carries 4 sqrt(rho) * 2 rho
    assert 4.0 < audit.estimated_constant < 16.0


def test_plate_union_constant_is_stable_in_R():
    constants = [estimate_growth_constant(make_plate_union_measure("mid", 1.5, 2, R), trials=32, seed=0)
                 .estimated_constant for R in (32.0, 64.0, 128.0)]
    assert max(constants) < 4.0
    assert max(constants) / min(constants) < 2.0


def test_growth_audit_of_lebesgue_ball(lebesgue_ball_3):
    audit = estimate_growth_constant(lebesgue_ball_3, trials=8, seed=1)
    assert 0.2 < audit.estimated_constant < 2.0 * ball_volume(4)
    assert audit.ball_shape == "euclidean"


def test_growth_audit_rejects_meridian_layout():
    mu = make_radial_power(2.0, 2, 1 / 8, layout="meridian")
    with pytest.raises(InvalidInputError):
        estimate_growth_constant(mu)


def test_growth_audit_radii_below_floor():
    mu = make_cantor(1.5, 2, 4)
    with pytest.raises(InvalidInputError):
        estimate_growth_constant(mu, radii=[mu.resolution])


def test_restrict_rescale_lebesgue(lebesgue_ball_3):
    rescaled = restrict_rescale(lebesgue_ball_3, np.zeros(4), 0.5)
    assert math.isclose(total_mass(rescaled), ball_volume(4), rel_tol=0.1)
    assert np.all(np.linalg.norm(rescaled.points, axis=1) <= 1.0 + 1e-12)


def test_restrict_rescale_empty_ball():
    mu = make_cantor(1.5, 2, 4)
    far = restrict_rescale(mu, np.array([5.0, 5.0, 5.0]), 0.5)
    assert far.empty
    assert far.atom_count == 0


def test_restrict_rescale_radius_domain():
    mu = make_cantor(1.5, 2, 3)
    with pytest.raises(InvalidInputError):
        restrict_rescale(mu, np.zeros(3), 1.5)


def test_null_product_alpha_and_mass():
    mu = make_null_product(2, [0.0, -1.0, 0.0], extent=2.0 ** 4, spacing=2.0 ** -4)
    assert mu.alpha_claimed == 2.0
    assert math.isclose(total_mass(mu), (2.0 * 2.0 ** 4) ** 2, rel_tol=1e-12)


def test_pushforward_keeps_null_product_factorized():
    frame = NullFrame(2)
    mu = make_null_product(2, [0.0, -1.0, 0.0], extent=2.0 ** 4, spacing=2.0 ** -4, frame=frame)
    pushed = anisotropic_pushforward(mu, 1, frame)
    assert pushed.factors is not None
    assert np.allclose(pushed.factors.basis, null_frame_basis(frame))
    assert np.allclose(pushed.factors.nodes[2], 4.0 * mu.factors.nodes[2])
    assert math.isclose(total_mass(pushed), total_mass(mu), rel_tol=1e-12)


def test_pushforward_level_domain():
    with pytest.raises(InvalidInputError):
        anisotropic_pushforward(make_cantor(1.5, 2, 3), 0)


def test_lattice_plan_mid():
    plan = lattice_plan("mid", 1.5, 2, 64.0)
    assert plan.kind is LatticeKind.MID_LATTICE
    assert plan.count == 3
    assert math.isclose(plan.density, 64.0 ** 1.25)


def test_high_lattice_plan_at_desk_scale():
    plan = lattice_plan("high", 3.5, 3, 64.0)
    assert plan.count == 529
    assert np.min(np.diff(plan.shifts_1)) >= 2.0 * plan.box_half_widths[0]


@pytest.mark.parametrize("kind,alpha,n", [("mid", 3.0, 3), ("high", 3.0, 2)])
def test_lattice_spacing_may_equal_plate_width(kind, alpha, n):
    # at the top of each regime the lattice spacing is exactly one plate width
    plan = lattice_plan(kind, alpha, n, 64.0)
    assert plan.count > 1


def test_lattice_plan_errors():
    with pytest.raises(RegimeMismatchError):
        lattice_plan("mid", 2.5, 2, 64.0)
    with pytest.raises(InvalidInputError):
        lattice_plan("mid", 1.5, 2, 48.0)
    with pytest.raises(InvalidInputError):
        LatticeKind.parse("hexagonal")


def test_plate_union_mass_matches_plan():
    mu = make_plate_union_measure("mid", 1.5, 2, 64.0)
    plan = mu.meta["plan"]
    assert mu.meta["cells_per_box"] == [1, 4, 32]
    assert mu.atom_count == plan.count * math.prod(mu.meta["cells_per_box"]) == 384
    assert math.isclose(mu.resolution, 1 / 32)
    assert math.isclose(total_mass(mu), plan.count * plan.density * plan.box_volume, rel_tol=1e-12)


def test_energy_of_two_atoms():
    mu = AtomicMeasure(points=[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], weights=[1.0, 1.0], alpha_claimed=1.0,
                       support_radius=1.0, resolution=0.1)
    assert math.isclose(energy(mu, 1.0), 2.0)
    assert energy(mu, 1.0, cutoff=2.0) == 0.0


def test_atomic_measure_validation():
    with pytest.raises(InvalidInputError):
        AtomicMeasure(points=[[0.0, 0.0]], weights=[-1.0], alpha_claimed=1.0, support_radius=1.0, resolution=0.1)
    with pytest.raises(InvalidInputError):
        AtomicMeasure(points=[[2.0, 0.0]], weights=[1.0], alpha_claimed=1.0, support_radius=1.0, resolution=0.1)


def test_measure_summary_fields():
    summary = measure_summary(make_cantor(1.5, 2, 3))
    assert summary["atoms"] == 64
    assert summary["ambient_dimension"] == 3
    assert summary["label"] == "cantor_depth3"
