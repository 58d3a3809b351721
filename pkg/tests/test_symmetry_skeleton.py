import numpy as np
import pytest

from curveflow.curve_geometry import geometry_report, random_convex_profile
from curveflow.errors import NotConvex, NotInSn, NotSymmetric
from curveflow.spectral import AngleGrid
from curveflow.symmetry_skeleton import (SupportFourier, class_membership, extract_skeleton, flower_generator,
                                         grid_for_order, isoperimetric_estimate_check, medial_axis_oracle,
                                         projection_Pi, radial_function, sector_monotone_margin, symmetrize,
                                         symmetry_residual)


def test_flower_generator_profile(flower3):
    assert np.min(1.0 / flower3.rho) == pytest.approx(0.6)
    assert np.max(1.0 / flower3.rho) == pytest.approx(1.4)
    assert flower3.base_point == pytest.approx((0.0, -1.05))
    assert flower3.symmetry_order == 3


def test_flower_generator_constraints():
    with pytest.raises(NotConvex):
        flower_generator(3, 0.2)
    with pytest.raises(NotSymmetric):
        flower_generator(3, 0.05, grid=AngleGrid(100))
    with pytest.raises(NotSymmetric):
        flower_generator(0, 0.05)
    assert grid_for_order(3).n_samples % 6 == 0


def test_symmetrize_and_residual(flower3, rng):
    assert symmetry_residual(flower3, 3) < 1e-14
    assert np.allclose(symmetrize(flower3).rho, flower3.rho, atol=1e-14)
    asymmetric = random_convex_profile(rng, AngleGrid(192))
    assert symmetry_residual(asymmetric, 3) > 1e-3
    assert symmetry_residual(symmetrize(asymmetric, 3), 3) < 1e-14


def test_sector_monotone_margin(flower3):
    assert sector_monotone_margin(flower3, 3) < 0
    assert sector_monotone_margin(flower_generator(3, -0.05, grid=AngleGrid(192)), 3) > 0


def test_support_fourier_from_radius_modes(flower3, flower3_exact):
    fourier = SupportFourier.from_radius_modes(3, 1.0, {1: -0.4})
    assert fourier.a == [pytest.approx(0.05)]
    assert np.allclose(fourier.to_profile(flower3.grid).rho, flower3.rho, rtol=1e-12)
    assert fourier.fourier_deficit() == pytest.approx(flower3_exact["deficit"], rel=1e-12)


def test_support_fourier_from_profile(flower3):
    fourier = SupportFourier.from_profile(flower3, 3)
    assert fourier.a0 == pytest.approx(1.0, abs=1e-12)
    assert fourier.a[0] == pytest.approx(0.05, abs=1e-12)
    assert np.max(np.abs(fourier.a[1:])) < 1e-12


def test_class_membership_of_flower(flower3):
    membership = class_membership(flower3, 3)
    assert membership.in_Tn and membership.in_Sn and membership.in_Sn_down
    assert not membership.degenerate
    assert membership.pi_prime_min >= 0


def test_class_membership_rejects_wrong_order(ellipse):
    membership = class_membership(ellipse, 4)
    assert not membership.in_Tn and not membership.in_Sn


def test_circle_is_degenerate():
    circle = flower_generator(3, 0.0, grid=AngleGrid(192))
    membership = class_membership(circle, 3)
    assert membership.degenerate and membership.in_Sn
    assert extract_skeleton(circle, 3).y0 == pytest.approx(0.0, abs=1e-10)


def test_projection_Pi_of_flower(flower3):
    projection = projection_Pi(flower3, 3)
    assert projection.b == pytest.approx(1.05, abs=1e-12)
    assert projection.y0 == pytest.approx(0.45, abs=1e-10)
    assert projection.pi[0] == pytest.approx(-0.45, abs=1e-10)
    assert projection.endpoint_residual < 1e-6
    assert np.max(np.abs(projection.pi - projection.pi_direct)) < 1e-6
    assert projection.pi_prime.min() >= -1e-12


def test_radial_function_identities(flower3):
    check = radial_function(flower3, 3)
    assert check.identity_residual < 1e-6
    assert check.derivative_residual < 1e-3


def test_extract_skeleton_of_flower(flower3):
    skeleton = extract_skeleton(flower3, 3)
    assert skeleton.y0 == pytest.approx(0.45, abs=1e-8)
    assert skeleton.total_length == pytest.approx(1.35, abs=1e-8)
    assert len(skeleton.vertices) == 3
    assert np.allclose(skeleton.vertices[0], (0.0, -0.45), atol=1e-8)


def test_extract_skeleton_requires_Sn():
    rotated = flower_generator(3, -0.05, grid=AngleGrid(192))
    assert not class_membership(rotated, 3).in_Sn
    with pytest.raises(NotInSn):
        extract_skeleton(rotated, 3)


def test_isoperimetric_chain_for_flower3(flower3, flower3_exact):
    chain = isoperimetric_estimate_check(flower3, 3)
    assert chain.chain_holds
    assert chain.deficit == pytest.approx(flower3_exact["deficit"], rel=1e-8)
    assert chain.fourier_identity_residual < 1e-8
    assert chain.wirtinger_member == pytest.approx(2.0 * np.pi ** 2 * 0.15 ** 2, rel=1e-10)
    assert chain.sector_member == pytest.approx(chain.wirtinger_member, rel=1e-6)
    assert chain.middle_bound == pytest.approx(2.344, abs=1e-3)
    assert chain.outer_bound == pytest.approx(2.922, abs=1e-3)
    assert chain.support_identity_residual < 1e-6


@pytest.mark.parametrize("order, epsilon, samples", [(3, 0.05, 192), (5, 0.01, 320), (8, 0.005, 256)])
def test_isoperimetric_chain_for_flowers(order, epsilon, samples):
    flower = flower_generator(order, epsilon, grid=AngleGrid(samples))
    chain = isoperimetric_estimate_check(flower, order)
    assert chain.chain_holds
    assert chain.y0 == pytest.approx(epsilon * order ** 2, abs=1e-8)
    assert chain.fourier_identity_residual < 1e-8 * max(1.0, chain.deficit)
    assert chain.bonnesen_lhs <= chain.deficit <= chain.middle_bound <= chain.outer_bound
    assert geometry_report(flower).deficit == pytest.approx(chain.fourier_deficit, rel=1e-8)


def test_medial_axis_oracle_flower3(flower3):
    estimate = medial_axis_oracle(flower3, 3)
    assert abs(estimate.y0 - extract_skeleton(flower3, 3).y0) <= 2 * estimate.cell
    assert estimate.y0 == pytest.approx(0.45, abs=1e-3)


def test_medial_axis_oracle_coarse_grid(flower3):
    # Gitterschätzung grob, die Nullstellensuche bringt y0 trotzdem auf die Achse
    estimate = medial_axis_oracle(flower3, 3, grid_size=60)
    assert estimate.y0 == pytest.approx(0.45, abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("order, epsilon, samples", [(5, 0.01, 320), (8, 0.005, 256)])
def test_medial_axis_oracle_flowers(order, epsilon, samples):
    flower = flower_generator(order, epsilon, grid=AngleGrid(samples))
    estimate = medial_axis_oracle(flower, order)
    assert abs(estimate.y0 - extract_skeleton(flower, order).y0) <= 2 * estimate.cell


def test_class_membership_strict_inclusion():
    # 1/rho = 1 - 0.1 cos 3theta - 0.05 cos 6theta: in S_3, aber rho nicht fallend auf [0, pi/3]
    profile = SupportFourier.from_radius_modes(3, 1.0, {1: -0.1, 2: -0.05}).to_profile(AngleGrid(192))
    membership = class_membership(profile, 3)
    assert (membership.in_Tn, membership.in_Sn, membership.in_Sn_down) == (True, True, False)
    assert membership.implication_holds


def test_class_membership_reports_broken_implication(monkeypatch):
    rotated = flower_generator(3, -0.05, grid=AngleGrid(192))
    monkeypatch.setattr("curveflow.symmetry_skeleton.sector_monotone_margin", lambda profile, n: -1.0)
    membership = class_membership(rotated, 3)
    assert membership.in_Sn_down and not membership.in_Sn
    assert membership.implication_holds is False
