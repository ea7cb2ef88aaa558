#!/usr/bin/env python3
"""Tests for convex bodies, support functions and surface area measures."""
import os
import sys

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from bin.counterexample.construction import mu_cone
from bin.errors import UnsupportedDimension
from bin.geometry import bodies
from bin.geometry.fields import random_unit_vectors
from bin.geometry.quadrature import build_grid

E1, E2, E3 = np.eye(3)
CUBE = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)


def cube_test(X):
    return X[:, 0] ** 3


def test_cube_area_measure():
    S = bodies.polytope_area_measure(CUBE)
    assert len(S.atoms) == 6
    assert all(mass == pytest.approx(1.0) for _, mass in S.atoms)
    assert bodies.total_mass(S) == pytest.approx(6.0)
    assert np.allclose(bodies.measure_resultant(S), 0.0, atol=1e-12)


def test_random_polytope_is_closed():
    rng = np.random.default_rng(5)
    S = bodies.polytope_area_measure(rng.standard_normal((30, 3)))
    assert np.allclose(bodies.measure_resultant(S), 0.0, atol=1e-10)


def test_planar_polygon_has_two_sided_atoms():
    square = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    S = bodies.polytope_area_measure(square)
    assert len(S.atoms) == 2
    (n1, m1), (n2, m2) = S.atoms
    assert np.allclose(n1, -n2)
    assert abs(n1[2]) == pytest.approx(1.0)
    assert m1 == m2 == pytest.approx(1.0)


def test_segment_has_zero_measure():
    S = bodies.polytope_area_measure(np.array([[0, 0, 0], [1, 1, 1]], dtype=float))
    assert S.atoms == ()


def test_polytope_measure_needs_three_dimensions():
    with pytest.raises(UnsupportedDimension):
        bodies.polytope_area_measure(np.eye(4), n=4)


def test_support_fields():
    X = random_unit_vectors(np.random.default_rng(1), 20, 3)
    h_cube = bodies.support_field(bodies.Polytope(CUBE))
    assert np.allclose(h_cube.values(X), np.max(X @ CUBE.T, axis=1))
    assert np.allclose(bodies.support_field(bodies.Ball(2.0)).values(X), 2.0)
    cone = bodies.support_field(bodies.Cone(E3, 2.0))
    assert cone.values(E3[None, :])[0] == pytest.approx(0.0)
    assert cone.values(E1[None, :])[0] == pytest.approx(2.0)


def test_transformed_polytope_support_matches_gl_action():
    g = np.array([[2.0, 0.3, 0.0], [0.0, 1.0, -0.4], [0.1, 0.0, 0.5]])
    P = bodies.Polytope(CUBE)
    X = random_unit_vectors(np.random.default_rng(2), 30, 3)
    direct = bodies.support_field(bodies.transform_polytope(g, P)).values(X)
    assert np.allclose(bodies.transformed_support(g, P).values(X), direct)


def test_disk_measure():
    S = bodies.disk_area_measure(E3, 2.0)
    assert bodies.total_mass(S) == pytest.approx(2 * np.pi * 4.0)
    assert np.allclose(bodies.measure_resultant(S), 0.0)


@pytest.mark.parametrize("lam", [1.0, 2.0, 5.0])
def test_cone_measure_is_closed(lam):
    """The lateral sheet balances the base atom."""
    S = bodies.cone_area_measure(E3, lam)
    assert np.allclose(bodies.measure_resultant(S), 0.0, atol=1e-10)


def test_cone_lateral_area():
    lam = 2.0
    S = bodies.cone_area_measure(E3, lam)
    lateral = np.pi * lam * np.sqrt(1 + lam**2)
    assert bodies.total_mass(S) == pytest.approx(np.pi * lam**2 + lateral)


def test_as_printed_cone_coefficient_is_not_closed():
    S = bodies.cone_area_measure(E3, 2.0, as_printed=True)
    assert np.linalg.norm(bodies.measure_resultant(S)) > 1.0


def test_cone_coefficient_in_four_dimensions():
    """Closedness also holds on S^3, where the sheet is a 2-sphere."""
    xi = np.array([0.0, 0.0, 0.0, 1.0])
    S = bodies.cone_area_measure(xi, 3.0)
    assert np.allclose(bodies.measure_resultant(S, sheet_resolution=16), 0.0, atol=1e-9)


def test_sheet_nodes_lie_on_the_sheet():
    sheet = bodies.cone_area_measure(E3, 2.0).sheets[0]
    points, weights = bodies.sheet_nodes(sheet, 32)
    assert np.allclose(np.linalg.norm(points, axis=1), 1.0)
    assert np.allclose(points @ E3, 2.0 / np.sqrt(5.0))
    assert weights.sum() == pytest.approx(2 * np.pi / np.sqrt(5.0))


def test_cone_polytopes_converge_to_the_cone():
    lam = 2.0
    exact = bodies.measure_pair(bodies.cone_area_measure(E3, lam), lambda X: X[:, 2] ** 3)
    approx = bodies.measure_pair(
        bodies.area_measure(bodies.cone_polytope(E3, lam, 256)), lambda X: X[:, 2] ** 3
    )
    assert approx.real == pytest.approx(exact.real, rel=1e-3)


def test_cone_polytopes_converge_at_second_order():
    """Doubling the rim vertices divides the error against the closed form by about 4."""
    lam = 1.0
    exact = mu_cone(E1, lam, 3)

    def error(rim):
        S = bodies.area_measure(bodies.cone_polytope(E1, lam, rim))
        return abs(bodies.measure_pair(S, lambda X: X[:, 0] ** 3).real - exact)

    ratio = error(64) / error(128)
    assert 3.0 <= ratio <= 5.0


def test_large_cone_polytope_merges_its_base():
    S = bodies.area_measure(bodies.cone_polytope(E3, 2.0, 4096))
    assert len(S.atoms) == 4096 + 1
    base = [mass for direction, mass in S.atoms if np.allclose(direction, -E3)]
    assert base == [pytest.approx(4 * np.pi, rel=1e-5)]


def test_ball_measure():
    grid = build_grid(3, 3)
    S = bodies.area_measure(bodies.Ball(2.0))
    assert bodies.total_mass(S, grid=grid) == pytest.approx(16 * np.pi)
    assert bodies.smooth_area_density(bodies.support_field(bodies.Ball(2.0)), E1) == (
        pytest.approx(4.0)
    )


def test_ball_measure_in_four_dimensions():
    grid = build_grid(4, 500, "mc", seed=1)
    S = bodies.ball_area_measure(2.0, 4)
    assert bodies.total_mass(S, grid=grid) == pytest.approx(8 * 2 * np.pi**2)


def test_complex_test_functions():
    S = bodies.disk_area_measure(E3, 1.0)
    value = bodies.measure_pair(S, lambda X: 1j * X[:, 2] ** 2)
    assert value == pytest.approx(2j * np.pi)


def test_export_measure_rows():
    rows = bodies.export_measure_rows(bodies.cone_area_measure(E3, 2.0))
    assert rows[0][0] == "atom"
    assert rows[0][1:4] == [0.0, 0.0, -1.0]
    assert rows[0][4] == pytest.approx(4 * np.pi)
    assert rows[1][0] == "sheet"
    assert rows[1][-1] == pytest.approx(bodies.cone_lateral_coefficient(2.0, 3))


def test_bad_bodies():
    with pytest.raises(ValueError):
        bodies.Ball(-1.0)
    with pytest.raises(ValueError):
        bodies.Cone(E3, 0.5)
    with pytest.raises(ValueError):
        bodies.Disk(np.array([1.0, 1.0, 0.0]), 2.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
