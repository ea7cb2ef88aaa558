#!/usr/bin/env python3
"""Tests for the sphere quadrature grids."""
import os
import sys
import tempfile

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from bin.errors import DimensionMismatch, InputSpecError, NonFiniteValue, UnsupportedScheme
from bin.geometry.quadrature import (
    build_grid,
    dump_grid,
    integrate,
    integrate_vec,
    load_grid,
    parse_grid_spec,
    sphere_area,
    sphere_rule,
    unit_ball_volume,
)


def test_sphere_constants():
    assert sphere_area(1) == pytest.approx(2 * np.pi)
    assert sphere_area(2) == pytest.approx(4 * np.pi)
    assert sphere_area(3) == pytest.approx(2 * np.pi**2)
    assert unit_ball_volume(2) == pytest.approx(np.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * np.pi / 3)


@pytest.mark.parametrize(
    "n,resolution,scheme",
    [(3, 0, "icosphere"), (3, 3, "icosphere"), (3, 8, "gauss"), (4, 1000, "mc"), (5, 10, "mc")],
)
def test_grid_invariants(n, resolution, scheme):
    """Unit nodes, positive weights and the exact sphere mass."""
    grid = build_grid(n, resolution, scheme)
    assert grid.validate()
    assert grid.total_mass == pytest.approx(sphere_area(n - 1), rel=1e-12)


def test_icosphere_node_count():
    assert build_grid(3, 2, "icosphere").count == 20 * 4**2


def test_gauss_integrates_polynomials_exactly():
    grid = build_grid(3, 16, "gauss")
    assert integrate(grid, lambda X: X[:, 0] ** 2) == pytest.approx(4 * np.pi / 3, abs=1e-12)
    assert integrate(grid, lambda X: X[:, 0] ** 2 * X[:, 1] ** 2) == pytest.approx(
        4 * np.pi / 15, abs=1e-12
    )
    assert integrate(grid, lambda X: X[:, 2] ** 3) == pytest.approx(0.0, abs=1e-12)


def test_icosphere_converges():
    """x1^2 integrates to 4pi/3; the error shrinks with the level."""
    errors = [
        abs(integrate(build_grid(3, level), lambda X: X[:, 0] ** 2) - 4 * np.pi / 3)
        for level in (2, 3, 4)
    ]
    assert errors[2] < errors[1] < errors[0]
    assert errors[2] < 1e-3


def test_mc_is_reproducible_per_seed():
    a = build_grid(4, 500, "mc", seed=3)
    b = build_grid(4, 500, "mc", seed=3)
    c = build_grid(4, 500, "mc", seed=4)
    assert np.array_equal(a.nodes, b.nodes)
    assert not np.array_equal(a.nodes, c.nodes)


def test_unsupported_schemes():
    with pytest.raises(UnsupportedScheme):
        build_grid(4, 3, "icosphere")
    with pytest.raises(UnsupportedScheme):
        build_grid(3, 3, "lebedev")


def test_parse_grid_spec():
    assert parse_grid_spec("icosphere:1", 3).count == 80
    assert parse_grid_spec("gauss:4", 3).count == 4 * 8
    grid = parse_grid_spec("mc:100:seed7", 5)
    assert (grid.ambient_dim, grid.count, grid.seed) == (5, 100, 7)
    assert grid.spec == "mc:100:seed7"
    with pytest.raises(InputSpecError):
        parse_grid_spec("icosphere", 3)


def test_integrate_complex_and_vector():
    grid = build_grid(3, 8, "gauss")
    value = integrate(grid, lambda X: (1 + 2j) * np.ones(len(X)))
    assert isinstance(value, complex)
    assert value == pytest.approx((1 + 2j) * 4 * np.pi)
    moments = integrate_vec(grid, lambda X: X**2)
    assert moments == pytest.approx(np.full(3, 4 * np.pi / 3))


def test_integrate_rejects_bad_integrands():
    grid = build_grid(3, 1)
    with pytest.raises(NonFiniteValue):
        integrate(grid, lambda X: 1.0 / (X[:, 0] - X[:, 0]))
    with pytest.raises(DimensionMismatch):
        integrate(grid, np.ones(3))


def test_sphere_rule_masses():
    for m, resolution in ((1, 1), (2, 16), (3, 8)):
        _, weights = sphere_rule(m, resolution)
        assert weights.sum() == pytest.approx(sphere_area(m - 1) if m > 1 else 2.0)


def test_dump_and_load_grid():
    grid = build_grid(3, 1)
    with tempfile.TemporaryDirectory() as temp_dir:
        path = os.path.join(temp_dir, "grid.csv")
        dump_grid(grid, path)
        loaded = load_grid(path)
    assert loaded.spec == "icosphere:1"
    assert np.allclose(loaded.nodes, grid.nodes, atol=0, rtol=0)
    assert np.allclose(loaded.weights, grid.weights, atol=0, rtol=0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
