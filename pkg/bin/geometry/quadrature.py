"""
Quadrature grids approximating the Hausdorff measure on the unit sphere S^{n-1}.

Three schemes are available:
    icosphere  n=3, centroids of a subdivided icosahedron weighted by spherical triangle areas
    gauss      n=3, Gauss-Legendre in cos(theta) times equispaced azimuths
    mc         any n >= 2, i.i.d. uniform samples with equal weights

Grid specs used on the command line: icosphere:<level>, gauss:<order>, mc:<count>:seed<seed>.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import gamma, roots_legendre

from bin.errors import (
    DimensionMismatch,
    InputSpecError,
    NonFiniteValue,
    UnsupportedDimension,
    UnsupportedScheme,
)

logger = logging.getLogger(__name__)

ICOSPHERE = "icosphere"
PRODUCT_GAUSS = "gauss"
MONTE_CARLO = "mc"
SCHEMES = (ICOSPHERE, PRODUCT_GAUSS, MONTE_CARLO)

NODE_NORM_TOL = 1e-12
MASS_TOL = 1e-12


def sphere_area(m):
    """Surface area sigma_m of the unit sphere S^m in R^{m+1}."""
    if m < 1:
        raise ValueError(f"sphere_area needs m >= 1, got {m}")
    return float(2.0 * np.pi ** ((m + 1) / 2.0) / gamma((m + 1) / 2.0))


def unit_ball_volume(m):
    """Volume omega_m of the unit ball in R^m."""
    if m < 1:
        raise ValueError(f"unit_ball_volume needs m >= 1, got {m}")
    return float(np.pi ** (m / 2.0) / gamma(m / 2.0 + 1.0))


def _readonly(array, dtype=float):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes on S^{n-1} with positive weights summing to the sphere's area."""

    ambient_dim: int
    nodes: np.ndarray
    weights: np.ndarray
    scheme: str
    resolution: int
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", _readonly(self.nodes))
        object.__setattr__(self, "weights", _readonly(self.weights))
        if self.nodes.ndim != 2 or self.nodes.shape[1] != self.ambient_dim:
            raise DimensionMismatch(
                f"nodes of shape {self.nodes.shape} do not live in R^{self.ambient_dim}"
            )
        if self.weights.shape != (self.nodes.shape[0],):
            raise DimensionMismatch("one weight per node is required")

    @property
    def count(self):
        return int(self.nodes.shape[0])

    @property
    def total_mass(self):
        return float(np.sum(self.weights))

    @property
    def spec(self):
        """The grid spec string that rebuilds this grid."""
        if self.scheme == MONTE_CARLO:
            return f"{MONTE_CARLO}:{self.resolution}:seed{self.seed}"
        return f"{self.scheme}:{self.resolution}"

    def validate(self):
        """Raise ValueError unless the node, weight and mass invariants hold."""
        norms = np.linalg.norm(self.nodes, axis=1)
        if np.max(np.abs(norms - 1.0)) > NODE_NORM_TOL:
            raise ValueError("grid nodes are not unit vectors")
        if np.any(self.weights <= 0.0):
            raise ValueError("grid weights must be positive")
        sigma = sphere_area(self.ambient_dim - 1)
        if abs(self.total_mass - sigma) > MASS_TOL * sigma:
            raise ValueError(f"grid mass {self.total_mass!r} differs from {sigma!r}")
        return True


def _icosahedron():
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=float,
    )
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )
    return vertices / np.linalg.norm(vertices, axis=1)[:, None], faces


def _subdivide(vertices, faces):
    """Split every triangle into four, pushing edge midpoints onto the sphere."""
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges.sort(axis=1)
    unique, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)

    midpoints = vertices[unique[:, 0]] + vertices[unique[:, 1]]
    midpoints /= np.linalg.norm(midpoints, axis=1)[:, None]
    new_vertices = np.vstack([vertices, midpoints])

    count = len(faces)
    a = inverse[:count] + len(vertices)
    b = inverse[count : 2 * count] + len(vertices)
    c = inverse[2 * count :] + len(vertices)
    v0, v1, v2 = faces[:, 0], faces[:, 1], faces[:, 2]
    new_faces = np.concatenate(
        [
            np.stack([v0, a, c], axis=1),
            np.stack([a, v1, b], axis=1),
            np.stack([c, b, v2], axis=1),
            np.stack([a, b, c], axis=1),
        ]
    )
    return new_vertices, new_faces


def icosphere(level):
    """Vertices and faces of the icosahedron subdivided `level` times."""
    vertices, faces = _icosahedron()
    for _ in range(level):
        vertices, faces = _subdivide(vertices, faces)
    return vertices, faces


def spherical_triangle_areas(a, b, c):
    """Areas of spherical triangles with unit-vector corners (rows of a, b, c)."""
    triple = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    denominator = (
        1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c)
        + np.einsum("ij,ij->i", c, a)
    )
    return 2.0 * np.arctan2(triple, denominator)


def _icosphere_grid(level):
    vertices, faces = icosphere(level)
    a, b, c = vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]
    centroids = a + b + c
    nodes = centroids / np.linalg.norm(centroids, axis=1)[:, None]
    weights = spherical_triangle_areas(a, b, c)
    weights *= 4.0 * np.pi / np.sum(weights)
    return nodes, weights


def _product_gauss_rule(order):
    t, wt = roots_legendre(order)
    n_phi = 2 * order
    phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    s = np.sqrt(1.0 - t**2)
    nodes = np.stack(
        [
            np.outer(s, np.cos(phi)).ravel(),
            np.outer(s, np.sin(phi)).ravel(),
            np.repeat(t, n_phi),
        ],
        axis=1,
    )
    weights = np.repeat(wt, n_phi) * (2.0 * np.pi / n_phi)
    weights *= 4.0 * np.pi / np.sum(weights)
    return nodes, weights


def _monte_carlo_rule(n, count, seed):
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((count, n))
    nodes = samples / np.linalg.norm(samples, axis=1)[:, None]
    weights = np.full(count, sphere_area(n - 1) / count)
    return nodes, weights


def build_grid(n, resolution, scheme=ICOSPHERE, seed=0):
    """Build a quadrature grid on S^{n-1}.

    Args:
        n: Ambient dimension
        resolution: Subdivision level (icosphere), Gauss order (gauss) or sample count (mc)
        scheme: One of SCHEMES
        seed: Random seed, only used by the mc scheme

    Returns:
        QuadratureGrid satisfying the node, weight and mass invariants
    """
    if scheme not in SCHEMES:
        raise UnsupportedScheme(f"unknown quadrature scheme {scheme!r}")
    if scheme in (ICOSPHERE, PRODUCT_GAUSS) and n != 3:
        raise UnsupportedScheme(f"{scheme} grids exist only on S^2, not in R^{n}")
    if n < 2:
        raise UnsupportedScheme(f"no sphere grid in R^{n}")

    if scheme == ICOSPHERE:
        if resolution < 0:
            raise ValueError("icosphere level must be >= 0")
        nodes, weights = _icosphere_grid(resolution)
        return QuadratureGrid(n, nodes, weights, scheme, resolution)
    if scheme == PRODUCT_GAUSS:
        if resolution < 1:
            raise ValueError("gauss order must be >= 1")
        nodes, weights = _product_gauss_rule(resolution)
        return QuadratureGrid(n, nodes, weights, scheme, resolution)

    if resolution < 1:
        raise ValueError("mc sample count must be >= 1")
    nodes, weights = _monte_carlo_rule(n, resolution, seed)
    return QuadratureGrid(n, nodes, weights, scheme, resolution, seed)


_SPEC_PATTERNS = {
    ICOSPHERE: re.compile(r"^icosphere:(\d+)$"),
    PRODUCT_GAUSS: re.compile(r"^gauss:(\d+)$"),
    MONTE_CARLO: re.compile(r"^mc:(\d+):seed(-?\d+)$"),
}


def parse_grid_spec(spec, n):
    """Build the grid named by a spec string such as 'icosphere:5' or 'mc:1000000:seed42'."""
    text = spec.strip()
    for scheme, pattern in _SPEC_PATTERNS.items():
        match = pattern.match(text)
        if match:
            resolution = int(match.group(1))
            seed = int(match.group(2)) if scheme == MONTE_CARLO else 0
            return build_grid(n, resolution, scheme, seed)
    raise InputSpecError(f"unparseable grid spec {spec!r}")


def sphere_rule(m, resolution):
    """Nodes and weights on the unit sphere S^{m-1} of R^m, for the cone sheets.

    m=1 gives the two points +-1, m=2 the equispaced circle rule (exact for trigonometric
    polynomials of degree < resolution), m=3 the product Gauss rule of the given order.
    """
    if m == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if m == 2:
        angles = 2.0 * np.pi * np.arange(resolution) / resolution
        nodes = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        return nodes, np.full(resolution, 2.0 * np.pi / resolution)
    if m == 3:
        return _product_gauss_rule(resolution)
    raise UnsupportedDimension(f"no sheet rule on S^{m - 1}")


def _node_values(grid, g):
    values = g(grid.nodes) if callable(g) else g
    values = np.asarray(values)
    if values.shape[:1] != (grid.count,):
        raise DimensionMismatch(
            f"integrand has shape {values.shape}, expected {grid.count} node values"
        )
    if not np.all(np.isfinite(values)):
        bad = int(np.count_nonzero(~np.isfinite(values)))
        raise NonFiniteValue(f"integrand is not finite at {bad} node(s)")
    return values


def _as_number(value):
    if np.iscomplexobj(value):
        return complex(value)
    return float(value)


def integrate(grid, g):
    """Weighted node sum of a scalar integrand.

    Args:
        grid: QuadratureGrid
        g: Callable mapping the (count, n) node array to count values, or the values themselves

    Returns:
        float for real integrands, complex for complex ones
    """
    values = _node_values(grid, g)
    if values.ndim != 1:
        raise DimensionMismatch("integrate expects scalar node values; use integrate_vec")
    # np.sum on a contiguous 1-d array is a pairwise reduction
    return _as_number(np.sum(np.ascontiguousarray(grid.weights * values)))


def integrate_vec(grid, g):
    """Componentwise integral of a vector-valued integrand; returns an array of length k."""
    values = _node_values(grid, g)
    if values.ndim != 2:
        raise DimensionMismatch("integrate_vec expects (count, k) node values")
    weighted = np.ascontiguousarray((grid.weights[:, None] * values).T)
    return weighted.sum(axis=1)


def dump_grid(grid, path):
    """Write a grid as CSV: header `n,count,scheme,seed`, then `x1,...,xn,w` rows."""
    seed = grid.seed if grid.seed is not None else 0
    header = f"{grid.ambient_dim},{grid.count},{grid.scheme},{seed}"
    rows = np.hstack([grid.nodes, grid.weights[:, None]])
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=header, comments="")


def load_grid(path):
    """Read a grid written by dump_grid."""
    with open(path, "r") as f:
        header = f.readline().strip()
    try:
        n_text, count_text, scheme, seed_text = header.split(",")
        n, count, seed = int(n_text), int(count_text), int(seed_text)
    except ValueError as e:
        raise InputSpecError(f"bad grid dump header {header!r}") from e

    rows = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
    if scheme == ICOSPHERE:
        resolution = int(round(np.log(count / 20) / np.log(4)))
    elif scheme == PRODUCT_GAUSS:
        resolution = int(round(np.sqrt(count / 2)))
    else:
        resolution = count
    return QuadratureGrid(
        n,
        rows[:, :n],
        rows[:, n],
        scheme,
        resolution,
        seed if scheme == MONTE_CARLO else None,
    )


def grid_summary(grid) -> Tuple[str, int, float]:
    """Spec string, node count and total mass, for banners."""
    return grid.spec, grid.count, grid.total_mass
