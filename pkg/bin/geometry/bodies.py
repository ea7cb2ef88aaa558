"""
Convex bodies, their support functions and their surface area measures.

Bodies:
    Polytope(vertices)   convex hull of finitely many points (area measures for n=3)
    Ball(radius, n)      centred ball
    Disk(xi, lam)        lam D_xi - xi, a flat (n-1)-ball orthogonal to xi centred at -xi
    Cone(xi, lam)        conv((lam D_xi - xi) u {0})

An AreaMeasure is a sum of atoms, cone lateral sheets and smooth densities. Sheets are
integrated through the parametrisation zeta -> (lam xi + zeta)/sqrt(1 + lam^2) over the unit
sphere of xi^perp.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from scipy.linalg import null_space
from scipy.spatial import ConvexHull, QhullError

from bin.errors import DimensionMismatch, HullFailure, UnsupportedDimension
from bin.geometry.fields import (
    Const,
    DiskSupport,
    Linear,
    Max,
    ScalarField,
    gl_act,
    join,
    sph_hess_nodes,
)
from bin.geometry.quadrature import (
    ICOSPHERE,
    MONTE_CARLO,
    build_grid,
    integrate,
    sphere_rule,
    unit_ball_volume,
)

logger = logging.getLogger(__name__)

UNIT_TOL = 1e-12
FACET_TOL = 1e-9
FACET_DECIMALS = 8
DEFAULT_SHEET_RESOLUTION = 64


def _unit(xi):
    xi = np.array(xi, dtype=float)
    if xi.ndim != 1 or abs(np.linalg.norm(xi) - 1.0) > UNIT_TOL:
        raise ValueError(f"expected a unit vector, got {xi!r}")
    xi.setflags(write=False)
    return xi


def _check_lambda(lam):
    if lam < 1.0:
        raise ValueError(f"lambda must be >= 1, got {lam}")
    return float(lam)


@dataclass(frozen=True, eq=False)
class Polytope:
    vertices: np.ndarray

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[0] < 1:
            raise ValueError("a polytope needs at least one vertex")
        vertices.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)

    @property
    def ambient_dim(self):
        return self.vertices.shape[1]


@dataclass(frozen=True)
class Ball:
    radius: float
    ambient_dim: int = 3

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError(f"ball radius must be >= 0, got {self.radius}")


@dataclass(frozen=True, eq=False)
class Disk:
    xi: np.ndarray
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "xi", _unit(self.xi))
        object.__setattr__(self, "lam", _check_lambda(self.lam))

    @property
    def ambient_dim(self):
        return self.xi.shape[0]


@dataclass(frozen=True, eq=False)
class Cone:
    xi: np.ndarray
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "xi", _unit(self.xi))
        object.__setattr__(self, "lam", _check_lambda(self.lam))

    @property
    def ambient_dim(self):
        return self.xi.shape[0]


ConvexBody = Union[Polytope, Ball, Disk, Cone]


@dataclass(frozen=True)
class ConeLateral:
    """Measure with constant density `coefficient` per unit H^{n-2} on the sheet of (xi, lam)."""

    xi: np.ndarray
    lam: float
    coefficient: float


@dataclass(frozen=True)
class SmoothPart:
    """Absolutely continuous part: density smooth_area_density(support) w.r.t. H^{n-1}."""

    support: ScalarField
    label: str = "smooth"


@dataclass(frozen=True)
class AreaMeasure:
    ambient_dim: int
    atoms: Tuple[Tuple[np.ndarray, float], ...] = ()
    sheets: Tuple[ConeLateral, ...] = ()
    smooth_parts: Tuple[SmoothPart, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for direction, mass in self.atoms:
            if mass < 0:
                raise ValueError(f"negative atom mass {mass}")
            if len(direction) != self.ambient_dim:
                raise DimensionMismatch("atom direction has the wrong dimension")


def support_field(K: ConvexBody) -> ScalarField:
    """h_K as a field on S^{n-1}."""
    if isinstance(K, Ball):
        return Const(K.ambient_dim, float(K.radius))
    if isinstance(K, Polytope):
        return Max(tuple(Linear(v) for v in K.vertices))
    if isinstance(K, Disk):
        return DiskSupport(K.xi, K.lam)
    if isinstance(K, Cone):
        return join([Const(K.ambient_dim, 0.0), DiskSupport(K.xi, K.lam)])
    raise TypeError(f"not a convex body: {K!r}")


def transform_polytope(g, P):
    """The polytope g P, whose support function is gl_act(g, h_P)."""
    g = np.asarray(g, dtype=float)
    if g.shape != (P.ambient_dim, P.ambient_dim):
        raise DimensionMismatch(f"matrix of shape {g.shape} cannot act on R^{P.ambient_dim}")
    return Polytope(P.vertices @ g.T)


def transformed_support(g, P):
    return gl_act(g, support_field(P))


def cone_polytope(xi, lam, rim_vertices):
    """Cone over M rim vertices in place of lam D_xi - xi, for n=3."""
    xi = _unit(xi)
    if xi.shape[0] != 3:
        raise UnsupportedDimension("cone polytopes are built in R^3 only")
    basis = null_space(xi[None, :])
    angles = 2.0 * np.pi * np.arange(rim_vertices) / rim_vertices
    circle = np.cos(angles)[:, None] * basis[:, 0] + np.sin(angles)[:, None] * basis[:, 1]
    rim = -xi + lam * circle
    return Polytope(np.vstack([np.zeros(3), rim]))


def _facet_atoms(hull, points):
    """Merge coplanar hull triangles into (normal, area) atoms, in order of first appearance."""
    a, b, c = (points[hull.simplices[:, i]] for i in range(3))
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    normals = hull.equations[:, :3] / np.linalg.norm(hull.equations[:, :3], axis=1)[:, None]
    # triangles of one qhull facet share its hyperplane; + 0.0 folds -0.0 into 0.0
    keys = np.round(normals, FACET_DECIMALS) + 0.0
    _, first, labels = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    labels = labels.reshape(-1)
    merged = np.bincount(labels, weights=areas, minlength=first.size)
    order = np.argsort(first)
    return tuple((normals[first[i]], float(merged[i])) for i in order)


def polytope_area_measure(vertices, n=3):
    """Facet atoms of conv(vertices) in R^3, two-sided for planar polygons.

    Args:
        vertices: (k, 3) array of points
        n: Ambient dimension, must be 3

    Returns:
        AreaMeasure with one atom per facet
    """
    if n != 3:
        raise UnsupportedDimension(f"polytope area measures need n=3, got n={n}")
    points = np.asarray(vertices, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3:
        raise DimensionMismatch("polytope vertices must be points of R^3")

    centred = points - points.mean(axis=0)
    _, singular, vt = np.linalg.svd(centred, full_matrices=points.shape[0] < 3)
    scale = max(singular[0], 1.0) if singular.size else 1.0
    rank = int(np.count_nonzero(singular > FACET_TOL * scale))

    try:
        if rank == 3:
            return AreaMeasure(3, atoms=_facet_atoms(ConvexHull(points), points))
        if rank == 2:
            normal = vt[2]
            planar = centred @ vt[:2].T
            area = float(ConvexHull(planar).volume)
            return AreaMeasure(3, atoms=((normal, area), (-normal, area)))
    except QhullError as exc:
        raise HullFailure(f"qhull failed on {len(points)} vertices: {exc}") from exc
    logger.debug("polytope of rank %d has a zero area measure", rank)
    return AreaMeasure(3)


def disk_area_measure(xi, lam, n=None):
    xi = _unit(xi)
    n = n or xi.shape[0]
    mass = unit_ball_volume(n - 1) * lam ** (n - 1)
    return AreaMeasure(n, atoms=((xi, mass), (-xi, mass)))


def cone_lateral_coefficient(lam, n, as_printed=False):
    """Density of the lateral part of S(C_{xi,lam}) per unit H^{n-2} on its sheet.

    as_printed=True gives (1 + lam^2)^{(n-1)/2} / lam, which does not reproduce the lateral area.
    """
    if as_printed:
        return (1.0 + lam**2) ** ((n - 1) / 2.0) / lam
    return lam ** (n - 2) * (1.0 + lam**2) ** ((n - 1) / 2.0) / (n - 1)


def cone_area_measure(xi, lam, n=None, as_printed=False):
    xi = _unit(xi)
    lam = _check_lambda(lam)
    n = n or xi.shape[0]
    atom = (-xi, unit_ball_volume(n - 1) * lam ** (n - 1))
    sheet = ConeLateral(xi, lam, cone_lateral_coefficient(lam, n, as_printed))
    return AreaMeasure(n, atoms=(atom,), sheets=(sheet,))


def ball_area_measure(radius, n=3):
    return AreaMeasure(n, smooth_parts=(SmoothPart(Const(n, float(radius)), f"ball({radius})"),))


def area_measure(K: ConvexBody) -> AreaMeasure:
    if isinstance(K, Polytope):
        return polytope_area_measure(K.vertices, K.ambient_dim)
    if isinstance(K, Ball):
        return ball_area_measure(K.radius, K.ambient_dim)
    if isinstance(K, Disk):
        return disk_area_measure(K.xi, K.lam)
    if isinstance(K, Cone):
        return cone_area_measure(K.xi, K.lam)
    raise TypeError(f"not a convex body: {K!r}")


def sheet_nodes(sheet, resolution=DEFAULT_SHEET_RESOLUTION):
    """Points of the sheet and their H^{n-2} weights."""
    xi = sheet.xi
    n = xi.shape[0]
    basis = null_space(xi[None, :])
    rule_nodes, rule_weights = sphere_rule(n - 1, resolution)
    root = np.sqrt(1.0 + sheet.lam**2)
    points = (sheet.lam * xi[None, :] + rule_nodes @ basis.T) / root
    jacobian = root ** (-(n - 2))
    return points, rule_weights * jacobian


def smooth_area_density_nodes(h, X):
    """det(P D^2 h~ P + x x^T): the product of the principal radii at each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    block = sph_hess_nodes(h, X) + X[:, :, None] * X[:, None, :]
    return np.linalg.det(block)


def smooth_area_density(h, x):
    return float(smooth_area_density_nodes(h, x)[0])


def default_grid(n):
    if n == 3:
        return build_grid(3, 5, ICOSPHERE)
    return build_grid(n, 200_000, MONTE_CARLO, seed=0)


def measure_pair(S, g, sheet_resolution=DEFAULT_SHEET_RESOLUTION, grid=None):
    """integral of g dS for g mapping an (m, n) array of unit vectors to m values.

    Args:
        S: AreaMeasure
        g: Vectorised test function, real or complex
        sheet_resolution: Resolution of the sphere rule used on each cone sheet
        grid: QuadratureGrid for the smooth parts (a default grid when omitted)

    Returns:
        complex
    """
    total = 0j
    if S.atoms:
        directions = np.array([d for d, _ in S.atoms])
        masses = np.array([m for _, m in S.atoms])
        total += complex(np.sum(np.asarray(g(directions)) * masses))
    for sheet in S.sheets:
        points, weights = sheet_nodes(sheet, sheet_resolution)
        total += sheet.coefficient * complex(np.sum(np.asarray(g(points)) * weights))
    if S.smooth_parts:
        grid = grid or default_grid(S.ambient_dim)
        for part in S.smooth_parts:
            density = smooth_area_density_nodes(part.support, grid.nodes)
            total += complex(integrate(grid, np.asarray(g(grid.nodes)) * density))
    return total


def total_mass(S, **kwargs):
    return measure_pair(S, lambda X: np.ones(X.shape[0]), **kwargs).real


def measure_resultant(S, **kwargs):
    """The vector integral of x dS; zero for closed bodies."""
    return np.array(
        [measure_pair(S, lambda X, i=i: X[:, i], **kwargs).real for i in range(S.ambient_dim)]
    )


def export_measure_rows(S):
    """CSV rows: atom,dir...,mass / sheet,xi...,lambda,coefficient / smooth,label."""
    rows = []
    for direction, mass in S.atoms:
        rows.append(["atom", *map(float, direction), float(mass)])
    for sheet in S.sheets:
        rows.append(["sheet", *map(float, sheet.xi), sheet.lam, sheet.coefficient])
    for part in S.smooth_parts:
        rows.append(["smooth", part.label])
    return rows
