"""
Valuations on Lipschitz fields on S^{n-1} and on convex bodies.

    Theta1(phi)          integral of phi f
    Theta2(Phi)          integral of <Phi bar_grad f, bar_grad f>
    RotInv(c0, c1, c2)   c0 + c1 integral f + c2 integral [(n-1) f^2 - |grad f|^2]
    HessS2(psi)          2 integral psi S_2(D^2 f + f Id), n=3
    AreaIntegral(p)      integral of p dS_{n-1}(K, .) on bodies

Field valuations evaluate lattice nodes with the first-active-child gradient, so that
mu(f v f) = mu(f) holds exactly; the tie count is logged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from bin.errors import UnsupportedDimension
from bin.geometry.bodies import area_measure, measure_pair
from bin.geometry.fields import ScalarField, sph_hess_nodes
from bin.geometry.quadrature import integrate, unit_ball_volume
from bin.valuations.densities import MatrixDensity, ScalarDensity, odd_density

logger = logging.getLogger(__name__)


def _log_ties(name, ties):
    count = int(np.count_nonzero(ties))
    if count:
        logger.debug("%s: %d node(s) on a seam, first active child used", name, count)
    return count


def theta1_eval(phi: ScalarDensity, f: ScalarField, grid) -> complex:
    X = grid.nodes
    return complex(integrate(grid, phi.values(X) * f.values(X)))


def theta2_integrand(Phi: MatrixDensity, f: ScalarField, X):
    """<Phi(x) bar_grad f(x), bar_grad f(x)> at the rows of X, plus the tie mask."""
    _, G, ties = f.jet(X)
    return np.einsum("mij,mi,mj->m", Phi(X), G, G), ties


def theta2_eval(Phi: MatrixDensity, f: ScalarField, grid) -> complex:
    values, ties = theta2_integrand(Phi, f, grid.nodes)
    _log_ties("theta2", ties)
    return complex(integrate(grid, values))


def rotation_invariant_integrand(f: ScalarField, X):
    """(n-1) f^2 - |grad f|^2 at the rows of X, plus the tie mask."""
    n = f.ambient_dim
    values, G, ties = f.jet(X)
    spherical = G - values[:, None] * X
    return (n - 1) * values**2 - np.sum(spherical**2, axis=1), ties


def rotinv_eval(c0, c1, c2, f: ScalarField, grid) -> complex:
    total = complex(c0)
    if c1 != 0:
        total += c1 * integrate(grid, f.values(grid.nodes))
    if c2 != 0:
        values, ties = rotation_invariant_integrand(f, grid.nodes)
        _log_ties("rotinv", ties)
        total += c2 * integrate(grid, values)
    return total


def s2_density_nodes(f: ScalarField, X):
    """S_2 of the tangent block of D^2 f~ at each row of X, for n=3."""
    if f.ambient_dim != 3:
        raise UnsupportedDimension("S_2 densities are implemented for n=3")
    return np.linalg.det(sph_hess_nodes(f, X) + X[:, :, None] * X[:, None, :])


def hess_s2_eval(psi: ScalarDensity, f: ScalarField, grid) -> complex:
    """2 integral psi S_2(D^2 f + f Id); raises NotSmooth for lattice fields."""
    X = grid.nodes
    return complex(2.0 * integrate(grid, psi.values(X) * s2_density_nodes(f, X)))


def hessian_trilinear(psi: ScalarField, f: ScalarField, h: ScalarField, grid) -> float:
    """integral of psi dS_2(B_f)[B_h], B = D^2 f~ on the tangent space.

    dS_2(A)[B] = tr A tr B - tr(AB); the form is symmetric in (psi, f, h).
    """
    X = grid.nodes
    A = sph_hess_nodes(f, X)
    B = sph_hess_nodes(h, X)
    mixed = np.trace(A, axis1=1, axis2=2) * np.trace(B, axis1=1, axis2=2) - np.einsum(
        "mij,mji->m", A, B
    )
    return integrate(grid, psi.values(X) * mixed)


def area_valuation_eval(p: Callable[[np.ndarray], np.ndarray], K, **pair_options) -> complex:
    return measure_pair(area_measure(K), p, **pair_options)


def cubic_test_function(X):
    """p(x) = x_1^3."""
    return X[:, 0] ** 3


def intrinsic_volumes(f: ScalarField, grid):
    """(V_0, V_1, V_2) through the rotation-invariant family; exact for balls."""
    n = f.ambient_dim
    first = integrate(grid, f.values(grid.nodes)) / unit_ball_volume(n - 1)
    second = rotinv_eval(0, 0, 1, f, grid).real / (2.0 * unit_ball_volume(n - 2))
    return 1.0, float(first), float(second)


class Valuation:
    """Common interface: evaluate(f, grid), a declared degree and a parity flag."""

    degree: int
    parity: int
    homogeneous = True

    def evaluate(self, f, grid) -> complex:
        raise NotImplementedError

    def describe(self):
        return type(self).__name__


@dataclass(frozen=True)
class Theta1(Valuation):
    phi: ScalarDensity
    degree: int = 1

    @property
    def parity(self):
        return self.phi.parity

    def evaluate(self, f, grid):
        return theta1_eval(self.phi, f, grid)

    def describe(self):
        return f"Theta1({self.phi.label})"


@dataclass(frozen=True)
class Theta2(Valuation):
    density: MatrixDensity
    degree: int = 2

    @property
    def parity(self):
        return self.density.parity

    def evaluate(self, f, grid):
        return theta2_eval(self.density, f, grid)

    def describe(self):
        return f"Theta2({self.density.label})"


@dataclass(frozen=True)
class RotInv(Valuation):
    homogeneous = False

    c0: complex = 0.0
    c1: complex = 0.0
    c2: complex = 0.0
    parity: int = 1

    @property
    def degree(self):
        coefficients = (self.c0, self.c1, self.c2)
        nonzero = [i for i, c in enumerate(coefficients) if c != 0]
        return max(nonzero) if nonzero else 0

    def evaluate(self, f, grid):
        return rotinv_eval(self.c0, self.c1, self.c2, f, grid)

    def describe(self):
        return f"RotInv({self.c0}, {self.c1}, {self.c2})"


@dataclass(frozen=True)
class HessS2(Valuation):
    """Smooth fields use the Hessian formula, others its extension Theta2(odd_density(psi))."""

    psi: ScalarDensity
    degree: int = 2

    @property
    def parity(self):
        return self.psi.parity

    @cached_property
    def extension(self):
        return odd_density(self.psi, self.psi.ambient_dim)

    def evaluate(self, f, grid):
        if f.is_smooth():
            return hess_s2_eval(self.psi, f, grid)
        return theta2_eval(self.extension, f, grid)

    def describe(self):
        return f"HessS2({self.psi.label})"


@dataclass(frozen=True)
class AreaIntegral(Valuation):
    p: Callable[[np.ndarray], np.ndarray] = cubic_test_function
    ambient_dim: int = 3
    label: str = "x1^3"
    parity: int = -1

    @property
    def degree(self):
        return self.ambient_dim - 1

    def evaluate(self, K, grid=None):
        return area_valuation_eval(self.p, K, grid=grid)

    def describe(self):
        return f"AreaIntegral({self.label})"


def evaluate(mu: Valuation, f, grid) -> complex:
    """mu(f) on the grid (or mu(K) for body valuations)."""
    return mu.evaluate(f, grid)
