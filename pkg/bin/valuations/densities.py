"""
Scalar and matrix densities on S^{n-1}.

A ScalarDensity wraps a smooth field (its derivatives are needed by the odd construction)
times a complex coefficient. A MatrixDensity is a vectorised callable returning one symmetric
n x n matrix per node.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from bin.errors import DimensionMismatch, NotSmooth, UnsupportedDimension
from bin.geometry.fields import (
    Linear,
    ScalarField,
    bar_grad_nodes,
    polynomial_field,
    sph_hess_nodes,
    tangent_projectors,
)
from bin.geometry.quadrature import PRODUCT_GAUSS, build_grid, integrate, sphere_area

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
SIGN_CHECK_ORDER = 32


@dataclass(frozen=True)
class ScalarDensity:
    field: ScalarField
    coefficient: complex = 1.0
    label: str = "psi"
    parity: Optional[int] = None

    def __post_init__(self):
        if not self.field.is_smooth():
            raise NotSmooth(f"density {self.label!r} must be built from a smooth field")

    @property
    def ambient_dim(self):
        return self.field.ambient_dim

    def values(self, X):
        values = self.field.values(X)
        return values if self.coefficient == 1.0 else self.coefficient * values

    def hessian_blocks(self, X):
        """coefficient * (spherical Hessian + psi Id) on the tangent space at each row."""
        return self.coefficient * sph_hess_nodes(self.field, X)


def polynomial_density(n, terms, coefficient=1.0, label="poly"):
    """Density given by a polynomial restricted to the sphere, parity read off its degrees."""
    degrees = {sum(exps) % 2 for exps in dict(terms)}
    parity = None if len(degrees) != 1 else (1 if degrees == {0} else -1)
    return ScalarDensity(polynomial_field(n, terms), coefficient, label, parity)


def constant_density(n, value=1.0):
    return polynomial_density(n, {(0,) * n: 1.0}, value, label=f"const({value})")


def coordinate_density(n, axis=0):
    """x_axis, the standard example of a density that is not orthogonal to linear functions."""
    exps = [0] * n
    exps[axis] = 1
    return polynomial_density(n, {tuple(exps): 1.0}, label=f"x{axis + 1}")


def zonal_density(n):
    """n x_1^2 - |x|^2, the degree-2 zonal harmonic (3 x_1^2 - 1 on S^2)."""
    terms = {}
    for i in range(n):
        exps = [0] * n
        exps[i] = 2
        terms[tuple(exps)] = (n - 1.0) if i == 0 else -1.0
    return polynomial_density(n, terms, label="zonal2")


def triple_product_density():
    """x_1 x_2 x_3 on S^2."""
    return polynomial_density(3, {(1, 1, 1): 1.0}, label="x1x2x3")


def remove_linear_part(phi: ScalarDensity, grid) -> ScalarDensity:
    """phi - <c, x> with c = (n / sigma_{n-1}) integral of phi x.

    The result is orthogonal to the restrictions of linear functions.
    """
    n = phi.ambient_dim
    X = grid.nodes
    moments = np.array([integrate(grid, phi.field.values(X) * X[:, i]) for i in range(n)])
    c = n / sphere_area(n - 1) * moments
    return ScalarDensity(phi.field - Linear(c), phi.coefficient, f"{phi.label}-linear", phi.parity)


@dataclass(frozen=True)
class MatrixDensity:
    ambient_dim: int
    matrices: Callable[[np.ndarray], np.ndarray]
    label: str = "Phi"
    parity: Optional[int] = None

    def __call__(self, X):
        M = np.asarray(self.matrices(X))
        n = self.ambient_dim
        if M.shape != (X.shape[0], n, n):
            raise DimensionMismatch(f"density {self.label!r} returned shape {M.shape}")
        return M

    def symmetry_defect(self, X):
        M = self(X)
        return float(np.max(np.abs(M - M.transpose(0, 2, 1)))) if len(X) else 0.0

    def is_symmetric(self, X):
        return self.symmetry_defect(X) <= SYMMETRY_TOL


def _outer(X):
    return X[:, :, None] * X[:, None, :]


def even_density(n) -> MatrixDensity:
    """(n-1) x x^T - (Id - x x^T); its Theta_2 integrand is (n-1) f^2 - |grad f|^2."""
    if n < 2:
        raise UnsupportedDimension(f"even density needs n >= 2, got {n}")
    return MatrixDensity(n, lambda X: n * _outer(X) - np.eye(n)[None, :, :], "even", 1)


def even_density_as_printed(n) -> MatrixDensity:
    """(Id - x x^T) + (n-1) x x^T, whose integrand is (n-1) f^2 + |grad f|^2."""
    return MatrixDensity(
        n, lambda X: np.eye(n)[None, :, :] + (n - 2) * _outer(X), "even-printed", 1
    )


def identity_density(n) -> MatrixDensity:
    return MatrixDensity(
        n, lambda X: np.broadcast_to(np.eye(n), (X.shape[0], n, n)).copy(), "identity", 1
    )


def zero_density(n) -> MatrixDensity:
    return MatrixDensity(n, lambda X: np.zeros((X.shape[0], n, n)), "zero", 1)


def _odd_candidate(psi: ScalarDensity, sign):
    n = psi.ambient_dim

    def matrices(X):
        A = psi.hessian_blocks(X)
        trace = np.trace(A, axis1=1, axis2=2)
        P = tangent_projectors(X)
        return sign * (A - trace[:, None, None] * P) + (n - 2) * trace[:, None, None] * _outer(X)

    return matrices


def _reference_fields(n):
    return [
        polynomial_field(n, {(0, 0, 0): 1.0, (2, 0, 0): 0.3, (0, 1, 1): -0.2, (1, 0, 0): 0.1}),
        polynomial_field(n, {(0, 0, 0): 1.0, (1, 1, 0): 0.25, (0, 0, 3): 0.15, (0, 2, 0): -0.1}),
    ]


def _theta2_integral(matrices, f, grid):
    G, _ = bar_grad_nodes(f, grid.nodes)
    return integrate(grid, np.einsum("mij,mi,mj->m", matrices(grid.nodes), G, G))


def _hess_s2_integral(psi, f, grid):
    X = grid.nodes
    return 2.0 * integrate(grid, psi.values(X) * np.linalg.det(sph_hess_nodes(f, X) + _outer(X)))


class OddDensity(MatrixDensity):
    """Matrix density attached to psi whose Theta_2 equals 2 integral psi S_2(D^2 f + f Id).

    Both signs of the tangent part are built; the one reproducing that identity on a fixed set
    of polynomial reference fields is kept.
    """

    def __init__(self, psi: ScalarDensity):
        if psi.ambient_dim != 3:
            raise UnsupportedDimension("the odd construction is implemented for n=3")
        object.__setattr__(self, "psi", psi)
        super().__init__(3, self._resolve_sign(), f"odd[{psi.label}]", psi.parity)

    def _resolve_sign(self):
        grid = build_grid(3, SIGN_CHECK_ORDER, PRODUCT_GAUSS)
        references = _reference_fields(3)
        targets = [_hess_s2_integral(self.psi, f, grid) for f in references]
        best, best_residual = None, np.inf
        for sign in (1.0, -1.0):
            candidate = _odd_candidate(self.psi, sign)
            residual = max(
                abs(_theta2_integral(candidate, f, grid) - t) for f, t in zip(references, targets)
            )
            logger.debug(
                "odd density %s: sign %+g leaves residual %.3e", self.psi.label, sign, residual
            )
            if residual < best_residual:
                best, best_residual = candidate, residual
        return best

    @cached_property
    def sign_residual(self):
        grid = build_grid(3, SIGN_CHECK_ORDER, PRODUCT_GAUSS)
        return max(
            abs(_theta2_integral(self.matrices, f, grid) - _hess_s2_integral(self.psi, f, grid))
            for f in _reference_fields(3)
        )


def odd_density(psi: ScalarDensity, n=3) -> MatrixDensity:
    if n != psi.ambient_dim:
        raise DimensionMismatch(f"psi lives in R^{psi.ambient_dim}, asked for n={n}")
    return OddDensity(psi)
