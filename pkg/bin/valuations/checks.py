"""
Numerical checks of the valuation property, dual translation invariance, homogeneity,
parity and the divergence condition on matrix densities.

Every check returns a CheckReport; a check passes when residual <= tol * max(1, scale).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import null_space

from bin.geometry.fields import (
    Const,
    DiskSupport,
    Linear,
    ScalarField,
    bar_grad_nodes,
    gl_act,
    join,
    meet,
    random_lattice_field,
    random_smooth_field,
    random_unit_vectors,
)
from bin.geometry.quadrature import integrate_vec
from bin.utils.common import run_parallel

logger = logging.getLogger(__name__)

DEFAULT_FD_STEP = 1e-4


@dataclass(frozen=True)
class CheckReport:
    case: str
    residual: float
    tol: float
    passed: bool
    scale: float = 1.0

    def as_row(self):
        return [self.case, self.residual, self.tol, self.passed]


def make_report(case, residual, tol, scale=1.0):
    residual = float(residual)
    scale = float(scale)
    passed = bool(residual <= tol * max(1.0, scale))
    if not passed:
        logger.debug(
            "check %s failed: residual %.3e, tol %.1e, scale %.3e", case, residual, tol, scale
        )
    return CheckReport(case, residual, tol, passed, scale)


def check_valuation_property(mu, f, h, grid, tol=1e-6, case="valuation"):
    """|mu(f v h) + mu(f ^ h) - mu(f) - mu(h)| against the sum of the four magnitudes."""
    values = [mu.evaluate(g, grid) for g in (join([f, h]), meet([f, h]), f, h)]
    residual = abs(values[0] + values[1] - values[2] - values[3])
    return make_report(case, residual, tol, sum(abs(v) for v in values))


def check_dual_invariance(mu, f, v, grid, tol=1e-5, case="invariance"):
    """|mu(f + <v, .>) - mu(f)|."""
    shifted = mu.evaluate(f + Linear(v), grid)
    base = mu.evaluate(f, grid)
    return make_report(case, abs(shifted - base), tol, abs(base))


def check_parity(mu, f, grid, tol=1e-8, case="parity"):
    """mu(f(-.)) = parity * mu(f), with f(-.) obtained as the action of -Id."""
    flipped = gl_act(-np.eye(f.ambient_dim), f)
    base = mu.evaluate(f, grid)
    residual = abs(mu.evaluate(flipped, grid) - mu.parity * base)
    return make_report(case, residual, tol, abs(base))


def check_disjoint_additivity(mu, fields: Sequence[ScalarField], grid, tol=1e-6, case="disjoint"):
    """mu(min of disjointly supported nonpositive fields) = sum of mu(field), and mu(0) = 0."""
    fields = list(fields)
    values = [mu.evaluate(g, grid) for g in fields]
    combined = mu.evaluate(meet(fields), grid)
    zero = mu.evaluate(Const(fields[0].ambient_dim, 0.0), grid)
    residual = abs(combined - sum(values)) + abs(zero)
    return make_report(case, residual, tol, abs(combined) + sum(abs(v) for v in values))


def theta2_condition_residual(Phi, grid, test_fields: Sequence[ScalarField]) -> float:
    """max over test fields of |integral Phi(x) bar_grad f(x)|."""
    if not test_fields:
        raise ValueError("theta2_condition_residual needs at least one test field")
    X = grid.nodes
    M = Phi(X)
    worst = 0.0
    for f in test_fields:
        G, _ = bar_grad_nodes(f, X)
        vector = integrate_vec(grid, np.einsum("mij,mj->mi", M, G))
        worst = max(worst, float(np.linalg.norm(vector)))
    return worst


def default_condition_fields(n, rng=None):
    """Const(1), the coordinate functions and a few disk supports."""
    rng = rng or np.random.default_rng(0)
    fields = [Const(n, 1.0)] + [Linear(e) for e in np.eye(n)]
    fields += [DiskSupport(xi, 1.5) for xi in random_unit_vectors(rng, 3, n)]
    return fields


def _tangent_divergence(Phi, x, step):
    """Central-difference spherical divergence of the columns of (Id - y y^T) Phi(y) at x."""
    frame = null_space(x[None, :]).T
    points = []
    for t in frame:
        points.append(np.cos(step) * x + np.sin(step) * t)
        points.append(np.cos(step) * x - np.sin(step) * t)
    Y = np.array(points)
    M = Phi(Y)
    W = M - Y[:, :, None] * np.einsum("mi,mij->mj", Y, M)[:, None, :]
    divergence = 0.0
    for a, t in enumerate(frame):
        divergence = divergence + t @ (W[2 * a] - W[2 * a + 1]) / (2.0 * step)
    return divergence


def pde_residual(Phi, x, fd_step=DEFAULT_FD_STEP):
    """-Div(phi_j - <phi_j, x> x) + <phi_j, x> for every column phi_j of Phi."""
    x = np.asarray(x, dtype=float)
    M = Phi(x[None, :])[0]
    return -_tangent_divergence(Phi, x, fd_step) + x @ M


@dataclass(frozen=True)
class DegreeFit:
    coefficients: tuple
    degree: int
    truncation_residual: float
    scale: float


def fit_degree(mu, f, t_samples, grid, tol=1e-8):
    """Least-squares polynomial fit of t -> mu(t f).

    Args:
        mu: Valuation
        f: Field
        t_samples: At least 4 positive reals
        grid: QuadratureGrid
        tol: Relative size below which a coefficient counts as zero

    Returns:
        DegreeFit with coefficients from the constant term upwards, the highest degree with a
        nonzero coefficient and the residual of the degree-2 truncation
    """
    t = np.asarray(t_samples, dtype=float)
    if t.size < 4 or np.any(t <= 0):
        raise ValueError("fit_degree needs at least 4 positive samples")
    values = np.array([mu.evaluate(float(tk) * f, grid) for tk in t], dtype=complex)
    scale = max(1.0, float(np.max(np.abs(values))))

    full = P.polyfit(t, values.real, t.size - 1) + 1j * P.polyfit(t, values.imag, t.size - 1)
    quadratic = P.polyfit(t, values.real, 2) + 1j * P.polyfit(t, values.imag, 2)
    residual = float(np.max(np.abs(P.polyval(t, quadratic) - values)))

    significant = np.flatnonzero(np.abs(full) > tol * scale)
    degree = int(significant.max()) if significant.size else 0
    return DegreeFit(tuple(full.tolist()), degree, residual, scale)


def check_degree(mu, f, grid, t_samples=(0.5, 1.0, 1.5, 2.0, 3.0), tol=1e-8, case="degree"):
    """t -> mu(t f) must be a polynomial of degree <= 2, and a monomial for homogeneous mu."""
    fit = fit_degree(mu, f, t_samples, grid, tol)
    residual = fit.truncation_residual
    if mu.homogeneous:
        stray = [abs(c) for k, c in enumerate(fit.coefficients) if k != mu.degree]
        residual = max([residual] + stray)
    return make_report(case, residual, tol, fit.scale)


def valuation_property_battery(mu, grid, pairs=100, seed=0, tol=1e-6, max_workers=1,
                               progress=False, depth=2):
    """Valuation identity on random pairs of lattice fields."""
    rng = np.random.default_rng(seed)
    n = grid.ambient_dim
    cases = [(random_lattice_field(n, rng, depth), random_lattice_field(n, rng, depth))
             for _ in range(pairs)]
    tasks = [
        (i, lambda f=f, h=h, i=i: check_valuation_property(mu, f, h, grid, tol, f"pair{i:03d}"))
        for i, (f, h) in enumerate(cases)
    ]
    return run_parallel(tasks, max_workers, progress, "pair")


def invariance_battery(mu, grid, cases=50, seed=0, tol=1e-5, max_workers=1, progress=False,
                       lattice=False):
    """Dual translation invariance on random (f, v)."""
    rng = np.random.default_rng(seed)
    n = grid.ambient_dim
    inputs = []
    for _ in range(cases):
        f = random_lattice_field(n, rng) if lattice else random_smooth_field(n, rng)
        inputs.append((f, rng.uniform(-1.0, 1.0, size=n)))
    tasks = [
        (i, lambda f=f, v=v, i=i: check_dual_invariance(mu, f, v, grid, tol, f"shift{i:03d}"))
        for i, (f, v) in enumerate(inputs)
    ]
    return run_parallel(tasks, max_workers, progress, "shift")


def degree_battery(mu, grid, cases=10, seed=0, tol=1e-8, max_workers=1, progress=False):
    rng = np.random.default_rng(seed)
    n = grid.ambient_dim
    fields = [random_smooth_field(n, rng) for _ in range(cases)]
    tasks = [
        (i, lambda f=f, i=i: check_degree(mu, f, grid, tol=tol, case=f"field{i:03d}"))
        for i, f in enumerate(fields)
    ]
    return run_parallel(tasks, max_workers, progress, "field")


def pde_battery(Phi, n, points=50, seed=0, fd_step=DEFAULT_FD_STEP, tol=1e-4) -> List[CheckReport]:
    rng = np.random.default_rng(seed)
    reports = []
    for i, x in enumerate(random_unit_vectors(rng, points, n)):
        residual = float(np.max(np.abs(pde_residual(Phi, x, fd_step))))
        reports.append(make_report(f"point{i:03d}", residual, tol))
    return reports
