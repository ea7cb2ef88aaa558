"""
The cone, packing and field construction behind the divergence witness.

For a unit xi and lam >= 1 the cone C_{xi,lam} = conv((lam D_xi - xi) u {0}) has support function
max(0, phi_{xi,lam}) where phi_{xi,lam} is the disk support. Any degree n-1 extension nu of the
area valuation K -> integral of x_1^3 dS_{n-1}(K) is forced to take the value -mu(C) on
psi = min(0, phi), and to add over psi with disjoint supports. Packing many such psi into a cap
around e_1 and scaling by k^{-p} yields fields f_k -> 0 with nu(f_k) unbounded.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from bin.errors import EmptyPacking, NoRoot
from bin.geometry.bodies import cone_area_measure, measure_pair, transform_polytope
from bin.geometry.fields import Const, DiskSupport, Min, Scale
from bin.geometry.quadrature import unit_ball_volume
from bin.valuations.checks import make_report
from bin.valuations.functionals import area_valuation_eval, cubic_test_function

logger = logging.getLogger(__name__)

ESTIMATE_LEVEL = -5.0 / 8.0
DELTA_STEP = 1e-3


def admissible_p_interval(n):
    """Open interval (1, (2n-4)/(n-1)) of discount exponents for which nu(f_k) diverges."""
    return 1.0, (2.0 * n - 4.0) / (n - 1.0)


def default_p(n):
    lower, upper = admissible_p_interval(n)
    return 0.5 * (lower + upper)


def mu_cone(xi, lam, n=None):
    """integral of x_1^3 dS_{n-1}(C_{xi,lam}) in closed form.

    Args:
        xi: Unit vector, or an (m, n) array of unit vectors
        lam: Disk scale, at least 1
        n: Ambient dimension (read from xi when omitted)

    Returns:
        float, or an array with one value per row of xi
    """
    xi = np.asarray(xi, dtype=float)
    n = n or xi.shape[-1]
    t = xi[..., 0]
    shape = unit_ball_volume(n - 1) * lam ** (n - 1) / (1.0 + lam**2)
    values = shape * (3.0 * t * (1.0 - t**2) / (n - 1) - t**3)
    return float(values) if np.ndim(values) == 0 else values


def cone_quadrature_value(xi, lam, n=None, sheet_resolution=64):
    """The same integral through the sheet quadrature of the cone's area measure."""
    xi = np.asarray(xi, dtype=float)
    measure = cone_area_measure(xi, lam, n or xi.shape[0])
    return measure_pair(measure, cubic_test_function, sheet_resolution).real


def estimate_bound(lam, n):
    """-(omega_{n-1} / 2) lam^{n-3}, the cap estimate for lam >= 2."""
    return -0.5 * unit_ball_volume(n - 1) * lam ** (n - 3)


def _cap_polynomial(t, n):
    return 3.0 * t * (1.0 - t**2) / (n - 1) - t**3


def find_delta(n):
    """Smallest cap threshold (rounded up to 1e-3) where the cap polynomial stays below -5/8."""
    if n < 4:
        raise ValueError(f"find_delta needs n >= 4, got {n}")

    def shifted(t):
        return _cap_polynomial(t, n) - ESTIMATE_LEVEL

    if shifted(0.5) * shifted(1.0) > 0:
        raise NoRoot(f"cap polynomial does not cross -5/8 on (1/2, 1) for n={n}")
    root = bisect(shifted, 0.5, 1.0, xtol=1e-14)
    delta = math.ceil(root / DELTA_STEP) * DELTA_STEP
    logger.debug("find_delta(%d): root %.6f, delta %.3f", n, root, delta)
    return round(delta, 3)


def sample_cap(delta, count, n, rng):
    """Random unit vectors with first coordinate in [delta, 1]; the first one sits on the rim."""
    first = rng.uniform(delta, 1.0, size=count)
    first[0] = delta
    directions = rng.standard_normal((count, n - 1))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    rest = np.sqrt(np.clip(1.0 - first**2, 0.0, None))[:, None] * directions
    return np.column_stack([first, rest])


@dataclass(frozen=True)
class EstimateReport:
    delta: float
    n: int
    samples: int
    violations: int
    worst_margin: float
    worst_ratio: float

    @property
    def passed(self):
        return self.violations == 0


def verify_estimate(delta, lam_samples, xi_samples, n):
    """Check mu_cone(xi, lam) <= -(omega_{n-1}/2) lam^{n-3} on every sample pair.

    The margin is bound - value (nonnegative when the estimate holds); the ratio is
    value / bound (at least 1 when it holds).
    """
    lams = np.asarray(lam_samples, dtype=float)
    xis = np.atleast_2d(np.asarray(xi_samples, dtype=float))
    if np.any(lams < 2.0):
        raise ValueError(f"the cap estimate needs lambda >= 2, got {lams.min()}")
    if np.any(xis[:, 0] < delta - 1e-12):
        raise ValueError("every sample must satisfy xi_1 >= delta")

    margins, ratios = [], []
    for lam in lams:
        values = mu_cone(xis, lam, n)
        bound = estimate_bound(lam, n)
        margins.append(bound - values)
        ratios.append(values / bound)
    margins = np.concatenate(margins)
    ratios = np.concatenate(ratios)
    report = EstimateReport(
        delta=float(delta),
        n=int(n),
        samples=int(margins.size),
        violations=int(np.count_nonzero(margins < 0)),
        worst_margin=float(margins.min()),
        worst_ratio=float(ratios.min()),
    )
    logger.debug("verify_estimate: %s", report)
    return report


def epsilon_for(k):
    """Packing spacing 4 / sqrt(1 + k^2)."""
    return 4.0 / math.sqrt(1.0 + k * k)


def support_radius(k):
    """Chordal radius sqrt(2) / sqrt(1 + k^2) of the support of min(0, phi_{xi,k})."""
    return math.sqrt(2.0) / math.sqrt(1.0 + k * k)


def packing_side(delta, eps, n):
    r = math.sqrt(1.0 - delta**2)
    return int(math.floor(r / math.sqrt(n) / eps))


def cap_packing(delta, eps, n):
    """Grid of M^{n-1} unit vectors with spacing eps inside the cap xi_1 >= delta.

    Args:
        delta: Cap threshold in (1/2, 1]
        eps: Grid spacing
        n: Ambient dimension

    Returns:
        (M^{n-1}, n) array, lifted from a cube in the equatorial projection
    """
    side = packing_side(delta, eps, n)
    if side < 1:
        raise EmptyPacking(f"no packing point at spacing {eps:.3g} for delta={delta}")
    axis = -(side - 1) * eps / 2.0 + eps * np.arange(side)
    flat = np.array(list(itertools.product(axis, repeat=n - 1)))
    first = np.sqrt(1.0 - np.sum(flat**2, axis=1))
    return np.column_stack([first, flat])


def psi_field(xi, lam):
    """min(0, phi_{xi,lam}), the negative part of the disk support."""
    return Min((Const(len(xi), 0.0), DiskSupport(xi, lam)))


def f_k_field(k, points, p):
    """k^{-p} min(0, phi_{xi_1,k}, ..., phi_{xi_N,k})."""
    points = np.asarray(points, dtype=float)
    n = points.shape[1]
    disks = tuple(DiskSupport(xi, float(k)) for xi in points)
    return Scale(float(k) ** (-p), Min((Const(n, 0.0),) + disks))


def nu_fk(k, points, p, n=None):
    """Forced value k^{-p(n-1)} sum_i -mu_cone(xi_i, k) of a degree n-1 extension on f_k."""
    points = np.asarray(points, dtype=float)
    n = n or points.shape[1]
    forced = -np.sum(mu_cone(points, float(k), n))
    return float(k) ** (-p * (n - 1)) * float(forced)


def supports_disjoint(k):
    """The packing spacing exceeds twice the support radius."""
    return epsilon_for(k) > 2.0 * support_radius(k)


def scaling_check(P, t, p=cubic_test_function, tol=1e-10):
    """Area valuation of t P against t^{n-1} times that of P, for a polytope P in R^3."""
    n = P.ambient_dim
    base = area_valuation_eval(p, P)
    scaled = area_valuation_eval(p, transform_polytope(t * np.eye(n), P))
    expected = t ** (n - 1) * base
    return make_report(f"scaling(t={t})", abs(scaled - expected), tol, abs(expected))
