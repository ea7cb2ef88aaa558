"""
Lipschitz functions on the unit sphere S^{n-1} as immutable expression trees.

Every node evaluates on a batch of unit vectors (rows of an (m, n) array) and returns the
values, the Euclidean gradient of its 1-homogeneous extension f~(y) = |y| f(y/|y|) (called the
bar gradient below, equal to the spherical gradient plus f(x) x), and a tie mask flagging nodes
that sit on a nonsmooth seam. Smooth trees also return the Euclidean Hessian of f~.

Ties are resolved by the first active child and always reported, never dropped.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from bin.errors import DimensionMismatch, NotSmooth, SingularMatrix, TieAtNode

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12
UNIT_TOL = 1e-12
KD_TREE_MIN_DISKS = 16


def _frozen(array, dtype=float):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


def _no_ties(count):
    return np.zeros(count, dtype=bool)


def tangent_projectors(X):
    """Stack of Id - x x^T for the rows x of X."""
    n = X.shape[1]
    return np.eye(n)[None, :, :] - X[:, :, None] * X[:, None, :]


class ScalarField:
    """Base class of all tree nodes.

    Subclasses implement values() and jet(); smooth ones also implement hessians().
    """

    ambient_dim: int

    def values(self, X):
        raise NotImplementedError

    def jet(self, X):
        """Values, bar gradients and tie mask at the rows of X."""
        raise NotImplementedError

    def hessians(self, X):
        raise NotSmooth(f"{type(self).__name__} nodes have no Hessian")

    def anchors(self):
        """Points where the extremes of this field or of its gradient are attained."""
        return np.empty((0, self.ambient_dim))

    def is_smooth(self):
        return False

    def __add__(self, other):
        return Sum((self, _coerce(other, self.ambient_dim)))

    __radd__ = __add__

    def __neg__(self):
        return Scale(-1.0, self)

    def __sub__(self, other):
        return Sum((self, -_coerce(other, self.ambient_dim)))

    def __mul__(self, factor):
        if isinstance(factor, ScalarField):
            return NotImplemented
        return Scale(float(factor), self)

    __rmul__ = __mul__


def _coerce(other, n):
    if isinstance(other, ScalarField):
        if other.ambient_dim != n:
            raise DimensionMismatch(f"cannot combine fields on R^{n} and R^{other.ambient_dim}")
        return other
    return Const(n, float(other))


def _check_same_dim(fields):
    dims = {f.ambient_dim for f in fields}
    if len(dims) != 1:
        raise DimensionMismatch(f"fields live in different dimensions: {sorted(dims)}")
    return dims.pop()


@dataclass(frozen=True, eq=False)
class Const(ScalarField):
    ambient_dim: int
    value: float = 0.0

    def values(self, X):
        return np.full(X.shape[0], self.value, dtype=float)

    def jet(self, X):
        return self.values(X), self.value * X, _no_ties(X.shape[0])

    def hessians(self, X):
        return self.value * tangent_projectors(X)

    def is_smooth(self):
        return True


@dataclass(frozen=True, eq=False)
class Linear(ScalarField):
    v: np.ndarray

    def __post_init__(self):
        v = _frozen(self.v)
        if v.ndim != 1:
            raise DimensionMismatch("Linear needs a vector")
        object.__setattr__(self, "v", v)

    @property
    def ambient_dim(self):
        return self.v.shape[0]

    def values(self, X):
        return X @ self.v

    def jet(self, X):
        return self.values(X), np.tile(self.v, (X.shape[0], 1)), _no_ties(X.shape[0])

    def hessians(self, X):
        n = self.ambient_dim
        return np.zeros((X.shape[0], n, n))

    def anchors(self):
        norm = np.linalg.norm(self.v)
        if norm == 0.0:
            return super().anchors()
        u = self.v / norm
        return np.stack([u, -u])

    def is_smooth(self):
        return True


def disk_anchors(centres, lam):
    """Centre, antipode and one point inside the negative cap, for each row of centres."""
    n = centres.shape[1]
    picks = np.eye(n)[np.argmin(np.abs(centres), axis=1)]
    tangents = picks - np.sum(picks * centres, axis=1)[:, None] * centres
    tangents /= np.linalg.norm(tangents, axis=1)[:, None]
    angle = 0.5 * np.arctan(1.0 / lam)
    rims = np.cos(angle) * centres + np.sin(angle) * tangents
    return np.vstack([centres, -centres, rims])


def _disk_parts(X, centres, lam):
    """Values, bar gradients and axis mask of lam |x - <x,c>c| - <x,c> with per-row centres."""
    s = np.einsum("ij,ij->i", X, centres)
    perp = X - s[:, None] * centres
    r = np.linalg.norm(perp, axis=1)
    on_axis = r <= TIE_TOL
    u = perp / np.where(on_axis, 1.0, r)[:, None]
    u[on_axis] = 0.0
    return lam * r - s, lam * u - centres, on_axis


@dataclass(frozen=True, eq=False)
class DiskSupport(ScalarField):
    """phi(x) = lam |x - <x,xi> xi| - <x,xi>, the support function of lam D_xi - xi."""

    xi: np.ndarray
    lam: float

    def __post_init__(self):
        xi = _frozen(self.xi)
        if xi.ndim != 1 or abs(np.linalg.norm(xi) - 1.0) > UNIT_TOL:
            raise ValueError(f"DiskSupport centre must be a unit vector, got {self.xi!r}")
        if self.lam < 1.0:
            raise ValueError(f"DiskSupport needs lambda >= 1, got {self.lam}")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def ambient_dim(self):
        return self.xi.shape[0]

    def values(self, X):
        s = X @ self.xi
        r = np.linalg.norm(X - s[:, None] * self.xi, axis=1)
        return self.lam * r - s

    def jet(self, X):
        centres = np.broadcast_to(self.xi, X.shape)
        return _disk_parts(X, centres, self.lam)

    def anchors(self):
        return disk_anchors(self.xi[None, :], self.lam)


@dataclass(frozen=True, eq=False)
class Scale(ScalarField):
    factor: float
    child: ScalarField

    @property
    def ambient_dim(self):
        return self.child.ambient_dim

    def values(self, X):
        return self.factor * self.child.values(X)

    def jet(self, X):
        values, grads, ties = self.child.jet(X)
        return self.factor * values, self.factor * grads, ties

    def hessians(self, X):
        return self.factor * self.child.hessians(X)

    def anchors(self):
        return self.child.anchors()

    def is_smooth(self):
        return self.child.is_smooth()


@dataclass(frozen=True, eq=False)
class Sum(ScalarField):
    terms: Tuple[ScalarField, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("Sum needs at least one term")
        _check_same_dim(terms)
        object.__setattr__(self, "terms", terms)

    @property
    def ambient_dim(self):
        return self.terms[0].ambient_dim

    def values(self, X):
        return sum(term.values(X) for term in self.terms)

    def jet(self, X):
        values = np.zeros(X.shape[0])
        grads = np.zeros_like(X, dtype=float)
        ties = _no_ties(X.shape[0])
        for term in self.terms:
            v, g, t = term.jet(X)
            values += v
            grads += g
            ties |= t
        return values, grads, ties

    def hessians(self, X):
        return sum(term.hessians(X) for term in self.terms)

    def anchors(self):
        return np.vstack([term.anchors() for term in self.terms])

    def is_smooth(self):
        return all(term.is_smooth() for term in self.terms)


class _Lattice(ScalarField):
    children: Tuple[ScalarField, ...]
    _pick_min = True

    def __post_init__(self):
        children = tuple(self.children)
        if not children:
            raise ValueError(f"{type(self).__name__} needs at least one child")
        _check_same_dim(children)
        object.__setattr__(self, "children", children)

    @property
    def ambient_dim(self):
        return self.children[0].ambient_dim

    def _select(self, V):
        if self._pick_min:
            best = V.min(axis=0)
            active = V <= best + TIE_TOL
        else:
            best = V.max(axis=0)
            active = V >= best - TIE_TOL
        first = np.argmax(active, axis=0)
        ties = np.count_nonzero(active, axis=0) > 1
        return best, first, ties

    def values(self, X):
        V = np.stack([child.values(X) for child in self.children])
        return V.min(axis=0) if self._pick_min else V.max(axis=0)

    def jet(self, X):
        V = np.stack([child.values(X) for child in self.children])
        best, first, ties = self._select(V)
        grads = np.empty_like(X, dtype=float)
        for j, child in enumerate(self.children):
            rows = np.flatnonzero(first == j)
            if rows.size:
                _, g, t = child.jet(X[rows])
                grads[rows] = g
                ties[rows] |= t
        return best, grads, ties

    def anchors(self):
        return np.vstack([child.anchors() for child in self.children])


@dataclass(frozen=True, eq=False)
class _DiskFamily:
    """Const children plus same-lambda DiskSupport children of one Min node."""

    const_ids: np.ndarray
    const_values: np.ndarray
    disk_ids: np.ndarray
    centres: np.ndarray
    lam: float
    tree: cKDTree

    @property
    def reach(self):
        """Chordal radius 2 / sqrt(1 + lam^2); every disk child is >= 1 farther from its centre."""
        return 2.0 / np.sqrt(1.0 + self.lam**2) * (1.0 + 1e-9)

    def _candidates(self, X):
        neighbours = 2 if len(self.centres) > 1 else 1
        _, nearest = self.tree.query(X, k=neighbours, distance_upper_bound=self.reach)
        nearest = np.asarray(nearest).reshape(X.shape[0], neighbours)
        # misses come back as index len(centres)
        found = nearest < len(self.centres)
        nearest = np.where(found, nearest, 0)
        disk_values = []
        for col in range(neighbours):
            centres = self.centres[nearest[:, col]]
            s = np.einsum("ij,ij->i", X, centres)
            r = np.linalg.norm(X - s[:, None] * centres, axis=1)
            disk_values.append(np.where(found[:, col], self.lam * r - s, np.inf))
        m = X.shape[0]
        values = np.column_stack(
            [np.broadcast_to(self.const_values, (m, len(self.const_values)))] + disk_values
        )
        ids = np.column_stack(
            [np.broadcast_to(self.const_ids, (m, len(self.const_ids)))]
            + [self.disk_ids[nearest[:, col]] for col in range(neighbours)]
        )
        return nearest, values, ids

    def values(self, X):
        _, values, _ = self._candidates(X)
        return values.min(axis=1)

    def jet(self, X):
        nearest, values, ids = self._candidates(X)
        best = values.min(axis=1)
        active = values <= best[:, None] + TIE_TOL
        ties = np.count_nonzero(active, axis=1) > 1
        column = np.where(active, ids, np.iinfo(np.int64).max).argmin(axis=1)

        grads = np.empty_like(X, dtype=float)
        n_const = len(self.const_ids)
        for j in range(n_const):
            rows = column == j
            grads[rows] = self.const_values[j] * X[rows]
        for col in range(nearest.shape[1]):
            rows = np.flatnonzero(column == n_const + col)
            if rows.size:
                centres = self.centres[nearest[rows, col]]
                _, g, on_axis = _disk_parts(X[rows], centres, self.lam)
                grads[rows] = g
                ties[rows] |= on_axis
        return best, grads, ties

    def anchors(self):
        return disk_anchors(self.centres, self.lam)


@dataclass(frozen=True, eq=False)
class Min(_Lattice):
    children: Tuple[ScalarField, ...]
    _pick_min = True

    @cached_property
    def _disk_family(self):
        # The nearest centre realises the minimum over the disk children once some constant
        # child is below 1, since lam sin(t) - cos(t) only drops below 1 for t < 2 arctan(1/lam)
        # and increases there.
        consts = [(i, c.value) for i, c in enumerate(self.children) if isinstance(c, Const)]
        disks = [(i, c) for i, c in enumerate(self.children) if isinstance(c, DiskSupport)]
        if len(consts) + len(disks) != len(self.children) or len(disks) < KD_TREE_MIN_DISKS:
            return None
        if min(value for _, value in consts or [(0, np.inf)]) >= 1.0 - TIE_TOL:
            return None
        if len({d.lam for _, d in disks}) != 1:
            return None
        centres = np.array([d.xi for _, d in disks])
        logger.debug("Min node uses a k-d tree over %d disk centres", len(centres))
        return _DiskFamily(
            const_ids=np.array([i for i, _ in consts], dtype=np.int64),
            const_values=np.array([v for _, v in consts], dtype=float),
            disk_ids=np.array([i for i, _ in disks], dtype=np.int64),
            centres=centres,
            lam=disks[0][1].lam,
            tree=cKDTree(centres),
        )

    def values(self, X):
        family = self._disk_family
        return family.values(X) if family is not None else super().values(X)

    def jet(self, X):
        family = self._disk_family
        return family.jet(X) if family is not None else super().jet(X)

    def anchors(self):
        family = self._disk_family
        if family is None:
            return super().anchors()
        const_anchors = [self.children[i].anchors() for i in family.const_ids]
        return np.vstack(const_anchors + [family.anchors()])


@dataclass(frozen=True, eq=False)
class Max(_Lattice):
    children: Tuple[ScalarField, ...]
    _pick_min = False


@dataclass(frozen=True, eq=False)
class GlAct(ScalarField):
    """(g.f)(x) = |g^T x| f(g^T x / |g^T x|)."""

    g: np.ndarray
    child: ScalarField

    def __post_init__(self):
        g = _frozen(self.g)
        n = self.child.ambient_dim
        if g.shape != (n, n):
            raise DimensionMismatch(f"GL action needs a {n}x{n} matrix, got shape {g.shape}")
        if np.linalg.matrix_rank(g) < n:
            raise SingularMatrix("GL action needs an invertible matrix")
        object.__setattr__(self, "g", g)

    @property
    def ambient_dim(self):
        return self.child.ambient_dim

    @cached_property
    def _inverse(self):
        return np.linalg.inv(self.g)

    def _pull(self, X):
        Y = X @ self.g
        r = np.linalg.norm(Y, axis=1)
        return Y / r[:, None], r

    def values(self, X):
        U, r = self._pull(X)
        return r * self.child.values(U)

    def jet(self, X):
        U, r = self._pull(X)
        values, grads, ties = self.child.jet(U)
        return r * values, grads @ self.g.T, ties

    def hessians(self, X):
        U, r = self._pull(X)
        H = self.child.hessians(U)
        return np.einsum("ij,mjk,lk->mil", self.g, H, self.g) / r[:, None, None]

    def anchors(self):
        A = self.child.anchors()
        if A.shape[0] == 0:
            return A
        P = A @ self._inverse
        return P / np.linalg.norm(P, axis=1)[:, None]

    def is_smooth(self):
        return self.child.is_smooth()


@dataclass(frozen=True, eq=False)
class Smooth(ScalarField):
    """Closed-form field given by callables for f, grad f~ and D^2 f~ on unit vectors.

    A Smooth node without a Hessian callable is Lipschitz but not C^2.
    """

    ambient_dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "smooth"
    parity: Optional[int] = None

    def values(self, X):
        return np.asarray(self.value(X), dtype=float)

    def jet(self, X):
        return self.values(X), np.asarray(self.gradient(X), dtype=float), _no_ties(X.shape[0])

    def hessians(self, X):
        if self.hessian is None:
            raise NotSmooth(f"smooth node {self.label!r} carries no Hessian")
        return np.asarray(self.hessian(X), dtype=float)

    def is_smooth(self):
        return self.hessian is not None


def _monomials(X, exponents):
    return np.prod(X[:, None, :] ** exponents[None, :, :], axis=2)


@dataclass(frozen=True, eq=False)
class HomogeneousPolynomial:
    """sum_t c_t prod_i y_i^{E[t, i]} with every row of E summing to the same degree."""

    exponents: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        E = _frozen(np.atleast_2d(self.exponents), dtype=np.int64)
        c = _frozen(self.coefficients)
        if E.shape[0] != c.shape[0]:
            raise DimensionMismatch("one coefficient per monomial is required")
        if np.any(E < 0) or len(set(E.sum(axis=1).tolist())) != 1:
            raise ValueError("monomials must have nonnegative exponents and equal degree")
        object.__setattr__(self, "exponents", E)
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self):
        return int(self.exponents[0].sum())

    @property
    def ambient_dim(self):
        return self.exponents.shape[1]

    def _shifted(self, X, coefficients, exponents):
        keep = coefficients != 0
        if not np.any(keep):
            return np.zeros(X.shape[0])
        return _monomials(X, exponents[keep]) @ coefficients[keep]

    def __call__(self, X):
        return _monomials(X, self.exponents) @ self.coefficients

    def gradient(self, X):
        E, c = self.exponents, self.coefficients
        out = np.zeros_like(X, dtype=float)
        for i in range(X.shape[1]):
            shifted = E.copy()
            shifted[:, i] = np.maximum(shifted[:, i] - 1, 0)
            out[:, i] = self._shifted(X, c * E[:, i], shifted)
        return out

    def hessian(self, X):
        E, c = self.exponents, self.coefficients
        m, n = X.shape
        out = np.zeros((m, n, n))
        for i, j in itertools.combinations_with_replacement(range(n), 2):
            shifted = E.copy()
            if i == j:
                coef = c * E[:, i] * (E[:, i] - 1)
                shifted[:, i] = np.maximum(shifted[:, i] - 2, 0)
            else:
                coef = c * E[:, i] * E[:, j]
                shifted[:, i] = np.maximum(shifted[:, i] - 1, 0)
                shifted[:, j] = np.maximum(shifted[:, j] - 1, 0)
            out[:, i, j] = self._shifted(X, coef, shifted)
            out[:, j, i] = out[:, i, j]
        return out


@dataclass(frozen=True, eq=False)
class _HomogeneousExtension:
    """Derivatives of P(y) |y|^{1-d} at unit vectors, P homogeneous of degree d."""

    poly: HomogeneousPolynomial

    def value(self, X):
        return self.poly(X)

    def gradient(self, X):
        s = 1 - self.poly.degree
        return self.poly.gradient(X) + s * self.poly(X)[:, None] * X

    def hessian(self, X):
        s = 1 - self.poly.degree
        P = self.poly(X)
        dP = self.poly.gradient(X)
        mixed = dP[:, :, None] * X[:, None, :]
        xx = X[:, :, None] * X[:, None, :]
        identity = np.eye(X.shape[1])[None, :, :]
        return (
            self.poly.hessian(X)
            + s * (mixed + mixed.transpose(0, 2, 1))
            + s * P[:, None, None] * (identity + (s - 2) * xx)
        )


def polynomial_field(n, terms):
    """Field whose restriction to the sphere is a polynomial.

    Args:
        n: Ambient dimension
        terms: Mapping (or iterable of pairs) from exponent tuples to coefficients

    Returns:
        Smooth node (one per homogeneous degree, summed) with analytic derivatives
    """
    items = terms.items() if isinstance(terms, Mapping) else terms
    by_degree = {}
    for exponents, coefficient in items:
        exponents = tuple(int(e) for e in exponents)
        if len(exponents) != n:
            raise DimensionMismatch(f"monomial {exponents} does not live in R^{n}")
        by_degree.setdefault(sum(exponents), []).append((exponents, float(coefficient)))
    if not by_degree:
        return Const(n, 0.0)

    parts = []
    for degree in sorted(by_degree):
        exps, coefs = zip(*by_degree[degree])
        extension = _HomogeneousExtension(HomogeneousPolynomial(np.array(exps), np.array(coefs)))
        parts.append(
            Smooth(
                n,
                extension.value,
                extension.gradient,
                extension.hessian,
                label=f"poly{degree}",
                parity=(-1) ** degree,
            )
        )
    return parts[0] if len(parts) == 1 else Sum(tuple(parts))


def monomial_exponents(n, degree):
    """All exponent tuples of the given total degree in n variables."""
    out = []
    for combo in itertools.combinations_with_replacement(range(n), degree):
        out.append(tuple(np.bincount(np.array(combo, dtype=np.int64), minlength=n).tolist()))
    return out


def zonal_harmonic_2(n):
    """3 x_1^2 - 1 on S^2 (n x_1^2 - 1 in general), written homogeneously."""
    terms = {}
    for i in range(n):
        exps = [0] * n
        exps[i] = 2
        terms[tuple(exps)] = (n - 1.0) if i == 0 else -1.0
    return polynomial_field(n, terms)


def random_unit_vectors(rng, count, n):
    samples = rng.standard_normal((count, n))
    return samples / np.linalg.norm(samples, axis=1)[:, None]


def random_smooth_field(n, rng, max_degree=3, amplitude=0.3, base=1.0):
    """base + amplitude * (random polynomial of degrees 1..max_degree)."""
    terms = {}
    for degree in range(1, max_degree + 1):
        for exps in monomial_exponents(n, degree):
            terms[exps] = amplitude * rng.uniform(-1.0, 1.0)
    return Const(n, base) + polynomial_field(n, terms)


def random_lattice_field(n, rng, depth=2):
    """Random Min/Max tree over disk supports, linear and constant leaves."""
    if depth == 0:
        kind = rng.integers(3)
        if kind == 0:
            xi = random_unit_vectors(rng, 1, n)[0]
            return Scale(rng.uniform(0.5, 1.5), DiskSupport(xi, rng.uniform(1.0, 3.0)))
        if kind == 1:
            return Linear(rng.uniform(-1.0, 1.0, size=n))
        return Const(n, rng.uniform(-0.5, 1.5))
    children = tuple(random_lattice_field(n, rng, depth - 1) for _ in range(rng.integers(2, 4)))
    return Min(children) if rng.integers(2) == 0 else Max(children)


def _node_array(f, x):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != f.ambient_dim:
        raise DimensionMismatch(f"points in R^{X.shape[1]} for a field on R^{f.ambient_dim}")
    return X, single


def evaluate(f, x):
    """Value of f at a unit vector (float) or at the rows of an array (array)."""
    X, single = _node_array(f, x)
    values = f.values(X)
    return float(values[0]) if single else values


def bar_grad_nodes(f, X):
    """Bar gradients at the rows of X with the first-active-child rule, plus the tie mask."""
    X, _ = _node_array(f, X)
    _, grads, ties = f.jet(X)
    return grads, ties


def bar_grad(f, x):
    """Euclidean gradient of the 1-homogeneous extension at one unit vector."""
    grads, ties = bar_grad_nodes(f, x)
    if ties[0]:
        raise TieAtNode(f"x={np.asarray(x)!r} lies on a nonsmooth seam")
    return grads[0]


def sph_grad_nodes(f, X):
    """Spherical gradients (bar gradient minus f(x) x) at the rows of X, plus the tie mask."""
    X, _ = _node_array(f, X)
    values, grads, ties = f.jet(X)
    return grads - values[:, None] * X, ties


def sph_grad(f, x):
    grads, ties = sph_grad_nodes(f, x)
    if ties[0]:
        raise TieAtNode(f"x={np.asarray(x)!r} lies on a nonsmooth seam")
    return grads[0]


def sph_hess_nodes(f, X):
    """P D^2 f~ P at the rows of X, i.e. the spherical Hessian plus f Id on the tangent space."""
    X, _ = _node_array(f, X)
    H = f.hessians(X)
    P = tangent_projectors(X)
    out = P @ H @ P
    return 0.5 * (out + out.transpose(0, 2, 1))


def sph_hess(f, x):
    return sph_hess_nodes(f, x)[0]


def meet(fs: Sequence[ScalarField]):
    return Min(tuple(fs))


def join(fs: Sequence[ScalarField]):
    return Max(tuple(fs))


def gl_act(g, f):
    return GlAct(np.asarray(g, dtype=float), f)


def _with_anchors(f, grid):
    anchors = f.anchors()
    if anchors.shape[0] == 0:
        return grid.nodes
    return np.vstack([grid.nodes, anchors])


def sup_norm(f, grid):
    """max |f| over grid nodes and the field's anchor points."""
    return float(np.max(np.abs(f.values(_with_anchors(f, grid)))))


def lip_est(f, grid, with_ties=False):
    """ess-sup of |spherical gradient| over grid nodes and anchors, ties excluded."""
    X = _with_anchors(f, grid)
    grads, ties = sph_grad_nodes(f, X)
    norms = np.linalg.norm(grads[~ties], axis=1)
    value = float(norms.max()) if norms.size else 0.0
    tie_count = int(np.count_nonzero(ties))
    if tie_count:
        logger.debug("lip_est skipped %d tie node(s)", tie_count)
    return (value, tie_count) if with_ties else value


def gradient_l1_distance(f, h, grid, with_ties=False):
    """integral of |grad f - grad h| over the grid, skipping nodes where either field ties."""
    gf, tf = sph_grad_nodes(f, grid.nodes)
    gh, th = sph_grad_nodes(h, grid.nodes)
    skip = tf | th
    integrand = np.where(skip, 0.0, np.linalg.norm(gf - gh, axis=1))
    value = float(np.sum(np.ascontiguousarray(grid.weights * integrand)))
    tie_count = int(np.count_nonzero(skip))
    return (value, tie_count) if with_ties else value


def d_tau(f, h, grid, with_ties=False):
    """||f - h||_inf + integral of |grad f - grad h|."""
    gradient_term, tie_count = gradient_l1_distance(f, h, grid, with_ties=True)
    value = sup_norm(f - h, grid) + gradient_term
    return (value, tie_count) if with_ties else value


@dataclass(frozen=True)
class ZeroNorms:
    """sup_norm, lip_est and the gradient L1 distance of one field to the zero field."""

    sup_norm: float
    lip_est: float
    gradient_l1: float
    lip_ties: int
    gradient_ties: int

    @property
    def d_tau(self):
        return self.sup_norm + self.gradient_l1


def zero_norms(f, grid):
    """The norms of f against Const 0 from a single jet over grid nodes and anchors.

    Matches sup_norm(f), lip_est(f) and d_tau(f, Const 0) without evaluating f three times.
    """
    X = _with_anchors(f, grid)
    values, grads, ties = f.jet(X)
    norms = np.linalg.norm(grads - values[:, None] * X, axis=1)
    m = grid.nodes.shape[0]
    node_ties = ties[:m]
    integrand = np.where(node_ties, 0.0, norms[:m])
    smooth = norms[~ties]
    return ZeroNorms(
        sup_norm=float(np.max(np.abs(values))),
        lip_est=float(smooth.max()) if smooth.size else 0.0,
        gradient_l1=float(np.sum(np.ascontiguousarray(grid.weights * integrand))),
        lip_ties=int(np.count_nonzero(ties)),
        gradient_ties=int(np.count_nonzero(node_ties)),
    )


@dataclass(frozen=True)
class TauTolerances:
    sup: float = 1e-2
    gradient_l1: float = 1e-2
    lip_bound: float = 2.0


@dataclass(frozen=True)
class TauReport:
    uniform_sup_deviation: float
    gradient_l1_deviation: float
    gradient_linf_bound: float
    verdict: bool
    sup_deviations: Tuple[float, ...] = ()
    gradient_deviations: Tuple[float, ...] = ()
    ties: int = 0


def tau_check(sequence: Iterable[ScalarField], f, grid, tols: Optional[TauTolerances] = None):
    """Numerical test of tau-convergence of a sequence to f.

    The tail deviations are those of the last term; the gradient bound is the largest
    lip_est over the whole sequence.

    Returns:
        TauReport with the per-term deviations and the verdict
    """
    sequence = list(sequence)
    if not sequence:
        raise ValueError("tau_check needs a nonempty sequence")

    sup_devs, grad_devs, bounds = [], [], []
    ties = 0
    for term in sequence:
        sup_devs.append(sup_norm(term - f, grid))
        l1, term_ties = gradient_l1_distance(term, f, grid, with_ties=True)
        grad_devs.append(l1)
        lip, lip_ties = lip_est(term, grid, with_ties=True)
        bounds.append(lip)
        ties += term_ties + lip_ties
    return tau_report(sup_devs, grad_devs, bounds, ties, tols)


def tau_report(sup_devs, grad_devs, bounds, ties=0, tols: Optional[TauTolerances] = None):
    """TauReport from per-term sup deviations, gradient L1 deviations and lip_est values."""
    tols = tols or TauTolerances()
    if not sup_devs:
        raise ValueError("a tau report needs at least one term")
    report = TauReport(
        uniform_sup_deviation=sup_devs[-1],
        gradient_l1_deviation=grad_devs[-1],
        gradient_linf_bound=max(bounds),
        verdict=bool(
            sup_devs[-1] <= tols.sup
            and grad_devs[-1] <= tols.gradient_l1
            and max(bounds) <= tols.lip_bound
        ),
        sup_deviations=tuple(sup_devs),
        gradient_deviations=tuple(grad_devs),
        ties=ties,
    )
    logger.debug("tau report over %d terms: %s", len(sup_devs), report)
    return report
