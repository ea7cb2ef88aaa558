"""
Sweep over k: forced values nu(f_k), norms of f_k and the fitted growth exponents.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from bin.counterexample.construction import (
    admissible_p_interval,
    cap_packing,
    epsilon_for,
    f_k_field,
    find_delta,
    nu_fk,
    supports_disjoint,
)
from bin.errors import EmptyPacking
from bin.geometry.fields import TauTolerances, tau_report, zero_norms
from bin.utils.common import run_parallel, write_csv

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["k", "N", "nu_fk", "sup_norm", "lip_est", "d_tau", "ties"]


def powers_of_two(kmin, kmax):
    k, out = int(kmin), []
    while k <= kmax:
        out.append(k)
        k *= 2
    return out


@dataclass(frozen=True)
class SweepConfig:
    n: int = 4
    delta: Optional[float] = None
    p: Optional[float] = None
    k_values: Sequence[int] = field(default_factory=lambda: powers_of_two(32, 1024))
    seed: int = 0

    def __post_init__(self):
        if self.n < 4:
            raise ValueError(f"the sweep needs n >= 4, got n={self.n}")
        if self.delta is None:
            object.__setattr__(self, "delta", find_delta(self.n))
        if self.p is None:
            lower, upper = admissible_p_interval(self.n)
            object.__setattr__(self, "p", 0.5 * (lower + upper))
        lower, upper = admissible_p_interval(self.n)
        if not lower < self.p < upper:
            raise ValueError(f"p={self.p} is outside the open interval ({lower}, {upper:.6g})")
        if not 0.5 < self.delta <= 1.0:
            raise ValueError(f"delta={self.delta} is outside (1/2, 1]")
        if not self.k_values or min(self.k_values) < 2:
            raise ValueError("k values must be integers >= 2")
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))


@dataclass(frozen=True)
class SweepRecord:
    """One row of the sweep.

    nu_fk is the forced value k^{-p(n-1)} sum -mu_cone(xi_i, k), positive because the cone
    values are negative; its magnitude grows with k. gradient_l1_fk is kept for the tau report
    and is not written to the CSV.
    """

    k: int
    N: int
    nu_fk: float
    sup_norm_fk: float
    lip_est_fk: float
    d_tau_to_zero: float
    tie_count: int
    gradient_l1_fk: float = 0.0

    def as_row(self):
        return [self.k, self.N, self.nu_fk, self.sup_norm_fk, self.lip_est_fk,
                self.d_tau_to_zero, self.tie_count]


def witness_fields(cfg: SweepConfig):
    """(k, packing, f_k) for every k whose packing is nonempty."""
    out = []
    for k in cfg.k_values:
        try:
            points = cap_packing(cfg.delta, epsilon_for(k), cfg.n)
        except EmptyPacking:
            logger.debug("k=%d skipped: empty packing", k)
            continue
        out.append((k, points, f_k_field(k, points, cfg.p)))
    return out


def sweep_record(k, points, f, cfg: SweepConfig, grid):
    if not supports_disjoint(k):
        raise ValueError(f"packing supports overlap at k={k}")
    norms = zero_norms(f, grid)
    return SweepRecord(
        k=k,
        N=len(points),
        nu_fk=nu_fk(k, points, cfg.p, cfg.n),
        sup_norm_fk=norms.sup_norm,
        lip_est_fk=norms.lip_est,
        d_tau_to_zero=norms.d_tau,
        tie_count=norms.lip_ties + norms.gradient_ties,
        gradient_l1_fk=norms.gradient_l1,
    )


def sweep(cfg: SweepConfig, grid, max_workers=1, progress=False) -> List[SweepRecord]:
    """One record per k with a nonempty packing, in increasing k."""
    tasks = [
        (k, lambda k=k, points=points, f=f: sweep_record(k, points, f, cfg, grid))
        for k, points, f in witness_fields(cfg)
    ]
    return run_parallel(tasks, max_workers, progress, "k")


_COLUMN_ATTRIBUTES = {
    "nu": "nu_fk",
    "nu_fk": "nu_fk",
    "sup_norm": "sup_norm_fk",
    "lip_est": "lip_est_fk",
    "d_tau": "d_tau_to_zero",
    "N": "N",
}


def fit_exponent(records: Sequence[SweepRecord], column, fraction=0.5):
    """Least-squares slope of log|column| against log k over the largest share of k values."""
    attribute = _COLUMN_ATTRIBUTES.get(column, column)
    ordered = sorted(records, key=lambda r: r.k)
    keep = max(2, int(np.ceil(len(ordered) * fraction)))
    tail = ordered[-keep:]
    if len(tail) < 2:
        raise ValueError("fit_exponent needs at least two records")
    logk = np.log([r.k for r in tail])
    logv = np.log(np.abs([getattr(r, attribute) for r in tail]))
    return float(np.polyfit(logk, logv, 1)[0])


def witness_tau_report(
    cfg: SweepConfig,
    grid,
    tols: Optional[TauTolerances] = None,
    records: Optional[Sequence[SweepRecord]] = None,
):
    """tau-convergence of (f_k) to the zero field, from sweep records.

    Pass the records of a finished sweep to avoid evaluating every f_k again.
    """
    if records is None:
        records = sweep(cfg, grid)
    ordered = sorted(records, key=lambda r: r.k)
    return tau_report(
        [r.sup_norm_fk for r in ordered],
        [r.gradient_l1_fk for r in ordered],
        [r.lip_est_fk for r in ordered],
        sum(r.tie_count for r in ordered),
        tols,
    )


def write_sweep_csv(records, path, grid_spec, seed):
    write_csv(path, SWEEP_COLUMNS, [r.as_row() for r in records], {"grid": grid_spec, "seed": seed})
