#!/usr/bin/env python3
"""Tests for the cone estimate, the cap packing and the divergence sweep."""
import os
import sys
import tempfile

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from bin.counterexample.construction import (
    admissible_p_interval,
    cap_packing,
    cone_quadrature_value,
    default_p,
    estimate_bound,
    epsilon_for,
    f_k_field,
    find_delta,
    mu_cone,
    nu_fk,
    sample_cap,
    scaling_check,
    support_radius,
    supports_disjoint,
    verify_estimate,
)
from bin.counterexample.sweep import (
    SWEEP_COLUMNS,
    SweepConfig,
    SweepRecord,
    fit_exponent,
    powers_of_two,
    sweep,
    witness_fields,
    witness_tau_report,
    write_sweep_csv,
)
from bin.errors import EmptyPacking
from bin.geometry.bodies import Polytope
from bin.geometry.fields import (
    Const,
    DiskSupport,
    lip_est,
    random_unit_vectors,
    sup_norm,
    tau_check,
)
from bin.geometry.quadrature import parse_grid_spec

E1 = np.array([1.0, 0.0, 0.0])


def test_admissible_p_interval():
    assert admissible_p_interval(4) == pytest.approx((1.0, 4.0 / 3.0))
    assert default_p(4) == pytest.approx(7.0 / 6.0)


def test_mu_cone_closed_form():
    assert mu_cone(E1, 2.0) == pytest.approx(-0.8 * np.pi)
    assert mu_cone(np.array([0.0, 0.0, 1.0]), 2.0) == pytest.approx(0.0)


@pytest.mark.parametrize("n", [3, 4])
def test_mu_cone_matches_sheet_quadrature(n):
    rng = np.random.default_rng(n)
    for xi in random_unit_vectors(rng, 3, n):
        for lam in (1.0, 2.5, 7.0):
            assert cone_quadrature_value(xi, lam, n, sheet_resolution=16) == pytest.approx(
                mu_cone(xi, lam, n), rel=1e-10, abs=1e-12
            )


def test_mu_cone_is_vectorised():
    xis = random_unit_vectors(np.random.default_rng(0), 5, 4)
    values = mu_cone(xis, 3.0)
    assert values.shape == (5,)
    assert values[2] == pytest.approx(mu_cone(xis[2], 3.0))


def test_find_delta():
    assert find_delta(4) == pytest.approx(0.917)
    assert find_delta(5) == pytest.approx(0.907)
    with pytest.raises(ValueError):
        find_delta(3)


def test_sample_cap():
    samples = sample_cap(0.9, 200, 4, np.random.default_rng(1))
    assert samples.shape == (200, 4)
    assert np.allclose(np.linalg.norm(samples, axis=1), 1.0)
    assert samples[0, 0] == pytest.approx(0.9)
    assert np.all(samples[:, 0] >= 0.9)


@pytest.mark.parametrize("n", [4, 5])
def test_estimate_holds_above_delta(n):
    delta = find_delta(n)
    samples = sample_cap(delta, 500, n, np.random.default_rng(2))
    report = verify_estimate(delta, [2.0, 4.0, 8.0, 16.0, 64.0], samples, n)
    assert report.passed
    assert report.samples == 5 * 500
    assert report.worst_margin >= 0.0
    assert report.worst_ratio >= 1.0


def test_estimate_fails_at_half():
    samples = sample_cap(0.5, 100, 4, np.random.default_rng(3))
    report = verify_estimate(0.5, [2.0, 4.0], samples, 4)
    assert not report.passed
    assert report.violations > 0


def test_verify_estimate_rejects_bad_samples():
    samples = sample_cap(0.95, 10, 4, np.random.default_rng(4))
    with pytest.raises(ValueError):
        verify_estimate(0.95, [1.5], samples, 4)
    with pytest.raises(ValueError):
        verify_estimate(0.99, [2.0], samples, 4)


@pytest.mark.parametrize("k,side", [(32, 1), (64, 3), (128, 6), (256, 12), (512, 25), (1024, 51)])
def test_cap_packing_sizes(k, side):
    points = cap_packing(0.917, epsilon_for(k), 4)
    assert points.shape == (side**3, 4)
    assert np.all(points[:, 0] >= 0.917)
    assert np.allclose(np.linalg.norm(points, axis=1), 1.0)


def test_cap_packing_spacing():
    eps = epsilon_for(128)
    points = cap_packing(0.917, eps, 4)
    gaps = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    np.fill_diagonal(gaps, np.inf)
    assert gaps.min() >= eps - 1e-12


def test_empty_packing():
    with pytest.raises(EmptyPacking):
        cap_packing(0.917, epsilon_for(2), 4)


def test_supports_are_disjoint():
    assert all(supports_disjoint(k) for k in (2, 32, 1024))


@pytest.mark.parametrize("k", [2, 8, 100])
def test_disk_support_is_nonnegative_outside_support_radius(k):
    r = support_radius(k)
    theta = 2.0 * np.arcsin(r / 2.0)
    x = np.array([[np.cos(theta), np.sin(theta), 0.0]])
    assert DiskSupport(np.array([1.0, 0.0, 0.0]), float(k)).values(x)[0] >= 0.0


def test_estimate_bound():
    assert estimate_bound(5.0, 3) == pytest.approx(-np.pi / 2)
    assert estimate_bound(2.0, 4) == pytest.approx(-4 * np.pi / 3)


def test_f_k_field_and_nu():
    k, p = 64, default_p(4)
    points = cap_packing(find_delta(4), epsilon_for(k), 4)
    f = f_k_field(k, points, p)
    grid = parse_grid_spec("mc:500:seed0", 4)
    assert sup_norm(f, grid) == pytest.approx(k ** (-p))
    value = nu_fk(k, points, p)
    assert value == pytest.approx(-(k ** (-3 * p)) * np.sum(mu_cone(points, float(k))))
    assert value > 0


def test_nu_grows_with_k():
    p = default_p(4)
    delta = find_delta(4)
    values = [nu_fk(k, cap_packing(delta, epsilon_for(k), 4), p) for k in powers_of_two(32, 1024)]
    assert all(b > a > 0 for a, b in zip(values, values[1:]))


def test_scaling_check():
    cube = Polytope(np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)]) - 0.3)
    assert scaling_check(cube, 2.0).passed


def test_powers_of_two():
    assert powers_of_two(32, 256) == [32, 64, 128, 256]
    assert powers_of_two(32, 31) == []


def test_sweep_config_defaults():
    cfg = SweepConfig()
    assert cfg.delta == pytest.approx(0.917)
    assert cfg.p == pytest.approx(7.0 / 6.0)
    assert cfg.k_values == (32, 64, 128, 256, 512, 1024)


@pytest.mark.parametrize(
    "kwargs", [{"n": 3}, {"p": 1.0}, {"p": 1.5}, {"delta": 0.4}, {"k_values": []}]
)
def test_sweep_config_validation(kwargs):
    with pytest.raises(ValueError):
        SweepConfig(**kwargs)


def test_fit_exponent():
    records = [
        SweepRecord(k, 1, 3.0 * k**0.5, 2.0 * k ** (-1.2), 1.0, 1.0, 0) for k in (32, 64, 128, 256)
    ]
    assert fit_exponent(records, "nu") == pytest.approx(0.5)
    assert fit_exponent(records, "sup_norm", fraction=1.0) == pytest.approx(-1.2)
    with pytest.raises(ValueError):
        fit_exponent(records[:1], "nu")


def test_witness_tau_report_reuses_sweep_records():
    cfg = SweepConfig(k_values=[32, 64])
    grid = parse_grid_spec("mc:300:seed0", 4)
    records = sweep(cfg, grid)
    assert all(r.d_tau_to_zero == pytest.approx(r.sup_norm_fk + r.gradient_l1_fk) for r in records)
    assert records[1].lip_est_fk == pytest.approx(lip_est(witness_fields(cfg)[1][2], grid))

    reused = witness_tau_report(cfg, grid, records=list(reversed(records)))
    direct = tau_check([f for _, _, f in witness_fields(cfg)], Const(4), grid)
    assert reused.uniform_sup_deviation == pytest.approx(direct.uniform_sup_deviation)
    assert reused.gradient_l1_deviation == pytest.approx(direct.gradient_l1_deviation, rel=1e-9)
    assert reused.gradient_linf_bound == pytest.approx(direct.gradient_linf_bound)
    assert reused.verdict == direct.verdict


@pytest.mark.slow
def test_sweep_on_a_small_grid():
    cfg = SweepConfig(k_values=powers_of_two(32, 256))
    grid = parse_grid_spec("mc:2000:seed0", 4)
    records = sweep(cfg, grid, max_workers=2)
    assert [r.k for r in records] == [32, 64, 128, 256]
    assert [r.N for r in records] == [1, 27, 216, 1728]
    assert all(b.nu_fk > a.nu_fk > 0 for a, b in zip(records, records[1:]))
    assert all(b.sup_norm_fk < a.sup_norm_fk for a, b in zip(records, records[1:]))
    assert fit_exponent(records, "sup_norm", fraction=1.0) == pytest.approx(-cfg.p, abs=1e-6)

    tau = witness_tau_report(cfg, grid)
    assert tau.uniform_sup_deviation == pytest.approx(256 ** (-cfg.p))

    with tempfile.TemporaryDirectory() as temp_dir:
        path = os.path.join(temp_dir, "sweep.csv")
        write_sweep_csv(records, path, grid.spec, 0)
        with open(path, "r") as f:
            lines = f.read().splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert len(lines) == 1 + 4 + 1
    assert lines[-1].endswith("grid=mc:2000:seed0,seed=0")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
