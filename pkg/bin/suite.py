"""
Acceptance batteries: every invariant the library promises, checked end to end.

Each battery returns CheckReports named `<battery>:<case>`. Negative controls are phrased so
that the report passes when the control fails in the expected way.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from bin.counterexample.construction import (
    cone_quadrature_value,
    find_delta,
    mu_cone,
    sample_cap,
    scaling_check,
    verify_estimate,
)
from bin.counterexample.sweep import (
    SweepConfig,
    fit_exponent,
    powers_of_two,
    sweep,
    witness_tau_report,
)
from bin.geometry import bodies
from bin.geometry.fields import (
    Const,
    Linear,
    TauTolerances,
    bar_grad_nodes,
    gl_act,
    polynomial_field,
    random_smooth_field,
    random_unit_vectors,
)
from bin.geometry.quadrature import PRODUCT_GAUSS, build_grid, parse_grid_spec
from bin.valuations import densities as dn
from bin.valuations.checks import (
    check_dual_invariance,
    check_parity,
    degree_battery,
    invariance_battery,
    make_report,
    pde_battery,
    pde_residual,
    theta2_condition_residual,
    valuation_property_battery,
)
from bin.valuations.functionals import (
    HessS2,
    RotInv,
    Theta1,
    Theta2,
    cubic_test_function,
    hess_s2_eval,
    hessian_trilinear,
    intrinsic_volumes,
    rotinv_eval,
    theta2_eval,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SuiteSettings:
    grid_spec: str = "icosphere:5"
    gauss_order: int = 32
    sweep_grid_spec: str = "mc:1000000:seed0"
    kmin: int = 32
    kmax: int = 1024
    pairs: int = 100
    invariance_cases: int = 50
    seed: int = 0
    max_workers: int = 1
    progress: bool = False
    oracle_rim: int = 4096

    @classmethod
    def quick(cls, **overrides):
        values = dict(
            sweep_grid_spec="mc:200000:seed0",
            kmax=256,
            pairs=10,
            invariance_cases=10,
            oracle_rim=1024,
        )
        values.update(overrides)
        return cls(**values)


class _Context:
    def __init__(self, settings: SuiteSettings):
        self.settings = settings
        self.grid = parse_grid_spec(settings.grid_spec, 3)
        self.gauss = build_grid(3, settings.gauss_order, PRODUCT_GAUSS)
        self.rng = np.random.default_rng(settings.seed)

    def smooth_fields(self, count, n=3):
        return [random_smooth_field(n, self.rng) for _ in range(count)]


def _prefixed(battery, reports):
    return [
        make_report(f"{battery}:{r.case}", r.residual, r.tol, r.scale) for r in reports
    ]


def cone_measure_battery(ctx):
    e1 = np.array([1.0, 0.0, 0.0])
    measure = bodies.cone_area_measure(e1, 1.0, 3)
    value = bodies.measure_pair(measure, cubic_test_function).real
    oracle = bodies.area_measure(bodies.cone_polytope(e1, 1.0, ctx.settings.oracle_rim))
    oracle_value = bodies.measure_pair(oracle, cubic_test_function).real
    lateral = measure.sheets[0]
    _, weights = bodies.sheet_nodes(lateral)
    lateral_mass = lateral.coefficient * float(np.sum(weights))
    printed = bodies.cone_area_measure(e1, 1.0, 3, as_printed=True)
    return [
        make_report("cone:x1^3", abs(value + math.pi / 2), 1e-6),
        make_report("cone:polytope-oracle", abs(oracle_value - value), 5e-3),
        make_report("cone:lateral-mass", abs(lateral_mass - math.sqrt(2) * math.pi), 1e-10),
        make_report(
            "cone:closedness", np.linalg.norm(bodies.measure_resultant(measure)), 1e-10
        ),
        make_report(
            "control:printed-coefficient-not-closed",
            float(np.linalg.norm(bodies.measure_resultant(printed)) < 1e-3),
            0.0,
        ),
    ]


def closedness_battery(ctx):
    tetra = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    cube = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
    xi = random_unit_vectors(ctx.rng, 1, 3)[0]
    measures = {
        "cube": bodies.polytope_area_measure(cube),
        "tetrahedron": bodies.polytope_area_measure(tetra),
        "disk": bodies.disk_area_measure(xi, 2.0),
        "cone": bodies.cone_area_measure(xi, 2.0),
        "ball": bodies.ball_area_measure(1.5),
    }
    return [
        make_report(
            f"closed:{name}",
            np.linalg.norm(bodies.measure_resultant(S, grid=ctx.grid)),
            1e-8,
        )
        for name, S in measures.items()
    ]


def estimate_battery(ctx):
    n = 4
    delta = find_delta(n)
    lams = [2.0, 4.0, 8.0, 16.0]
    good = verify_estimate(delta, lams, sample_cap(delta, 500, n, ctx.rng), n)
    control = verify_estimate(0.8, lams, sample_cap(0.8, 500, n, ctx.rng), n)
    return [
        make_report(f"estimate:delta={delta}", good.violations, 0.0),
        make_report("control:estimate-delta=0.8-fails", float(control.passed), 0.0),
    ]


def mu_cone_oracle_battery(ctx):
    reports = []
    for i in range(20):
        n = 3 if i % 2 == 0 else 4
        first = ctx.rng.uniform(0.6, 1.0)
        direction = random_unit_vectors(ctx.rng, 1, n - 1)[0]
        xi = np.concatenate([[first], math.sqrt(1.0 - first**2) * direction])
        lam = ctx.rng.uniform(1.0, 8.0)
        exact = mu_cone(xi, lam, n)
        oracle = cone_quadrature_value(xi, lam, n, sheet_resolution=24 if n == 4 else 64)
        reports.append(make_report(f"mu-cone:{i:02d}", abs(exact - oracle) / abs(exact), 1e-3))
    return reports


def sweep_battery(ctx):
    settings = ctx.settings
    k_values = powers_of_two(settings.kmin, settings.kmax)
    cfg = SweepConfig(n=4, k_values=k_values, seed=settings.seed)
    grid = parse_grid_spec(settings.sweep_grid_spec, 4)
    records = sweep(cfg, grid, settings.max_workers, settings.progress)
    nu_slope = fit_exponent(records, "nu")
    sup_slope = fit_exponent(records, "sup_norm")
    lip_slope = fit_exponent(records, "lip_est")
    growing = all(b.nu_fk > a.nu_fk > 0 for a, b in zip(records, records[1:]))

    tau = witness_tau_report(cfg, grid, TauTolerances(), records)
    return [
        make_report("sweep:nu-exponent", abs(nu_slope - 0.5), 0.15),
        make_report("sweep:sup-exponent", abs(sup_slope + cfg.p), 0.01),
        make_report("sweep:lip-exponent", abs(lip_slope + (cfg.p - 1.0)), 0.11),
        make_report("sweep:nu-positive-increasing", float(not growing), 0.0),
        make_report("tau:sup", tau.uniform_sup_deviation, 1e-2),
        make_report("tau:gradient-l1", tau.gradient_l1_deviation, 1e-2),
        make_report("tau:lip-bound", tau.gradient_linf_bound, 2.0),
    ]


def _field_valuations(ctx):
    return {
        "theta1": Theta1(dn.zonal_density(3)),
        "theta2": Theta2(dn.even_density(3)),
        "rotinv": RotInv(1.0, 1.0, 1.0),
        "hess_s2": HessS2(dn.triple_product_density()),
    }


def valuation_property_suite(ctx):
    reports = []
    s = ctx.settings
    for name, mu in _field_valuations(ctx).items():
        found = valuation_property_battery(
            mu, ctx.grid, s.pairs, s.seed, 1e-6, s.max_workers, s.progress
        )
        reports += _prefixed(f"valuation:{name}", found)
    return reports


def invariance_suite(ctx):
    s = ctx.settings
    reports = []
    candidates = (("theta2", Theta2(dn.even_density(3))), ("theta1", Theta1(dn.zonal_density(3))))
    for name, mu in candidates:
        found = invariance_battery(mu, ctx.gauss, s.invariance_cases, s.seed, 1e-5, s.max_workers)
        reports += _prefixed(f"invariance:{name}", found)

    negative = check_dual_invariance(
        Theta1(dn.coordinate_density(3)), Const(3, 0.0), np.array([1.0, 0.0, 0.0]), ctx.gauss
    )
    identity = theta2_condition_residual(dn.identity_density(3), ctx.gauss, [Linear(np.eye(3)[0])])
    reports.append(
        make_report("control:theta1-x1", abs(negative.residual - 4.0 * math.pi / 3.0), 1e-3)
    )
    reports.append(make_report("control:identity-density", abs(identity - 4.0 * math.pi), 1e-3))
    reports.append(make_report("control:identity-fails", float(not identity > 1e-3), 0.0))
    printed = check_dual_invariance(
        Theta2(dn.even_density_as_printed(3)), Const(3, 1.0), np.array([0.3, -0.2, 0.5]), ctx.gauss
    )
    reports.append(make_report("control:printed-even-density-fails", float(printed.passed), 0.0))
    return reports


def identity_suite(ctx):
    reports = []
    even = dn.even_density(3)
    for i, f in enumerate(ctx.smooth_fields(20)):
        lhs = theta2_eval(even, f, ctx.gauss)
        rhs = rotinv_eval(0, 0, 1, f, ctx.gauss)
        relative = abs(lhs - rhs) / max(abs(rhs), 1e-300)
        reports.append(make_report(f"even-identity:{i:02d}", relative, 1e-6))
    radius = 1.7
    value = theta2_eval(even, Const(3, radius), ctx.gauss).real
    expected = 8.0 * math.pi * radius**2
    reports.append(make_report("even-identity:ball", abs(value - expected), 1e-9, value))
    return reports


def odd_suite(ctx):
    psi = dn.triple_product_density()
    odd = dn.odd_density(psi)
    reports = []
    for i, f in enumerate(ctx.smooth_fields(10)):
        lhs = theta2_eval(odd, f, ctx.gauss)
        rhs = hess_s2_eval(psi, f, ctx.gauss)
        reports.append(make_report(f"odd-identity:{i:02d}", abs(lhs - rhs), 1e-5, abs(rhs)))

    body = Const(3, 1.0) + polynomial_field(3, {(1, 1, 1): 0.2})
    witness = abs(hess_s2_eval(psi, body, ctx.gauss))
    reports.append(make_report("odd-witness:nonzero", float(witness <= 1e-6), 0.0))
    X = random_unit_vectors(ctx.rng, 50, 3)
    reports.append(make_report("odd-witness:parity", np.max(np.abs(odd(-X) + odd(X))), 1e-12))
    return reports


def degree_suite(ctx):
    s = ctx.settings
    reports = []
    for name, mu in (
        ("rotinv", RotInv(1.0, 1.0, 1.0)),
        ("theta1", Theta1(dn.zonal_density(3))),
        ("theta2", Theta2(dn.even_density(3))),
    ):
        reports += _prefixed(f"degree:{name}", degree_battery(mu, ctx.gauss, 10, s.seed, 1e-8))
    return reports


def parity_suite(ctx):
    reports = []
    candidates = (
        ("even", Theta2(dn.even_density(3))),
        ("odd", Theta2(dn.odd_density(dn.triple_product_density()))),
    )
    for name, mu in candidates:
        for i, f in enumerate(ctx.smooth_fields(5)):
            reports.append(check_parity(mu, f, ctx.gauss, 1e-8, f"parity:{name}:{i}"))
    return reports


def _random_matrix(rng):
    return rng.standard_normal((3, 3)) + 2.0 * np.eye(3)


def equivariance_suite(ctx):
    worst_grad = 0.0
    for _ in range(100):
        g = _random_matrix(ctx.rng)
        f = random_smooth_field(3, ctx.rng)
        x = random_unit_vectors(ctx.rng, 1, 3)
        acted, _ = bar_grad_nodes(gl_act(g, f), x)
        y = x @ g
        base, _ = bar_grad_nodes(f, y / np.linalg.norm(y))
        worst_grad = max(worst_grad, float(np.max(np.abs(acted[0] - g @ base[0]))))

    worst_support = 0.0
    for _ in range(10):
        g = _random_matrix(ctx.rng)
        P = bodies.Polytope(ctx.rng.standard_normal((8, 3)))
        X = random_unit_vectors(ctx.rng, 10, 3)
        direct = bodies.support_field(bodies.transform_polytope(g, P)).values(X)
        acted = bodies.transformed_support(g, P).values(X)
        worst_support = max(worst_support, float(np.max(np.abs(direct - acted))))
    return [
        make_report("equivariance:bar-gradient", worst_grad, 1e-10),
        make_report("equivariance:support", worst_support, 1e-10),
    ]


def pde_suite(ctx):
    reports = _prefixed("pde:even", pde_battery(dn.even_density(3), 3, 50, ctx.settings.seed))
    x = np.array([0.0, 1.0, 0.0])
    identity = pde_residual(dn.identity_density(3), x)
    reports.append(make_report("control:pde-identity", abs(identity[1] - 3.0), 1e-6))
    return reports


def geometry_suite(ctx):
    reports = []
    tetra = bodies.Polytope([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]])
    for t in (0.5, 2.0, 3.0):
        reports.append(scaling_check(tetra, t))

    radius = 1.3
    _, v1, v2 = intrinsic_volumes(Const(3, radius), ctx.gauss)
    reports.append(make_report("intrinsic:ball-V1", abs(v1 - 4.0 * radius), 1e-9))
    reports.append(make_report("intrinsic:ball-V2", abs(v2 - 2.0 * math.pi * radius**2), 1e-9))

    psi, f, h = ctx.smooth_fields(3)
    forms = [
        hessian_trilinear(a, b, c, ctx.gauss)
        for a, b, c in ((psi, f, h), (f, psi, h), (h, f, psi), (psi, h, f))
    ]
    spread = max(forms) - min(forms)
    reports.append(make_report("trilinear:symmetry", spread / max(abs(forms[0]), 1e-300), 1e-6))
    return reports


BATTERIES = (
    ("cone", cone_measure_battery),
    ("closedness", closedness_battery),
    ("estimate", estimate_battery),
    ("mu-cone", mu_cone_oracle_battery),
    ("sweep", sweep_battery),
    ("valuation", valuation_property_suite),
    ("invariance", invariance_suite),
    ("identity", identity_suite),
    ("odd", odd_suite),
    ("degree", degree_suite),
    ("parity", parity_suite),
    ("equivariance", equivariance_suite),
    ("pde", pde_suite),
    ("geometry", geometry_suite),
)


def run_suite(settings: SuiteSettings, only=None):
    """Run every battery (or those named in `only`) and return all reports in battery order."""
    ctx = _Context(settings)
    reports = []
    for name, battery in BATTERIES:
        if only and name not in only:
            continue
        logger.info("Running battery %s", name)
        found = battery(ctx)
        failed = sum(not r.passed for r in found)
        if failed:
            logger.warning("battery %s: %d of %d case(s) failed", name, failed, len(found))
        reports += found
    return reports
