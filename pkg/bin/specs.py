"""
JSON input specs for fields, bodies, densities and valuations.

Every spec is an object with a "kind" key:

    fields      const {n, value} | linear {v} | disk_support {xi, lambda} | scale {factor, child}
                sum {terms} | min {children} | max {children} | gl {g, child}
                polynomial {n, terms: [{exponents, coefficient}]} | support {body}
    bodies      polytope {vertices} | ball {radius, n} | disk {xi, lambda} | cone {xi, lambda}
                cone_polytope {xi, lambda, rim}
    densities   const {n, value} | coordinate {n, axis} | zonal {n} | triple | polynomial {...}
    matrices    even {n} | even_printed {n} | identity {n} | zero {n} | odd {psi}
    valuations  theta1 {phi} | theta2 {density} | rotinv {c: [c0, c1, c2]} | hess_s2 {psi}
                area {n}

Complex coefficients are written as [re, im].
"""

import json

import numpy as np

from bin.errors import InputSpecError
from bin.geometry import bodies
from bin.geometry import fields as fl
from bin.valuations import densities as dn
from bin.valuations import functionals as fn


def load_json(path):
    try:
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise InputSpecError(f"spec file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputSpecError(f"{path} is not valid JSON: {exc}") from exc


def _get(spec, key, where):
    if not isinstance(spec, dict):
        raise InputSpecError(f"{where}: expected a JSON object, got {type(spec).__name__}")
    if key not in spec:
        raise InputSpecError(f"{where}: missing key {key!r}")
    return spec[key]


def _kind(spec, where):
    return str(_get(spec, "kind", where)).lower()


def _number(value, key):
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise InputSpecError(f"key {key!r}: expected a number, got {value!r}") from exc


def _vector(value, key):
    try:
        out = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputSpecError(f"key {key!r}: expected an array of numbers") from exc
    if out.ndim != 1:
        raise InputSpecError(f"key {key!r}: expected a vector")
    return out


def _unit(value, key):
    v = _vector(value, key)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise InputSpecError(f"key {key!r}: zero vector")
    return v / norm


def _terms(spec, where):
    terms = {}
    for item in _get(spec, "terms", where):
        exponents = tuple(int(e) for e in _get(item, "exponents", where))
        terms[exponents] = terms.get(exponents, 0.0) + float(_get(item, "coefficient", where))
    return terms


def _disk_args(spec, where):
    return _unit(_get(spec, "xi", where), "xi"), float(_get(spec, "lambda", where))


def _wrap(where, build):
    try:
        return build()
    except InputSpecError:
        raise
    except (ValueError, TypeError) as exc:
        raise InputSpecError(f"{where}: {exc}") from exc


def parse_body(spec, where="body"):
    kind = _kind(spec, where)

    def build():
        if kind == "polytope":
            return bodies.Polytope(np.asarray(_get(spec, "vertices", where), dtype=float))
        if kind == "ball":
            return bodies.Ball(float(_get(spec, "radius", where)), int(spec.get("n", 3)))
        if kind == "disk":
            return bodies.Disk(*_disk_args(spec, where))
        if kind == "cone":
            return bodies.Cone(*_disk_args(spec, where))
        if kind == "cone_polytope":
            return bodies.cone_polytope(
                *_disk_args(spec, where),
                int(_get(spec, "rim", where)),
            )
        raise InputSpecError(f"{where}: unknown body kind {kind!r}")

    return _wrap(where, build)


def parse_field(spec, where="field"):
    kind = _kind(spec, where)

    def build():
        if kind == "const":
            return fl.Const(int(_get(spec, "n", where)), float(spec.get("value", 0.0)))
        if kind == "linear":
            return fl.Linear(_vector(_get(spec, "v", where), "v"))
        if kind in ("disk_support", "disk"):
            return fl.DiskSupport(*_disk_args(spec, where))
        if kind == "scale":
            child = parse_field(_get(spec, "child", where), f"{where}.child")
            return fl.Scale(float(_get(spec, "factor", where)), child)
        if kind == "sum":
            terms = _get(spec, "terms", where)
            return fl.Sum(tuple(parse_field(t, f"{where}.terms[{i}]") for i, t in enumerate(terms)))
        if kind in ("min", "max"):
            children = [
                parse_field(c, f"{where}.children[{i}]")
                for i, c in enumerate(_get(spec, "children", where))
            ]
            return fl.meet(children) if kind == "min" else fl.join(children)
        if kind == "gl":
            child = parse_field(_get(spec, "child", where), f"{where}.child")
            return fl.gl_act(np.asarray(_get(spec, "g", where), dtype=float), child)
        if kind == "polynomial":
            return fl.polynomial_field(int(_get(spec, "n", where)), _terms(spec, where))
        if kind == "support":
            return bodies.support_field(parse_body(_get(spec, "body", where), f"{where}.body"))
        raise InputSpecError(f"{where}: unknown field kind {kind!r}")

    return _wrap(where, build)


def parse_scalar_density(spec, where="density"):
    kind = _kind(spec, where)

    def build():
        if kind == "const":
            n = int(_get(spec, "n", where))
            return dn.constant_density(n, _number(spec.get("value", 1.0), "value"))
        if kind == "coordinate":
            return dn.coordinate_density(int(_get(spec, "n", where)), int(spec.get("axis", 0)))
        if kind == "zonal":
            return dn.zonal_density(int(_get(spec, "n", where)))
        if kind == "triple":
            return dn.triple_product_density()
        if kind == "polynomial":
            return dn.polynomial_density(
                int(_get(spec, "n", where)),
                _terms(spec, where),
                _number(spec.get("coefficient", 1.0), "coefficient"),
                str(spec.get("label", "poly")),
            )
        raise InputSpecError(f"{where}: unknown density kind {kind!r}")

    return _wrap(where, build)


def parse_matrix_density(spec, where="density"):
    kind = _kind(spec, where)
    builders = {
        "even": dn.even_density,
        "even_printed": dn.even_density_as_printed,
        "identity": dn.identity_density,
        "zero": dn.zero_density,
    }

    def build():
        if kind in builders:
            return builders[kind](int(_get(spec, "n", where)))
        if kind == "odd":
            return dn.odd_density(parse_scalar_density(_get(spec, "psi", where), f"{where}.psi"))
        raise InputSpecError(f"{where}: unknown matrix density kind {kind!r}")

    return _wrap(where, build)


def parse_valuation(spec, where="valuation"):
    kind = _kind(spec, where)

    def build():
        if kind == "theta1":
            return fn.Theta1(parse_scalar_density(_get(spec, "phi", where), f"{where}.phi"))
        if kind == "theta2":
            return fn.Theta2(parse_matrix_density(_get(spec, "density", where), f"{where}.density"))
        if kind == "rotinv":
            c = _get(spec, "c", where)
            if len(c) != 3:
                raise InputSpecError(f"{where}: key 'c' needs three coefficients")
            return fn.RotInv(*(_number(value, "c") for value in c))
        if kind == "hess_s2":
            return fn.HessS2(parse_scalar_density(_get(spec, "psi", where), f"{where}.psi"))
        if kind == "area":
            return fn.AreaIntegral(ambient_dim=int(spec.get("n", 3)))
        raise InputSpecError(f"{where}: unknown valuation kind {kind!r}")

    return _wrap(where, build)
