#!/usr/bin/env python3
"""Tests for the JSON input specs."""
import json
import os
import sys
import tempfile

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from bin.errors import InputSpecError
from bin.geometry import bodies
from bin.geometry.fields import Max, Min, Smooth, Sum
from bin.geometry.quadrature import build_grid
from bin.specs import load_json, parse_body, parse_field, parse_valuation
from bin.valuations.functionals import AreaIntegral, HessS2, RotInv, Theta1, Theta2

EXAMPLES = os.path.join(os.path.dirname(__file__), "..", "config", "examples")


def example(name):
    return load_json(os.path.join(EXAMPLES, name))


def test_examples_parse():
    assert isinstance(parse_valuation(example("rotinv.json")), RotInv)
    assert isinstance(parse_valuation(example("theta2_even.json")), Theta2)
    assert isinstance(parse_valuation(example("hess_s2_triple.json")), HessS2)
    assert isinstance(parse_valuation(example("area_x1_cubed.json")), AreaIntegral)
    assert isinstance(parse_field(example("disk_bump.json")), Min)
    assert isinstance(parse_body(example("cone.json")), bodies.Cone)
    assert isinstance(parse_body(example("cube.json")), bodies.Polytope)


def test_rotinv_example_on_constant_one():
    mu = parse_valuation(example("rotinv.json"))
    f = parse_field(example("const1.json"))
    assert mu.evaluate(f, build_grid(3, 8, "gauss")) == pytest.approx(8 * np.pi)


def test_field_kinds():
    spec = {
        "kind": "sum",
        "terms": [
            {"kind": "linear", "v": [1, 0, 0]},
            {"kind": "scale", "factor": 2.0, "child": {"kind": "const", "n": 3, "value": 1}},
            {"kind": "polynomial", "n": 3, "terms": [{"exponents": [0, 0, 2], "coefficient": 1}]},
            {"kind": "gl", "g": [[2, 0, 0], [0, 1, 0], [0, 0, 1]],
             "child": {"kind": "const", "n": 3, "value": 1}},
        ],
    }
    f = parse_field(spec)
    assert isinstance(f, Sum)
    x = np.array([[0.6, 0.0, 0.8]])
    expected = 0.6 + 2.0 + 0.64 + np.linalg.norm(x @ np.diag([2.0, 1.0, 1.0]))
    assert f.values(x)[0] == pytest.approx(expected)


def test_support_field_and_max():
    h = parse_field({"kind": "support", "body": {"kind": "ball", "radius": 2.0}})
    assert h.values(np.eye(3))[0] == pytest.approx(2.0)
    f = parse_field({"kind": "max", "children": [{"kind": "linear", "v": [1, 0, 0]},
                                                  {"kind": "linear", "v": [-1, 0, 0]}]})
    assert isinstance(f, Max)


def test_polynomial_field_is_smooth():
    f = parse_field(
        {"kind": "polynomial", "n": 3, "terms": [{"exponents": [1, 1, 1], "coefficient": 2}]}
    )
    assert isinstance(f, Smooth)
    assert f.is_smooth()


def test_disk_support_kind():
    document = json.loads(
        '{"kind": "min", "children": ['
        '{"kind": "const", "n": 3, "value": 0.0},'
        '{"kind": "disk_support", "xi": [0.0, 0.0, 1.0], "lambda": 2.0}]}'
    )
    f = parse_field(document)
    assert isinstance(f, Min)
    assert f.values(np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])).tolist() == [-1.0, 0.0]
    alias = parse_field({"kind": "disk", "xi": [0.0, 0.0, 1.0], "lambda": 2.0})
    assert alias.values(np.array([[1.0, 0.0, 0.0]]))[0] == pytest.approx(2.0)
    assert isinstance(parse_field(example("disk_bump.json")), Min)


def test_disk_centre_is_normalised():
    f = parse_field({"kind": "disk", "xi": [0, 0, 2], "lambda": 3})
    assert np.allclose(f.xi, [0.0, 0.0, 1.0])


def test_complex_coefficients():
    mu = parse_valuation({"kind": "rotinv", "c": [[1, 2], 0, 0]})
    assert mu.c0 == 1 + 2j
    theta1 = parse_valuation(
        {"kind": "theta1", "phi": {"kind": "const", "n": 3, "value": [0, 1]}}
    )
    assert isinstance(theta1, Theta1)
    assert theta1.phi.coefficient == 1j


def test_odd_matrix_density():
    mu = parse_valuation({"kind": "theta2", "density": {"kind": "odd", "psi": {"kind": "triple"}}})
    assert mu.parity == -1


@pytest.mark.parametrize(
    "spec",
    [
        {"n": 3},
        {"kind": "pyramid"},
        {"kind": "const"},
        {"kind": "linear", "v": [[1, 0], [0, 1]]},
        {"kind": "disk", "xi": [0, 0, 0], "lambda": 2},
        {"kind": "disk", "xi": [0, 0, 1], "lambda": 0.5},
        {"kind": "min", "children": [{"kind": "const", "n": 3}, {"kind": "const", "n": 4}]},
        {"kind": "gl", "g": [[1, 0], [0, 1]], "child": {"kind": "const", "n": 3}},
        [1, 2, 3],
    ],
)
def test_bad_field_specs(spec):
    with pytest.raises(InputSpecError):
        parse_field(spec)


@pytest.mark.parametrize(
    "spec",
    [
        {"kind": "rotinv", "c": [1, 2]},
        {"kind": "rotinv", "c": ["a", 0, 0]},
        {"kind": "theta2", "density": {"kind": "blue", "n": 3}},
        {"kind": "hess_s2", "psi": {"kind": "zonal"}},
    ],
)
def test_bad_valuation_specs(spec):
    with pytest.raises(InputSpecError):
        parse_valuation(spec)


def test_bad_body_specs():
    with pytest.raises(InputSpecError):
        parse_body({"kind": "ball", "radius": -1})
    with pytest.raises(InputSpecError):
        parse_body({"kind": "cone", "xi": [1, 0, 0]})


def test_load_json_errors():
    with pytest.raises(InputSpecError):
        load_json("/nonexistent/spec.json")
    with tempfile.NamedTemporaryFile(mode="w", suffix=".json", delete=False) as f:
        f.write("{not json")
        path = f.name
    try:
        with pytest.raises(InputSpecError):
            load_json(path)
    finally:
        os.remove(path)


def test_load_json_round_trip():
    with tempfile.NamedTemporaryFile(mode="w", suffix=".json", delete=False) as f:
        json.dump({"kind": "const", "n": 3, "value": 2}, f)
        path = f.name
    try:
        assert parse_field(load_json(path)).value == 2.0
    finally:
        os.remove(path)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
