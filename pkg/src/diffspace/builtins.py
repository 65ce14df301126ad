"""Built-in scenarios reproducing the worked examples of the theory."""

from __future__ import annotations

import copy

X = "(var 1)"
Y = "(var 2)"


def _rationals() -> dict:
    forms = {
        "x_dx": {"kind": "point", "degree": 1, "terms": [{"coeff": X, "index": [1]}]},
        "dx": {"kind": "point", "degree": 1, "terms": [{"coeff": "1", "index": [1]}]},
        "sin_dx": {"kind": "point", "degree": 1, "terms": [{"coeff": f"(sin {X})", "index": [1]}]},
        "exp_dx": {"kind": "point", "degree": 1,
                   "terms": [{"coeff": f"(exp (mul 3 {X}))", "index": [1]}]},
    }
    constant = ["c_half", "c_quarter", "c_zero", "c_rational_expr"]
    nonconstant = ["c_identity", "c_square", "c_affine"]
    tasks = [{"id": f"validate-{c}", "type": "validate", "cube": c} for c in constant]
    tasks += [{"id": f"validate-{c}", "type": "validate", "cube": c, "expect_fail": True} for c in nonconstant]
    tasks += [
        {"id": f"integrate-{c}-{f}", "type": "integrate", "cube": c, "form": f, "expect": 0.0, "tol": 0}
        for c in constant for f in forms
    ]
    return {
        "name": "rationals",
        "description": "On the rationals only constant maps are cubes, and every form integrates to 0 over them.",
        "anchor": "Rationals example: on (Q, C^inf(R)_Q) every cube is constant, so every integral vanishes",
        "space": {"dim": 1, "membership": {"kind": "rational"}, "generators": [X]},
        "domains": {"I": {"kind": "full", "dim": 1}},
        "cubes": {
            "c_half": {"domain": "I", "map": ["1/2"]},
            "c_quarter": {"domain": "I", "map": ["(const 0.25)"]},
            "c_zero": {"domain": "I", "map": ["0"]},
            "c_rational_expr": {"domain": "I", "map": ["(add (mul (const 0.5) (const 0.5)) (const 1))"]},
            "c_identity": {"domain": "I", "map": [X]},
            "c_square": {"domain": "I", "map": [f"(pow {X} 2)"]},
            "c_affine": {"domain": "I", "map": [f"(add (mul 2 {X}) 1)"]},
        },
        "forms": forms,
        "tasks": tasks,
    }


def _sqrt_rationals() -> dict:
    return {
        "name": "sqrt-rationals",
        "description": "phi(t) = sqrt(t) on (0,1) ∩ Q extends uniformly, but its tangent map does not.",
        "anchor": "Square-root example: sqrt on (0,1) ∩ Q fails smoothness for the generator family",
        "space": {"dim": 1, "membership": {"kind": "sqrt-rational"}, "generators": [X], "bound": 1.0},
        "domains": {"Q": {"kind": "rational", "dim": 1, "open": True}},
        "cubes": {"phi": {"domain": "Q", "map": [f"(sqrt {X})"]}},
        "forms": {"d_id": {"kind": "point", "degree": 1, "terms": [{"coeff": "1", "index": [1]}]}},
        "tasks": [
            {"id": "validate-phi", "type": "validate", "cube": "phi"},
            {"id": "uniform-extension", "type": "extendability", "cube": "phi",
             "expect": {"uniform": True},
             "accuracy": {"generator": 1, "reference": f"(sqrt {X})", "targets": 100, "tol": 1e-6}},
            {"id": "tangent-extension", "type": "extendability", "cube": "phi",
             "expect": {"tangent": True}, "expect_fail": True},
            {"id": "integrate-d-id", "type": "integrate", "cube": "phi", "form": "d_id", "expect_fail": True},
        ],
    }


def _cross() -> dict:
    origin = {"point": [0, 0], "vectors": [[1, 0], [0, 1]]}
    zero1 = {"kind": "ambient", "degree": 1, "terms": []}
    return {
        "name": "cross-nonunique-d",
        "description": "On the axis cross {xy = 0} two extensions of the zero 1-form have different d.",
        "anchor": "Axis-cross example {xy = 0}: the exterior derivative depends on the chosen extension",
        "space": {"dim": 2, "membership": {"kind": "zero-set", "exprs": [f"(mul {X} {Y})"],
                                           "box": [[-1, 1], [-1, 1]]},
                  "generators": [X, Y], "bound": 1.0},
        "domains": {"I2": {"kind": "full", "dim": 2}},
        "cubes": {"arm": {"domain": "I2", "map": [f"(mul 0.5 (add {X} {Y}))", "0"]}},
        "forms": {
            "eta": {"kind": "point", "degree": 1, "terms": []},
            "eta_tilde_1": zero1,
            "eta_tilde_2": {"kind": "ambient", "degree": 1,
                            "terms": [{"coeff": X, "index": [2]}, {"coeff": f"(neg {Y})", "index": [1]}]},
            "eta_tilde_2_literal": {"kind": "ambient", "degree": 1,
                                    "terms": [{"coeff": X, "index": [2]}, {"coeff": f"(neg {Y})", "index": [2]}]},
        },
        "chains": {"A": [{"coeff": 1.0, "cube": "arm"}]},
        "tasks": [
            {"id": "validate-arm", "type": "validate", "cube": "arm"},
            {"id": "d-eta-tilde-1", "type": "derivative", "form": "eta_tilde_1", "expect_zero": True, **origin,
             "expect_value": 0.0},
            {"id": "d-eta-tilde-2", "type": "derivative", "form": "eta_tilde_2", "expect_zero": False, **origin,
             "expect_value": 2.0},
            {"id": "d-eta-tilde-2-literal", "type": "derivative", "form": "eta_tilde_2_literal",
             "expect_zero": False, **origin, "expect_value": 1.0},
            {"id": "stokes-arm-1", "type": "stokes", "chain": "A", "eta": "eta", "eta_tilde": "eta_tilde_1",
             "expect": {"lhs": 0.0, "rhs": 0.0}},
            {"id": "stokes-arm-2", "type": "stokes", "chain": "A", "eta": "eta", "eta_tilde": "eta_tilde_2",
             "expect": {"lhs": 0.0, "rhs": 0.0}},
        ],
    }


def _green() -> dict:
    return {
        "name": "green-square",
        "description": "Green's theorem on the identity square: both sides of Stokes equal the area 1.",
        "anchor": "Stokes theorem on the unit square (Green's theorem)",
        "space": {"dim": 2, "membership": {"kind": "all", "box": [[-1, 1], [-1, 1]]},
                  "generators": [X, Y], "bound": 1.0},
        "domains": {"I2": {"kind": "full", "dim": 2}},
        "cubes": {"square": {"domain": "I2", "map": [X, Y]}},
        "forms": {
            "eta": {"kind": "point", "degree": 1, "terms": [{"coeff": X, "index": [2]}]},
            "eta_tilde": {"kind": "ambient", "degree": 1, "terms": [{"coeff": X, "index": [2]}]},
            "dx": {"kind": "point", "degree": 1, "terms": [{"coeff": "1", "index": [1]}]},
            "du1": {"kind": "ambient", "degree": 1, "terms": [{"coeff": "1", "index": [1]}]},
            "area": {"kind": "point", "degree": 2, "terms": [{"coeff": "1", "index": [1, 2]}]},
        },
        "chains": {"S": [{"coeff": 1.0, "cube": "square"}]},
        "tasks": [
            {"id": "stokes-x-dy", "type": "stokes", "chain": "S", "eta": "eta", "eta_tilde": "eta_tilde",
             "tol": 1e-8, "expect": {"lhs": 1.0, "rhs": 1.0}},
            {"id": "stokes-exact-dx", "type": "stokes", "chain": "S", "eta": "dx", "eta_tilde": "du1",
             "tol": 1e-8, "expect": {"lhs": 0.0, "rhs": 0.0}},
            {"id": "area", "type": "integrate", "cube": "square", "form": "area", "expect": 1.0, "tol": 1e-12},
        ],
    }


def _stokes_random() -> dict:
    return {
        "name": "stokes-random",
        "description": "Seeded random Stokes instances plus the dd = 0, commutation and canonical-form suites.",
        "anchor": "Stokes theorem for smoothly extendable chains, and d commuting with pullback",
        "space": {"dim": 2, "membership": {"kind": "all", "box": [[-1, 1], [-1, 1]]},
                  "generators": [X, Y], "bound": 1.0},
        "forms": {"chi": {"kind": "ambient", "degree": 1, "terms": [{"coeff": X, "index": [2]}]}},
        "tasks": [
            {"id": "stokes-suite", "type": "property-suite", "suite": "stokes", "count": 20, "seed": 0,
             "tol": 1e-6},
            {"id": "dd-zero", "type": "property-suite", "suite": "dd", "count": 100, "points": 100, "seed": 0},
            {"id": "d-commutes-pullback", "type": "property-suite", "suite": "commutation", "count": 50,
             "points": 100, "seed": 0},
            {"id": "canonical-forms", "type": "property-suite", "suite": "canonical", "count": 50,
             "rejections": 20, "seed": 0},
            {"id": "d-commute-example", "type": "d-commute", "map": [f"(pow {X} 2)", f"(mul {X} {Y})"],
             "form": "chi"},
            {"id": "d-commute-corrupted", "type": "d-commute", "map": [f"(pow {X} 2)", f"(mul {X} {Y})"],
             "form": "chi", "corrupt": True, "expect_fail": True},
        ],
    }


_BUILTINS = {
    "rationals": _rationals,
    "sqrt-rationals": _sqrt_rationals,
    "cross-nonunique-d": _cross,
    "green-square": _green,
    "stokes-random": _stokes_random,
}


def builtin_names() -> list:
    return list(_BUILTINS)


def get_builtin(name: str) -> dict:
    try:
        return copy.deepcopy(_BUILTINS[name]())
    except KeyError:
        raise KeyError(f"unknown built-in scenario {name!r}") from None


def list_builtins() -> list:
    """``[{name, description, anchor}]`` for every built-in scenario."""
    out = []
    for name in _BUILTINS:
        doc = get_builtin(name)
        out.append({"name": name, "description": doc["description"], "anchor": doc["anchor"]})
    return out
