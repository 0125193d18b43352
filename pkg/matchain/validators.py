"""Small schema and structure validators.

Each returns ``(ok, errors)`` so callers can report every problem at once.
"""

from __future__ import annotations

from typing import Any, List, Sequence, Tuple

import numpy as np

_SENSES = ("<=", "=", ">=")
_KINDS = ("continuous", "binary")


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_bound(value: Any) -> bool:
    return value is None or _is_number(value)


def _check_terms(terms: Any, declared: set, where: str, errors: List[str]) -> None:
    if not isinstance(terms, list):
        errors.append(f"{where}: 'terms' must be a list")
        return
    for t in terms:
        if not isinstance(t, dict) or not isinstance(t.get("var"), str) or not _is_number(t.get("coef")):
            errors.append(f"{where}: malformed term {t!r}")
        elif t["var"] not in declared:
            errors.append(f"{where}: undeclared variable {t['var']!r}")


def _check_products(items: Any, declared: set, where: str, errors: List[str]) -> None:
    if not isinstance(items, list):
        errors.append(f"{where}: 'bilinear' must be a list")
        return
    for t in items:
        if not isinstance(t, dict) or not _is_number(t.get("coef")):
            errors.append(f"{where}: malformed bilinear term {t!r}")
            continue
        for key in ("var1", "var2"):
            if t.get(key) not in declared:
                errors.append(f"{where}: bilinear term references undeclared variable {t.get(key)!r}")


def validate_formulation_json(obj: Any) -> Tuple[bool, List[str]]:
    errors: List[str] = []
    if not isinstance(obj, dict):
        return False, ["not an object"]

    if obj.get("format") != "matchain-formulation":
        errors.append("missing/invalid 'format'")
    if obj.get("kind") not in ("milp", "miqcqp"):
        errors.append("'kind' must be 'milp' or 'miqcqp'")

    variables = obj.get("variables")
    if not isinstance(variables, list):
        return False, errors + ["'variables' must be a list"]
    declared: set = set()
    for v in variables:
        if not isinstance(v, dict) or not isinstance(v.get("name"), str):
            errors.append(f"malformed variable {v!r}")
            continue
        if v["name"] in declared:
            errors.append(f"duplicate variable {v['name']!r}")
        declared.add(v["name"])
        if v.get("kind", "continuous") not in _KINDS:
            errors.append(f"variable {v['name']!r}: invalid kind {v.get('kind')!r}")
        if not _is_bound(v.get("lower")) or not _is_bound(v.get("upper")):
            errors.append(f"variable {v['name']!r}: bounds must be numbers or null")

    for i, c in enumerate(obj.get("linear_constraints") or []):
        where = f"linear_constraints[{i}]"
        if not isinstance(c, dict):
            errors.append(f"{where}: not an object")
            continue
        _check_terms(c.get("terms"), declared, where, errors)
        if c.get("sense") not in _SENSES:
            errors.append(f"{where}: invalid sense {c.get('sense')!r}")
        if not _is_number(c.get("rhs")):
            errors.append(f"{where}: 'rhs' must be a number")

    for i, c in enumerate(obj.get("bilinear_constraints") or []):
        where = f"bilinear_constraints[{i}]"
        if not isinstance(c, dict):
            errors.append(f"{where}: not an object")
            continue
        _check_terms(c.get("terms", []), declared, where, errors)
        _check_products(c.get("bilinear"), declared, where, errors)
        if c.get("sense") not in _SENSES:
            errors.append(f"{where}: invalid sense {c.get('sense')!r}")
        if not _is_number(c.get("rhs")):
            errors.append(f"{where}: 'rhs' must be a number")

    objective = obj.get("objective")
    if not isinstance(objective, dict):
        errors.append("missing/invalid 'objective'")
    else:
        if objective.get("sense") not in ("max", "min"):
            errors.append("objective: 'sense' must be 'max' or 'min'")
        _check_terms(objective.get("terms", []), declared, "objective", errors)
        _check_products(objective.get("bilinear", []), declared, "objective", errors)

    if obj.get("kind") == "milp" and (obj.get("bilinear_constraints") or (objective or {}).get("bilinear")):
        errors.append("'milp' formulations cannot carry bilinear terms")

    return len(errors) == 0, errors


def validate_transition_matrices(matrices: Sequence[np.ndarray], g: int,
                                 mode: str = "strict", tol: float = 1e-12) -> Tuple[bool, List[str]]:
    """Support on single bit-flips plus the diagonal; row sums in {0, 1} (strict) or 1 (absorb)."""
    errors: List[str] = []
    d = 1 << g
    j = np.arange(d)
    allowed = np.zeros((d, d), dtype=bool)
    allowed[j, j] = True
    for i in range(g):
        allowed[j, j ^ (1 << i)] = True

    for k, T in enumerate(matrices):
        T = np.asarray(T, dtype=float)
        if T.shape != (d, d):
            errors.append(f"matrix {k}: shape {T.shape}, expected ({d}, {d})")
            continue
        if np.any(T < 0):
            errors.append(f"matrix {k}: negative entries")
        if np.any(T[~allowed] != 0):
            errors.append(f"matrix {k}: mass outside single-mutation moves")
        sums = T.sum(axis=1)
        if mode == "absorb":
            ok = np.abs(sums - 1.0) <= tol
        else:
            ok = (np.abs(sums - 1.0) <= tol) | (np.abs(sums) <= tol)
        if not np.all(ok):
            bad = int(np.flatnonzero(~ok)[0])
            errors.append(f"matrix {k}: row {bad} sums to {sums[bad]:.15g}")

    return len(errors) == 0, errors


def validate_stack_design(design: Any, tol: float = 1e-8) -> Tuple[bool, List[str]]:
    """Layer invariants and stored reflectance of a `StackDesign`."""
    errors: List[str] = []
    for n, layer in enumerate(design.layers, start=1):
        if abs(layer.C ** 2 + layer.S ** 2 - 1.0) > 1e-10:
            errors.append(f"layer {n}: C^2 + S^2 != 1")
        if layer.S < -1e-12:
            errors.append(f"layer {n}: S is negative")
        if layer.thickness < 0:
            errors.append(f"layer {n}: negative thickness")
    if not 0.0 <= design.reflectance <= 1.0 + 1e-12:
        errors.append(f"reflectance {design.reflectance} outside [0, 1]")
    if abs(design.recompute() - design.reflectance) > tol:
        errors.append("stored reflectance does not match the layers")
    if abs(design.cumulative().det() - 1.0) > 1e-8:
        errors.append("cumulative matrix determinant is not 1")
    return len(errors) == 0, errors
