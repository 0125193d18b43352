"""
Formulation Model
=================
Solver-independent container for the mixed-integer formulations built by
`disjunctive_milp` (linear) and `thinfilm` (bilinear). It is the in-memory form
of the FormulationJSON export and lowers to a dense `LPProblem` when every row is
linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .lp_core import LPProblem

VARIABLE_KINDS = ("continuous", "binary")
SENSES = ("<=", "=", ">=")


@dataclass
class Variable:
    name: str
    kind: str = "continuous"
    lower: float = 0.0
    upper: float = math.inf

    def __post_init__(self) -> None:
        if self.kind not in VARIABLE_KINDS:
            raise ValueError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "binary":
            self.lower = max(float(self.lower), 0.0)
            self.upper = min(float(self.upper), 1.0)
        if self.lower > self.upper:
            raise ValueError(f"variable {self.name!r}: lower {self.lower} > upper {self.upper}")


@dataclass
class LinearConstraint:
    coeffs: Dict[int, float]
    sense: str
    rhs: float
    group: str = ""


@dataclass
class QuadraticConstraint:
    """linear part + sum of coef * x_i * x_j  (sense)  rhs."""

    coeffs: Dict[int, float]
    bilinear: List[Tuple[int, int, float]]
    sense: str
    rhs: float
    group: str = ""


@dataclass
class Objective:
    sense: str = "max"
    coeffs: Dict[int, float] = field(default_factory=dict)
    quadratic: List[Tuple[int, int, float]] = field(default_factory=list)
    constant: float = 0.0


class FormulationModel:
    """Ordered variables plus linear and bilinear rows."""

    def __init__(self, kind: str = "milp", metadata: Optional[Dict[str, Any]] = None):
        self.kind = kind
        self.metadata: Dict[str, Any] = dict(metadata or {})
        self.variables: List[Variable] = []
        self.linear_constraints: List[LinearConstraint] = []
        self.quadratic_constraints: List[QuadraticConstraint] = []
        self.objective = Objective()
        self._by_name: Dict[str, int] = {}

    # ───────────────────────────────────────────────────────────────
    # Building
    # ───────────────────────────────────────────────────────────────

    def add_variable(self, name: str, kind: str = "continuous",
                     lower: float = 0.0, upper: float = math.inf) -> int:
        if name in self._by_name:
            raise ValueError(f"duplicate variable name {name!r}")
        self.variables.append(Variable(name, kind, float(lower), float(upper)))
        idx = len(self.variables) - 1
        self._by_name[name] = idx
        return idx

    def _check_refs(self, indices: Sequence[int]) -> None:
        n = len(self.variables)
        for i in indices:
            if not 0 <= i < n:
                raise IndexError(f"constraint references undeclared variable index {i}")

    def add_linear(self, coeffs: Mapping[int, float], sense: str, rhs: float, group: str = "") -> None:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        self._check_refs(list(coeffs))
        self.linear_constraints.append(
            LinearConstraint({int(k): float(v) for k, v in coeffs.items() if v != 0.0}, sense, float(rhs), group)
        )

    def add_quadratic(self, coeffs: Mapping[int, float], bilinear: Sequence[Tuple[int, int, float]],
                      sense: str, rhs: float, group: str = "") -> None:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        self._check_refs(list(coeffs) + [i for i, _, _ in bilinear] + [j for _, j, _ in bilinear])
        self.quadratic_constraints.append(
            QuadraticConstraint(
                {int(k): float(v) for k, v in coeffs.items() if v != 0.0},
                [(int(i), int(j), float(c)) for i, j, c in bilinear if c != 0.0],
                sense, float(rhs), group,
            )
        )

    def set_objective(self, sense: str, coeffs: Mapping[int, float],
                      quadratic: Sequence[Tuple[int, int, float]] = (), constant: float = 0.0) -> None:
        if sense not in ("max", "min"):
            raise ValueError(f"objective sense must be 'max' or 'min', got {sense!r}")
        self._check_refs(list(coeffs) + [i for i, _, _ in quadratic] + [j for _, j, _ in quadratic])
        self.objective = Objective(
            sense,
            {int(k): float(v) for k, v in coeffs.items() if v != 0.0},
            [(int(i), int(j), float(c)) for i, j, c in quadratic if c != 0.0],
            float(constant),
        )

    # ───────────────────────────────────────────────────────────────
    # Queries
    # ───────────────────────────────────────────────────────────────

    def index(self, name: str) -> int:
        return self._by_name[name]

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def binary_indices(self) -> List[int]:
        return [i for i, v in enumerate(self.variables) if v.kind == "binary"]

    def count_group(self, group: str) -> int:
        return sum(1 for c in self.linear_constraints if c.group == group) + sum(
            1 for c in self.quadratic_constraints if c.group == group
        )

    def is_linear(self) -> bool:
        return not self.quadratic_constraints and not self.objective.quadratic

    def evaluate_objective(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        value = self.objective.constant + sum(c * x[i] for i, c in self.objective.coeffs.items())
        value += sum(c * x[i] * x[j] for i, j, c in self.objective.quadratic)
        return float(value)

    def to_lp(self, fixings: Optional[Mapping[int, float]] = None) -> LPProblem:
        """Dense LP relaxation: binaries relaxed to [0, 1], fixings pin variables."""
        if not self.is_linear():
            raise ValueError("formulation has bilinear terms; no LP relaxation without McCormick envelopes")
        n = self.n_vars
        lower = np.array([v.lower for v in self.variables], dtype=float)
        upper = np.array([v.upper for v in self.variables], dtype=float)
        for i, val in (fixings or {}).items():
            lower[i] = upper[i] = float(val)
        A = np.zeros((len(self.linear_constraints), n))
        rhs = np.zeros(len(self.linear_constraints))
        senses: List[str] = []
        for r, con in enumerate(self.linear_constraints):
            for i, c in con.coeffs.items():
                A[r, i] = c
            rhs[r] = con.rhs
            senses.append(con.sense)
        c = np.zeros(n)
        for i, coef in self.objective.coeffs.items():
            c[i] = coef
        if self.objective.sense == "min":
            c = -c
        return LPProblem(c, A, senses, rhs, lower, upper)

    # ───────────────────────────────────────────────────────────────
    # Serialization (FormulationJSON, see data/README.md)
    # ───────────────────────────────────────────────────────────────

    def to_dict(self) -> Dict[str, Any]:
        names = [v.name for v in self.variables]

        def terms(coeffs: Mapping[int, float]) -> List[Dict[str, Any]]:
            return [{"var": names[i], "coef": c} for i, c in coeffs.items()]

        def products(items: Sequence[Tuple[int, int, float]]) -> List[Dict[str, Any]]:
            return [{"var1": names[i], "var2": names[j], "coef": c} for i, j, c in items]

        return {
            "format": "matchain-formulation",
            "version": 1,
            "kind": self.kind,
            "metadata": self.metadata,
            "variables": [
                {"name": v.name, "kind": v.kind, "lower": _encode_bound(v.lower), "upper": _encode_bound(v.upper)}
                for v in self.variables
            ],
            "linear_constraints": [
                {"group": c.group, "terms": terms(c.coeffs), "sense": c.sense, "rhs": c.rhs}
                for c in self.linear_constraints
            ],
            "bilinear_constraints": [
                {"group": c.group, "terms": terms(c.coeffs), "bilinear": products(c.bilinear),
                 "sense": c.sense, "rhs": c.rhs}
                for c in self.quadratic_constraints
            ],
            "objective": {
                "sense": self.objective.sense,
                "terms": terms(self.objective.coeffs),
                "bilinear": products(self.objective.quadratic),
                "constant": self.objective.constant,
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FormulationModel":
        model = cls(kind=str(data.get("kind", "milp")), metadata=dict(data.get("metadata") or {}))
        for v in data["variables"]:
            model.add_variable(v["name"], v.get("kind", "continuous"),
                               _decode_bound(v.get("lower"), -math.inf), _decode_bound(v.get("upper"), math.inf))

        def coeffs(items: Sequence[Mapping[str, Any]]) -> Dict[int, float]:
            return {model.index(t["var"]): float(t["coef"]) for t in items}

        def products(items: Sequence[Mapping[str, Any]]) -> List[Tuple[int, int, float]]:
            return [(model.index(t["var1"]), model.index(t["var2"]), float(t["coef"])) for t in items]

        for c in data.get("linear_constraints", []):
            model.add_linear(coeffs(c["terms"]), c["sense"], c["rhs"], c.get("group", ""))
        for c in data.get("bilinear_constraints", []):
            model.add_quadratic(coeffs(c["terms"]), products(c.get("bilinear", [])),
                                c["sense"], c["rhs"], c.get("group", ""))
        obj = data.get("objective") or {}
        model.set_objective(obj.get("sense", "max"), coeffs(obj.get("terms", [])),
                            products(obj.get("bilinear", [])), float(obj.get("constant", 0.0)))
        return model

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FormulationModel):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.variables == other.variables
            and self.linear_constraints == other.linear_constraints
            and self.quadratic_constraints == other.quadratic_constraints
            and self.objective == other.objective
        )

    def __repr__(self) -> str:
        return (
            f"FormulationModel(kind={self.kind!r}, vars={self.n_vars}, "
            f"binaries={len(self.binary_indices)}, linear={len(self.linear_constraints)}, "
            f"bilinear={len(self.quadratic_constraints)})"
        )


def _encode_bound(value: float) -> Optional[float]:
    return None if math.isinf(value) else value


def _decode_bound(value: Any, default: float) -> float:
    return default if value is None else float(value)
