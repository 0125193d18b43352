"""
FORMULATION EXPORT
==================
Writes formulations to the FormulationJSON schema (data/README.md) so external
MILP / MIQCQP solvers can consume them, and reads them back.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Union

from .disjunctive_milp import DisjunctiveFormulation
from .errors import DataFormatError
from .model import FormulationModel
from .validators import validate_formulation_json

logger = logging.getLogger(__name__)

EXPORT_KINDS = ("milp", "miqcqp")


def export_formulation(formulation: Union[DisjunctiveFormulation, FormulationModel], path: str,
                       kind: str = "milp") -> str:
    """Serialize ``formulation`` as FormulationJSON; returns the written path."""
    if kind not in EXPORT_KINDS:
        raise ValueError(f"kind must be one of {EXPORT_KINDS}, got {kind!r}")
    model = formulation.model if isinstance(formulation, DisjunctiveFormulation) else formulation
    if kind == "milp" and not model.is_linear():
        raise ValueError("formulation has bilinear terms; export it as 'miqcqp'")
    data = model.to_dict()
    data["kind"] = kind

    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")
    logger.info("[Export] %s: %d variables, %d linear rows, %d bilinear rows",
                out.name, model.n_vars, len(model.linear_constraints), len(model.quadratic_constraints))
    return str(out)


def import_formulation(path: str) -> FormulationModel:
    """Read and validate a FormulationJSON file."""
    src = Path(path)
    if not src.exists():
        raise FileNotFoundError(f"Formulation JSON not found: {path}")
    try:
        data = json.loads(src.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{src.name}: invalid JSON ({exc})") from None
    ok, errors = validate_formulation_json(data)
    if not ok:
        raise DataFormatError(f"{src.name}: " + "; ".join(errors[:5]))
    return FormulationModel.from_dict(data)
