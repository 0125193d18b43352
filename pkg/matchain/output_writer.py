"""
REPORT WRITER
=============
Machine-readable output for the CLI: JSON reports on stdout (every float
rounded to 12 significant digits) and plot-ready tables as .csv or .xlsx.
"""

from __future__ import annotations

import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np
import pandas as pd

SIGNIFICANT_DIGITS = 12


def round_sig(value: Any, digits: int = SIGNIFICANT_DIGITS) -> Any:
    """Recursively round floats to ``digits`` significant digits; inf/nan become strings."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{v:.{digits}g}")
    if isinstance(value, complex):
        return [round_sig(value.real, digits), round_sig(value.imag, digits)]
    if isinstance(value, Mapping):
        return {str(k): round_sig(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_sig(v, digits) for v in value]
    if isinstance(value, np.ndarray):
        return round_sig(value.tolist(), digits)
    return value


def render_report(payload: Dict[str, Any], timestamp: bool = True) -> str:
    body = dict(payload)
    if timestamp:
        body["timestamp"] = datetime.now(timezone.utc).isoformat()
    return json.dumps(round_sig(body), indent=2)


def write_table(rows: Sequence[Mapping[str, Any]], output_path: str) -> str:
    """Write rows to .csv, or to .xlsx through openpyxl with a bold header."""
    out = Path(output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame([round_sig(dict(r)) for r in rows])
    if out.suffix.lower() == ".xlsx":
        from openpyxl.styles import Font
        from openpyxl.utils import get_column_letter

        with pd.ExcelWriter(out, engine="openpyxl") as writer:
            df.to_excel(writer, index=False, sheet_name="matchain")
            ws = writer.sheets["matchain"]
            for col_idx, name in enumerate(df.columns, 1):
                ws.cell(row=1, column=col_idx).font = Font(bold=True)
                ws.column_dimensions[get_column_letter(col_idx)].width = max(12, len(str(name)) + 2)
    else:
        df.to_csv(out, index=False)
    return str(out)


def write_matrices(matrices: Sequence[np.ndarray], labels: Sequence[str], row_names: List[str],
                   output_dir: str) -> List[str]:
    """One CSV per matrix, rows and columns labelled."""
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for label, T in zip(labels, matrices):
        safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in str(label))
        path = out_dir / f"T_{safe}.csv"
        pd.DataFrame(np.asarray(T), index=row_names, columns=row_names).to_csv(path, index_label="from\\to")
        paths.append(str(path))
    return paths
