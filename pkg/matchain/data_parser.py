"""
INPUT DATA PARSER
=================
Reads the two CSV inputs (schemas in data/README.md):

- refractive-index tables: material_name, wavelength_nm, n_real, n_imag[, role]
  → one `MaterialLibrary` per wavelength (exact wavelength lookup only)
- growth-rate tables: drug_name, genotype, growth_rate
  → a complete K x 2^g `GrowthTable`
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import DataFormatError
from .optics import MaterialLibrary
from .timemachine import GrowthTable, genotype_index, genotype_label

logger = logging.getLogger(__name__)


def _safe_str(value: Any) -> str:
    """Convert a cell to a stripped string, NaN/None become ''."""
    if value is None:
        return ""
    if isinstance(value, float) and pd.isna(value):
        return ""
    return str(value).strip()


def _find_column(columns: List[str], candidates: List[str]) -> Optional[str]:
    """Find a column by any of the candidate names (case-insensitive)."""
    col_lower_map = {c.lower().strip(): c for c in columns}
    for candidate in candidates:
        key = candidate.lower().strip()
        if key in col_lower_map:
            return col_lower_map[key]
    return None


def _read_csv(path: Path, what: str) -> pd.DataFrame:
    if not path.exists():
        raise FileNotFoundError(f"{what} CSV not found: {path}")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DataFormatError(f"{what} CSV is empty: {path}") from None
    df.columns = df.columns.astype(str).str.strip()
    if len(df):
        df = df[df.apply(lambda row: any(_safe_str(v) for v in row), axis=1)]
    if df.empty:
        raise DataFormatError(f"{what} CSV has a header but no data rows: {path}")
    return df


def _require(columns: List[str], candidates: List[str], path: Path) -> str:
    col = _find_column(columns, candidates)
    if col is None:
        raise DataFormatError(f"{path.name}: missing column {candidates[0]!r} (have {columns})")
    return col


def _to_float(raw: str, what: str, row: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataFormatError(f"row {row}: {what} {raw!r} is not a number") from None


# ───────────────────────────────────────────────────────────────
# Refractive indices
# ───────────────────────────────────────────────────────────────

def parse_refractive_csv(csv_path: str, substrate: Optional[str] = None) -> Dict[float, MaterialLibrary]:
    """Parse a refractive-index table into {wavelength_nm: MaterialLibrary}.

    With ``substrate`` given, that material is the substrate and every other
    row with zero extinction is a coating. Without it, the substrate is the row
    marked ``role=substrate`` (or the only row with nonzero n_imag) per wavelength.
    """
    path = Path(csv_path)
    df = _read_csv(path, "Refractive-index")
    columns = list(df.columns)
    col_name = _require(columns, ["material_name", "material"], path)
    col_wl = _require(columns, ["wavelength_nm", "wavelength"], path)
    col_re = _require(columns, ["n_real", "n"], path)
    col_im = _find_column(columns, ["n_imag", "k"])
    col_role = _find_column(columns, ["role"])

    rows_by_wl: Dict[float, List[Dict[str, Any]]] = {}
    for i, rec in enumerate(df.to_dict("records"), start=2):
        name = _safe_str(rec[col_name])
        if not name:
            raise DataFormatError(f"row {i}: empty material name")
        wl = _to_float(_safe_str(rec[col_wl]), "wavelength", i)
        n_re = _to_float(_safe_str(rec[col_re]), "n_real", i)
        im_raw = _safe_str(rec[col_im]) if col_im else ""
        n_im = _to_float(im_raw, "n_imag", i) if im_raw else 0.0
        role = _safe_str(rec[col_role]).lower() if col_role else ""
        if wl <= 0:
            raise DataFormatError(f"row {i}: wavelength must be positive, got {wl}")
        if n_re <= 0:
            raise DataFormatError(f"row {i}: {name} at {wl:g} nm has non-positive index {n_re}")
        bucket = rows_by_wl.setdefault(wl, [])
        if any(r["name"] == name for r in bucket):
            raise DataFormatError(f"duplicate material {name!r} at {wl:g} nm")
        bucket.append({"name": name, "n": complex(n_re, n_im), "role": role})

    libraries: Dict[float, MaterialLibrary] = {}
    for wl, bucket in sorted(rows_by_wl.items()):
        if substrate is not None:
            subs = [r for r in bucket if r["name"].lower() == substrate.lower()]
            if not subs:
                raise DataFormatError(f"substrate {substrate!r} missing at {wl:g} nm")
            coatings = [r for r in bucket if r is not subs[0] and r["role"] != "substrate" and r["n"].imag == 0]
        else:
            subs = [r for r in bucket if r["role"] == "substrate"] or [r for r in bucket if r["n"].imag != 0]
            if len(subs) != 1:
                raise DataFormatError(
                    f"{wl:g} nm: expected exactly one substrate row, found {len(subs)}; pass the substrate name"
                )
            coatings = [r for r in bucket if r is not subs[0] and r["role"] != "substrate" and r["n"].imag == 0]
        if not coatings:
            raise DataFormatError(f"{wl:g} nm: no coating materials")
        try:
            libraries[wl] = MaterialLibrary(
                wl, subs[0]["n"], tuple((r["name"], r["n"].real) for r in coatings), subs[0]["name"]
            )
        except ValueError as exc:
            raise DataFormatError(f"{wl:g} nm: {exc}") from None

    logger.info("[DataParser] %s: %d wavelengths, substrate %s", path.name, len(libraries),
                next(iter(libraries.values())).substrate_name)
    return libraries


def library_at(libraries: Dict[float, MaterialLibrary], wavelength: float,
               materials: Optional[Sequence[str]] = None) -> MaterialLibrary:
    """Exact-wavelength lookup, optionally restricted to a subset of coatings."""
    for wl, lib in libraries.items():
        if abs(wl - wavelength) <= 1e-9 * max(1.0, wl):
            return lib.subset(list(materials)) if materials else lib
    raise DataFormatError(
        f"wavelength {wavelength:g} nm not in data (available: {', '.join(f'{w:g}' for w in sorted(libraries))})"
    )


# ───────────────────────────────────────────────────────────────
# Growth rates
# ───────────────────────────────────────────────────────────────

def parse_growth_csv(csv_path: str) -> GrowthTable:
    """Parse a complete drug x genotype growth-rate grid."""
    path = Path(csv_path)
    df = _read_csv(path, "Growth")
    columns = list(df.columns)
    col_drug = _require(columns, ["drug_name", "drug"], path)
    col_geno = _require(columns, ["genotype"], path)
    col_rate = _require(columns, ["growth_rate", "growth", "rate"], path)

    drugs: List[str] = []
    cells: Dict[tuple, float] = {}
    g: Optional[int] = None
    for i, rec in enumerate(df.to_dict("records"), start=2):
        drug = _safe_str(rec[col_drug])
        geno = _safe_str(rec[col_geno])
        raw = _safe_str(rec[col_rate])
        if not drug:
            raise DataFormatError(f"row {i}: empty drug name")
        if g is None:
            g = len(geno)
        elif len(geno) != g:
            raise DataFormatError(f"row {i}: genotype {geno!r} has length {len(geno)}, expected {g}")
        j = genotype_index(geno)
        if not raw:
            raise DataFormatError(f"row {i}: missing growth rate for drug {drug!r}, genotype {geno}")
        rate = _to_float(raw, "growth_rate", i)
        if not np.isfinite(rate):
            raise DataFormatError(f"row {i}: non-finite growth rate for drug {drug!r}, genotype {geno}")
        if drug not in drugs:
            drugs.append(drug)
        if (drug, j) in cells:
            raise DataFormatError(f"duplicate entry for drug {drug!r}, genotype {geno}")
        cells[(drug, j)] = rate

    d = 1 << (g or 0)
    rates = np.zeros((len(drugs), d))
    for k, drug in enumerate(drugs):
        for j in range(d):
            if (drug, j) not in cells:
                raise DataFormatError(f"missing growth rate for drug {drug!r}, genotype {genotype_label(j, g)}")
            rates[k, j] = cells[(drug, j)]
    logger.info("[DataParser] %s: K=%d drugs, g=%d alleles", path.name, len(drugs), g)
    return GrowthTable(rates, drugs)


def write_growth_csv(table: GrowthTable, csv_path: str) -> str:
    g = table.space.g
    rows = [
        {"drug_name": drug, "genotype": genotype_label(j, g), "growth_rate": float(table.rates[k, j])}
        for k, drug in enumerate(table.drugs)
        for j in range(table.d)
    ]
    out = Path(csv_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=["drug_name", "genotype", "growth_rate"]).to_csv(out, index=False)
    return str(out)
