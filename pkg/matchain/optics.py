"""
Thin-Film Optics
================
Transfer matrices, reflectance and the quarter-wave stack at normal incidence.

A layer of (real) refractive index a and thickness t at wavelength λ has the
transfer matrix

    [[cos σ, i·sin σ / a], [i·a·sin σ, cos σ]],   σ = 2π·a·t/λ

Such matrices (real diagonal, imaginary off-diagonal) are stored in their real
tilde form [[cos σ, sin σ/a], [a·sin σ, cos σ]]; products use the tilde rule in
`TildeMatrix.__matmul__`, determinants read w̃₁₁w̃₂₂ + w̃₁₂w̃₂₁.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import NonPhysicalInputError, UnknownMaterialError

logger = logging.getLogger(__name__)

_UNIT_TOL = 1e-10


# ───────────────────────────────────────────────────────────────
# Materials
# ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class MaterialLibrary:
    """Refractive indices of one substrate and its coating materials at one wavelength."""

    wavelength: float
    substrate_index: complex
    coating_indices: Tuple[Tuple[str, float], ...]
    substrate_name: str = "substrate"

    def __post_init__(self) -> None:
        coatings = self.coating_indices
        if isinstance(coatings, Mapping):
            coatings = tuple(coatings.items())
        coatings = tuple((str(name), float(a)) for name, a in coatings)
        object.__setattr__(self, "coating_indices", coatings)
        object.__setattr__(self, "substrate_index", complex(self.substrate_index))
        object.__setattr__(self, "wavelength", float(self.wavelength))
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not self.substrate_index.real > 0:
            raise ValueError(f"substrate index needs a positive real part, got {self.substrate_index}")
        names = [name for name, _ in coatings]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coating material in {names}")
        for name, a in coatings:
            if not a > 1.0:
                raise ValueError(f"coating {name!r}: refractive index must exceed 1, got {a}")

    @property
    def materials(self) -> List[str]:
        return [name for name, _ in self.coating_indices]

    @property
    def indices(self) -> np.ndarray:
        return np.array([a for _, a in self.coating_indices], dtype=float)

    def __len__(self) -> int:
        return len(self.coating_indices)

    def index_of(self, material: Union[str, int]) -> float:
        if isinstance(material, (int, np.integer)):
            if not 0 <= int(material) < len(self.coating_indices):
                raise UnknownMaterialError(f"material index {material} out of range")
            return self.coating_indices[int(material)][1]
        for name, a in self.coating_indices:
            if name == material:
                return a
        raise UnknownMaterialError(f"unknown coating material {material!r}; library has {self.materials}")

    def position(self, material: Union[str, int]) -> int:
        if isinstance(material, (int, np.integer)):
            self.index_of(material)
            return int(material)
        try:
            return self.materials.index(material)
        except ValueError:
            raise UnknownMaterialError(
                f"unknown coating material {material!r}; library has {self.materials}"
            ) from None

    def subset(self, names: Sequence[str]) -> "MaterialLibrary":
        return MaterialLibrary(self.wavelength, self.substrate_index,
                               tuple((n, self.index_of(n)) for n in names), self.substrate_name)

    @property
    def high_low(self) -> Tuple[str, str]:
        """(highest-index, lowest-index) coating names."""
        if len(self.coating_indices) < 2:
            raise ValueError("the quarter-wave stack needs at least two coating materials")
        ordered = sorted(self.coating_indices, key=lambda item: item[1])
        return ordered[-1][0], ordered[0][0]


# ───────────────────────────────────────────────────────────────
# Tilde matrices
# ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TildeMatrix:
    w11: float
    w12: float
    w21: float
    w22: float

    @classmethod
    def identity(cls) -> "TildeMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, m: np.ndarray) -> "TildeMatrix":
        m = np.asarray(m, dtype=float).reshape(2, 2)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @classmethod
    def from_complex(cls, m: np.ndarray, tol: float = 1e-12) -> "TildeMatrix":
        m = np.asarray(m, dtype=complex).reshape(2, 2)
        if abs(m[0, 0].imag) > tol or abs(m[1, 1].imag) > tol or abs(m[0, 1].real) > tol or abs(m[1, 0].real) > tol:
            raise ValueError("matrix needs a real diagonal and an imaginary off-diagonal")
        return cls(m[0, 0].real, m[0, 1].imag, m[1, 0].imag, m[1, 1].real)

    def to_complex(self) -> np.ndarray:
        return np.array([[self.w11, 1j * self.w12], [1j * self.w21, self.w22]], dtype=complex)

    def as_array(self) -> np.ndarray:
        return np.array([[self.w11, self.w12], [self.w21, self.w22]], dtype=float)

    def __matmul__(self, other: "TildeMatrix") -> "TildeMatrix":
        return TildeMatrix(
            self.w11 * other.w11 - self.w12 * other.w21,
            self.w11 * other.w12 + self.w12 * other.w22,
            self.w21 * other.w11 + self.w22 * other.w21,
            self.w22 * other.w22 - self.w21 * other.w12,
        )

    def __neg__(self) -> "TildeMatrix":
        return TildeMatrix(-self.w11, -self.w12, -self.w21, -self.w22)

    def det(self) -> float:
        return self.w11 * self.w22 + self.w12 * self.w21

    def is_diagonal(self, tol: float = 1e-12) -> bool:
        return abs(self.w12) <= tol and abs(self.w21) <= tol

    def is_antidiagonal(self, tol: float = 1e-12) -> bool:
        return abs(self.w11) <= tol and abs(self.w22) <= tol


def layer_matrix(a: float, C: float, S: float) -> TildeMatrix:
    return TildeMatrix(C, S / a, a * S, C)


def transfer_matrix(material: Union[str, int], thickness: float, lib: MaterialLibrary) -> TildeMatrix:
    """Tilde transfer matrix of ``material`` with physical ``thickness`` (nm)."""
    if thickness < 0:
        raise ValueError(f"thickness must be non-negative, got {thickness}")
    a = lib.index_of(material)
    sigma = 2.0 * math.pi * a * thickness / lib.wavelength
    return layer_matrix(a, math.cos(sigma), math.sin(sigma))


def cumulative(matrices: Sequence[TildeMatrix]) -> TildeMatrix:
    w = TildeMatrix.identity()
    for m in matrices:
        w = w @ m
    return w


# ───────────────────────────────────────────────────────────────
# Reflectance
# ───────────────────────────────────────────────────────────────

def reflectance_of(w: TildeMatrix, substrate_index: complex) -> float:
    """Reflectance of the coated substrate whose stack has cumulative matrix ``w``."""
    x, y = substrate_index.real, substrate_index.imag
    a = w.w11 - y * w.w12
    b = w.w21 + y * w.w22
    num = (a - x * w.w22) ** 2 + (b - x * w.w12) ** 2
    den = (a + x * w.w22) ** 2 + (b + x * w.w12) ** 2
    if den == 0.0:
        raise NonPhysicalInputError(f"reflectance denominator vanishes for {w}")
    return num / den


def denominator_D(w: TildeMatrix, substrate_index: complex) -> float:
    """(w̃₁₁ − y·w̃₁₂)² + (x·w̃₁₂)² + (w̃₂₁ + y·w̃₂₂)² + (x·w̃₂₂)² + 2x with â_s = x + iy."""
    x, y = substrate_index.real, substrate_index.imag
    return (w.w11 - y * w.w12) ** 2 + (x * w.w12) ** 2 + (w.w21 + y * w.w22) ** 2 + (x * w.w22) ** 2 + 2.0 * x


def reflectance_from_D(w: TildeMatrix, substrate_index: complex) -> float:
    """1 − 4x/D, equal to `reflectance_of` whenever det(w̃) = 1."""
    return 1.0 - 4.0 * substrate_index.real / denominator_D(w, substrate_index)


def bare_reflectance(substrate_index: complex) -> float:
    s = complex(substrate_index)
    return abs(1 - s) ** 2 / abs(1 + s) ** 2


# ───────────────────────────────────────────────────────────────
# Layers and designs
# ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TransferLayer:
    """One coating layer: material plus (C, S) = (cos σ, sin σ) with S ≥ 0."""

    material: str
    index: float
    C: float
    S: float
    wavelength: float

    def __post_init__(self) -> None:
        if abs(self.C * self.C + self.S * self.S - 1.0) > _UNIT_TOL:
            raise ValueError(f"layer {self.material}: C²+S² = {self.C ** 2 + self.S ** 2} is not 1")
        if self.S < -_UNIT_TOL or abs(self.C) > 1.0 + _UNIT_TOL:
            raise ValueError(f"layer {self.material}: (C, S) = ({self.C}, {self.S}) outside the upper half circle")

    @classmethod
    def from_sigma(cls, material: str, index: float, sigma: float, wavelength: float) -> "TransferLayer":
        if not -1e-12 <= sigma <= math.pi + 1e-12:
            raise ValueError(f"σ must lie in [0, π], got {sigma}")
        sigma = min(max(sigma, 0.0), math.pi)
        return cls(material, float(index), math.cos(sigma), math.sin(sigma), float(wavelength))

    @classmethod
    def from_thickness(cls, material: str, thickness: float, lib: MaterialLibrary) -> "TransferLayer":
        """Layer of physical thickness ``thickness``; σ is reduced to [0, π] up to the sign of the matrix."""
        m = transfer_matrix(material, thickness, lib)
        C, S = m.w11, m.w21 / lib.index_of(material)
        if S < 0:
            C, S = -C, -S
        S = max(S, 0.0)
        return cls(str(material), lib.index_of(material), C, S, lib.wavelength)

    @property
    def sigma(self) -> float:
        return math.atan2(max(self.S, 0.0), self.C)

    @property
    def thickness(self) -> float:
        """t = λ·arccos(C) / (2π·a) in nanometres."""
        return self.wavelength * math.acos(min(1.0, max(-1.0, self.C))) / (2.0 * math.pi * self.index)

    @property
    def matrix(self) -> TildeMatrix:
        return layer_matrix(self.index, self.C, self.S)


PROVENANCES = ("heuristic", "optimal", "incumbent")


@dataclass
class StackDesign:
    layers: List[TransferLayer]
    reflectance: float
    provenance: str
    wavelength: float
    substrate_index: complex
    substrate_name: str = "substrate"
    metadata: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def evaluate(cls, layers: Sequence[TransferLayer], lib: MaterialLibrary, provenance: str) -> "StackDesign":
        w = cumulative([layer.matrix for layer in layers])
        return cls(list(layers), reflectance_of(w, lib.substrate_index), provenance,
                   lib.wavelength, lib.substrate_index, lib.substrate_name)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def materials(self) -> List[str]:
        return [layer.material for layer in self.layers]

    def cumulative(self) -> TildeMatrix:
        return cumulative([layer.matrix for layer in self.layers])

    def recompute(self) -> float:
        return reflectance_of(self.cumulative(), self.substrate_index)

    def has_repeated_neighbours(self) -> bool:
        return any(a.material == b.material for a, b in zip(self.layers, self.layers[1:]))

    def thickness_table(self) -> List[Dict[str, object]]:
        return [
            {
                "layer": n,
                "material": layer.material,
                "refractive_index": layer.index,
                "C": layer.C,
                "S": layer.S,
                "sigma_rad": layer.sigma,
                "thickness_nm": layer.thickness,
            }
            for n, layer in enumerate(self.layers, start=1)
        ]

    def to_dict(self) -> Dict[str, object]:
        return {
            "provenance": self.provenance,
            "substrate": self.substrate_name,
            "substrate_index": [self.substrate_index.real, self.substrate_index.imag],
            "wavelength_nm": self.wavelength,
            "n_layers": self.n_layers,
            "reflectance": self.reflectance,
            "layers": self.thickness_table(),
        }


# ───────────────────────────────────────────────────────────────
# Quarter-wave stack
# ───────────────────────────────────────────────────────────────

def quarter_wave_heuristic(lib: MaterialLibrary, N: int) -> StackDesign:
    """Alternating high/low quarter-wave layers, high-index material on odd layers."""
    if N < 0:
        raise ValueError(f"number of layers must be non-negative, got {N}")
    high, low = lib.high_low
    layers = []
    for n in range(1, N + 1):
        name = high if n % 2 == 1 else low
        layers.append(TransferLayer(name, lib.index_of(name), 0.0, 1.0, lib.wavelength))
    design = StackDesign.evaluate(layers, lib, "heuristic")
    logger.debug("[QuarterWave] %s N=%d R=%.6f", lib.substrate_name, N, design.reflectance)
    return design


def quarter_wave_closed_form(a_high: float, a_low: float, N: int) -> TildeMatrix:
    """Cumulative tilde matrix of N alternating quarter-wave layers (high first).

    With r = a_low/a_high, every high/low pair multiplies to -diag(r, 1/r), so an
    even stack N = 2m is (-1)^m·diag(r^m, r^-m) and an odd stack N = 2m+1 has
    off-diagonals (-1)^m·r^m/a_high and (-1)^m·a_high·r^-m.
    """
    if N < 0:
        raise ValueError(f"number of layers must be non-negative, got {N}")
    r = a_low / a_high
    m, odd = divmod(N, 2)
    sign = -1.0 if m % 2 else 1.0
    if not odd:
        return TildeMatrix(sign * r ** m, 0.0, 0.0, sign * r ** (-m))
    return TildeMatrix(0.0, sign * r ** m / a_high, sign * a_high * r ** (-m), 0.0)


def quarter_wave_D(a_high: float, a_low: float, N: int, substrate_index: complex) -> float:
    """D of the closed-form stack: r^{2m} + |â_s|²r^{-2m} + 2x (even) or |â_s|²w̃₁₂² + w̃₂₁² + 2x (odd)."""
    w = quarter_wave_closed_form(a_high, a_low, N)
    s2 = abs(substrate_index) ** 2
    x = substrate_index.real
    if N % 2 == 0:
        return w.w11 ** 2 + s2 * w.w22 ** 2 + 2.0 * x
    return s2 * w.w12 ** 2 + w.w21 ** 2 + 2.0 * x
