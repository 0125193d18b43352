"""
Antibiotics Time Machine
========================
Genotypes are bit-strings of length g (d = 2^g states). Under strong selection
and weak mutation a population only moves to a genotype one bit-flip away, so
every drug k yields a row-substochastic transition matrix T̂_k supported on
Hamming-distance-1 pairs and the diagonal.

Genotype strings are little-endian: character i is bit i of the row index, so
"100" is index 1 and "001" is index 4. The wild type "00…0" is index 0.

Transition models from growth rates ω[k][j]:
- CPM: probability ∝ fitness gain max(0, ω_k,j' − ω_k,j) over neighbours.
- EPM: uniform over strictly improving neighbours.
A genotype strictly fitter than all its neighbours is absorbing (self-loop 1).
When neither rule applies the row is left empty (``strict``) or gets its
missing mass on the diagonal (``absorb``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .chain_core import ChainProblem, LinearObjective
from .disjunctive_milp import BBOptions, FiniteFamily, SolveReport, enumerate_exact, solve_bb
from .errors import DataFormatError, DimensionMismatchError

logger = logging.getLogger(__name__)

TransitionMatrix = np.ndarray
Genotype = Union[int, str]

MAX_ALLELES = 12
MODES = ("strict", "absorb")
SYNTHETIC_LEVELS = (0.0, 1.0, 2.0)
SYNTHETIC_PROBS = (1.0 / 3.0, 1.0 / 6.0, 1.0 / 2.0)


# ───────────────────────────────────────────────────────────────
# Genotype lattice
# ───────────────────────────────────────────────────────────────

def genotype_index(label: str) -> int:
    if not label or any(ch not in "01" for ch in label):
        raise DataFormatError(f"genotype {label!r} must be a non-empty string of 0/1 characters")
    return sum(1 << i for i, ch in enumerate(label) if ch == "1")


def genotype_label(j: int, g: int) -> str:
    return "".join("1" if (j >> i) & 1 else "0" for i in range(g))


def hamming_distance(a: int, b: int) -> int:
    return bin(int(a) ^ int(b)).count("1")


@dataclass(frozen=True)
class GenotypeSpace:
    g: int

    def __post_init__(self) -> None:
        if self.g < 1:
            raise ValueError(f"allele count must be positive, got {self.g}")

    @property
    def d(self) -> int:
        return 1 << self.g

    @property
    def wild_type(self) -> int:
        return 0

    def resolve(self, genotype: Genotype) -> int:
        if isinstance(genotype, str):
            if len(genotype) != self.g:
                raise DataFormatError(f"genotype {genotype!r} has length {len(genotype)}, expected {self.g}")
            return genotype_index(genotype)
        j = int(genotype)
        if not 0 <= j < self.d:
            raise ValueError(f"genotype index {j} outside [0, {self.d})")
        return j

    def label(self, j: int) -> str:
        return genotype_label(j, self.g)

    def neighbor_array(self) -> np.ndarray:
        """(d, g) array; row j lists j with each bit flipped."""
        j = np.arange(self.d)[:, None]
        return j ^ (1 << np.arange(self.g))[None, :]

    def neighbor_pairs(self) -> List[Tuple[int, int]]:
        return [(j, j ^ (1 << i)) for j in range(self.d) for i in range(self.g) if j < j ^ (1 << i)]


def neighbors(space: GenotypeSpace, j: Genotype) -> Set[int]:
    """Genotypes exactly one bit-flip away from ``j``."""
    idx = space.resolve(j)
    return {idx ^ (1 << i) for i in range(space.g)}


# ───────────────────────────────────────────────────────────────
# Growth data and transition models
# ───────────────────────────────────────────────────────────────

@dataclass(eq=False)
class GrowthTable:
    rates: np.ndarray
    drugs: Optional[List[str]] = None

    def __post_init__(self) -> None:
        rates = np.asarray(self.rates, dtype=float)
        if rates.ndim != 2:
            raise DimensionMismatchError(f"growth table must be K x d, got shape {rates.shape}")
        K, d = rates.shape
        if K < 1 or d < 2 or d & (d - 1):
            raise DimensionMismatchError(f"growth table has {d} genotypes; expected a power of two (>= 2)")
        if not np.all(np.isfinite(rates)):
            raise DataFormatError("growth table contains non-finite rates")
        self.rates = rates
        if self.drugs is None:
            self.drugs = [f"drug{k + 1}" for k in range(K)]
        elif len(self.drugs) != K:
            raise DimensionMismatchError(f"{len(self.drugs)} drug names for {K} rows")

    @property
    def K(self) -> int:
        return self.rates.shape[0]

    @property
    def d(self) -> int:
        return self.rates.shape[1]

    @property
    def space(self) -> GenotypeSpace:
        return GenotypeSpace(self.d.bit_length() - 1)


def _build(growth: GrowthTable, model: str, mode: str) -> List[TransitionMatrix]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    space = growth.space
    nb = space.neighbor_array()
    rows = np.arange(space.d)
    out: List[TransitionMatrix] = []
    for k in range(growth.K):
        w = growth.rates[k]
        gains = np.maximum(0.0, w[nb] - w[:, None])
        weights = gains if model == "cpm" else (gains > 0).astype(float)
        totals = weights.sum(axis=1)
        T = np.zeros((space.d, space.d))
        moving = totals > 0
        probs = np.divide(weights, totals[:, None], out=np.zeros_like(weights), where=moving[:, None])
        np.put_along_axis(T, nb, probs, axis=1)
        absorbing = np.all(w[:, None] > w[nb], axis=1)
        T[rows[absorbing], rows[absorbing]] = 1.0
        if mode == "absorb":
            stuck = ~moving & ~absorbing
            T[rows[stuck], rows[stuck]] = 1.0
        out.append(T)
    logger.debug("[TimeMachine] built %d %s matrices (d=%d, mode=%s)", len(out), model.upper(), space.d, mode)
    return out


def build_cpm(growth: GrowthTable, mode: str = "strict") -> List[TransitionMatrix]:
    """Correlated probability model: moves ∝ positive fitness gain."""
    return _build(growth, "cpm", mode)


def build_epm(growth: GrowthTable, mode: str = "strict") -> List[TransitionMatrix]:
    """Equal probability model: uniform over strictly improving neighbours."""
    return _build(growth, "epm", mode)


def build_model(growth: GrowthTable, model: str, mode: str = "strict") -> List[TransitionMatrix]:
    model = model.lower()
    if model not in ("cpm", "epm"):
        raise ValueError(f"model must be 'cpm' or 'epm', got {model!r}")
    return _build(growth, model, mode)


def gen_synthetic(g: int, K: int, seed: Optional[int] = None) -> GrowthTable:
    """Random growth rates in {0, 1, 2} with probabilities 1/3, 1/6, 1/2."""
    if not 1 <= g <= MAX_ALLELES:
        raise ValueError(f"allele count must lie in [1, {MAX_ALLELES}], got {g}")
    if K < 1:
        raise ValueError(f"drug count must be positive, got {K}")
    rng = np.random.default_rng(seed)
    rates = rng.choice(np.array(SYNTHETIC_LEVELS), size=(K, 1 << g), p=list(SYNTHETIC_PROBS))
    return GrowthTable(rates, [f"drug{k + 1}" for k in range(K)])


# ───────────────────────────────────────────────────────────────
# Small illustrative instance
# ───────────────────────────────────────────────────────────────

_FIGURE_ARCS: Dict[str, Dict[str, Sequence[str]]] = {
    "Blue": {
        "000": ("100", "010", "001"), "100": ("110",), "010": ("110",), "001": ("101",),
        "110": ("110",), "101": ("100",), "011": ("010", "001", "111"), "111": ("110", "101"),
    },
    "Red": {
        "000": ("001",), "100": ("000", "110", "101"), "010": ("000", "110", "011"), "001": ("011",),
        "110": ("111",), "101": ("001", "111"), "011": ("011",), "111": ("011",),
    },
}


def figure_instance() -> Tuple[GenotypeSpace, FiniteFamily]:
    """Three alleles, two drugs (Blue, Red); uniform probabilities over the drawn moves."""
    space = GenotypeSpace(3)
    mats = []
    for drug, arcs in _FIGURE_ARCS.items():
        T = np.zeros((space.d, space.d))
        for src, dsts in arcs.items():
            for dst in dsts:
                T[genotype_index(src), genotype_index(dst)] = 1.0 / len(dsts)
        mats.append(T)
    return space, FiniteFamily(mats, list(_FIGURE_ARCS))


# ───────────────────────────────────────────────────────────────
# Solve
# ───────────────────────────────────────────────────────────────

def atm_problem(matrices: Union[FiniteFamily, Sequence[TransitionMatrix]], initial: Genotype,
                target: Genotype, N: int, labels: Optional[List[str]] = None) -> ChainProblem:
    family = matrices if isinstance(matrices, FiniteFamily) else FiniteFamily(list(matrices), labels)
    d = family.dimension
    space = GenotypeSpace(d.bit_length() - 1)
    if space.d != d:
        raise DimensionMismatchError(f"transition matrices are {d}x{d}; expected 2^g states")
    if not family.is_substochastic(1e-12):
        raise ValueError("transition matrices must be nonnegative with row sums at most 1")
    p = np.zeros(d)
    p[space.resolve(initial)] = 1.0
    q = np.zeros(d)
    q[space.resolve(target)] = 1.0
    return ChainProblem(p, N, family, LinearObjective(q))


def solve_atm(matrices: Union[FiniteFamily, Sequence[TransitionMatrix]], initial: Genotype,
              target: Genotype = 0, N: int = 1, options: Optional[BBOptions] = None,
              method: str = "bb", labels: Optional[List[str]] = None,
              budget: Optional[int] = None) -> SolveReport:
    """Maximize the probability of reaching ``target`` from ``initial`` after N drugs."""
    problem = atm_problem(matrices, initial, target, N, labels)
    if method == "bb":
        return solve_bb(problem, options)
    if method == "enumerate":
        return enumerate_exact(problem, budget)
    raise ValueError(f"method must be 'bb' or 'enumerate', got {method!r}")
