"""
Chain Problem Core
==================
The generic problem  maximize f(w)  s.t.  p·T_1···T_N = w,  T_n ∈ 𝒯,
its bilinearized recursion u_n = u_{n-1}·T_n, and interval outer
approximations of the reachable state sets.

Two product rules are supported everywhere:
- ``real``: the ordinary matrix product (finite families, antibiotics).
- ``tilde``: the product of real tilde representations of complex matrices
  with real diagonal and imaginary off-diagonal. Entry (i, j) is
  Σ_l s_ilj·a_il·b_lj with s = -1 exactly when i ≠ l and l ≠ j.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError

logger = logging.getLogger(__name__)

PRODUCTS = ("real", "tilde")


def _sign_tensor(d: int) -> np.ndarray:
    i, l, j = np.meshgrid(np.arange(d), np.arange(d), np.arange(d), indexing="ij")
    return np.where((i != l) & (l != j), -1.0, 1.0)


def tilde_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of tilde representations: tilde(A·B) from tilde(A), tilde(B)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[0]:
        raise DimensionMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    d = b.shape[0]
    if a.shape[0] > d:
        raise DimensionMismatchError("tilde product needs a row count not exceeding the matrix order")
    signs = _sign_tensor(d)[: a.shape[0]]
    return np.einsum("il,lj,ilj->ij", a, b, signs)


def multiply(a: np.ndarray, b: np.ndarray, product: str = "real") -> np.ndarray:
    if product == "real":
        a = np.asarray(a)
        b = np.asarray(b)
        if a.shape[-1] != b.shape[0]:
            raise DimensionMismatchError(f"cannot multiply {a.shape} by {b.shape}")
        return a @ b
    if product == "tilde":
        return tilde_product(a, b)
    raise ValueError(f"unknown product rule {product!r}; expected one of {PRODUCTS}")


# ───────────────────────────────────────────────────────────────
# Objectives
# ───────────────────────────────────────────────────────────────

@dataclass(eq=False)
class LinearObjective:
    """f(w) = w·qᵀ (row-vector states)."""

    q: np.ndarray

    def __post_init__(self) -> None:
        self.q = np.asarray(self.q, dtype=float).ravel()

    def value(self, w: np.ndarray) -> float:
        return float(np.asarray(w, dtype=float).ravel() @ self.q)


@dataclass(eq=False)
class ReflectanceObjective:
    """Thin-film reflectance of the cumulative tilde matrix against a substrate."""

    substrate_index: complex

    def value(self, w: np.ndarray) -> float:
        from .optics import TildeMatrix, reflectance_of

        return reflectance_of(TildeMatrix.from_array(w), self.substrate_index)


ObjectiveSpec = Union[LinearObjective, ReflectanceObjective]


# ───────────────────────────────────────────────────────────────
# Problem and trajectory
# ───────────────────────────────────────────────────────────────

@dataclass(eq=False)
class ChainProblem:
    """maximize objective(p·T_1···T_N) over T_n drawn from ``family``.

    ``family`` is a `FiniteFamily` or any family exposing ``dimension``.
    """

    initial: np.ndarray
    horizon: int
    family: Any
    objective: ObjectiveSpec

    def __post_init__(self) -> None:
        p = np.asarray(self.initial)
        if p.ndim == 1:
            p = p.reshape(1, -1)
        self.initial = p
        if int(self.horizon) < 1:
            raise ValueError(f"horizon must be at least 1, got {self.horizon}")
        self.horizon = int(self.horizon)
        d = int(self.family.dimension)
        if p.ndim != 2 or p.shape[1] != d:
            raise DimensionMismatchError(
                f"initial matrix has shape {p.shape}; family matrices are {d}x{d}"
            )
        if isinstance(self.objective, LinearObjective) and self.objective.q.size != d:
            raise DimensionMismatchError(f"objective vector has length {self.objective.q.size}, expected {d}")

    @property
    def dimension(self) -> int:
        return int(self.family.dimension)

    def restrict(self, state: np.ndarray, steps_done: int) -> "ChainProblem":
        """Sub-problem after ``steps_done`` fixed steps that reached ``state``."""
        if not 0 <= steps_done < self.horizon:
            raise ValueError(f"steps_done must lie in [0, {self.horizon}), got {steps_done}")
        return ChainProblem(np.asarray(state), self.horizon - steps_done, self.family, self.objective)


@dataclass
class ChainTrajectory:
    states: List[np.ndarray]
    choices: List[Any]
    product: str = "real"

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def verify(self, matrices: Sequence[np.ndarray], tol: float = 1e-10) -> bool:
        """Check u_n = u_{n-1}·T_n for every step."""
        if len(matrices) != len(self.states) - 1:
            return False
        for n, T in enumerate(matrices, start=1):
            expected = multiply(self.states[n - 1], T, self.product)
            if not np.allclose(self.states[n], expected, rtol=0.0, atol=tol):
                return False
        return True


def evolve_chain(p: np.ndarray, choices: Sequence[np.ndarray], product: str = "real",
                 labels: Optional[Sequence[Any]] = None) -> ChainTrajectory:
    """Fold the recursion u_n = u_{n-1}·T_n starting from u_0 = p."""
    u = np.asarray(p)
    if u.ndim == 1:
        u = u.reshape(1, -1)
    states = [u.copy()]
    for n, T in enumerate(choices, start=1):
        T = np.asarray(T)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise DimensionMismatchError(f"choice {n} is not a square matrix (shape {T.shape})")
        if T.shape[0] != u.shape[1]:
            raise DimensionMismatchError(
                f"choice {n} is {T.shape[0]}x{T.shape[1]} but the state has {u.shape[1]} columns"
            )
        u = multiply(u, T, product)
        states.append(u)
    return ChainTrajectory(states, list(labels) if labels is not None else list(choices), product)


# ───────────────────────────────────────────────────────────────
# Interval outer approximation
# ───────────────────────────────────────────────────────────────

@dataclass
class IntervalBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        self.lower = np.atleast_2d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_2d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise DimensionMismatchError(f"bounds shaped {self.lower.shape} and {self.upper.shape}")
        if np.any(self.lower > self.upper):
            raise ValueError("interval box has lower > upper")

    @classmethod
    def point(cls, m: np.ndarray) -> "IntervalBox":
        m = np.atleast_2d(np.asarray(m, dtype=float))
        return cls(m.copy(), m.copy())

    @property
    def shape(self):
        return self.lower.shape

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def magnitude(self) -> float:
        return float(np.max(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def contains(self, m: np.ndarray, tol: float = 1e-9) -> bool:
        m = np.atleast_2d(np.asarray(m, dtype=float))
        return bool(np.all(m >= self.lower - tol) and np.all(m <= self.upper + tol))

    def hull(self, other: "IntervalBox") -> "IntervalBox":
        return IntervalBox(np.minimum(self.lower, other.lower), np.maximum(self.upper, other.upper))


FamilyMember = Union[np.ndarray, IntervalBox]


def interval_matmul(box: IntervalBox, member: FamilyMember, product: str = "real") -> IntervalBox:
    """Sound entrywise enclosure of {U·T : U ∈ box, T ∈ member}."""
    if isinstance(member, IntervalBox):
        b_lo, b_hi = member.lower, member.upper
    else:
        b_lo = b_hi = np.atleast_2d(np.asarray(member, dtype=float))
    a_lo, a_hi = box.lower, box.upper
    if a_lo.shape[1] != b_lo.shape[0]:
        raise DimensionMismatchError(f"cannot multiply box {a_lo.shape} by member {b_lo.shape}")
    corners = np.stack([
        a_lo[:, :, None] * b_lo[None, :, :],
        a_lo[:, :, None] * b_hi[None, :, :],
        a_hi[:, :, None] * b_lo[None, :, :],
        a_hi[:, :, None] * b_hi[None, :, :],
    ])
    lo = corners.min(axis=0)
    hi = corners.max(axis=0)
    if product == "tilde":
        signs = _sign_tensor(b_lo.shape[0])[: a_lo.shape[0]]
        lo, hi = np.where(signs > 0, lo, -hi), np.where(signs > 0, hi, -lo)
    elif product != "real":
        raise ValueError(f"unknown product rule {product!r}")
    return IntervalBox(lo.sum(axis=1), hi.sum(axis=1))


def propagate_box(box0: IntervalBox, family_bounds: Sequence[Sequence[FamilyMember]],
                  product: str = "real") -> List[IntervalBox]:
    """Boxes 0..N enclosing every reachable u_n.

    ``family_bounds[n-1]`` lists the members (point matrices or interval boxes)
    allowed at step n; box n is the hull of the one-step images of box n-1.
    """
    boxes = [box0]
    for step, members in enumerate(family_bounds, start=1):
        if len(members) == 0:
            raise ValueError(f"step {step} has no family members")
        images = [interval_matmul(boxes[-1], m, product) for m in members]
        out = images[0]
        for img in images[1:]:
            out = out.hull(img)
        boxes.append(out)
    logger.debug("[ChainCore] propagated %d boxes (max magnitude %.3g)", len(boxes), boxes[-1].magnitude)
    return boxes
