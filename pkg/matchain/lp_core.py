"""
Dense LP Kernel
===============
Two-phase bounded-variable primal simplex on dense numpy arrays.

Problems are stated as

    maximize  c·x
    s.t.      A_i·x  (<= | = | >=)  b_i
              lower <= x <= upper          (infinite bounds allowed)

Inequality rows receive slack columns; phase 1 drives a set of artificial
columns to zero, phase 2 optimizes the real objective with the artificials
fixed at zero. The basis inverse is kept explicitly with rank-one updates and
refactored periodically. Pricing is Dantzig's largest reduced cost until a run
of degenerate pivots exceeds ``bland_after``, after which Bland's smallest-index
rule takes over for the rest of the solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from .errors import DimensionMismatchError, IterationLimitError

logger = logging.getLogger(__name__)

_SENSES = ("<=", "=", ">=")


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LPOptions:
    feasibility_tol: float = 1e-7
    pivot_tol: float = 1e-9
    optimality_tol: float = 1e-9
    max_iterations: int = 50_000
    bland_after: int = 50
    refactor_every: int = 64


@dataclass
class LPProblem:
    """maximize objective_coeffs·x subject to rows and variable bounds."""

    objective_coeffs: np.ndarray
    constraint_matrix: np.ndarray
    constraint_senses: List[str]
    rhs: np.ndarray
    var_lower: np.ndarray
    var_upper: np.ndarray

    def __post_init__(self) -> None:
        self.objective_coeffs = np.asarray(self.objective_coeffs, dtype=float).ravel()
        n = self.objective_coeffs.size
        A = np.asarray(self.constraint_matrix, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        self.constraint_matrix = A
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.constraint_senses = [str(s) for s in self.constraint_senses]
        self.var_lower = np.asarray(self.var_lower, dtype=float).ravel()
        self.var_upper = np.asarray(self.var_upper, dtype=float).ravel()

        if A.ndim != 2 or A.shape[1] != n:
            raise DimensionMismatchError(
                f"constraint matrix has shape {A.shape}, expected (m, {n})"
            )
        m = A.shape[0]
        if self.rhs.size != m or len(self.constraint_senses) != m:
            raise DimensionMismatchError(
                f"{m} constraint rows but {self.rhs.size} rhs entries and "
                f"{len(self.constraint_senses)} senses"
            )
        if self.var_lower.size != n or self.var_upper.size != n:
            raise DimensionMismatchError(
                f"{n} variables but {self.var_lower.size} lower / {self.var_upper.size} upper bounds"
            )
        bad = [s for s in self.constraint_senses if s not in _SENSES]
        if bad:
            raise ValueError(f"unknown constraint sense(s): {sorted(set(bad))}")
        if np.any(self.var_lower > self.var_upper):
            j = int(np.argmax(self.var_lower > self.var_upper))
            raise ValueError(
                f"variable {j}: lower bound {self.var_lower[j]} exceeds upper bound {self.var_upper[j]}"
            )
        if np.any(np.isnan(A)) or np.any(np.isnan(self.rhs)) or np.any(np.isnan(self.objective_coeffs)):
            raise ValueError("LP data contains NaN")

    @property
    def n_vars(self) -> int:
        return self.objective_coeffs.size

    @property
    def n_rows(self) -> int:
        return self.constraint_matrix.shape[0]


@dataclass
class LPSolution:
    status: LPStatus
    objective_value: float
    primal: np.ndarray
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == LPStatus.OPTIMAL


@dataclass
class _Tableau:
    """Working state of the bounded simplex (full column space incl. slacks/artificials)."""

    M: np.ndarray
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    x: np.ndarray
    basis: List[int]
    B_inv: np.ndarray = field(default=None)  # type: ignore[assignment]

    def refactor(self) -> None:
        self.B_inv = np.linalg.inv(self.M[:, self.basis])
        nonbasic = np.ones(self.M.shape[1], dtype=bool)
        nonbasic[self.basis] = False
        residual = self.b - self.M[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.B_inv @ residual


def _standard_form(problem: LPProblem):
    """Append slack columns so every row is an equality."""
    A = problem.constraint_matrix
    m, n = A.shape
    slack_cols = []
    for i, sense in enumerate(problem.constraint_senses):
        if sense == "<=":
            slack_cols.append((i, 1.0))
        elif sense == ">=":
            slack_cols.append((i, -1.0))
    S = np.zeros((m, len(slack_cols)))
    for col, (i, sign) in enumerate(slack_cols):
        S[i, col] = sign
    M = np.hstack([A, S])
    lower = np.concatenate([problem.var_lower, np.zeros(len(slack_cols))])
    upper = np.concatenate([problem.var_upper, np.full(len(slack_cols), np.inf)])
    return M, problem.rhs.copy(), lower, upper


def _initial_nonbasic_values(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    x = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
    return x.astype(float)


def _run_simplex(tab: _Tableau, cost: np.ndarray, opts: LPOptions, phase: int, counter: List[int]) -> LPStatus:
    """Maximize cost·x over the tableau; returns OPTIMAL or UNBOUNDED."""
    m, ncols = tab.M.shape
    is_basic = np.zeros(ncols, dtype=bool)
    is_basic[tab.basis] = True
    since_refactor = 0
    degenerate_run = 0
    use_bland = False
    tol = opts.pivot_tol

    while True:
        if counter[0] >= opts.max_iterations:
            raise IterationLimitError(
                f"simplex phase {phase} exceeded {opts.max_iterations} pivots"
            )

        y = cost[tab.basis] @ tab.B_inv
        reduced = cost - y @ tab.M
        reduced[is_basic] = 0.0

        can_up = (reduced > opts.optimality_tol) & (tab.x < tab.upper - tol)
        can_down = (reduced < -opts.optimality_tol) & (tab.x > tab.lower + tol)
        eligible = np.flatnonzero((can_up | can_down) & ~is_basic)
        if eligible.size == 0:
            return LPStatus.OPTIMAL

        if use_bland:
            entering = int(eligible[0])
        else:
            entering = int(eligible[np.argmax(np.abs(reduced[eligible]))])
        direction = 1.0 if reduced[entering] > 0 else -1.0

        alpha = tab.B_inv @ tab.M[:, entering]
        # basic values move by -direction * theta * alpha
        delta = -direction * alpha

        theta = tab.upper[entering] - tab.lower[entering]
        leave_row = -1
        basis_arr = np.asarray(tab.basis)
        x_B = tab.x[basis_arr]
        lo_B = tab.lower[basis_arr]
        up_B = tab.upper[basis_arr]
        steps = np.full(m, np.inf)
        dec = (delta < -tol) & np.isfinite(lo_B)
        inc = (delta > tol) & np.isfinite(up_B)
        steps[dec] = (x_B[dec] - lo_B[dec]) / -delta[dec]
        steps[inc] = (up_B[inc] - x_B[inc]) / delta[inc]
        steps = np.maximum(steps, 0.0)
        best = float(steps.min())
        if np.isfinite(best) and best < theta - 1e-12:
            # ties on the ratio go to the smallest basic column index
            ties = np.flatnonzero(steps <= best + 1e-12)
            leave_row = int(ties[np.argmin(basis_arr[ties])])
            theta = best

        if not np.isfinite(theta):
            return LPStatus.UNBOUNDED

        counter[0] += 1
        if theta <= 1e-12:
            degenerate_run += 1
            if degenerate_run > opts.bland_after and not use_bland:
                use_bland = True
                logger.debug("[Simplex] switching to Bland's rule after %d degenerate pivots", degenerate_run)
        else:
            degenerate_run = 0

        tab.x[entering] += direction * theta
        tab.x[tab.basis] = x_B + theta * delta

        if leave_row < 0:
            # bound flip: entering variable crosses to its other bound, basis unchanged
            tab.x[entering] = tab.upper[entering] if direction > 0 else tab.lower[entering]
            continue

        leaving = tab.basis[leave_row]
        tab.x[leaving] = tab.lower[leaving] if delta[leave_row] < 0 else tab.upper[leaving]
        tab.basis[leave_row] = entering
        is_basic[leaving] = False
        is_basic[entering] = True

        pivot = alpha[leave_row]
        row = tab.B_inv[leave_row, :] / pivot
        tab.B_inv -= np.outer(alpha, row)
        tab.B_inv[leave_row, :] = row

        since_refactor += 1
        if since_refactor >= opts.refactor_every:
            tab.refactor()
            since_refactor = 0


def solve_lp(problem: LPProblem, options: Optional[LPOptions] = None) -> LPSolution:
    """Solve a dense LP to optimality, or report infeasible / unbounded."""
    opts = options or LPOptions()
    n = problem.n_vars
    m = problem.n_rows
    M, b, lower, upper = _standard_form(problem)
    n_struct = M.shape[1]

    if m == 0:
        c = problem.objective_coeffs
        x = np.where(c > 0, problem.var_upper, np.where(c < 0, problem.var_lower, _initial_nonbasic_values(problem.var_lower, problem.var_upper)))
        if not np.all(np.isfinite(x)):
            return LPSolution(LPStatus.UNBOUNDED, float("inf"), np.full(n, np.nan))
        return LPSolution(LPStatus.OPTIMAL, float(c @ x), x.astype(float))

    x0 = _initial_nonbasic_values(lower, upper)
    residual = b - M @ x0
    signs = np.where(residual >= 0, 1.0, -1.0)
    art = np.diag(signs)
    M_full = np.hstack([M, art])
    lower_full = np.concatenate([lower, np.zeros(m)])
    upper_full = np.concatenate([upper, np.full(m, np.inf)])
    x_full = np.concatenate([x0, np.abs(residual)])
    basis = list(range(n_struct, n_struct + m))

    tab = _Tableau(M_full, b, lower_full, upper_full, x_full, basis)
    tab.refactor()
    counter = [0]

    phase1_cost = np.concatenate([np.zeros(n_struct), -np.ones(m)])
    _run_simplex(tab, phase1_cost, opts, 1, counter)
    tab.refactor()
    infeasibility = float(np.sum(tab.x[n_struct:]))
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    if infeasibility > opts.feasibility_tol * scale:
        logger.debug("[Simplex] infeasible: phase-1 residual %.3e", infeasibility)
        return LPSolution(LPStatus.INFEASIBLE, float("nan"), np.full(n, np.nan), counter[0])

    # artificials stay in the tableau pinned at zero
    tab.upper[n_struct:] = 0.0
    tab.x[n_struct:] = np.minimum(tab.x[n_struct:], 0.0)
    phase2_cost = np.concatenate([problem.objective_coeffs, np.zeros(M_full.shape[1] - n)])
    status = _run_simplex(tab, phase2_cost, opts, 2, counter)
    if status == LPStatus.UNBOUNDED:
        return LPSolution(LPStatus.UNBOUNDED, float("inf"), np.full(n, np.nan), counter[0])

    tab.refactor()
    primal = np.clip(tab.x[:n], problem.var_lower, problem.var_upper)
    value = float(problem.objective_coeffs @ primal)
    logger.debug("[Simplex] optimal %.9g after %d pivots (%d rows, %d cols)", value, counter[0], m, n)
    return LPSolution(LPStatus.OPTIMAL, value, primal, counter[0])


def max_violation(problem: LPProblem, x: np.ndarray) -> float:
    """Largest constraint or bound violation of a candidate point."""
    x = np.asarray(x, dtype=float)
    activity = problem.constraint_matrix @ x
    worst = 0.0
    for i, sense in enumerate(problem.constraint_senses):
        gap = activity[i] - problem.rhs[i]
        if sense == "<=":
            worst = max(worst, gap)
        elif sense == ">=":
            worst = max(worst, -gap)
        else:
            worst = max(worst, abs(gap))
    worst = max(worst, float(np.max(problem.var_lower - x, initial=0.0)))
    worst = max(worst, float(np.max(x - problem.var_upper, initial=0.0)))
    return worst

