"""
Disjunctive MILP for Finite Families
====================================
Extended formulation of  max (p·T_1···T_N)·qᵀ  with every T_n drawn from a
finite family {T̂_1..T̂_K}:

    u_0 = p
    Σ_k v_{n,k}          = u_n          (copy)
    Σ_k v_{n,k}·T̂_k      = u_{n+1}      (transition)
    Σ_k x_{n,k}          = 1            (choice)
    v_{n,k} ∈ Ū_n · x_{n,k}             (big-M box or simplex)

solved by a depth-first branch-and-bound over the choice sequence with LP
relaxation bounds, value-iteration (DP) bounds, or the smaller of both.
`enumerate_exact` is the exhaustive oracle.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .chain_core import ChainProblem, IntervalBox, LinearObjective, interval_matmul, propagate_box
from .config import DEFAULT_ENUM_BUDGET, DEFAULT_THREADS
from .errors import (
    BudgetExceededError,
    DimensionMismatchError,
    UnsupportedObjectiveError,
)
from .lp_core import LPOptions, LPStatus, solve_lp
from .model import FormulationModel
from .telemetry import emit_telemetry, emitter

logger = logging.getLogger(__name__)

BOUND_MODES = ("lp", "dp", "best")
_TIE_TOL = 1e-12


# ───────────────────────────────────────────────────────────────
# Data types
# ───────────────────────────────────────────────────────────────

@dataclass(eq=False)
class FiniteFamily:
    matrices: np.ndarray
    labels: Optional[List[str]] = None

    def __post_init__(self) -> None:
        mats = [np.asarray(m, dtype=float) for m in self.matrices]
        if not mats:
            raise ValueError("a finite family needs at least one matrix")
        d = mats[0].shape[0] if mats[0].ndim == 2 else -1
        for k, m in enumerate(mats):
            if m.ndim != 2 or m.shape != (d, d):
                raise DimensionMismatchError(
                    f"family matrix {k} has shape {m.shape}; expected square {d}x{d}"
                )
        self.matrices = np.stack(mats)
        if self.labels is None:
            self.labels = [f"T{k + 1}" for k in range(len(mats))]
        elif len(self.labels) != len(mats):
            raise ValueError(f"{len(self.labels)} labels for {len(mats)} matrices")
        else:
            self.labels = [str(x) for x in self.labels]

    @property
    def K(self) -> int:
        return self.matrices.shape[0]

    @property
    def dimension(self) -> int:
        return self.matrices.shape[1]

    def __len__(self) -> int:
        return self.K

    def __getitem__(self, k: int) -> np.ndarray:
        return self.matrices[k]

    @property
    def is_nonnegative(self) -> bool:
        return bool(np.all(self.matrices >= 0.0))

    def is_substochastic(self, tol: float = 1e-12) -> bool:
        return self.is_nonnegative and bool(np.all(self.matrices.sum(axis=2) <= 1.0 + tol))


@dataclass
class BBNode:
    """A fixed prefix of choices and the state it reaches."""

    prefix: Tuple[int, ...]
    state: np.ndarray
    bound: float = math.inf

    @property
    def depth(self) -> int:
        return len(self.prefix)


@dataclass
class BBOptions:
    gap: float = 1e-3
    bound_mode: str = "best"
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    threads: int = DEFAULT_THREADS
    lp_column_limit: int = 6000
    lp_options: LPOptions = field(default_factory=LPOptions)

    def __post_init__(self) -> None:
        if self.bound_mode not in BOUND_MODES:
            raise ValueError(f"bound_mode must be one of {BOUND_MODES}, got {self.bound_mode!r}")
        if self.gap < 0:
            raise ValueError("gap tolerance must be non-negative")
        self.threads = max(1, int(self.threads))


@dataclass
class SolveReport:
    optimal_value: float
    optimal_sequence: List[Any]
    node_count: int
    lp_count: int
    wall_time: float
    gap: float
    status: str = "optimal"
    upper_bound: float = math.nan
    gap_type: str = "absolute"
    method: str = "branch_and_bound"

    @property
    def limit_reached(self) -> bool:
        return self.status in ("node_limit", "time_limit")

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "method": self.method,
            "status": self.status,
            "optimal_value": self.optimal_value,
            "optimal_sequence": list(self.optimal_sequence),
            "upper_bound": self.upper_bound,
            "gap": self.gap,
            "gap_type": self.gap_type,
            "node_count": self.node_count,
            "lp_count": self.lp_count,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


@dataclass(eq=False)
class DisjunctiveFormulation:
    problem: ChainProblem
    box_kind: str
    boxes: List[IntervalBox]
    model: FormulationModel
    u_index: np.ndarray
    v_index: np.ndarray
    x_index: np.ndarray

    @property
    def q(self) -> np.ndarray:
        return self.problem.objective.q

    @property
    def n_columns(self) -> int:
        return self.model.n_vars

    def fix_prefix(self, prefix: Sequence[int]) -> Dict[int, float]:
        """Variable fixings that pin x_{n,·} to the given choices."""
        fix: Dict[int, float] = {}
        for n, k_sel in enumerate(prefix):
            for k in range(self.x_index.shape[1]):
                fix[int(self.x_index[n, k])] = 1.0 if k == k_sel else 0.0
        return fix

    def restricted(self, state: np.ndarray, steps_done: int) -> "DisjunctiveFormulation":
        """Formulation of the remaining steps from the state reached after a prefix."""
        sub = self.problem.restrict(state, steps_done)
        boxes: Union[str, List[IntervalBox]] = "simplex" if self.box_kind == "simplex" else self.boxes[steps_done:]
        return build_extended_formulation(sub, boxes)


# ───────────────────────────────────────────────────────────────
# Formulation
# ───────────────────────────────────────────────────────────────

def _is_simplex_instance(problem: ChainProblem) -> bool:
    p = problem.initial
    return (
        problem.family.is_substochastic()
        and bool(np.all(p >= 0.0))
        and float(p.sum()) <= 1.0 + 1e-12
    )


def build_extended_formulation(problem: ChainProblem,
                               boxes: Union[None, str, Sequence[IntervalBox]] = None) -> DisjunctiveFormulation:
    """Build the disjunctive MILP of a finite-family chain problem.

    ``boxes`` is ``"simplex"`` (copies bounded by the sub-simplex
    {v ≥ 0, Σ v ≤ x}), a sequence of sound boxes Ū_0..Ū_{N-1} (optionally Ū_N),
    or None to choose: simplex for substochastic data, `propagate_box` otherwise.
    """
    if not isinstance(problem.objective, LinearObjective):
        raise UnsupportedObjectiveError(
            f"disjunctive formulation needs a linear objective, got {type(problem.objective).__name__}"
        )
    family = problem.family
    if not isinstance(family, FiniteFamily):
        raise UnsupportedObjectiveError("disjunctive formulation needs a finite family")
    p = problem.initial
    if p.shape[0] != 1:
        raise DimensionMismatchError(f"linear objective needs a row-vector initial state, got shape {p.shape}")
    p = np.asarray(p, dtype=float)[0]
    N, K, d = problem.horizon, family.K, family.dimension

    if boxes is None:
        boxes = "simplex" if _is_simplex_instance(problem) else None
    if boxes == "simplex":
        if not _is_simplex_instance(problem):
            raise ValueError("simplex boxes need a substochastic family and an initial state in the simplex")
        box_kind = "simplex"
        unit = IntervalBox(np.zeros((1, d)), np.ones((1, d)))
        box_list = [unit] * (N + 1)
    else:
        box_kind = "box"
        if boxes is None:
            box_list = propagate_box(IntervalBox.point(p), [list(family.matrices)] * N)
        else:
            box_list = list(boxes)
            if len(box_list) == N:
                last = [interval_matmul(box_list[-1], T) for T in family.matrices]
                hull = last[0]
                for b in last[1:]:
                    hull = hull.hull(b)
                box_list.append(hull)
            if len(box_list) != N + 1:
                raise ValueError(f"expected {N} or {N + 1} boxes, got {len(box_list)}")

    model = FormulationModel(kind="milp", metadata={
        "source": "disjunctive", "horizon": N, "K": K, "d": d, "box_kind": box_kind,
        "family_labels": list(family.labels),
    })
    u_index = np.zeros((N + 1, d), dtype=int)
    v_index = np.zeros((N, K, d), dtype=int)
    x_index = np.zeros((N, K), dtype=int)

    for n in range(N + 1):
        lo, hi = box_list[n].lower[0], box_list[n].upper[0]
        for j in range(d):
            u_index[n, j] = model.add_variable(f"u[{n},{j}]", "continuous", lo[j], hi[j])
    for n in range(N):
        lo, hi = box_list[n].lower[0], box_list[n].upper[0]
        for k in range(K):
            x_index[n, k] = model.add_variable(f"x[{n},{k}]", "binary", 0.0, 1.0)
            for j in range(d):
                v_index[n, k, j] = model.add_variable(
                    f"v[{n},{k},{j}]", "continuous", min(0.0, lo[j]), max(0.0, hi[j])
                )

    for j in range(d):
        model.add_linear({int(u_index[0, j]): 1.0}, "=", float(p[j]), group="initial")

    for n in range(N):
        for j in range(d):
            row = {int(v_index[n, k, j]): 1.0 for k in range(K)}
            row[int(u_index[n, j])] = -1.0
            model.add_linear(row, "=", 0.0, group="copy")
        for j in range(d):
            row: Dict[int, float] = {}
            for k in range(K):
                col = family.matrices[k][:, j]
                for i in range(d):
                    if col[i] != 0.0:
                        row[int(v_index[n, k, i])] = float(col[i])
            row[int(u_index[n + 1, j])] = -1.0
            model.add_linear(row, "=", 0.0, group="transition")
        model.add_linear({int(x_index[n, k]): 1.0 for k in range(K)}, "=", 1.0, group="choice")

        lo, hi = box_list[n].lower[0], box_list[n].upper[0]
        for k in range(K):
            if box_kind == "simplex":
                row = {int(v_index[n, k, j]): 1.0 for j in range(d)}
                row[int(x_index[n, k])] = -1.0
                model.add_linear(row, "<=", 0.0, group="simplex")
            else:
                for j in range(d):
                    model.add_linear({int(v_index[n, k, j]): 1.0, int(x_index[n, k]): -float(hi[j])},
                                     "<=", 0.0, group="big_m")
                    model.add_linear({int(v_index[n, k, j]): 1.0, int(x_index[n, k]): -float(lo[j])},
                                     ">=", 0.0, group="big_m")

    q = problem.objective.q
    model.set_objective("max", {int(u_index[N, j]): float(q[j]) for j in range(d)})
    logger.debug("[Disjunctive] built %r", model)
    return DisjunctiveFormulation(problem, box_kind, box_list, model, u_index, v_index, x_index)


# ───────────────────────────────────────────────────────────────
# Bounds
# ───────────────────────────────────────────────────────────────

def lp_bound(formulation: DisjunctiveFormulation, node: BBNode,
             options: Optional[LPOptions] = None) -> float:
    """LP relaxation bound of the best completion of ``node``."""
    problem = formulation.problem
    depth = node.depth
    if depth > problem.horizon:
        raise ValueError(f"prefix of length {depth} exceeds horizon {problem.horizon}")
    state = np.asarray(node.state, dtype=float).reshape(1, -1)
    if depth == problem.horizon:
        return float(state[0] @ formulation.q)
    sub = formulation if depth == 0 else formulation.restricted(state, depth)
    sol = solve_lp(sub.model.to_lp(), options)
    if sol.status == LPStatus.INFEASIBLE:
        return -math.inf
    if sol.status == LPStatus.UNBOUNDED:
        return math.inf
    return sol.objective_value


def dp_value_vectors(family: FiniteFamily, q: np.ndarray, N: int) -> np.ndarray:
    """β_N = q, β_{n-1} = max_k T̂_k·β_n (componentwise); rows 0..N."""
    if not family.is_nonnegative:
        raise ValueError("DP bound needs entrywise nonnegative matrices")
    q = np.asarray(q, dtype=float).ravel()
    betas = np.zeros((N + 1, family.dimension))
    betas[N] = q
    for n in range(N, 0, -1):
        betas[n - 1] = np.max(family.matrices @ betas[n], axis=0)
    return betas


def dp_bound(family: FiniteFamily, q: np.ndarray, N: int, node: BBNode) -> float:
    """Adaptive value-iteration bound u_ℓ·β_ℓ of the best completion of ``node``."""
    state = np.asarray(node.state, dtype=float).ravel()
    if np.any(state < 0):
        raise ValueError("DP bound needs a nonnegative state")
    betas = dp_value_vectors(family, q, N)
    return float(state @ betas[node.depth])


# ───────────────────────────────────────────────────────────────
# Branch-and-bound
# ───────────────────────────────────────────────────────────────

def _better(value: float, seq: Tuple[int, ...], inc_value: float, inc_seq: Optional[Tuple[int, ...]]) -> bool:
    if inc_seq is None or value > inc_value + _TIE_TOL:
        return True
    return abs(value - inc_value) <= _TIE_TOL and seq < inc_seq


def _prunable(bound: float, prefix: Tuple[int, ...], inc_value: float,
              inc_seq: Optional[Tuple[int, ...]], gap: float) -> bool:
    """True when no completion of ``prefix`` can replace the incumbent.

    With a zero gap a prefix that is lexicographically no larger than the
    incumbent's survives a tied bound, so the smallest optimal sequence wins.
    """
    if bound > inc_value + gap:
        return False
    if gap > 0.0 or inc_seq is None or bound < inc_value - _TIE_TOL:
        return True
    return len(prefix) >= len(inc_seq) or prefix > inc_seq[:len(prefix)]


def solve_bb(problem: ChainProblem, options: Optional[BBOptions] = None) -> SolveReport:
    """Depth-first branch-and-bound over the choice sequence."""
    opts = options or BBOptions()
    start = time.perf_counter()
    family: FiniteFamily = problem.family
    if not isinstance(problem.objective, LinearObjective):
        raise UnsupportedObjectiveError("solve_bb needs a linear objective")
    if not isinstance(family, FiniteFamily):
        raise UnsupportedObjectiveError("solve_bb needs a finite family")
    p = np.asarray(problem.initial, dtype=float)
    if p.shape[0] != 1:
        raise DimensionMismatchError(f"solve_bb needs a row-vector initial state, got shape {p.shape}")
    p = p[0]
    N, K = problem.horizon, family.K
    q = problem.objective.q
    T = family.matrices

    dp_ok = family.is_nonnegative and bool(np.all(p >= 0))
    if opts.bound_mode == "dp" and not dp_ok:
        raise ValueError("bound_mode 'dp' needs nonnegative matrices and initial state")
    betas = dp_value_vectors(family, q, N) if dp_ok else None
    use_lp = opts.bound_mode in ("lp", "best")
    formulation = build_extended_formulation(problem) if use_lp else None

    if opts.bound_mode == "best" and formulation is not None and formulation.n_columns > opts.lp_column_limit:
        logger.info("[BranchAndBound] LP has %d columns (> %d); best-of-both uses DP only",
                    formulation.n_columns, opts.lp_column_limit)
        use_lp = betas is None

    # greedy dive for a first incumbent
    state = p.copy()
    greedy: List[int] = []
    for n in range(N):
        images = state @ T
        scores = images @ betas[n + 1] if betas is not None else images @ q
        k = int(np.argmax(scores))
        greedy.append(k)
        state = images[k]
    inc_value = float(state @ q)
    inc_seq: Optional[Tuple[int, ...]] = tuple(greedy)
    lp_count = 0
    telemetry_on = emitter.active

    def evaluate(child: Tuple[Tuple[int, ...], np.ndarray], incumbent: float) -> Tuple[float, bool]:
        prefix, st = child
        depth = len(prefix)
        dp_val = float(st @ betas[depth]) if betas is not None else math.inf
        if opts.bound_mode == "dp" or not use_lp:
            return dp_val, False
        if opts.bound_mode == "best" and dp_val <= incumbent + opts.gap:
            return dp_val, False
        lp_val = lp_bound(formulation, BBNode(prefix, st), opts.lp_options)
        if opts.bound_mode == "lp":
            return lp_val, True
        return min(dp_val, lp_val), True

    pool = ThreadPoolExecutor(max_workers=opts.threads) if opts.threads > 1 else None
    try:
        root_bound, used = evaluate(((), p), inc_value) if N > 0 else (inc_value, False)
        lp_count += int(used)
        stack: List[BBNode] = [BBNode((), p, root_bound)]
        nodes = 0
        best_pruned = -math.inf
        status = "optimal"

        while stack:
            if opts.time_limit is not None and time.perf_counter() - start > opts.time_limit:
                status = "time_limit"
                break
            node = stack.pop()
            if _prunable(node.bound, node.prefix, inc_value, inc_seq, opts.gap):
                best_pruned = max(best_pruned, node.bound)
                continue
            if opts.node_limit is not None and nodes >= opts.node_limit:
                stack.append(node)
                status = "node_limit"
                break
            nodes += 1
            if telemetry_on:
                emit_telemetry("BranchAndBound", "node", {
                    "prefix": list(node.prefix), "bound": node.bound, "depth": node.depth,
                })

            images = node.state @ T
            children = [(node.prefix + (k,), images[k]) for k in range(K)]

            if node.depth + 1 == N:
                for prefix, st in children:
                    value = float(st @ q)
                    if _better(value, prefix, inc_value, inc_seq):
                        inc_value, inc_seq = value, prefix
                        logger.debug("[BranchAndBound] incumbent %.12g %s", value, prefix)
                        if telemetry_on:
                            emit_telemetry("BranchAndBound", "incumbent", {"value": value, "sequence": list(prefix)})
                continue

            snapshot = inc_value
            if pool is not None:
                results = list(pool.map(lambda c: evaluate(c, snapshot), children))
            else:
                results = [evaluate(c, snapshot) for c in children]

            ranked = []
            for (prefix, st), (bound, used) in zip(children, results):
                lp_count += int(used)
                if _prunable(bound, prefix, inc_value, inc_seq, opts.gap):
                    best_pruned = max(best_pruned, bound)
                    continue
                score = float(st @ betas[node.depth + 1]) if betas is not None else bound
                ranked.append((-score, prefix[-1], BBNode(prefix, st, bound)))
            ranked.sort(key=lambda item: (item[0], item[1]))
            for _, _, child in reversed(ranked):
                stack.append(child)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    open_bound = max((n.bound for n in stack), default=-math.inf) if status != "optimal" else -math.inf
    upper = max(inc_value, best_pruned, open_bound)
    gap = max(0.0, upper - inc_value)
    wall = time.perf_counter() - start
    report = SolveReport(
        optimal_value=inc_value,
        optimal_sequence=list(inc_seq or ()),
        node_count=nodes,
        lp_count=lp_count,
        wall_time=wall,
        gap=gap,
        status=status,
        upper_bound=upper,
    )
    logger.info("[BranchAndBound] %s value=%.12g nodes=%d lps=%d gap=%.3g (%.2fs)",
                status, inc_value, nodes, lp_count, gap, wall)
    if telemetry_on:
        emit_telemetry("BranchAndBound", "done", report.to_dict())
    return report


# ───────────────────────────────────────────────────────────────
# Exhaustive oracle
# ───────────────────────────────────────────────────────────────

_BLOCK_ROWS = 1 << 16


def _expand(states: np.ndarray, T: np.ndarray, levels: int) -> np.ndarray:
    for _ in range(levels):
        m, d = states.shape
        states = np.einsum("md,kde->mke", states, T).reshape(m * T.shape[0], d)
    return states


def enumerate_exact(problem: ChainProblem, budget: Optional[int] = None) -> SolveReport:
    """Evaluate every choice sequence; the first maximum in lexicographic order wins."""
    start = time.perf_counter()
    family = problem.family
    if not isinstance(family, FiniteFamily) or not isinstance(problem.objective, LinearObjective):
        raise UnsupportedObjectiveError("enumeration needs a finite family and a linear objective")
    limit = DEFAULT_ENUM_BUDGET if budget is None else int(budget)
    N, K = problem.horizon, family.K
    total = K ** N
    if total > limit:
        raise BudgetExceededError(f"{K}^{N} = {total} sequences exceeds the enumeration budget {limit}")

    T = family.matrices
    q = problem.objective.q
    p = np.asarray(problem.initial, dtype=float)
    if p.shape[0] != 1:
        raise DimensionMismatchError(f"enumeration needs a row-vector initial state, got shape {p.shape}")

    tail = 0
    while tail < N and K ** (tail + 1) <= _BLOCK_ROWS:
        tail += 1
    tail = max(tail, 1)
    head = N - tail

    best_value = -math.inf
    best_seq: Tuple[int, ...] = ()
    prefix_states = [p[0]]
    previous: Tuple[int, ...] = ()
    for prefix in itertools.product(range(K), repeat=head):
        # reuse the longest shared prefix of the previous head
        shared = 0
        while shared < len(previous) and previous[shared] == prefix[shared]:
            shared += 1
        del prefix_states[shared + 1:]
        for level in range(shared, head):
            prefix_states.append(prefix_states[-1] @ T[prefix[level]])
        previous = prefix

        leaves = _expand(prefix_states[-1].reshape(1, -1), T, tail)
        values = leaves @ q
        # first leaf within tolerance of the block maximum
        i = int(np.flatnonzero(values >= values.max() - _TIE_TOL)[0])
        if values[i] > best_value + _TIE_TOL:
            best_value = float(values[i])
            digits = []
            for _ in range(tail):
                i, k = divmod(i, K)
                digits.append(k)
            best_seq = prefix + tuple(reversed(digits))

    wall = time.perf_counter() - start
    logger.info("[Enumerate] %d sequences, best %.12g %s (%.2fs)", total, best_value, best_seq, wall)
    return SolveReport(
        optimal_value=best_value,
        optimal_sequence=list(best_seq),
        node_count=total,
        lp_count=0,
        wall_time=wall,
        gap=0.0,
        status="optimal",
        upper_bound=best_value,
        method="enumeration",
    )
