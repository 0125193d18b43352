"""Disjunctive formulation, LP/DP bounds and the branch-and-bound, checked against enumeration."""

import itertools
import math

import numpy as np
import pytest

from matchain.chain_core import ChainProblem, IntervalBox, LinearObjective, evolve_chain, propagate_box
from matchain.disjunctive_milp import (
    BBNode,
    BBOptions,
    FiniteFamily,
    build_extended_formulation,
    dp_bound,
    dp_value_vectors,
    enumerate_exact,
    lp_bound,
    solve_bb,
)
from matchain.errors import BudgetExceededError, UnsupportedObjectiveError
from matchain.lp_core import LPStatus, solve_lp
from matchain.telemetry import drain, emitter
from matchain.timemachine import atm_problem, build_epm, gen_synthetic, hamming_distance


def synthetic_problem(seed, g, K, N, initial=None, target=0):
    growth = gen_synthetic(g, K, seed)
    mats = build_epm(growth)
    start = (1 << g) - 1 if initial is None else initial
    return atm_problem(mats, start, target, N)


def exact_completion(problem, prefix):
    traj = evolve_chain(problem.initial, [problem.family[k] for k in prefix])
    if len(prefix) == problem.horizon:
        return problem.objective.value(traj.final)
    return enumerate_exact(problem.restrict(traj.final, len(prefix))).optimal_value


def sequence_value(problem, seq):
    traj = evolve_chain(problem.initial, [problem.family[k] for k in seq])
    return problem.objective.value(traj.final)


class TestFigureInstance:
    """Three alleles, drugs Blue and Red, from 111 towards the wild type."""

    @pytest.fixture
    def problem(self, figure):
        _, family = figure
        return atm_problem(family, "111", "000", 3)

    def test_enumeration_values(self, problem):
        values = {seq: sequence_value(problem, seq) for seq in itertools.product(range(2), repeat=3)}
        assert values[(0, 0, 1)] == pytest.approx(1 / 6)
        assert values[(1, 0, 1)] == pytest.approx(1 / 9)
        for seq, value in values.items():
            if seq not in ((0, 0, 1), (1, 0, 1)):
                assert value == 0.0

    def test_enumerate_exact(self, problem):
        report = enumerate_exact(problem)
        assert report.optimal_value == pytest.approx(1 / 6)
        assert report.optimal_sequence == [0, 0, 1]
        assert report.node_count == 8
        assert report.method == "enumeration"

    @pytest.mark.parametrize("mode", ["lp", "dp", "best"])
    def test_solve_bb(self, problem, mode):
        report = solve_bb(problem, BBOptions(gap=1e-9, bound_mode=mode))
        assert report.status == "optimal"
        assert report.optimal_value == pytest.approx(1 / 6, abs=1e-12)
        assert report.optimal_sequence == [0, 0, 1]
        assert report.upper_bound >= report.optimal_value
        if mode == "dp":
            assert report.lp_count == 0
        if mode == "lp":
            assert report.lp_count > 0

    def test_formulation_is_simplex_kind(self, problem):
        formulation = build_extended_formulation(problem)
        assert formulation.box_kind == "simplex"
        model = formulation.model
        N, K, d = 3, 2, 8
        assert len(model.binary_indices) == N * K
        assert model.n_vars == (N + 1) * d + N * K * (d + 1)
        assert model.count_group("initial") == d
        assert model.count_group("copy") == N * d
        assert model.count_group("transition") == N * d
        assert model.count_group("choice") == N
        assert model.count_group("simplex") == N * K

    def test_fixed_binaries_reproduce_the_chain(self, problem):
        formulation = build_extended_formulation(problem)
        for seq in itertools.product(range(2), repeat=3):
            sol = solve_lp(formulation.model.to_lp(formulation.fix_prefix(seq)))
            assert sol.status == LPStatus.OPTIMAL
            assert sol.objective_value == pytest.approx(sequence_value(problem, seq), abs=1e-9)


class TestBoundDominance:
    @pytest.mark.parametrize("seed", [3, 11, 29])
    def test_every_node_of_a_small_tree(self, seed):
        problem = synthetic_problem(seed, g=3, K=3, N=4)
        formulation = build_extended_formulation(problem)
        q = problem.objective.q
        for depth in range(problem.horizon):
            for prefix in itertools.product(range(3), repeat=depth):
                state = evolve_chain(problem.initial, [problem.family[k] for k in prefix]).final[0]
                node = BBNode(prefix, state)
                exact = exact_completion(problem, prefix)
                assert lp_bound(formulation, node) >= exact - 1e-9
                assert dp_bound(problem.family, q, problem.horizon, node) >= exact - 1e-12

    def test_box_formulation_bounds(self, rng):
        # entries above the simplex force propagated boxes instead of the simplex
        mats = rng.uniform(0, 0.7, size=(2, 3, 3))
        family = FiniteFamily(list(mats))
        problem = ChainProblem(np.array([1.0, 0.0, 0.0]), 3, family, LinearObjective([0.0, 1.0, 0.5]))
        formulation = build_extended_formulation(problem)
        assert formulation.box_kind == "box"
        assert formulation.model.count_group("big_m") == 2 * 3 * 2 * 3
        exact = enumerate_exact(problem).optimal_value
        assert lp_bound(formulation, BBNode((), problem.initial[0])) >= exact - 1e-9
        report = solve_bb(problem, BBOptions(gap=1e-12, bound_mode="lp"))
        assert report.optimal_value == pytest.approx(exact, abs=1e-9)

    def test_explicit_boxes(self, rng):
        mats = rng.uniform(0, 0.5, size=(2, 2, 2))
        family = FiniteFamily(list(mats))
        problem = ChainProblem(np.array([0.3, 0.7]), 2, family, LinearObjective([1.0, 0.0]))
        boxes = propagate_box(IntervalBox.point(problem.initial[0]), [list(mats)] * 2)
        formulation = build_extended_formulation(problem, boxes[:2])
        assert formulation.box_kind == "box"
        assert len(formulation.boxes) == 3
        for k, j in itertools.product(range(2), range(2)):
            assert formulation.boxes[2].contains(problem.initial @ mats[k] @ mats[j])

    def test_dp_value_vectors_are_pointwise_maxima(self, figure):
        _, family = figure
        q = np.zeros(8)
        q[0] = 1.0
        betas = dp_value_vectors(family, q, 3)
        assert np.allclose(betas[3], q)
        assert np.allclose(betas[2], np.max(family.matrices @ q, axis=0))
        assert betas[0][7] >= 1 / 6


class TestSolverAgainstEnumeration:
    def test_fifty_synthetic_epm_instances(self):
        rng = np.random.default_rng(8)
        for i in range(50):
            g = int(rng.integers(2, 5))
            K = int(rng.integers(2, 6))
            N = int(rng.integers(1, 7))
            initial = int(rng.integers(1 << g))
            problem = synthetic_problem(1000 + i, g, K, N, initial=initial)
            oracle = enumerate_exact(problem)
            report = solve_bb(problem, BBOptions(gap=1e-10, bound_mode="dp"))
            assert report.optimal_value == pytest.approx(oracle.optimal_value, abs=1e-9), (i, g, K, N)
            assert sequence_value(problem, report.optimal_sequence) == pytest.approx(report.optimal_value, abs=1e-12)

    @pytest.mark.parametrize("mode", ["lp", "best"])
    def test_lp_modes_on_small_instances(self, mode):
        for seed in range(6):
            problem = synthetic_problem(200 + seed, g=3, K=3, N=3, initial=seed % 8)
            oracle = enumerate_exact(problem)
            report = solve_bb(problem, BBOptions(gap=1e-10, bound_mode=mode))
            assert report.optimal_value == pytest.approx(oracle.optimal_value, abs=1e-9)

    def test_structural_zeros(self):
        for seed in range(10):
            g = 4
            problem_full = synthetic_problem(500 + seed, g, 4, 1, initial=0b1111)
            h = hamming_distance(0b1111, 0)
            for N in range(1, h):
                problem = atm_problem(problem_full.family, 0b1111, 0, N)
                assert solve_bb(problem, BBOptions(bound_mode="dp")).optimal_value == 0.0
                assert enumerate_exact(problem).optimal_value == 0.0

    def test_ties_resolve_lexicographically(self):
        # both drugs are the identity: every sequence scores 1
        family = FiniteFamily([np.eye(2), np.eye(2)])
        problem = ChainProblem(np.array([1.0, 0.0]), 3, family, LinearObjective([1.0, 0.0]))
        assert enumerate_exact(problem).optimal_sequence == [0, 0, 0]
        assert solve_bb(problem, BBOptions(gap=0.0, bound_mode="dp")).optimal_sequence == [0, 0, 0]

    def test_dyadic_ties_match_enumeration(self):
        # halves and ones keep every product exact, so tied sequences are common
        rows = [r for r in itertools.product((0.0, 0.5, 1.0), repeat=3) if sum(r) <= 1.0]
        for seed in range(300):
            rng = np.random.default_rng(seed)
            mats = [np.array([rows[i] for i in rng.integers(len(rows), size=3)]) for _ in range(3)]
            q = rng.integers(0, 2, size=3).astype(float)
            problem = ChainProblem(np.array([1.0, 0.0, 0.0]), 3, FiniteFamily(mats), LinearObjective(q))
            oracle = enumerate_exact(problem)
            report = solve_bb(problem, BBOptions(gap=0.0, bound_mode="dp"))
            assert report.optimal_value == oracle.optimal_value, seed
            assert report.optimal_sequence == oracle.optimal_sequence, seed

    def test_near_ties_prefer_the_first_sequence(self):
        # products differ only by rounding noise, far below the tie tolerance
        family = FiniteFamily([np.eye(1), np.eye(1) * (1.0 + 1e-15)])
        problem = ChainProblem(np.array([1.0]), 3, family, LinearObjective([1.0]))
        assert enumerate_exact(problem).optimal_sequence == [0, 0, 0]
        assert solve_bb(problem, BBOptions(gap=0.0, bound_mode="dp")).optimal_sequence == [0, 0, 0]

    def test_near_ties_across_enumeration_blocks(self):
        family = FiniteFamily([np.eye(1), np.eye(1) * (1.0 + 1e-15)])
        problem = ChainProblem(np.array([1.0]), 17, family, LinearObjective([1.0]))
        report = enumerate_exact(problem, budget=1 << 17)
        assert report.optimal_sequence == [0] * 17
        assert report.optimal_value == 1.0


class TestDeterminismAndLimits:
    def test_thread_count_does_not_change_the_result(self):
        problem = synthetic_problem(77, g=3, K=4, N=4, initial=6)
        reports = [solve_bb(problem, BBOptions(gap=1e-9, bound_mode="lp", threads=t)) for t in (1, 4)]
        a, b = reports
        assert a.optimal_value == b.optimal_value
        assert a.optimal_sequence == b.optimal_sequence
        assert a.node_count == b.node_count
        assert a.lp_count == b.lp_count

    def test_node_limit_reports_an_honest_gap(self):
        problem = synthetic_problem(5, g=4, K=5, N=6, initial=0b1011)
        exact = enumerate_exact(problem).optimal_value
        report = solve_bb(problem, BBOptions(gap=0.0, bound_mode="dp", node_limit=2))
        if report.status == "node_limit":
            assert report.limit_reached
        assert report.optimal_value <= exact + 1e-12
        assert report.upper_bound >= exact - 1e-12
        assert report.gap == pytest.approx(report.upper_bound - report.optimal_value)

    def test_time_limit_status(self):
        problem = synthetic_problem(6, g=4, K=5, N=6, initial=0b1111)
        report = solve_bb(problem, BBOptions(gap=0.0, bound_mode="dp", time_limit=0.0))
        assert report.status in ("time_limit", "optimal")
        assert report.upper_bound >= report.optimal_value

    def test_enumeration_budget(self, figure):
        _, family = figure
        problem = atm_problem(family, "111", "000", 5)
        with pytest.raises(BudgetExceededError):
            enumerate_exact(problem, budget=10)

    def test_nonlinear_objective_rejected(self, figure):
        from matchain.chain_core import ReflectanceObjective

        _, family = figure
        problem = ChainProblem(np.eye(8)[7], 2, family, ReflectanceObjective(2 + 1j))
        with pytest.raises(UnsupportedObjectiveError):
            solve_bb(problem)
        with pytest.raises(UnsupportedObjectiveError):
            build_extended_formulation(problem)

    def test_bad_bound_mode(self):
        with pytest.raises(ValueError):
            BBOptions(bound_mode="mip")


class TestNodeLogAudit:
    """Every logged node bound dominates the exact best completion."""

    @staticmethod
    def logged_nodes(problem, options):
        q = emitter.subscribe()
        try:
            solve_bb(problem, options)
        finally:
            emitter.unsubscribe(q)
        events = [e for e in drain(q) if e["component"] == "BranchAndBound"]
        assert events[-1]["action"] == "done"
        return [e["data"] for e in events if e["action"] == "node"]

    @pytest.mark.parametrize("mode", ["lp", "dp", "best"])
    def test_logged_bounds(self, mode):
        problem = synthetic_problem(41, g=3, K=3, N=4, initial=7)
        nodes = self.logged_nodes(problem, BBOptions(gap=0.0, bound_mode=mode))
        assert nodes
        for node in nodes:
            exact = exact_completion(problem, tuple(node["prefix"]))
            assert node["bound"] >= exact - 1e-9
            assert math.isfinite(node["bound"])

    def test_lp_mode_logs_the_relaxation_alone(self):
        problem = synthetic_problem(41, g=3, K=3, N=4, initial=7)
        formulation = build_extended_formulation(problem)
        nodes = self.logged_nodes(problem, BBOptions(gap=0.0, bound_mode="lp"))
        assert nodes
        for node in nodes:
            prefix = tuple(node["prefix"])
            state = evolve_chain(problem.initial, [problem.family[k] for k in prefix]).final[0]
            assert node["bound"] == pytest.approx(lp_bound(formulation, BBNode(prefix, state)), abs=1e-9)
