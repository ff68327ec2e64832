import random

import numpy as np
import pytest

from slaprp.model import Instance, Layout, generate_random_instance
from slaprp.oracle import enumerate_slaprp
from slaprp.routing import evaluate_plan
from slaprp.search import (
    BranchState,
    Solver,
    SolverConfig,
    initial_solution,
    primal_heuristic,
    round_bound,
    select_branch_combined,
    select_branch_location,
    solve,
    strengthen_branch,
    symmetric_skus,
)


def test_round_bound_examples():
    lay = Layout("single_block", 1, 5, 1, 1, 1)
    assert round_bound(13.2, lay) == 14
    assert round_bound(12.0, lay) == 12
    lay2 = Layout("single_block", 1, 5, 2, 4, 1)
    assert round_bound(17.0, lay2) == 20


def test_select_branch_location():
    inst = generate_random_instance(1, 2, 1, 2, 2, 2, seed=0)
    L, S = inst.layout.num_locations, inst.num_skus
    xi = np.zeros((L, S))
    xi[0, 0] = 0.5
    xi[1, 0] = 0.5
    xi[0, 1] = 1.0
    s, l = select_branch_location(xi, inst)
    assert s == 0 and l == 0
    # weighting by demand: sku with 2 orders wins even if less fractional
    inst2 = Instance(inst.layout, 2, ((0, 1), (1,)), (), "t", 0, {})
    xi2 = np.zeros((L, 2))
    xi2[0, 0] = 0.5  # demand 1 -> score 0.5
    xi2[0, 1] = 0.4  # demand 2 -> score 0.8
    s, l = select_branch_location(xi2, inst2)
    assert s == 1
    with pytest.raises(ValueError):
        select_branch_location(np.ones((L, S)) * 0, inst)  # integral (all zero rows)


def test_select_branch_combined_threshold():
    inst = generate_random_instance(2, 2, 1, 2, 1, 2, seed=1)
    L, S = inst.layout.num_locations, inst.num_skus
    xi = np.zeros((L, S))
    # sku 0 split across aisles -> aisle branch
    xi[0, 0] = 0.5
    xi[2, 0] = 0.5
    xi[1, 1] = 1.0
    kind, s, a = select_branch_combined(xi, inst)
    assert kind == "aisle" and s == 0
    # fractional within one aisle only -> aisle mass integral -> location
    xi2 = np.zeros((L, S))
    xi2[0, 0] = 0.5
    xi2[1, 0] = 0.5
    xi2[2, 1] = 1.0
    kind, s, where = select_branch_combined(xi2, inst)
    assert kind == "location"


def test_combined_equals_location_single_aisle():
    inst = generate_random_instance(1, 3, 1, 3, 2, 2, seed=2)
    xi = np.zeros((inst.layout.num_locations, inst.num_skus))
    xi[0, 0] = 0.5
    xi[1, 0] = 0.5
    kind, *_ = select_branch_combined(xi, inst)
    assert kind == "location"


def test_symmetric_skus_and_strengthening():
    inst = Instance(Layout("single_block", 1, 3, 1, 1, 1), 3, ((0, 1), (0, 1, 2)), (), "s", 0, {})
    assert set(symmetric_skus(inst, 0)) == {0, 1}
    children = strengthen_branch(inst, BranchState(), ("location", 0, 2), True, 0)
    one, zero = children
    assert one.force == ((0, 2),)
    assert set(zero.forbid) == {(0, 2), (1, 2)}
    # symmetric partner already fixed to one: excluded from the zero branch
    state = BranchState(force=((1, 1),))
    children = strengthen_branch(inst, state, ("location", 0, 2), True, 0)
    assert set(children[1].forbid) - set(state.forbid) == {(0, 2)}
    # no symmetry: plain disjunction
    children = strengthen_branch(inst, BranchState(), ("location", 0, 2), False, 0)
    assert children[1].forbid == ((0, 2),)


def test_initial_solution_feasible_and_seeded():
    inst = generate_random_instance(2, 3, 2, 6, 3, 3, seed=3, n_fixed=2)
    inc1, cols1 = initial_solution(inst, "return", 5)
    inc2, _ = initial_solution(inst, "return", 5)
    assert inc1.assignment == inc2.assignment
    total, _ = evaluate_plan(inst, inc1.assignment, "return")
    assert total == inc1.objective
    for s, l in inst.fixed:
        assert inc1.assignment[s] == l
    assert len(cols1) == inst.num_orders


def test_one_sku_instance_immediately_optimal():
    inst = generate_random_instance(1, 2, 1, 1, 1, 1, seed=4)
    inc, stats = solve(inst, "return", SolverConfig(seed=1))
    assert stats.optimal and stats.nodes == 1
    assert inc.objective == 2 * min(
        1 + 0, 2
    )  # nearest location out-and-back


def test_primal_heuristic_reproduces_integral_xi():
    inst = generate_random_instance(2, 2, 1, 3, 2, 3, seed=5)
    best = enumerate_slaprp(inst, "return").assignment
    xi = np.zeros((inst.layout.num_locations, inst.num_skus))
    for s, l in best.items():
        xi[l, s] = 1.0
    inc = primal_heuristic(inst, xi, "return", BranchState())
    assert inc.assignment == best
    total, _ = evaluate_plan(inst, inc.assignment, "return")
    assert total == inc.objective


def test_primal_heuristic_respects_branching():
    inst = generate_random_instance(1, 3, 1, 2, 1, 2, seed=6)
    xi = np.full((inst.layout.num_locations, inst.num_skus), 0.4)
    state = BranchState(forbid=((0, 0), (0, 1)))
    inc = primal_heuristic(inst, xi, "return", state)
    assert inc is not None and inc.assignment[0] == 2


def test_extraction_events_and_idempotence():
    inst = generate_random_instance(2, 2, 1, 4, 2, 3, seed=7)
    solver = Solver(inst, SolverConfig(policy="return", seed=1))
    inc, stats = solver.solve()
    assert stats.optimal
    opt = enumerate_slaprp(inst, "return")
    assert inc.objective == opt.objective


def test_solver_matches_oracle_all_policies():
    rng = random.Random(90)
    for trial in range(4):
        na, nb = rng.randint(1, 3), rng.randint(2, 3)
        n_skus = min(rng.randint(2, 5), na * nb)
        inst = generate_random_instance(na, nb, 1, n_skus, rng.randint(1, 3), 3, trial)
        for policy in ("optimal", "return", "sshape", "midpoint", "largestgap"):
            want = enumerate_slaprp(inst, policy).objective
            inc, stats = solve(inst, policy, SolverConfig(seed=1, time_limit=60))
            assert stats.optimal and inc.objective == want


def test_guo_style_with_fixed_assignments():
    from slaprp.model import generate_guo_instance

    inst = generate_guo_instance(0.2, 50, seed=11, n_skus=40)
    inc, stats = solve(inst, "return", SolverConfig(seed=1, time_limit=120))
    assert stats.optimal
    total, _ = evaluate_plan(inst, inc.assignment, "return")
    assert total == inc.objective
    for s, l in inst.fixed:
        assert inc.assignment[s] == l


def test_bound_is_step_multiple():
    import math

    inst = generate_random_instance(2, 3, 1, 4, 2, 3, seed=8)
    solver = Solver(inst, SolverConfig(policy="optimal", seed=1))
    inc, stats = solver.solve()
    step = 2 * math.gcd(inst.layout.aisle_pitch, inst.layout.bay_pitch)
    assert stats.lower_bound % step == 0
    assert stats.optimal and stats.lower_bound == inc.objective


def test_time_limit_reports_gap():
    from slaprp.model import generate_silva_instance

    inst = generate_silva_instance(5, 10, 10, 5, seed=1)
    inc, stats = solve(inst, "optimal", SolverConfig(seed=1, time_limit=0.5))
    assert stats.status == "limit" and not stats.optimal
    assert inc is not None and stats.gap >= 0
