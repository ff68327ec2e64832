import numpy as np
import pytest

from slaprp.model import Layout, generate_guo_instance, generate_random_instance
from slaprp.oracle import (
    BudgetExceeded,
    enumerate_sl_subsets,
    enumerate_slaprp,
    enumerate_tours,
    trace_policy_path,
)
from slaprp.pricing import build_policy_graph, make_pricing_problem


def test_enumeration_count_simple():
    # 1 free SKU over 3 open unit locations -> 3 placements
    inst = generate_random_instance(1, 3, 1, 1, 1, 1, seed=0)
    res = enumerate_slaprp(inst, "return")
    assert res.enumeration_count == 3
    assert res.objective == 2  # nearest bay out-and-back


def test_enumeration_factorial_count():
    inst = generate_guo_instance(0.2, 50, seed=5, n_skus=40)
    assert len(inst.free_skus()) == 8
    res = enumerate_slaprp(inst, "return")
    assert res.enumeration_count == 40320  # 8!
    # the optimum is no worse than random feasible plans
    import random

    from slaprp.routing import evaluate_plan
    from slaprp.search import random_assignment

    rng = random.Random(1)
    for _ in range(5):
        total, _ = evaluate_plan(inst, random_assignment(inst, rng), "return")
        assert res.objective <= total


def test_enumeration_budget():
    inst = generate_random_instance(2, 5, 1, 8, 1, 3, seed=1)
    with pytest.raises(BudgetExceeded):
        enumerate_slaprp(inst, "return", budget=10)


def test_enumeration_deterministic():
    inst = generate_random_instance(2, 2, 1, 3, 2, 3, seed=2)
    a = enumerate_slaprp(inst, "midpoint")
    b = enumerate_slaprp(inst, "midpoint")
    assert (a.objective, a.assignment, a.enumeration_count) == (
        b.objective,
        b.assignment,
        b.enumeration_count,
    )


def test_tours_zero_duals_positive():
    inst = generate_random_instance(2, 2, 1, 3, 1, 3, seed=3)
    pp = make_pricing_problem(inst, 0, build_policy_graph(inst.layout, "optimal"))
    value, stops, count = enumerate_tours(pp)
    assert value > 0 and count > 0 and stops


def test_tours_infeasible_mandatory():
    inst = generate_random_instance(1, 2, 1, 2, 1, 2, seed=4)
    fixed = ((0, 0), (1, 0))  # both SKUs of the order at a unit-capacity slot
    bad = inst.__class__(inst.layout, 2, ((0, 1),), fixed, "bad", 0, {})
    pp = make_pricing_problem(bad, 0, build_policy_graph(bad.layout, "optimal"))
    value, stops, count = enumerate_tours(pp)
    assert value == float("inf") and count == 0


def test_tours_size_cap():
    inst = generate_random_instance(2, 3, 1, 6, 1, 6, seed=5)
    if len(inst.orders[0]) <= 5:
        pytest.skip("sampled order too small to trigger the cap")
    pp = make_pricing_problem(inst, 0, build_policy_graph(inst.layout, "optimal"))
    with pytest.raises(ValueError):
        enumerate_tours(pp)


def test_sl_subsets_examples():
    xi = np.zeros((3, 1))
    best, subset = enumerate_sl_subsets(0, 0, xi, [])
    assert best <= 0
    xi[0, 0] = 0.9
    xi[1, 0] = 0.8
    best, subset = enumerate_sl_subsets(0, 0, xi, [])
    assert abs(best - 1.7) < 1e-12 and set(subset) == {0, 1}


def test_sl_subsets_monotone_padding():
    xi = np.zeros((5, 1))
    xi[0, 0] = 0.6
    xi[1, 0] = 0.6
    best, _ = enumerate_sl_subsets(0, 0, xi, [])
    # locations with zero mass change nothing
    assert abs(best - 1.2) < 1e-12


def test_sl_subsets_cap():
    xi = np.zeros((13, 1))
    with pytest.raises(ValueError):
        enumerate_sl_subsets(0, 0, xi, [])


def test_trace_single_stop_return():
    lay = Layout("single_block", 3, 5, 2, 1, 1)
    loc = lay.location_id(2, 4)
    assert trace_policy_path({loc: 1}, "return", lay) == 2 * (2 + 4)


def test_trace_largestgap_at_most_midpoint():
    import random

    rng = random.Random(6)
    for _ in range(200):
        lay = Layout("single_block", rng.randint(1, 5), rng.randint(2, 9), 1, 1, 2)
        stops = {}
        for _ in range(rng.randint(1, 6)):
            loc = lay.location_id(rng.randint(1, lay.num_aisles), rng.randint(1, lay.bays_per_aisle))
            stops[loc] = 1
        lg = trace_policy_path(dict(stops), "largestgap", lay)
        mp = trace_policy_path(dict(stops), "midpoint", lay)
        assert lg <= mp
