import random

import numpy as np

from slaprp.cuts import (
    CutPool,
    MAX_ACTIVE_PER_ORDER,
    SLCut,
    cut_violation,
    separate,
    should_separate,
)
from slaprp.master import make_column
from slaprp.oracle import enumerate_sl_subsets


class FakeSol:
    def __init__(self, xi, rho, cut_slack=None):
        self.xi = xi
        self.rho = rho
        self.cut_slack = cut_slack or {}


def two_location_solution(rho2=0.5):
    xi = np.zeros((2, 1))
    xi[0, 0] = xi[1, 0] = 0.5
    r1 = make_column(0, {0: 1}, 2)
    r2 = make_column(0, {1: 1}, 4)
    return FakeSol(xi, {r1: 0.5, r2: rho2})


def test_separation_zero_xi():
    xi = np.zeros((3, 1))
    sol = FakeSol(xi, {make_column(0, {0: 1}, 2): 1.0})
    cut, value = separate(0, 0, sol, None)
    assert cut is None and value <= 0


def test_separation_threshold_example():
    # both routes stop inside {l1, l2}: violation 1.0 - 1.0 = 0 -> none
    cut, value = separate(0, 0, two_location_solution(0.5), None)
    assert cut is None and abs(value) < 1e-9
    # reduce one rho: violation 0.1 > 0.01 -> the pair is returned
    cut, value = separate(0, 0, two_location_solution(0.4), None)
    assert cut is not None
    assert cut.locations == frozenset({0, 1})
    assert abs(value - 0.1) < 1e-9
    assert abs(cut.violation - 0.1) < 1e-9


def test_separation_matches_enumeration():
    rng = random.Random(13)
    for trial in range(150):
        L = rng.randint(2, 12)
        xi = np.zeros((L, 2))
        s = rng.randint(0, 1)
        for l in range(L):
            if rng.random() < 0.6:
                xi[l, s] = rng.random()
        rho = {}
        for r in range(rng.randint(0, 6)):
            stops = {l: 1 for l in rng.sample(range(L), rng.randint(1, min(3, L)))}
            rho[make_column(0, stops, 2)] = rng.random()
        sol = FakeSol(xi, rho)
        for order_flag in (True, False):
            cut, value = separate(0, s, sol, None, explore_decreasing_xi=order_flag)
            brute, _ = enumerate_sl_subsets(0, s, xi, list(rho.items()))
            assert abs(value - brute) < 1e-9
            if cut is not None:
                assert len(cut.locations) >= 2 and value > 0.01


def test_separation_tie_prefers_small_sets():
    # two disjoint violated subsets of equal value: smaller first, then lex
    xi = np.zeros((4, 1))
    xi[0, 0] = xi[1, 0] = 0.5
    sol = FakeSol(xi, {})
    cut, value = separate(0, 0, sol, None)
    assert abs(value - 1.0) < 1e-9
    assert cut.locations == frozenset({0, 1})


def test_pool_check_and_cap():
    xi = np.zeros((2, 1))
    xi[0, 0] = 1.0
    sol = FakeSol(xi, {})
    pool = CutPool()
    assert pool.pool_check(sol) == []
    satisfied = SLCut(0, 0, frozenset({1}), 0.2)  # rhs 0: never violated
    violated = SLCut(0, 0, frozenset({0, 1}), 0.2)
    pool.add(satisfied)
    pool.add(violated)
    out = pool.pool_check(sol)
    assert out == [violated]
    assert pool.generated == 2


def test_pool_cap_rule():
    xi = np.ones((40, 1))
    sol = FakeSol(xi, {})
    pool = CutPool()
    made = 0
    for i in range(0, 38):
        for j in range(i + 1, 38):
            if made >= 600:
                break
            pool.add(SLCut(0, 0, frozenset({i, j}), 0.5))
            made += 1
    out = pool.pool_check(sol)
    assert len(out) == MAX_ACTIVE_PER_ORDER
    for cut in out:
        assert pool.activate(cut)
    assert pool.active_for_order(0) == MAX_ACTIVE_PER_ORDER
    assert pool.pool_check(sol) == []  # cap exhausted


def test_deactivate_nonbinding():
    pool = CutPool()
    tight = SLCut(0, 0, frozenset({0, 1}), 0.3)
    slack = SLCut(0, 1, frozenset({0, 1}), 0.3)
    pool.add(tight), pool.add(slack)
    pool.activate(tight), pool.activate(slack)
    sol = FakeSol(np.zeros((2, 2)), {}, cut_slack={tight.key: 0.0, slack.key: 0.3})
    removed = pool.deactivate_nonbinding(sol)
    assert removed == [slack]
    assert tight.key in pool.active and slack.key not in pool.active
    assert slack.key in pool.pooled  # stays pooled


def test_should_separate_depths():
    assert should_separate(0)
    assert should_separate(3)
    assert not should_separate(4)


def test_cut_violation_sign():
    sol = two_location_solution(0.4)
    cut = SLCut(0, 0, frozenset({0, 1}), 0.0)
    assert abs(cut_violation(cut, sol) - 0.1) < 1e-9
