"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured numbers.  Tolerances are pinned here and nowhere else.

Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import io
import random
import time

import numpy as np
import pytest

from slaprp.compact import (
    assignment_polytope,
    emit_compact_mcf,
    emit_compact_mtz,
    lp_relaxation_value,
)
from slaprp.cuts import separate
from slaprp.lp import get_adapter
from slaprp.master import make_column
from slaprp.model import (
    generate_guo_instance,
    generate_random_instance,
    generate_silva_instance,
    instance_sha,
)
from slaprp.oracle import (
    enumerate_sl_subsets,
    enumerate_slaprp,
    enumerate_tours,
    trace_policy_path,
)
from slaprp.pricing import build_policy_graph, make_pricing_problem, price
from slaprp.routing import POLICIES, route_cost, stops_of_order
from slaprp.search import Solver, SolverConfig, round_bound, root_bound

LP_TOL = 1e-6
RC_TOL = 1e-9

N_C1_INSTANCES = 50
N_PRICING_CONFIGS_PER_POLICY = 100
N_SEPARATION_POINTS = 200
N_BOUND_CHAIN_INSTANCES = 30
N_POLYTOPE_OBJECTIVES = 100
N_GUO_INSTANCES = 10
N_STOPSETS_PER_POLICY = 1000


def c1_instance_pool():
    """Single-block instances with |L| <= 6, unit capacities, |S| <= 5 and
    at most 3 orders."""
    rng = random.Random(20240809)
    shapes = [(1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (2, 2), (2, 3), (3, 2)]
    out = []
    for i in range(N_C1_INSTANCES):
        na, nb = shapes[rng.randrange(len(shapes))]
        n_skus = min(rng.randint(2, 5), na * nb)
        inst = generate_random_instance(
            na, nb, 1, n_skus, rng.randint(1, 3), min(3, n_skus), 1000 + i
        )
        out.append(inst)
    return out


def run_solver(inst, policy, branching="combined", symmetry=True, seed=1):
    cfg = SolverConfig(
        policy=policy,
        branching=branching,
        symmetry=symmetry,
        seed=seed,
        time_limit=120,
        check_column_costs=True,
    )
    solver = Solver(inst, cfg)
    inc, stats = solver.solve()
    return solver, inc, stats


@pytest.fixture(scope="module")
def c1_runs():
    """Solve every criterion-1 instance under every policy once, collecting
    what the later criteria need."""
    runs = []
    for inst in c1_instance_pool():
        for policy in POLICIES:
            oracle = enumerate_slaprp(inst, policy)
            solver, inc, stats = run_solver(inst, policy)
            runs.append(
                {
                    "inst": inst,
                    "policy": policy,
                    "oracle": oracle,
                    "incumbent": inc,
                    "stats": stats,
                    "cuts": list(solver.cut_pool.pooled.values()),
                    "extractions": solver.extraction_events,
                }
            )
    return runs


def test_c01_full_solver_matches_enumeration(c1_runs):
    t0 = time.monotonic()
    bad = [
        (r["inst"].name, r["policy"], r["incumbent"].objective, r["oracle"].objective)
        for r in c1_runs
        if not r["stats"].optimal or r["incumbent"].objective != r["oracle"].objective
    ]
    assert not bad, f"solver/oracle disagreements: {bad[:5]}"
    n_inst = len({r["inst"].name for r in c1_runs})
    print(
        f"\nACCEPTANCE c1 PASS: {len(c1_runs)} solves over {n_inst} instances x "
        f"{len(POLICIES)} policies equal the enumeration optimum "
        f"(check {time.monotonic() - t0:.0f}s)"
    )


def test_c02_pricing_matches_tour_enumeration():
    rng = random.Random(77)
    t0 = time.monotonic()
    checked = {p: 0 for p in POLICIES}
    while min(checked.values()) < N_PRICING_CONFIGS_PER_POLICY:
        na, nb = rng.randint(1, 3), rng.randint(2, 4)
        cap = rng.choice([1, 1, 2])
        kind = "single_block"
        n_skus = min(rng.randint(2, 5), na * nb * cap)
        inst = generate_random_instance(
            na, nb, cap, n_skus, 1, min(5, n_skus), rng.randint(0, 10**6),
            kind=kind, n_fixed=rng.randint(0, min(2, n_skus)),
        )
        L = inst.layout.num_locations
        for policy in POLICIES:
            if checked[policy] >= N_PRICING_CONFIGS_PER_POLICY:
                continue
            pp = make_pricing_problem(inst, 0, build_policy_graph(inst.layout, policy))
            pp.mu = rng.uniform(0, 30)
            pp.pi = np.array([rng.choice([0.0, 0.0, rng.uniform(0, 4)]) for _ in range(L)])
            pp.sigma_sum = np.array([rng.choice([0.0, 0.0, rng.uniform(0, 3)]) for _ in range(L)])
            groups = []
            for _ in range(rng.randint(0, 2)):
                locs = frozenset(rng.sample(range(L), min(L, rng.randint(2, max(2, min(4, L))))))
                mask = 0
                for l in locs:
                    mask |= 1 << l
                groups.append((locs, rng.uniform(0.1, 3.0), mask))
            pp.cut_groups = tuple(groups)
            got = price(pp, max_columns=10**6).min_reduced_cost
            want, _, _ = enumerate_tours(pp)
            if want == float("inf"):
                assert got == float("inf"), (inst.name, policy)
            else:
                assert abs(got - want) < RC_TOL, (inst.name, policy, got, want)
            checked[policy] += 1
    total = sum(checked.values())
    assert total >= 500
    print(
        f"\nACCEPTANCE c2 PASS: labeling minimum equals tour enumeration on "
        f"{total} randomized dual/cut configurations ({time.monotonic() - t0:.0f}s)"
    )


def test_c03_separation_matches_subset_enumeration():
    rng = random.Random(78)
    t0 = time.monotonic()

    class Sol:
        def __init__(self, xi, rho):
            self.xi, self.rho = xi, rho

    checked = 0
    while checked < N_SEPARATION_POINTS:
        L = rng.randint(2, 12)
        xi = np.zeros((L, 2))
        s = rng.randint(0, 1)
        for l in range(L):
            if rng.random() < 0.65:
                xi[l, s] = rng.random()
        rho = {}
        for _ in range(rng.randint(0, 6)):
            stops = {l: 1 for l in rng.sample(range(L), rng.randint(1, min(4, L)))}
            rho[make_column(0, stops, rng.randint(2, 30))] = rng.random()
        sol = Sol(xi, rho)
        cut, value = separate(0, s, sol, None)
        brute, _ = enumerate_sl_subsets(0, s, xi, list(rho.items()))
        assert abs(value - brute) < RC_TOL, (checked, value, brute)
        if cut is not None:
            assert cut.violation > 0.01 and len(cut.locations) >= 2
        checked += 1
    print(
        f"\nACCEPTANCE c3 PASS: separation value equals subset enumeration on "
        f"{checked} fractional points ({time.monotonic() - t0:.0f}s)"
    )


def test_c04_bound_chain_and_single_order_closure():
    rng = random.Random(79)
    t0 = time.monotonic()
    chains = 0
    while chains < N_BOUND_CHAIN_INSTANCES:
        na, nb = rng.randint(1, 2), rng.randint(2, 3)
        cap = rng.choice([1, 2])
        n_skus = min(rng.randint(2, 4), na * nb * cap)
        inst = generate_random_instance(
            na, nb, cap, n_skus, rng.randint(1, 2), 3, 3000 + chains
        )
        optimum = enumerate_slaprp(inst, "optimal").objective
        chain = [
            lp_relaxation_value(emit_compact_mtz(inst)),
            lp_relaxation_value(emit_compact_mcf(inst)),
            root_bound(inst, "optimal", sl1=False, sl_cuts=False),
            root_bound(inst, "optimal", sl1=True, sl_cuts=False),
            root_bound(inst, "optimal", sl1=True, sl_cuts=True),
            float(optimum),
        ]
        for a, b in zip(chain, chain[1:]):
            assert a <= b + LP_TOL, (inst.name, chain)
        chains += 1
    # regenerated single-order instances close at the plain reformulation root
    closures = 0
    for aisles, bays in ((1, 5), (1, 10), (3, 5), (3, 10), (5, 5), (5, 10)):
        for size in (3, 5):
            inst = generate_silva_instance(aisles, bays, 1, size, seed=40 + closures)
            optimum = Solver(inst, SolverConfig(policy="optimal", seed=1)).solve()[0].objective
            dw = root_bound(inst, "optimal", sl1=False, sl_cuts=False)
            assert round_bound(dw, inst.layout) == optimum, (inst.name, dw, optimum)
            closures += 1
    print(
        f"\nACCEPTANCE c4 PASS: bound chain LP<=MCF<=DW<=DW+SL1<=DW+SL<=OPT on "
        f"{chains} instances; reformulation closes {closures} single-order "
        f"instances ({time.monotonic() - t0:.0f}s)"
    )


def test_c05_integral_master_extraction(c1_runs):
    events = sum(r["extractions"] for r in c1_runs)
    # extraction raises on any cost mismatch beyond 1e-6, so reaching this
    # point with events > 0 means zero violations
    assert events > 0, "no integral-master extraction ever happened"
    print(
        f"\nACCEPTANCE c5 PASS: {events} integral-master extractions, every "
        f"rebuilt plan within 1e-6 of the master objective"
    )


def test_c06_separated_cuts_valid_on_optimum(c1_runs):
    checked = 0
    for r in c1_runs:
        best = r["oracle"].assignment
        inst = r["inst"]
        for cut in r["cuts"]:
            order_stops = stops_of_order(inst.orders[cut.order], best)
            lhs = 1 if any(l in cut.locations for l in order_stops) else 0
            rhs = 1 if best[cut.sku] in cut.locations else 0
            assert lhs >= rhs, (inst.name, r["policy"], cut.key)
            checked += 1
    print(
        f"\nACCEPTANCE c6 PASS: {checked} separated cuts all satisfied by the "
        f"known integer optima"
    )


def test_c07_assignment_polytope_integrality():
    rng = random.Random(80)
    adapter = get_adapter()
    counted = 0
    for inst in (
        generate_random_instance(2, 3, 2, 8, 2, 3, seed=81, n_fixed=2),
        generate_silva_instance(1, 5, 5, 3, seed=82),
    ):
        lp = assignment_polytope(inst)
        per_inst = N_POLYTOPE_OBJECTIVES // 2
        for _ in range(per_inst):
            for var in lp.vars:
                var.obj = float(rng.randint(-9, 9))
            sol = adapter.solve(lp)
            assert sol.optimal
            worst = max(abs(v - round(v)) for v in sol.x)
            assert worst < 1e-7, worst
            counted += 1
    assert counted >= N_POLYTOPE_OBJECTIVES
    print(
        f"\nACCEPTANCE c7 PASS: {counted} random objectives over the assignment "
        f"polytope returned integral vertices"
    )


def test_c08_branching_agreement_and_symmetry(c1_runs):
    t0 = time.monotonic()
    agree = 0
    reductions = []
    for r in c1_runs:
        inst, policy = r["inst"], r["policy"]
        want = r["oracle"].objective
        nodes = {}
        for branching in ("combined", "location"):
            for symmetry in (True, False):
                if branching == "combined" and symmetry:
                    stats = r["stats"]
                else:
                    _, inc, stats = run_solver(inst, policy, branching, symmetry)
                    assert stats.optimal and inc.objective == want, (
                        inst.name, policy, branching, symmetry,
                    )
                nodes[(branching, symmetry)] = stats.nodes
        agree += 1
        for branching in ("combined", "location"):
            if nodes[(branching, False)] > 1:  # instance actually branched
                reductions.append(
                    nodes[(branching, True)] <= nodes[(branching, False)]
                )
    share = sum(reductions) / len(reductions) if reductions else 1.0
    assert share >= 0.80, f"symmetry helped on only {share:.0%} of branching runs"
    print(
        f"\nACCEPTANCE c8 PASS: 4 branching configurations agree on {agree} "
        f"runs; symmetry kept the tree at most as large on {share:.0%} of "
        f"branching runs ({time.monotonic() - t0:.0f}s)"
    )


def test_c09_replenishment_matches_factorial_oracle():
    t0 = time.monotonic()
    times = []
    for seed in range(1, N_GUO_INSTANCES + 1):
        inst = generate_guo_instance(0.2, 50, seed=seed, n_skus=40)
        assert len(inst.free_skus()) == 8
        t1 = time.monotonic()
        solver = Solver(inst, SolverConfig(policy="return", seed=1, time_limit=120))
        inc, stats = solver.solve()
        dt = time.monotonic() - t1
        oracle = enumerate_slaprp(inst, "return")
        assert oracle.enumeration_count == 40320
        assert stats.optimal and inc.objective == oracle.objective, (seed, inc.objective, oracle.objective)
        assert dt < 60.0, f"seed {seed} took {dt:.1f}s"
        times.append(dt)
    print(
        f"\nACCEPTANCE c9 PASS: {N_GUO_INSTANCES} replenishment instances equal "
        f"the 8!-enumeration optimum, solve times "
        f"{min(times):.1f}-{max(times):.1f}s (total {time.monotonic() - t0:.0f}s)"
    )


def test_c10_policy_evaluators_and_dominance():
    rng = random.Random(83)
    t0 = time.monotonic()
    per_policy = {p: 0 for p in POLICIES}
    while min(per_policy.values()) < N_STOPSETS_PER_POLICY:
        na, nb = rng.randint(1, 5), rng.randint(2, 10)
        from slaprp.model import Layout

        lay = Layout("single_block", na, nb, 1, 1, 2)
        stops = {}
        for _ in range(rng.randint(1, 6)):
            loc = lay.location_id(rng.randint(1, na), rng.randint(1, nb))
            if stops.get(loc, 0) < 2:
                stops[loc] = stops.get(loc, 0) + 1
        costs = {}
        for policy in POLICIES:
            got = route_cost(stops, lay, policy).total
            assert got == trace_policy_path(dict(stops), policy, lay), (policy, stops)
            costs[policy] = got
            per_policy[policy] += 1
        assert costs["optimal"] <= min(costs.values()), stops
        assert costs["largestgap"] <= costs["midpoint"], stops
    total = sum(per_policy.values())
    print(
        f"\nACCEPTANCE c10 PASS: {total} evaluator/tracer comparisons equal, "
        f"dominance held on 100% ({time.monotonic() - t0:.0f}s)"
    )


def _stats_csv(rows) -> bytes:
    buf = io.StringIO()
    buf.write("instance,sha,policy,opt,lb,ub,nodes,cuts,columns\n")
    for sha, stats in rows:
        buf.write(
            f"{stats.instance},{sha[:12]},{stats.policy},{int(stats.optimal)},"
            f"{stats.lower_bound},{stats.objective},{stats.nodes},{stats.cuts},"
            f"{stats.columns}\n"
        )
    return buf.getvalue().encode()


def test_c11_determinism_byte_identical(c1_runs):
    t0 = time.monotonic()
    subset = c1_runs[::5]
    first, second = [], []
    for r in subset:
        sha = instance_sha(r["inst"])
        for target in (first, second):
            _, _, stats = run_solver(r["inst"], r["policy"])
            target.append((sha, stats))
    assert _stats_csv(first) == _stats_csv(second)
    print(
        f"\nACCEPTANCE c11 PASS: repeated runs of {len(subset)} solves produced "
        f"byte-identical stats CSVs ({time.monotonic() - t0:.0f}s)"
    )
