"""Branch-and-bound driver: at every node the bound comes from column
generation strengthened by cutting planes; branching happens on assignment
variables (single locations or whole aisles), optionally strengthened by
forbidding symmetric SKUs together.

Node selection is best-bound-first with deeper nodes winning ties.  Dual
bounds are rounded up to the coarsest step an integer tour can take, which is
twice the gcd of the two pitches.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cuts import CutPool, SLCut, separate, should_separate
from .lp import get_adapter
from .master import (
    BranchConstraints,
    Column,
    Rmp,
    add_super_columns,
    make_column,
)
from .model import Instance
from .pricing import build_policy_graph, make_pricing_problem, price
from .routing import evaluate_plan, route_cost, stops_of_order

INT_TOL = 1e-6
BOUND_TOL = 1e-6


@dataclass
class SolverConfig:
    policy: str | None = None  # default: the instance's policy, else optimal
    branching: str = "combined"  # combined | location
    symmetry: bool = True
    sl1: bool = True
    sl_cuts: bool = True
    time_limit: float = 7200.0
    node_limit: int | None = None
    seed: int = 0
    emission_cap: int = 30
    check_column_costs: bool = False
    lp_backend: str | None = None

    def resolve_policy(self, inst: Instance) -> str:
        return self.policy or inst.default_policy()


@dataclass(frozen=True)
class BranchState:
    force: tuple[tuple[int, int], ...] = ()  # (sku, loc) == 1
    forbid: tuple[tuple[int, int], ...] = ()  # (sku, loc) == 0
    aisle_in: tuple[tuple[int, int], ...] = ()  # (sku, aisle) >= 1
    aisle_out: tuple[tuple[int, int], ...] = ()  # (sku, aisle) == 0
    depth: int = 0
    parent: int = -1

    def constraints(self) -> BranchConstraints:
        return BranchConstraints(self.force, self.forbid, self.aisle_in, self.aisle_out)

    def child(self, **adds) -> "BranchState":
        return BranchState(
            self.force + tuple(adds.get("force", ())),
            self.forbid + tuple(adds.get("forbid", ())),
            self.aisle_in + tuple(adds.get("aisle_in", ())),
            self.aisle_out + tuple(adds.get("aisle_out", ())),
            self.depth + 1,
            adds.get("parent", -1),
        )


@dataclass
class Node:
    id: int
    state: BranchState
    bound: float


@dataclass
class Incumbent:
    assignment: dict
    routes: list  # per order: {location: stops}
    objective: int
    per_order: list


@dataclass
class SolveStats:
    instance: str
    policy: str
    branching: str
    symmetry: bool
    optimal: bool
    objective: int | None
    lower_bound: float
    gap: float
    time_sec: float
    nodes: int
    cuts: int
    columns: int
    root_bound: float
    status: str

    def gap_percent(self) -> float:
        return self.gap


def round_bound(lp_value: float, layout) -> int:
    """Smallest multiple of 2*gcd(aisle pitch, bay pitch) at or above the LP
    value (within tolerance)."""
    step = 2 * math.gcd(layout.aisle_pitch, layout.bay_pitch)
    return step * math.ceil((lp_value - BOUND_TOL) / step)


# ---------------------------------------------------------------------------
# Primal side


def random_assignment(inst: Instance, rng) -> dict[int, int]:
    assignment = dict(inst.fixed_map())
    residual = list(inst.layout.capacities())
    for l in assignment.values():
        residual[l] -= 1
    open_slots = [l for l in range(inst.layout.num_locations) for _ in range(residual[l])]
    rng.shuffle(open_slots)
    for s in inst.free_skus():
        assignment[s] = open_slots.pop()
    return assignment


def hill_climb(inst: Instance, assignment: dict, policy: str) -> tuple[dict, int]:
    """Best-improvement local search: swap two free SKUs or move one to an
    open slot, until no move improves."""
    fixed = {s for s, _ in inst.fixed}
    free = [s for s in range(inst.num_skus) if s not in fixed]
    assignment = dict(assignment)
    total, _ = evaluate_plan(inst, assignment, policy)
    while True:
        best_move, best_total = None, total
        load: dict[int, int] = {}
        for l in assignment.values():
            load[l] = load.get(l, 0) + 1
        open_locs = [
            l
            for l in range(inst.layout.num_locations)
            if load.get(l, 0) < inst.layout.capacity_of(l)
        ]
        for i, s1 in enumerate(free):
            for s2 in free[i + 1 :]:
                if assignment[s1] == assignment[s2]:
                    continue
                assignment[s1], assignment[s2] = assignment[s2], assignment[s1]
                cand, _ = evaluate_plan(inst, assignment, policy)
                if cand < best_total:
                    best_move, best_total = ("swap", s1, s2), cand
                assignment[s1], assignment[s2] = assignment[s2], assignment[s1]
            for l in open_locs:
                if l == assignment[s1]:
                    continue
                old = assignment[s1]
                assignment[s1] = l
                cand, _ = evaluate_plan(inst, assignment, policy)
                if cand < best_total:
                    best_move, best_total = ("move", s1, l), cand
                assignment[s1] = old
        if best_move is None:
            return assignment, total
        if best_move[0] == "swap":
            _, s1, s2 = best_move
            assignment[s1], assignment[s2] = assignment[s2], assignment[s1]
        else:
            _, s1, l = best_move
            assignment[s1] = l
        total = best_total


def incumbent_from_assignment(inst: Instance, assignment: dict, policy: str) -> Incumbent:
    total, per_order = evaluate_plan(inst, assignment, policy)
    routes = [stops_of_order(order, assignment) for order in inst.orders]
    return Incumbent(dict(assignment), routes, total, per_order)


def initial_solution(inst: Instance, policy: str, seed: int) -> tuple[Incumbent, list[Column]]:
    import random as _random

    rng = _random.Random(seed)
    assignment = random_assignment(inst, rng)
    assignment, _ = hill_climb(inst, assignment, policy)
    inc = incumbent_from_assignment(inst, assignment, policy)
    columns = [
        make_column(o, inc.routes[o], inc.per_order[o].total) for o in range(inst.num_orders)
    ]
    return inc, columns


def primal_heuristic(
    inst: Instance, xi: np.ndarray, policy: str, state: BranchState
) -> Incumbent | None:
    """Greedy completion: start from the fixed and branched assignments, then
    repeatedly place the (location, SKU) pair with the largest xi value."""
    assignment = dict(inst.fixed_map())
    for s, l in state.force:
        assignment[s] = l
    residual = list(inst.layout.capacities())
    for l in assignment.values():
        residual[l] -= 1
        if residual[l] < 0:
            return None
    forbidden = set(state.forbid)
    out_aisles: dict[int, set] = {}
    for s, a in state.aisle_out:
        out_aisles.setdefault(s, set()).add(a)
    in_aisles = {}
    for s, a in state.aisle_in:
        in_aisles[s] = a
    L = inst.layout.num_locations
    todo = [s for s in range(inst.num_skus) if s not in assignment]
    while todo:
        best = None
        for s in todo:
            for l in range(L):
                if residual[l] <= 0 or (s, l) in forbidden:
                    continue
                a = inst.layout.aisle_of(l)
                if a in out_aisles.get(s, ()):
                    continue
                if s in in_aisles and a != in_aisles[s]:
                    continue
                key = (-float(xi[l, s]), s, l)
                if best is None or key < best:
                    best = key
        if best is None:
            return None
        _, s, l = best
        assignment[s] = l
        residual[l] -= 1
        todo.remove(s)
    return incumbent_from_assignment(inst, assignment, policy)


# ---------------------------------------------------------------------------
# Branching


def fractional_pairs(xi: np.ndarray):
    L, S = xi.shape
    for s in range(S):
        for l in range(L):
            v = xi[l, s]
            if INT_TOL < v < 1 - INT_TOL:
                yield s, l, float(v)


def select_branch_location(xi: np.ndarray, inst: Instance) -> tuple[int, int]:
    """Most fractional assignment variable weighted by SKU demand."""
    best = None
    for s, l, v in fractional_pairs(xi):
        d = inst.demand(s)
        score = d * min(v, 1.0 - v)
        key = (-score, -d, s, l)
        if best is None or key < best[0]:
            best = (key, (s, l))
    if best is None:
        raise ValueError("no fractional assignment variable to branch on")
    return best[1]


AISLE_SCORE_THRESHOLD = 0.25


def select_branch_combined(xi: np.ndarray, inst: Instance):
    """Aisle-level disjunction when any is fractional enough, else location
    branching."""
    best = None
    for s in range(inst.num_skus):
        d = inst.demand(s)
        for a in range(1, inst.layout.num_aisles + 1):
            mass = float(sum(xi[l, s] for l in inst.layout.locations_in_aisle(a)))
            score = d * min(mass, 1.0 - mass)
            key = (-score, -d, s, a)
            if best is None or key < best[0]:
                best = (key, score, (s, a))
    if best is not None and best[1] >= AISLE_SCORE_THRESHOLD:
        s, a = best[2]
        return ("aisle", s, a)
    s, l = select_branch_location(xi, inst)
    return ("location", s, l)


def symmetric_skus(inst: Instance, sku: int) -> list[int]:
    orders = inst.orders_of(sku)
    return [s for s in range(inst.num_skus) if inst.orders_of(s) == orders]


def strengthen_branch(
    inst: Instance, state: BranchState, target, symmetry: bool, node_id: int
) -> list[BranchState]:
    """Children of a location/aisle disjunction; with symmetry on, the zero
    branch forbids every not-yet-fixed SKU that appears in the same orders."""
    fixed_to_one = {s for s, _ in inst.fixed} | {s for s, _ in state.force}
    kind, s, where = target
    if symmetry:
        group = [t for t in symmetric_skus(inst, s) if t == s or t not in fixed_to_one]
    else:
        group = [s]
    if kind == "location":
        one = state.child(force=[(s, where)], parent=node_id)
        zero = state.child(forbid=[(t, where) for t in sorted(group)], parent=node_id)
    else:
        one = state.child(aisle_in=[(s, where)], parent=node_id)
        zero = state.child(aisle_out=[(t, where) for t in sorted(group)], parent=node_id)
    return [one, zero]


# ---------------------------------------------------------------------------
# Node processing


class _Limits(Exception):
    pass


def _node_context(inst: Instance, state: BranchState):
    """Per-order mandatory counts and external occupancy induced by fixed
    assignments plus branching forces."""
    pairs = list(inst.fixed) + list(state.force)
    mand = [dict() for _ in range(inst.num_orders)]
    occ = [dict() for _ in range(inst.num_orders)]
    for o, order in enumerate(inst.orders):
        order_set = set(order)
        for s, l in pairs:
            tgt = mand[o] if s in order_set else occ[o]
            tgt[l] = tgt.get(l, 0) + 1
    return mand, occ


def _column_allowed(col: Column, inst: Instance, mand: dict, occ: dict) -> bool:
    if col.is_super:
        return True
    for l, c in col.stops:
        if c > inst.layout.capacity_of(l) - occ.get(l, 0):
            return False
    for l, need in mand.items():
        if col.stop_count(l) < need:
            return False
    return True


@dataclass
class _NodeResult:
    status: str  # converged | infeasible
    objective: float = float("inf")
    xi: np.ndarray | None = None
    solution: object = None


class Solver:
    """One solve run; holds the global column pool, cut pool and incumbent."""

    def __init__(self, inst: Instance, config: SolverConfig | None = None):
        self.inst = inst
        self.config = config or SolverConfig()
        self.policy = self.config.resolve_policy(inst)
        self.adapter = get_adapter(self.config.lp_backend)
        self.graph = build_policy_graph(inst.layout, self.policy)
        self.pool: dict = {}
        self.rmp = None
        self.cut_pool = CutPool()
        self.incumbent: Incumbent | None = None
        self.nodes_processed = 0
        self.extraction_events = 0
        self.deadline = None
        self.root_bound = float("nan")

    # -- bookkeeping -------------------------------------------------------

    def _check_limits(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise _Limits("time")
        if (
            self.config.node_limit is not None
            and self.nodes_processed >= self.config.node_limit
        ):
            raise _Limits("nodes")

    def _update_incumbent(self, cand: Incumbent) -> bool:
        if self.incumbent is None or cand.objective < self.incumbent.objective:
            self.incumbent = cand
            return True
        return False

    def _pool_add(self, columns) -> None:
        for col in columns:
            self.pool.setdefault(col.key, col)

    # -- column and cut generation at one node ------------------------------

    def solve_node(self, state: BranchState, depth: int) -> _NodeResult:
        inst, cfg = self.inst, self.config
        mand, occ = _node_context(inst, state)
        if self.rmp is None:
            columns = list(self.supers) + [self.pool[k] for k in sorted(self.pool)]
            self.rmp = Rmp(inst, columns, (), None, include_sl1=cfg.sl1)
        rmp = self.rmp
        rmp.apply_branch(state.constraints())
        allowed = {
            key
            for key in rmp.rho_idx
            if _column_allowed(self.pool.get(key) or rmp.columns[key], inst, mand[rmp.columns[key].order], occ[rmp.columns[key].order])
        }
        rmp.set_allowed_columns(allowed)
        # instance fixed assignments are folded in by the pricing helper;
        # only branching forces are passed on top
        extra_mand = [dict() for _ in range(inst.num_orders)]
        extra_occ = [dict() for _ in range(inst.num_orders)]
        for o, order in enumerate(inst.orders):
            order_set = set(order)
            for s, l in state.force:
                tgt = extra_mand[o] if s in order_set else extra_occ[o]
                tgt[l] = tgt.get(l, 0) + 1
        sol = None
        last_obj = -float("inf")
        stalled = 0
        rr = 0  # round-robin pricing start
        for _ in range(100000):
            self._check_limits()
            sol = rmp.solve(self.adapter)
            if sol.status == "infeasible":
                return _NodeResult("infeasible")
            active = self.cut_pool.active_cuts()
            # partial pricing: stop the pass early once enough columns were
            # found; convergence still requires one full empty pass
            new_cols = []
            scanned = 0
            for k in range(inst.num_orders):
                o = (rr + k) % inst.num_orders
                pp = make_pricing_problem(
                    inst,
                    o,
                    self.graph,
                    sol.duals,
                    active,
                    extra_occupancy=extra_occ[o],
                    extra_mandatory=extra_mand[o],
                )
                res = price(
                    pp,
                    max_columns=cfg.emission_cap,
                    check_costs=cfg.check_column_costs,
                )
                new_cols.extend(c for c in res.columns if c.key not in rmp.rho_idx)
                scanned += 1
                if len(new_cols) >= cfg.emission_cap and scanned >= 10:
                    break
            rr = (rr + scanned) % inst.num_orders
            if new_cols:
                self._pool_add(new_cols)
                rmp.add_columns(new_cols)
                continue
            # a full pass found nothing: the LP value is the exact
            # column-generation bound for the active cut set
            # pricing converged for the current cut set: the LP value is a
            # valid node bound, so stop early once it prunes the node or the
            # cut rounds stop moving it (degenerate activate/deactivate
            # cycles otherwise stall forever)
            if (
                self.incumbent is not None
                and round_bound(sol.objective, inst.layout) >= self.incumbent.objective
            ):
                break
            if sol.objective > last_obj + 1e-9:
                stalled = 0
                last_obj = sol.objective
            else:
                stalled += 1
                if stalled >= 20:
                    break
            for cut in self.cut_pool.deactivate_nonbinding(sol):
                rmp.deactivate_cut(cut)
            violated = self.cut_pool.pool_check(sol)
            if violated:
                for cut in violated:
                    if self.cut_pool.activate(cut):
                        rmp.activate_cut(cut)
                continue
            if cfg.sl_cuts and cfg.sl1 and should_separate(depth):
                fresh = []
                for o, order in enumerate(inst.orders):
                    for s in order:
                        cut, _ = separate(o, s, sol, None)
                        if cut is not None and self.cut_pool.add(cut):
                            fresh.append(cut)
                if fresh:
                    fresh.sort(key=lambda c: (-c.violation, len(c.locations), c.key))
                    for cut in fresh:
                        if self.cut_pool.activate(cut):
                            rmp.activate_cut(cut)
                    continue
            break
        return _NodeResult("converged", sol.objective, sol.xi, sol)

    # -- integer side -------------------------------------------------------

    def extract_integer_solution(self, sol) -> Incumbent:
        inst = self.inst
        xi = sol.xi
        assignment = {}
        for s in range(inst.num_skus):
            ls = [l for l in range(inst.layout.num_locations) if xi[l, s] > 1 - INT_TOL]
            if len(ls) != 1:
                raise RuntimeError("extraction called on a fractional solution")
            assignment[s] = ls[0]
        inc = incumbent_from_assignment(inst, assignment, self.policy)
        self.extraction_events += 1
        if abs(inc.objective - sol.objective) > 1e-6:
            raise RuntimeError(
                f"integral master value {sol.objective} does not match the "
                f"rebuilt plan cost {inc.objective}"
            )
        return inc

    # -- main loop ----------------------------------------------------------

    def solve(self) -> tuple[Incumbent, SolveStats]:
        import heapq

        t0 = time.monotonic()
        cfg, inst = self.config, self.inst
        if cfg.time_limit:
            self.deadline = t0 + cfg.time_limit
        inc, init_cols = initial_solution(inst, self.policy, cfg.seed)
        self._update_incumbent(inc)
        big = 10 * max(1, inc.objective)
        self.supers = add_super_columns(inst, big)
        self._pool_add(init_cols)
        counter = 0
        root = Node(0, BranchState(), -float("inf"))
        heap = [(root.bound, 0, counter, root)]
        status = "optimal"
        lower = -float("inf")
        try:
            while heap:
                bound, _, _, node = heapq.heappop(heap)
                ub = self.incumbent.objective
                if bound >= ub:
                    lower = ub
                    break
                self._check_limits()
                self.nodes_processed += 1
                res = self.solve_node(node.state, node.state.depth)
                if res.status == "infeasible":
                    continue
                nbound = max(round_bound(res.objective, inst.layout), node.bound)
                if node.state.depth == 0:
                    self.root_bound = res.objective
                if nbound >= ub:
                    continue
                xi = res.xi
                if all(
                    v <= INT_TOL or v >= 1 - INT_TOL for v in xi.flat
                ):
                    self._update_incumbent(self.extract_integer_solution(res.solution))
                    continue
                cand = primal_heuristic(inst, xi, self.policy, node.state)
                if cand is not None:
                    self._update_incumbent(cand)
                if nbound >= self.incumbent.objective:
                    continue
                if cfg.branching == "combined":
                    target = select_branch_combined(xi, inst)
                else:
                    s, l = select_branch_location(xi, inst)
                    target = ("location", s, l)
                for child in strengthen_branch(
                    inst, node.state, target, cfg.symmetry, node.id
                ):
                    counter += 1
                    heapq.heappush(
                        heap, (nbound, -child.depth, counter, Node(counter, child, nbound))
                    )
            else:
                lower = self.incumbent.objective
        except _Limits:
            status = "limit"
            pending = [b for b, _, _, _ in heap]
            lower = min(pending) if pending else self.incumbent.objective
            if lower == -float("inf"):
                lower = 0.0
        if status == "optimal":
            lower = self.incumbent.objective
        ub = self.incumbent.objective
        gap = 0.0 if ub == lower else 100.0 * (ub - lower) / ub
        stats = SolveStats(
            instance=inst.name,
            policy=self.policy,
            branching=cfg.branching,
            symmetry=cfg.symmetry,
            optimal=status == "optimal",
            objective=ub,
            lower_bound=lower,
            gap=gap,
            time_sec=time.monotonic() - t0,
            nodes=self.nodes_processed,
            cuts=self.cut_pool.generated,
            columns=len(self.pool),
            root_bound=self.root_bound,
            status=status,
        )
        return self.incumbent, stats


def solve(inst: Instance, policy: str | None = None, config: SolverConfig | None = None):
    cfg = config or SolverConfig()
    if policy is not None:
        cfg = replace(cfg, policy=policy)
    return Solver(inst, cfg).solve()


def root_bound(
    inst: Instance,
    policy: str,
    sl1: bool = True,
    sl_cuts: bool = True,
    seed: int = 0,
) -> float:
    """Column-generation bound at the root only (no branching), as a raw LP
    value."""
    cfg = SolverConfig(
        policy=policy, sl1=sl1, sl_cuts=sl_cuts, seed=seed, node_limit=1
    )
    solver = Solver(inst, cfg)
    inc, cols = initial_solution(inst, policy, cfg.seed)
    solver._update_incumbent(inc)
    solver.supers = add_super_columns(inst, 10 * max(1, inc.objective))
    solver._pool_add(cols)
    res = solver.solve_node(BranchState(), 0)
    if res.status != "converged":
        raise RuntimeError("root column generation failed")
    return res.objective
