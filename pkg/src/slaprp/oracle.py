"""Independent brute-force references used to verify the solver components.

These deliberately avoid the closed-form evaluators and the labeling
machinery: the path tracer walks the grid coordinate by coordinate, the tour
enumerator scores finished tours directly from their stop multisets, and the
assignment enumerator tries every placement of the free SKUs.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

from .model import DEPOT, Instance, Layout, SINGLE_BLOCK, walk_distance
from .pricing import PricingProblem
from .routing import midpoint_bay, stops_of_order

ENUMERATION_BUDGET = 3_628_800  # 10!

TOUR_ORDER_CAP = 5

SUBSET_LOCATION_CAP = 12


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class OracleResult:
    objective: int
    assignment: dict
    enumeration_count: int
    elapsed: float


def enumerate_slaprp(
    inst: Instance, policy: str, budget: int = ENUMERATION_BUDGET
) -> OracleResult:
    """Exhaustive search over placements of the free SKUs into the open
    capacity, each plan scored with the policy evaluator."""
    t0 = time.monotonic()
    from .routing import route_cost  # local to keep module deps flat

    layout = inst.layout
    residual = list(layout.capacities())
    fixed = inst.fixed_map()
    for _, l in inst.fixed:
        residual[l] -= 1
    free = inst.free_skus()
    open_locs = [l for l in range(layout.num_locations) if residual[l] > 0]

    # orders unaffected by free SKUs cost the same in every plan
    free_set = set(free)
    base_total = 0
    affected: list[tuple[int, dict]] = []
    for idx, order in enumerate(inst.orders):
        fixed_stops: dict[int, int] = {}
        for s in order:
            if s not in free_set:
                l = fixed[s]
                fixed_stops[l] = fixed_stops.get(l, 0) + 1
        if any(s in free_set for s in order):
            affected.append((idx, fixed_stops))
        else:
            base_total += route_cost(fixed_stops, layout, policy).total

    best = [float("inf"), None]
    count = [0]
    placement: dict[int, int] = {}

    def evaluate() -> None:
        count[0] += 1
        if count[0] > budget:
            raise BudgetExceeded(f"placement count exceeds budget {budget}")
        total = base_total
        for idx, fixed_stops in affected:
            stops = dict(fixed_stops)
            for s in inst.orders[idx]:
                if s in free_set:
                    l = placement[s]
                    stops[l] = stops.get(l, 0) + 1
            total += route_cost(stops, layout, policy).total
        if total < best[0]:
            best[0] = total
            best[1] = {**fixed, **placement}

    def rec(i: int) -> None:
        if i == len(free):
            evaluate()
            return
        s = free[i]
        for l in open_locs:
            if residual[l] > 0:
                residual[l] -= 1
                placement[s] = l
                rec(i + 1)
                del placement[s]
                residual[l] += 1

    if len(free) == 0:
        evaluate()
    else:
        rec(0)
    return OracleResult(int(best[0]), best[1], count[0], time.monotonic() - t0)


def enumerate_tours(problem: PricingProblem) -> tuple[float, dict | None, int]:
    """Exhaustive tour enumeration for one pricing problem.

    Walks every stop sequence allowed by the policy graph, the first-stop
    restriction and the occupancy caps, requires the mandatory stops to be
    consumed, and scores finished tours directly from their stop multiset
    against the duals.  Returns (min reduced cost, best stop multiset, number
    of feasible tours).
    """
    n = problem.n
    if n > TOUR_ORDER_CAP:
        raise ValueError(f"order size {n} above enumeration cap {TOUR_ORDER_CAP}")
    graph = problem.graph
    mand = problem.mandatory
    best = [float("inf"), None]
    count = [0]

    def score(stops: dict[int, int], dist: int) -> float:
        value = dist - problem.mu
        for l, c in stops.items():
            value -= c * problem.pi[l] + problem.sigma_sum[l]
        for locs, lam, _ in problem.cut_groups:
            if any(l in locs for l in stops):
                value -= lam
        return value

    def finish(stops, dist, loc, extras):
        for l, c in mand.items():
            if stops.get(l, 0) < c:
                return
        count[0] += 1
        value = score(stops, dist + graph.close(loc, extras))
        if value < best[0]:
            best[0] = value
            best[1] = dict(stops)

    def rec(loc, vis, q, vmask, umask, extras, dist, stops):
        if q == n:
            finish(stops, dist, loc, extras)
            return
        if loc != DEPOT and vis < problem.max_visits[loc]:
            stops[loc] += 1
            rec(loc, vis + 1, q + 1, vmask, umask, extras, dist, stops)
            stops[loc] -= 1
        moves = graph.start() if loc == DEPOT else graph.moves(loc, extras)
        for to, d, mark, ex2 in moves:
            bit = 1 << to
            if (vmask | umask) & bit:
                continue
            if problem.max_visits[to] < 1:
                continue
            stops[to] = stops.get(to, 0) + 1
            rec(to, 1, q + 1, vmask | bit, umask | (mark & ~(vmask | bit)), ex2, dist + d, stops)
            stops[to] -= 1
            if not stops[to]:
                del stops[to]

    if sum(mand.values()) <= n:
        rec(DEPOT, 0, 0, 0, 0, None, 0, {})
    return best[0], best[1], count[0]


def enumerate_sl_subsets(order, sku, xi, rho_items, max_locations: int = SUBSET_LOCATION_CAP):
    """Scan all location subsets of the separation objective.

    ``rho_items`` is an iterable of (column, value) pairs for the order.
    Returns (max violation, best subset); the empty subset scores 0.
    """
    L = xi.shape[0]
    if L > max_locations:
        raise ValueError(f"{L} locations above enumeration cap {max_locations}")
    cols = [(col, val) for col, val in rho_items if col.order == order and val > 0]
    best_v, best_set = 0.0, ()
    for r in range(1, L + 1):
        for subset in itertools.combinations(range(L), r):
            chosen = set(subset)
            value = sum(xi[l, sku] for l in subset)
            for col, val in cols:
                if any(l in chosen for l, _ in col.stops):
                    value -= val
            if value > best_v + 1e-15:
                best_v, best_set = value, subset
    return best_v, best_set


# ---------------------------------------------------------------------------
# Grid-walk path tracer


def _walk(legs) -> int:
    """Total length of a sequence of axis-aligned waypoint moves."""
    total = 0
    x, y = 0, 0
    for nx, ny in legs:
        total += abs(nx - x) + abs(ny - y)
        x, y = nx, ny
    return total


def trace_policy_path(stops, policy: str, layout: Layout) -> int:
    """Simulate the picker's walk on the grid, step by step, per the policy's
    walking rules; returns the total distance."""
    if not stops:
        raise ValueError("empty stop set")
    if policy == "optimal":
        return _trace_optimal(stops, layout)
    if layout.kind != SINGLE_BLOCK:
        if policy == "return":
            return _trace_return_two_block(stops, layout)
        raise ValueError(f"unsupported combination: {policy} on {layout.kind}")
    groups: dict[int, list[int]] = {}
    for loc in stops:
        a, _, b = layout.coords(loc)
        groups.setdefault(a, []).append(b)
    if policy == "return":
        return _trace_return(groups, layout)
    if policy == "sshape":
        return _trace_sshape(groups, layout)
    if policy == "midpoint":
        return _trace_turnpoint(groups, layout, fixed_mid=True)
    if policy == "largestgap":
        return _trace_turnpoint(groups, layout, fixed_mid=False)
    raise ValueError(f"unknown policy {policy!r}")


def _xy(layout: Layout, aisle: int, y: int) -> tuple[int, int]:
    return (aisle - 1) * layout.aisle_pitch, y


def _trace_return(groups, layout: Layout) -> int:
    d = layout.bay_pitch
    legs = []
    for a in sorted(groups):
        legs.append(_xy(layout, a, 0))
        legs.append(_xy(layout, a, d * max(groups[a])))
        legs.append(_xy(layout, a, 0))
    legs.append((0, 0))
    return _walk(legs)


def _trace_return_two_block(stops, layout: Layout) -> int:
    d = layout.bay_pitch
    lines: dict[tuple[int, int], list[int]] = {}
    for loc in stops:
        a, blk, b = layout.coords(loc)
        lines.setdefault((a, blk), []).append(b)
    legs = []
    for a, blk in sorted(lines):
        depth = d * max(lines[(a, blk)])
        y = -depth if blk == 0 else depth
        legs.append(_xy(layout, a, 0))
        legs.append(_xy(layout, a, y))
        legs.append(_xy(layout, a, 0))
    legs.append((0, 0))
    return _walk(legs)


def _trace_sshape(groups, layout: Layout) -> int:
    d, nb = layout.bay_pitch, layout.bays_per_aisle
    back = d * (nb + 1)
    aisles = sorted(groups)
    legs = []
    at_back = False
    for a in aisles[:-1]:
        legs.append(_xy(layout, a, back if at_back else 0))
        at_back = not at_back
        legs.append(_xy(layout, a, back if at_back else 0))
    last = aisles[-1]
    if at_back:
        legs.append(_xy(layout, last, back))
        legs.append(_xy(layout, last, 0))
    else:
        legs.append(_xy(layout, last, 0))
        legs.append(_xy(layout, last, d * max(groups[last])))
        legs.append(_xy(layout, last, 0))
    legs.append((0, 0))
    return _walk(legs)


def _split_cost(bays: list[int], layout: Layout, j: int) -> int:
    """Walk length inside one aisle when the first j picks (sorted by bay)
    come from the front and the rest from the back."""
    d, nb = layout.bay_pitch, layout.bays_per_aisle
    srt = sorted(bays)
    front = 2 * d * srt[j - 1] if j > 0 else 0
    rear = 2 * d * (nb + 1 - srt[j]) if j < len(srt) else 0
    return front + rear


def _trace_turnpoint(groups, layout: Layout, fixed_mid: bool) -> int:
    d, nb = layout.bay_pitch, layout.bays_per_aisle
    back = d * (nb + 1)
    aisles = sorted(groups)
    if len(aisles) == 1:
        return _trace_return(groups, layout)
    u, v = aisles[0], aisles[-1]
    mp = midpoint_bay(layout)
    legs = [_xy(layout, u, 0), _xy(layout, u, back)]
    middles = aisles[1:-1]
    for a in middles:  # outbound along the back cross-aisle
        bays = sorted(groups[a])
        if fixed_mid:
            j = sum(1 for b in bays if b <= mp)
        else:
            j = min(range(len(bays) + 1), key=lambda k: _split_cost(bays, layout, k))
        if j < len(bays):
            legs.append(_xy(layout, a, back))
            legs.append(_xy(layout, a, d * bays[j]))
            legs.append(_xy(layout, a, back))
        groups[a] = bays[:j]
    legs.append(_xy(layout, v, back))
    legs.append(_xy(layout, v, 0))
    for a in reversed(middles):  # inbound along the front cross-aisle
        bays = groups[a]
        if bays:
            legs.append(_xy(layout, a, 0))
            legs.append(_xy(layout, a, d * max(bays)))
            legs.append(_xy(layout, a, 0))
    legs.append((0, 0))
    return _walk(legs)


def _trace_optimal(stops, layout: Layout) -> int:
    locs = [l for l, c in sorted(stops.items()) for _ in range(c)]
    distinct = sorted(set(locs))
    if len(distinct) > 9:
        raise ValueError("too many stops for permutation brute force")
    best = None
    for perm in itertools.permutations(distinct):
        total, prev = 0, DEPOT
        for l in perm:
            total += walk_distance(prev, l, layout)
            prev = l
        total += walk_distance(prev, DEPOT, layout)
        if best is None or total < best:
            best = total
    return best


def min_reduced_cost_brute(problem: PricingProblem) -> float:
    value, _, _ = enumerate_tours(problem)
    return value


def order_stop_multiset(inst: Instance, order_idx: int, assignment) -> dict[int, int]:
    return stops_of_order(inst.orders[order_idx], assignment)
