"""Closed-form route-cost evaluators for the heuristic routing policies and an
exact dynamic program for optimal routing.

A stop set is a multiset ``{location: count}`` of the stops one route makes.
Costs are exact integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .model import DEPOT, Instance, Layout, SINGLE_BLOCK, walk_distance

POLICIES = ("optimal", "return", "sshape", "midpoint", "largestgap")

EXACT_TSP_CAP = 14


@dataclass(frozen=True)
class RouteCost:
    """Total walking distance with its horizontal / per-aisle breakdown."""

    total: int
    horizontal: int
    vertical: tuple[tuple[object, int], ...]

    def __post_init__(self):
        assert self.total == self.horizontal + sum(v for _, v in self.vertical)


class UnsupportedCombination(ValueError):
    """Routing policy not defined for this layout."""


def _check_stops(stops: Mapping[int, int], layout: Layout) -> None:
    if not stops:
        raise ValueError("empty stop set")
    for l, c in stops.items():
        if c < 1:
            raise ValueError(f"non-positive stop count at location {l}")
        if c > layout.capacity_of(l):
            raise ValueError(f"stop count at location {l} exceeds capacity")


def _per_aisle_bays(stops: Mapping[int, int], layout: Layout) -> dict:
    """Visited bays grouped by aisle (single block) or (aisle, block)."""
    out: dict = {}
    for loc in stops:
        a, blk, b = layout.coords(loc)
        key = a if layout.kind == SINGLE_BLOCK else (a, blk)
        out.setdefault(key, []).append(b)
    return out


def midpoint_bay(layout: Layout) -> int:
    """Bays <= this value count as 'below the midpoint'."""
    return layout.bays_per_aisle // 2


def cost_return(stops: Mapping[int, int], layout: Layout) -> RouteCost:
    """Out-and-back within every visited aisle; far cross-aisle never used.

    On the double-block layout each (aisle, block) pair is served by its own
    out-and-back from the middle cross-aisle.
    """
    _check_stops(stops, layout)
    D, d = layout.aisle_pitch, layout.bay_pitch
    groups = _per_aisle_bays(stops, layout)
    if layout.kind == SINGLE_BLOCK:
        v = max(groups)
    else:
        v = max(a for a, _ in groups)
    horizontal = 2 * D * (v - 1)
    vertical = tuple(sorted((key, 2 * d * max(bays)) for key, bays in groups.items()))
    total = horizontal + sum(x for _, x in vertical)
    return RouteCost(total, horizontal, vertical)


def cost_sshape(stops: Mapping[int, int], layout: Layout) -> RouteCost:
    """Every visited aisle is fully traversed; when the number of visited
    aisles is odd the last one is served out-and-back instead."""
    if layout.kind != SINGLE_BLOCK:
        raise UnsupportedCombination("sshape policy requires a single-block layout")
    _check_stops(stops, layout)
    D, d, nb = layout.aisle_pitch, layout.bay_pitch, layout.bays_per_aisle
    groups = _per_aisle_bays(stops, layout)
    aisles = sorted(groups)
    v, m = aisles[-1], len(aisles)
    horizontal = 2 * D * (v - 1)
    vertical = []
    for a in aisles[:-1]:
        vertical.append((a, d * (nb + 1)))
    if m % 2 == 0:
        vertical.append((v, d * (nb + 1)))
    else:
        vertical.append((v, 2 * d * max(groups[v])))
    total = horizontal + sum(x for _, x in vertical)
    return RouteCost(total, horizontal, tuple(vertical))


def cost_midpoint(stops: Mapping[int, int], layout: Layout) -> RouteCost:
    """First and last visited aisles fully traversed; in between, picks below
    the midpoint are reached from the front and picks above from the back.
    A single visited aisle degenerates to the return policy."""
    if layout.kind != SINGLE_BLOCK:
        raise UnsupportedCombination("midpoint policy requires a single-block layout")
    _check_stops(stops, layout)
    D, d, nb = layout.aisle_pitch, layout.bay_pitch, layout.bays_per_aisle
    mp = midpoint_bay(layout)
    groups = _per_aisle_bays(stops, layout)
    aisles = sorted(groups)
    if len(aisles) == 1:
        return cost_return(stops, layout)
    u, v = aisles[0], aisles[-1]
    horizontal = 2 * D * (v - 1)
    vertical = [(u, d * (nb + 1))]
    for a in aisles[1:-1]:
        below = [b for b in groups[a] if b <= mp]
        above = [b for b in groups[a] if b > mp]
        f_minus = max(below) if below else 0
        f_plus = max(nb + 1 - b for b in above) if above else 0
        vertical.append((a, 2 * d * (f_minus + f_plus)))
    vertical.append((v, d * (nb + 1)))
    total = horizontal + sum(x for _, x in vertical)
    return RouteCost(total, horizontal, tuple(vertical))


def aisle_gaps(bays: list[int], num_bays: int) -> list[int]:
    """Gap lengths in one aisle: front to first pick, between consecutive
    picks, and last pick to the far cross-aisle."""
    srt = sorted(set(bays))
    gaps = [srt[0]]
    gaps.extend(b2 - b1 for b1, b2 in zip(srt, srt[1:]))
    gaps.append(num_bays + 1 - srt[-1])
    return gaps


def cost_largestgap(stops: Mapping[int, int], layout: Layout) -> RouteCost:
    """Like midpoint, but the unwalked segment of each in-between aisle is its
    largest gap instead of the fixed midpoint."""
    if layout.kind != SINGLE_BLOCK:
        raise UnsupportedCombination("largestgap policy requires a single-block layout")
    _check_stops(stops, layout)
    D, d, nb = layout.aisle_pitch, layout.bay_pitch, layout.bays_per_aisle
    groups = _per_aisle_bays(stops, layout)
    aisles = sorted(groups)
    if len(aisles) == 1:
        return cost_return(stops, layout)
    u, v = aisles[0], aisles[-1]
    horizontal = 2 * D * (v - 1)
    vertical = [(u, d * (nb + 1))]
    for a in aisles[1:-1]:
        gap = max(aisle_gaps(groups[a], nb))
        vertical.append((a, 2 * d * (nb + 1 - gap)))
    vertical.append((v, d * (nb + 1)))
    total = horizontal + sum(x for _, x in vertical)
    return RouteCost(total, horizontal, tuple(vertical))


def cost_optimal(stops: Mapping[int, int], layout: Layout) -> RouteCost:
    """Minimum-length closed tour through the stops under the base walking
    metric (Held-Karp over stop subsets).

    Repeat stops at one location add no distance, so the DP runs over the
    distinct locations.
    """
    if layout.kind != SINGLE_BLOCK:
        raise UnsupportedCombination("optimal policy requires a single-block layout")
    _check_stops(stops, layout)
    if sum(stops.values()) > EXACT_TSP_CAP:
        raise ValueError(
            f"stop count {sum(stops.values())} above exact-TSP cap {EXACT_TSP_CAP}"
        )
    locs = sorted(stops)
    n = len(locs)
    dist = [[walk_distance(a, b, layout) for b in locs] for a in locs]
    from_depot = [walk_distance(DEPOT, l, layout) for l in locs]
    full = (1 << n) - 1
    best = {(1 << i, i): from_depot[i] for i in range(n)}
    for mask in range(1, full + 1):
        for last in range(n):
            cur = best.get((mask, last))
            if cur is None or not mask & (1 << last):
                continue
            for nxt in range(n):
                if mask & (1 << nxt):
                    continue
                nmask = mask | (1 << nxt)
                cand = cur + dist[last][nxt]
                key = (nmask, nxt)
                if cand < best.get(key, float("inf")):
                    best[key] = cand
    total = min(best[(full, last)] + from_depot[last] for last in range(n))
    return RouteCost(total, total, ())


_EVALUATORS = {
    "optimal": cost_optimal,
    "return": cost_return,
    "sshape": cost_sshape,
    "midpoint": cost_midpoint,
    "largestgap": cost_largestgap,
}


def route_cost(stops: Mapping[int, int], layout: Layout, policy: str) -> RouteCost:
    try:
        fn = _EVALUATORS[policy]
    except KeyError:
        raise ValueError(f"unknown policy {policy!r}") from None
    return fn(stops, layout)


def stops_of_order(order, assignment: Mapping[int, int]) -> dict[int, int]:
    stops: dict[int, int] = {}
    for s in order:
        loc = assignment[s]
        stops[loc] = stops.get(loc, 0) + 1
    return stops


def evaluate_plan(
    inst: Instance, assignment: Mapping[int, int], policy: str
) -> tuple[int, list[RouteCost]]:
    """Total walking distance of a storage plan plus per-order costs.

    The assignment must place every SKU, respect capacities and agree with
    the instance's fixed assignments.
    """
    errs = validate_assignment(inst, assignment)
    if errs:
        raise ValueError("infeasible assignment: " + "; ".join(errs))
    per_order = [
        route_cost(stops_of_order(order, assignment), inst.layout, policy)
        for order in inst.orders
    ]
    return sum(rc.total for rc in per_order), per_order


def validate_assignment(inst: Instance, assignment: Mapping[int, int]) -> list[str]:
    errs = []
    layout = inst.layout
    if sorted(assignment) != list(range(inst.num_skus)):
        errs.append("assignment must place every SKU exactly once")
        return errs
    load: dict[int, int] = {}
    for s, l in assignment.items():
        if not (0 <= l < layout.num_locations):
            errs.append(f"SKU {s} assigned to unknown location {l}")
            continue
        load[l] = load.get(l, 0) + 1
    for l, n in sorted(load.items()):
        if n > layout.capacity_of(l):
            errs.append(f"capacity exceeded at location {l}")
    for s, l in inst.fixed:
        if assignment.get(s) != l:
            errs.append(f"fixed assignment violated for SKU {s}")
    return errs
