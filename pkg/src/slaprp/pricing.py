"""Per-order pricing: an elementary shortest path with resource constraints,
solved by level-by-level labeling with non-robust-cut-aware dominance.

Every routing policy contributes the same two ingredients: a restricted arc
set and an arc distance function (which for some policies depends on label
state).  The labeling core is policy-independent.  Arc moves also report the
locations the picker walks past, which become unreachable under the
first-stop restriction.

Labels count stops (``q``), not edges; a finished route makes exactly
``|S(o)|`` stops plus the closing arc back to the drop-off point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .master import Column, make_column
from .model import DEPOT, Instance, Layout, SINGLE_BLOCK, TWO_BLOCK
from .routing import midpoint_bay, route_cost

RC_TOL = 1e-6

MAX_COLUMNS_PER_ROUND = 30
DOMINANCE_CHECK_CAP = 256


# ---------------------------------------------------------------------------
# Geometry shared by the policy graphs


class _Geom:
    def __init__(self, layout: Layout):
        self.layout = layout
        L = layout.num_locations
        self.L = L
        self.aisle = np.empty(L, dtype=int)
        self.block = np.empty(L, dtype=int)
        self.bay = np.empty(L, dtype=int)
        for l in range(L):
            a, blk, b = layout.coords(l)
            self.aisle[l], self.block[l], self.bay[l] = a, blk, b
        self.num_bays = layout.bays_per_aisle
        self.D, self.d = layout.aisle_pitch, layout.bay_pitch
        # per (aisle, block): location ids sorted by bay (bay b at index b-1)
        self.line: dict[tuple[int, int], list[int]] = {}
        for l in range(L):
            self.line.setdefault((self.aisle[l], self.block[l]), []).append(l)
        for locs in self.line.values():
            locs.sort(key=lambda l: self.bay[l])
        self.aisle_mask = {}
        for (a, blk), locs in self.line.items():
            m = 0
            for l in locs:
                m |= 1 << l
            self.aisle_mask[(a, blk)] = m
        self._mask_memo: dict = {}

    def below_mask(self, a: int, b: int, blk: int = 0) -> int:
        """Locations in the aisle line strictly below bay b."""
        key = ("b", a, b, blk)
        hit = self._mask_memo.get(key)
        if hit is None:
            hit = 0
            for l in self.line[(a, blk)][: b - 1]:
                hit |= 1 << l
            self._mask_memo[key] = hit
        return hit

    def above_mask(self, a: int, b: int, blk: int = 0) -> int:
        key = ("a", a, b, blk)
        hit = self._mask_memo.get(key)
        if hit is None:
            hit = 0
            for l in self.line[(a, blk)][b:]:
                hit |= 1 << l
            self._mask_memo[key] = hit
        return hit

    def between_mask(self, a: int, b1: int, b2: int, blk: int = 0) -> int:
        lo, hi = min(b1, b2), max(b1, b2)
        key = ("m", a, lo, hi, blk)
        hit = self._mask_memo.get(key)
        if hit is None:
            hit = 0
            for l in self.line[(a, blk)][lo : hi - 1]:
                hit |= 1 << l
            self._mask_memo[key] = hit
        return hit

    def aisles_before_mask(self, a: int) -> int:
        m = 0
        for (aa, blk), mask in self.aisle_mask.items():
            if aa < a:
                m |= mask
        return m

    def aisles_after_mask(self, a: int) -> int:
        m = 0
        for (aa, blk), mask in self.aisle_mask.items():
            if aa > a:
                m |= mask
        return m


# ---------------------------------------------------------------------------
# Policy graphs

# A move is (to_loc, distance, mark_mask, new_extras): mark_mask holds the
# locations walked past (plus any the policy rules make unreachable).


class PolicyGraph:
    name = "?"
    static_moves = False  # moves independent of extras: cacheable
    cache_by_extras = False  # few distinct extras: cacheable per (loc, extras)

    def __init__(self, layout: Layout):
        self.geom = _Geom(layout)
        self.initial_extras = None
        self._move_cache: dict = {}
        self._start_cache: list | None = None

    def start(self, loc: int):
        raise NotImplementedError

    def moves(self, loc: int, extras):
        raise NotImplementedError

    def start_list(self) -> list:
        if self._start_cache is None:
            self._start_cache = list(self.start())
        return self._start_cache

    def moves_list(self, loc: int, extras) -> list:
        """Move tuples from one location; cached when the policy's arcs do
        not depend on label state."""
        if self.static_moves:
            key = loc
        elif self.cache_by_extras:
            key = (loc, extras)
        else:
            return list(self.moves(loc, extras))
        hit = self._move_cache.get(key)
        if hit is None:
            hit = list(self.moves(loc, extras))
            self._move_cache[key] = hit
        return hit

    def close(self, loc: int, extras) -> int:
        g = self.geom
        return g.d * g.bay[loc] + g.D * (g.aisle[loc] - 1)

    def arc(self, loc1: int, extras, loc2: int):
        """Point query of one stop-to-stop arc (None if absent)."""
        if loc1 == DEPOT:
            for cand in self.start(loc2) or ():
                return cand
            return None
        for to, dist, mark, ex in self.moves(loc1, extras):
            if to == loc2:
                return to, dist, mark, ex
        return None

    def has_arc(self, loc1: int, loc2: int, extras=None) -> bool:
        return self.arc(loc1, extras if extras is not None else self.initial_extras, loc2) is not None


class OptimalGraph(PolicyGraph):
    """Full graph under the base walking metric; the canonical shortest walk
    between two stops prefers the front cross-aisle on ties."""

    name = "optimal"
    static_moves = True

    def __init__(self, layout: Layout):
        if layout.kind != SINGLE_BLOCK:
            raise ValueError("optimal policy pricing requires a single-block layout")
        super().__init__(layout)
        self._memo: dict[tuple[int, int], tuple[int, int]] = {}

    def _arc_data(self, l1: int, l2: int) -> tuple[int, int]:
        key = (l1, l2)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        g = self.geom
        a1, b1 = g.aisle[l1], g.bay[l1]
        a2, b2 = g.aisle[l2], g.bay[l2]
        if a1 == a2:
            dist = g.d * abs(b2 - b1)
            mark = g.between_mask(a1, b1, b2)
        else:
            front = b1 + b2
            back = 2 * (g.num_bays + 1) - b1 - b2
            if front <= back:
                dist = g.D * abs(a2 - a1) + g.d * front
                mark = g.below_mask(a1, b1) | g.below_mask(a2, b2)
            else:
                dist = g.D * abs(a2 - a1) + g.d * back
                mark = g.above_mask(a1, b1) | g.above_mask(a2, b2)
        self._memo[key] = (dist, mark)
        return dist, mark

    def start(self, loc=None):
        g = self.geom
        targets = range(g.L) if loc is None else (loc,)
        for l in targets:
            dist = g.D * (g.aisle[l] - 1) + g.d * g.bay[l]
            yield l, dist, g.below_mask(g.aisle[l], g.bay[l]), None

    def moves(self, loc: int, extras):
        for l2 in range(self.geom.L):
            if l2 == loc:
                continue
            dist, mark = self._arc_data(loc, l2)
            yield l2, dist, mark, None


class ReturnGraph(PolicyGraph):
    """Acyclic graph: lines in (aisle, block) order, bays increasing within a
    line.  Works for both the single- and the double-block layout."""

    name = "return"
    static_moves = True

    def __init__(self, layout: Layout):
        super().__init__(layout)

    def _key(self, loc: int):
        g = self.geom
        return (g.aisle[loc], g.block[loc], g.bay[loc])

    def start(self, loc=None):
        g = self.geom
        targets = range(g.L) if loc is None else (loc,)
        for l in targets:
            dist = g.D * (g.aisle[l] - 1) + g.d * g.bay[l]
            yield l, dist, g.below_mask(g.aisle[l], g.bay[l], g.block[l]), None

    def moves(self, loc: int, extras):
        g = self.geom
        a1, k1, b1 = g.aisle[loc], g.block[loc], g.bay[loc]
        for l2 in range(g.L):
            a2, k2, b2 = g.aisle[l2], g.block[l2], g.bay[l2]
            if (a2, k2) == (a1, k1):
                if b2 > b1:
                    yield l2, g.d * (b2 - b1), g.between_mask(a1, b1, b2, k1), None
            elif (a2, k2) > (a1, k1):
                dist = g.d * b1 + g.D * (a2 - a1) + g.d * b2
                yield l2, dist, g.below_mask(a2, b2, k2), None


class SShapeGraph(PolicyGraph):
    """Aisles in increasing order, each fully traversed; the label remembers
    whether the current aisle was entered from the front or the back."""

    name = "sshape"
    cache_by_extras = True
    FRONT, BACK = 0, 1

    def __init__(self, layout: Layout):
        if layout.kind != SINGLE_BLOCK:
            raise ValueError("sshape policy requires a single-block layout")
        super().__init__(layout)
        self.initial_extras = self.FRONT

    def start(self, loc=None):
        g = self.geom
        targets = range(g.L) if loc is None else (loc,)
        for l in targets:
            dist = g.D * (g.aisle[l] - 1) + g.d * g.bay[l]
            yield l, dist, g.below_mask(g.aisle[l], g.bay[l]), self.FRONT

    def moves(self, loc: int, ori):
        g = self.geom
        nb = g.num_bays
        a1, b1 = g.aisle[loc], g.bay[loc]
        for l2 in range(g.L):
            a2, b2 = g.aisle[l2], g.bay[l2]
            if a2 == a1:
                if ori == self.FRONT and b2 > b1:
                    yield l2, g.d * (b2 - b1), g.between_mask(a1, b1, b2), ori
                elif ori == self.BACK and b2 < b1:
                    yield l2, g.d * (b1 - b2), g.between_mask(a1, b1, b2), ori
            elif a2 > a1:
                if ori == self.FRONT:
                    dist = g.d * (nb + 1 - b1) + g.D * (a2 - a1) + g.d * (nb + 1 - b2)
                    mark = g.above_mask(a1, b1) | g.above_mask(a2, b2)
                    yield l2, dist, mark, self.BACK
                else:
                    dist = g.d * b1 + g.D * (a2 - a1) + g.d * b2
                    mark = g.below_mask(a1, b1) | g.below_mask(a2, b2)
                    yield l2, dist, mark, self.FRONT


class MidpointGraph(PolicyGraph):
    """First and last visited aisles fully crossed; in-between aisles served
    from the back above the midpoint (outbound) and from the front below it
    (inbound).  Extras: (first_aisle, last_aisle or 0)."""

    name = "midpoint"
    cache_by_extras = True

    def __init__(self, layout: Layout):
        if layout.kind != SINGLE_BLOCK:
            raise ValueError("midpoint policy requires a single-block layout")
        super().__init__(layout)
        self.mp = midpoint_bay(layout)
        self.initial_extras = (0, 0)

    def _last_marks(self, first: int, last: int) -> int:
        g = self.geom
        mark = g.aisles_after_mask(last)
        for a in range(first + 1, last):
            for l in g.line.get((a, 0), ()):
                if g.bay[l] > self.mp:
                    mark |= 1 << l
        return mark

    def start(self, loc=None):
        g = self.geom
        targets = range(g.L) if loc is None else (loc,)
        for l in targets:
            a, b = g.aisle[l], g.bay[l]
            dist = g.D * (a - 1) + g.d * b
            mark = g.below_mask(a, b) | g.aisles_before_mask(a)
            yield l, dist, mark, (a, 0)

    def moves(self, loc: int, extras):
        g = self.geom
        nb, mp = g.num_bays, self.mp
        first, last = extras
        a1, b1 = g.aisle[loc], g.bay[loc]
        if a1 == first:
            phase = "first"
        elif last == 0:
            phase = "top"
        elif a1 == last:
            phase = "last"
        else:
            phase = "bottom"
        for l2 in range(g.L):
            if l2 == loc:
                continue
            a2, b2 = g.aisle[l2], g.bay[l2]
            if phase == "first":
                if a2 == a1 and b2 > b1:
                    yield l2, g.d * (b2 - b1), g.between_mask(a1, b1, b2), extras
                elif a2 > a1:
                    dist = g.d * (nb + 1 - b1) + g.D * (a2 - a1) + g.d * (nb + 1 - b2)
                    mark = g.above_mask(a1, b1) | g.above_mask(a2, b2)
                    if b2 <= mp:
                        ex = (first, a2)
                        yield l2, dist, mark | self._last_marks(first, a2), ex
                    else:
                        yield l2, dist, mark, extras
            elif phase == "top":
                if a2 == a1 and b2 < b1:
                    mark = g.between_mask(a1, b1, b2)
                    if b2 <= mp:
                        ex = (first, a1)
                        yield l2, g.d * (b1 - b2), mark | self._last_marks(first, a1), ex
                    else:
                        yield l2, g.d * (b1 - b2), mark, extras
                elif a2 > a1:
                    dist = g.d * (nb + 1 - b1) + g.D * (a2 - a1) + g.d * (nb + 1 - b2)
                    mark = g.above_mask(a1, b1) | g.above_mask(a2, b2)
                    if b2 <= mp:
                        ex = (first, a2)
                        yield l2, dist, mark | self._last_marks(first, a2), ex
                    else:
                        yield l2, dist, mark, extras
                elif first < a2 < a1 and b2 <= mp:
                    # retreating left: the current aisle is fully crossed and
                    # becomes the last one
                    dist = g.d * b1 + g.D * (a1 - a2) + g.d * b2
                    mark = g.below_mask(a1, b1) | g.below_mask(a2, b2)
                    yield l2, dist, mark | self._last_marks(first, a1), (first, a1)
            elif phase == "last":
                if a2 == a1 and b2 < b1:
                    yield l2, g.d * (b1 - b2), g.between_mask(a1, b1, b2), extras
                elif first < a2 < a1 and b2 <= mp:
                    dist = g.d * b1 + g.D * (a1 - a2) + g.d * b2
                    mark = g.below_mask(a1, b1) | g.below_mask(a2, b2)
                    yield l2, dist, mark, extras
            else:  # bottom
                if a2 == a1 and b1 < b2 <= mp:
                    yield l2, g.d * (b2 - b1), g.between_mask(a1, b1, b2), extras
                elif first < a2 < a1 and b2 <= mp:
                    dist = g.d * b1 + g.D * (a1 - a2) + g.d * b2
                    mark = g.below_mask(a1, b1) | g.below_mask(a2, b2)
                    yield l2, dist, mark, extras


class LargestGapGraph(PolicyGraph):
    """Midpoint-like development with free turn points, tracked by per-aisle
    gap bookkeeping.

    Extras: (first_aisle, last_aisle or 0, last-from-top bays, minimum
    largest gaps), the last two as per-aisle tuples.  ``last-from-top`` of
    ``num_bays + 1`` means the aisle has not been entered from the top;
    ``minimum largest gap`` starts at 0.  A label whose tentative gap in an
    aisle drops below the committed minimum is forced to make that aisle the
    last one (top side) or dies (bottom side).
    """

    name = "largestgap"

    def __init__(self, layout: Layout):
        if layout.kind != SINGLE_BLOCK:
            raise ValueError("largestgap policy requires a single-block layout")
        super().__init__(layout)
        na = layout.num_aisles
        self.initial_extras = (0, 0, (layout.bays_per_aisle + 1,) * na, (0,) * na)

    def _last_marks(self, last: int) -> int:
        return self.geom.aisles_after_mask(last)

    def start(self, loc=None):
        g = self.geom
        targets = range(g.L) if loc is None else (loc,)
        _, _, lft0, ming0 = self.initial_extras
        for l in targets:
            a, b = g.aisle[l], g.bay[l]
            dist = g.D * (a - 1) + g.d * b
            mark = g.below_mask(a, b) | g.aisles_before_mask(a)
            yield l, dist, mark, (a, 0, lft0, ming0)

    def _top_arrival(self, extras, a2: int, b2: int):
        """Gap bookkeeping for a visit from the top; may force last=a2."""
        first, last, lft, ming = extras
        prev_top = lft[a2 - 1]
        committed = max(ming[a2 - 1], prev_top - b2)
        lft2 = lft[:a2 - 1] + (b2,) + lft[a2:]
        ming2 = ming[:a2 - 1] + (committed,) + ming[a2:]
        tentative = b2
        if tentative < committed:
            return (first, a2, lft2, ming2), self._last_marks(a2)
        return (first, last, lft2, ming2), 0

    def _bottom_arrival(self, extras, a2: int, b2: int, prev_bottom: int):
        """Gap bookkeeping for a visit from the bottom; None kills."""
        first, last, lft, ming = extras
        committed = max(ming[a2 - 1], b2 - prev_bottom)
        tentative = lft[a2 - 1] - b2
        if tentative < committed:
            return None
        ming2 = ming[:a2 - 1] + (committed,) + ming[a2:]
        return (first, last, lft, ming2)

    def moves(self, loc: int, extras):
        g = self.geom
        nb = g.num_bays
        first, last, lft, ming = extras
        a1, b1 = g.aisle[loc], g.bay[loc]
        if a1 == first:
            phase = "first"
        elif last == 0:
            phase = "top"
        elif a1 == last:
            phase = "last"
        else:
            phase = "bottom"
        for l2 in range(g.L):
            if l2 == loc:
                continue
            a2, b2 = g.aisle[l2], g.bay[l2]
            if phase == "first":
                if a2 == a1 and b2 > b1:
                    yield l2, g.d * (b2 - b1), g.between_mask(a1, b1, b2), extras
                elif a2 > a1:
                    dist = g.d * (nb + 1 - b1) + g.D * (a2 - a1) + g.d * (nb + 1 - b2)
                    mark = g.above_mask(a1, b1) | g.above_mask(a2, b2)
                    ex, forced = self._top_arrival(extras, a2, b2)
                    yield l2, dist, mark | forced, ex
            elif phase == "top":
                if a2 == a1 and b2 < b1:
                    dist = g.d * (b1 - b2)
                    mark = g.between_mask(a1, b1, b2)
                    ex, forced = self._top_arrival(extras, a1, b2)
                    yield l2, dist, mark | forced, ex
                elif a2 > a1:
                    dist = g.d * (nb + 1 - b1) + g.D * (a2 - a1) + g.d * (nb + 1 - b2)
                    mark = g.above_mask(a1, b1) | g.above_mask(a2, b2)
                    ex, forced = self._top_arrival(extras, a2, b2)
                    yield l2, dist, mark | forced, ex
                elif first < a2 < a1:
                    ex0 = (first, a1, lft, ming)
                    ex = self._bottom_arrival(ex0, a2, b2, 0)
                    if ex is not None:
                        dist = g.d * b1 + g.D * (a1 - a2) + g.d * b2
                        mark = g.below_mask(a1, b1) | g.below_mask(a2, b2)
                        yield l2, dist, mark | self._last_marks(a1), ex
            elif phase == "last":
                if a2 == a1 and b2 < b1:
                    yield l2, g.d * (b1 - b2), g.between_mask(a1, b1, b2), extras
                elif first < a2 < a1:
                    ex = self._bottom_arrival(extras, a2, b2, 0)
                    if ex is not None:
                        dist = g.d * b1 + g.D * (a1 - a2) + g.d * b2
                        mark = g.below_mask(a1, b1) | g.below_mask(a2, b2)
                        yield l2, dist, mark, ex
            else:  # bottom
                if a2 == a1 and b2 > b1:
                    ex = self._bottom_arrival(extras, a1, b2, b1)
                    if ex is not None:
                        yield l2, g.d * (b2 - b1), g.between_mask(a1, b1, b2), ex
                elif first < a2 < a1:
                    ex = self._bottom_arrival(extras, a2, b2, 0)
                    if ex is not None:
                        dist = g.d * b1 + g.D * (a1 - a2) + g.d * b2
                        mark = g.below_mask(a1, b1) | g.below_mask(a2, b2)
                        yield l2, dist, mark, ex


_POLICY_GRAPHS = {
    "optimal": OptimalGraph,
    "return": ReturnGraph,
    "sshape": SShapeGraph,
    "midpoint": MidpointGraph,
    "largestgap": LargestGapGraph,
}


def build_policy_graph(layout: Layout, policy: str) -> PolicyGraph:
    try:
        cls = _POLICY_GRAPHS[policy]
    except KeyError:
        raise ValueError(f"unknown policy {policy!r}") from None
    if layout.kind == TWO_BLOCK and policy != "return":
        raise ValueError(f"unsupported combination: {policy} on {layout.kind}")
    return cls(layout)


# ---------------------------------------------------------------------------
# Labels and the pricing core


@dataclass
class PricingProblem:
    """Everything one order's pricer needs at the current node."""

    inst: Instance
    order: int
    graph: PolicyGraph
    mu: float
    pi: np.ndarray  # per location
    sigma_sum: np.ndarray  # per location, summed over the order's SKUs
    cut_groups: tuple  # (locations frozenset, lambda sum, location mask)
    mandatory: dict  # location -> required stop count
    max_visits: np.ndarray  # per location, capacity minus external occupancy

    def __post_init__(self):
        self.n = len(self.inst.orders[self.order])
        self.mand_locs = tuple(sorted(self.mandatory))
        self.mand_index = {l: i for i, l in enumerate(self.mand_locs)}
        self.f0 = tuple(self.mandatory[l] for l in self.mand_locs)


class Label:
    """Partial route state: current position, reduced cost, plain distance,
    stop count, reachability / cut / mandatory resources and policy extras.
    ``pend`` caches the bitmask of locations with mandatory stops left."""

    __slots__ = (
        "loc",
        "vis",
        "cost",
        "dist",
        "q",
        "vmask",
        "umask",
        "tcnt",
        "tun",
        "fkey",
        "fsum",
        "pend",
        "extras",
        "parent",
    )

    def __init__(
        self, loc, vis, cost, dist, q, vmask, umask, tcnt, tun, fkey, fsum, pend, extras, parent
    ):
        self.loc = loc
        self.vis = vis
        self.cost = cost
        self.dist = dist
        self.q = q
        self.vmask = vmask
        self.umask = umask
        self.tcnt = tcnt
        self.tun = tun
        self.fkey = fkey
        self.fsum = fsum
        self.pend = pend
        self.extras = extras
        self.parent = parent

    def stops(self) -> dict[int, int]:
        out: dict[int, int] = {}
        lab = self
        while lab.parent is not None:
            out[lab.loc] = out.get(lab.loc, 0) + 1
            lab = lab.parent
        return out

    def stop_sequence(self) -> list[int]:
        seq = []
        lab = self
        while lab.parent is not None:
            seq.append(lab.loc)
            lab = lab.parent
        seq.reverse()
        return seq


def root_label(problem: PricingProblem) -> Label:
    pend = 0
    for l in problem.mand_locs:
        pend |= 1 << l
    return Label(
        DEPOT,
        0,
        -problem.mu,
        0,
        0,
        0,
        0,
        0,
        0,
        problem.f0,
        sum(problem.f0),
        pend,
        problem.graph.initial_extras,
        None,
    )


def extend(label: Label, target: int, problem: PricingProblem, _arc=None):
    """Extend a label to a stop at ``target``; returns the new label or a
    machine-readable rejection reason."""
    if label.q >= problem.n:
        return "length"
    if target == label.loc:
        arc = (target, 0, 0, label.extras)
        repeat = True
    else:
        repeat = False
        if _arc is not None:
            arc = _arc
        elif label.loc == DEPOT:
            arc = problem.graph.arc(DEPOT, None, target)
        else:
            arc = problem.graph.arc(label.loc, label.extras, target)
        if arc is None:
            return "arc"
    _, dist, mark, extras2 = arc
    bit = 1 << target
    if repeat:
        vis2 = label.vis + 1
    else:
        if (label.vmask | label.umask) & bit:
            return "reachability"
        vis2 = 1
    mandatory_here = bool(label.pend & bit)
    if not mandatory_here and label.q + label.fsum >= problem.n:
        return "mandatory"
    if not repeat and label.loc != DEPOT and label.pend & (1 << label.loc):
        # leaving a location with unconsumed mandatory stops is a dead end
        return "mandatory"
    if vis2 > problem.max_visits[target]:
        return "capacity"
    vmask2 = label.vmask | bit
    umask2 = label.umask | (mark & ~vmask2)
    if mandatory_here:
        idx = problem.mand_index[target]
        left = label.fkey[idx] - 1
        fkey2 = label.fkey[:idx] + (left,) + label.fkey[idx + 1 :]
        fsum2 = label.fsum - 1
        pend2 = label.pend & ~bit if left == 0 else label.pend
    else:
        fkey2, fsum2, pend2 = label.fkey, label.fsum, label.pend
    if umask2 & pend2:
        return "mandatory"
    cost2 = label.cost + dist - problem.pi[target]
    if not repeat:
        cost2 -= problem.sigma_sum[target]
    tcnt2, tun2 = label.tcnt, label.tun
    if problem.cut_groups:
        reach2 = ~(vmask2 | umask2)
        for gi, (locs, lam, gmask) in enumerate(problem.cut_groups):
            gbit = 1 << gi
            if (tun2 | tcnt2) & gbit:
                continue
            if target in locs:
                tcnt2 |= gbit
                cost2 -= lam
            elif gmask & reach2 == 0:
                tun2 |= gbit
    return Label(
        target,
        vis2,
        cost2,
        label.dist + dist,
        label.q + 1,
        vmask2,
        umask2,
        tcnt2,
        tun2,
        fkey2,
        fsum2,
        pend2,
        extras2,
        label,
    )


def dominates(l1: Label, l2: Label, problem: PricingProblem) -> bool:
    """True iff l1 provably leads to completions at least as good as l2's."""
    if (
        l1.loc != l2.loc
        or l1.vis != l2.vis
        or l1.q != l2.q
        or l1.fkey != l2.fkey
        or l1.extras != l2.extras
    ):
        return False
    reach1 = ~(l1.vmask | l1.umask)
    reach2 = ~(l2.vmask | l2.umask)
    if reach2 & ~reach1:
        return False
    penalty = 0.0
    if problem.cut_groups:
        theta = ~(l2.tcnt | l2.tun) & (l1.tcnt | l1.tun)
        for gi, (_, lam, _) in enumerate(problem.cut_groups):
            if theta & (1 << gi):
                penalty += lam
    return l1.cost <= l2.cost - penalty


@dataclass
class PricingResult:
    columns: list
    proof_of_none: bool
    min_reduced_cost: float
    stats: dict = field(default_factory=dict)


def price(
    problem: PricingProblem,
    max_columns: int = MAX_COLUMNS_PER_ROUND,
    use_dominance: bool = True,
    check_costs: bool = False,
    trace: list | None = None,
) -> PricingResult:
    """Exact pricing: all returned columns have reduced cost < -1e-6, and if
    none is returned no feasible route has one."""
    n = problem.n
    inst, o = problem.inst, problem.order
    if sum(problem.f0) > n or any(
        problem.mandatory[l] > problem.max_visits[l] for l in problem.mand_locs
    ):
        return PricingResult([], True, float("inf"), {"infeasible_mandatory": True})
    frontier = {None: [root_label(problem)]}
    kills = 0
    max_visits = problem.max_visits
    first_ok = [max_visits[l] >= 1 for l in range(inst.layout.num_locations)]
    for level in range(n):
        nxt: dict = {}
        for bucket in frontier.values():
            for lab in bucket:
                if lab.loc == DEPOT:
                    cands = problem.graph.start_list()
                else:
                    cands = problem.graph.moves_list(lab.loc, lab.extras)
                    if lab.vis < max_visits[lab.loc]:
                        _insert(
                            extend(lab, lab.loc, problem),
                            nxt,
                            problem,
                            use_dominance,
                        )
                blocked = lab.vmask | lab.umask
                tight = lab.q + lab.fsum >= n
                pend = lab.pend
                for arc in cands:
                    target = arc[0]
                    # cheap pre-filters; extend() re-checks them
                    if (blocked >> target) & 1 or not first_ok[target]:
                        continue
                    if tight and not (pend >> target) & 1:
                        continue
                    new = extend(lab, target, problem, arc)
                    if isinstance(new, str):
                        continue
                    kills += _insert(new, nxt, problem, use_dominance)
        frontier = nxt
        if trace is not None:
            trace.append(
                {
                    "level": level + 1,
                    "labels": sum(len(b) for b in frontier.values()),
                    "dominance_kills": kills,
                }
            )
    finished: list[Label] = []
    best = float("inf")
    for bucket in frontier.values():
        for lab in bucket:
            if lab.fsum != 0:
                continue
            close_dist = problem.graph.close(lab.loc, lab.extras)
            total = lab.cost + close_dist
            lab.cost = total
            lab.dist += close_dist
            finished.append(lab)
            if total < best:
                best = total
    negative = [lab for lab in finished if lab.cost < -RC_TOL]
    negative.sort(key=lambda l: (l.cost, tuple(sorted(l.stops().items()))))
    columns = []
    seen = set()
    for lab in negative:
        if len(columns) >= max_columns:
            break
        stops = lab.stops()
        key = tuple(sorted(stops.items()))
        if key in seen:
            continue
        seen.add(key)
        if check_costs:
            rc = route_cost(stops, inst.layout, problem.graph.name)
            if problem.graph.name == "optimal":
                # a label may encode a suboptimal tour over these stops when
                # the cheapest ordering was dominated away
                assert lab.dist >= rc.total, (lab.dist, rc.total, stops)
            else:
                assert rc.total == lab.dist, (
                    f"pricer distance {lab.dist} != evaluator {rc.total} for {stops}"
                )
        columns.append(make_column(o, stops, lab.dist))
    return PricingResult(
        columns,
        not columns,
        best,
        {"levels": trace or [], "dominance_kills": kills},
    )


def _insert(new, nxt: dict, problem: PricingProblem, use_dominance: bool) -> int:
    """Register a freshly extended label in its bucket under dominance."""
    if isinstance(new, str):
        return 0
    key = (new.loc, new.vis, new.fkey, new.extras)
    bucket = nxt.get(key)
    if bucket is None:
        nxt[key] = [new]
        return 0
    if not use_dominance:
        bucket.append(new)
        return 0
    kills = 0
    for old in bucket[:DOMINANCE_CHECK_CAP]:
        if dominates(old, new, problem):
            return 1
    survivors = [old for old in bucket if not dominates(new, old, problem)]
    kills += len(bucket) - len(survivors)
    survivors.append(new)
    nxt[key] = survivors
    return kills


def make_pricing_problem(
    inst: Instance,
    order: int,
    graph: PolicyGraph,
    duals=None,
    active_cuts=(),
    extra_occupancy: dict | None = None,
    extra_mandatory: dict | None = None,
) -> PricingProblem:
    """Assemble the pricing data for one order from RMP duals, active cuts,
    instance fixed assignments and branching state."""
    L = inst.layout.num_locations
    order_skus = inst.orders[order]
    if duals is None:
        mu = 0.0
        pi = np.zeros(L)
        sigma = np.zeros(L)
    else:
        mu = float(duals.mu[order])
        pi = duals.pi[:, order].copy()
        sigma = np.zeros(L)
        for l in range(L):
            sigma[l] = duals.sigma_sum(order, l, order_skus)
    groups: dict[frozenset, float] = {}
    for cut in active_cuts:
        if cut.order != order:
            continue
        lam = duals.lam.get(cut.key, 0.0) if duals else 0.0
        if lam > RC_TOL:
            groups[cut.locations] = groups.get(cut.locations, 0.0) + lam
    cut_groups = []
    for locs in sorted(groups, key=sorted):
        gmask = 0
        for l in locs:
            gmask |= 1 << l
        cut_groups.append((locs, groups[locs], gmask))
    order_set = set(order_skus)
    mandatory: dict[int, int] = {}
    occupancy: dict[int, int] = {}
    for s, l in inst.fixed:
        if s in order_set:
            mandatory[l] = mandatory.get(l, 0) + 1
        else:
            occupancy[l] = occupancy.get(l, 0) + 1
    for l, c in (extra_mandatory or {}).items():
        mandatory[l] = mandatory.get(l, 0) + c
    for l, c in (extra_occupancy or {}).items():
        occupancy[l] = occupancy.get(l, 0) + c
    max_visits = np.array(
        [max(0, inst.layout.capacity_of(l) - occupancy.get(l, 0)) for l in range(L)]
    )
    return PricingProblem(
        inst, order, graph, mu, pi, sigma, tuple(cut_groups), mandatory, max_visits
    )
