"""Strengthened linking inequalities: representation, exact separation and
cut-pool lifecycle.

A cut ties the assignment mass of one SKU on a location subset to the routes
of one order stopping in that subset.  Order-1 cuts are permanent master rows;
everything separated here has at least two locations and is non-robust (each
active cut becomes a pricing resource).
"""

from __future__ import annotations

from dataclasses import dataclass, field

VIOLATION_THRESHOLD = 0.01
SLACK_TOL = 1e-6
RHO_TOL = 1e-9
MAX_ACTIVE_PER_ORDER = 500
SEPARATION_DEPTH_LIMIT = 3


@dataclass(frozen=True)
class SLCut:
    order: int
    sku: int
    locations: frozenset[int]
    violation: float = 0.0  # at creation

    @property
    def key(self):
        return (self.order, self.sku, tuple(sorted(self.locations)))

    def lhs_rhs(self, xi, order_columns) -> tuple[float, float]:
        lhs = sum(v for col, v in order_columns if col.delta(self.locations))
        rhs = sum(xi[l, self.sku] for l in self.locations)
        return lhs, rhs


def should_separate(node_depth: int) -> bool:
    """Separation runs at the root and down to depth 3; the pool is still
    checked at every depth."""
    return node_depth <= SEPARATION_DEPTH_LIMIT


def separate(
    order: int,
    sku: int,
    rmp_solution,
    columns,
    explore_decreasing_xi: bool = True,
) -> tuple[SLCut | None, float]:
    """Most violated linking cut for one (order, SKU) pair, by exact dynamic
    programming over location subsets.

    Returns ``(cut, value)``; the value is the exact subset maximum even when
    no cut clears the violation threshold (pruning is admissible).  Ties
    prefer fewer locations, then lexicographic ids.
    """
    xi = rmp_solution.xi
    support = [
        (col, val)
        for col, val in rmp_solution.rho.items()
        if col.order == order and val > RHO_TOL
    ]
    L = xi.shape[0]
    xis = [float(xi[l, sku]) for l in range(L)]
    locs = sorted(range(L), key=(lambda l: (-xis[l], l)) if explore_decreasing_xi else (lambda l: (xis[l], l)))
    hit_mask = []
    for l in range(L):
        m = 0
        for i, (col, _) in enumerate(support):
            if col.stop_count(l):
                m |= 1 << i
        hit_mask.append(m)
    rho = [val for _, val in support]
    suffix_xi = [0.0] * (len(locs) + 1)
    for i in range(len(locs) - 1, -1, -1):
        suffix_xi[i] = suffix_xi[i + 1] + max(0.0, xis[locs[i]])
    memo: dict = {}

    def pick(a, b):
        """Max by value; ties prefer subsets that make a valid cut (at least
        two locations), then fewer locations, then lexicographic."""
        if a[0] > b[0] + 1e-15:
            return a
        if b[0] > a[0] + 1e-15:
            return b
        ka = (len(a[1]) < 2, len(a[1]), a[1])
        kb = (len(b[1]) < 2, len(b[1]), b[1])
        return a if ka <= kb else b

    def best_from(i: int, mask: int) -> tuple[float, tuple[int, ...]]:
        if i == len(locs) or suffix_xi[i] <= 1e-15:
            # nothing left to gain: stopping here is optimal
            return 0.0, ()
        key = (i, mask)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if mask == 0:
            # remaining routes all inactive: collect every positive xi
            chosen = tuple(sorted(l for l in locs[i:] if xis[l] > 1e-15))
            res = (suffix_xi[i], chosen)
            memo[key] = res
            return res
        l = locs[i]
        skip = best_from(i + 1, mask)
        paid = 0.0
        m = mask & hit_mask[l]
        while m:
            low = m & -m
            paid += rho[low.bit_length() - 1]
            m ^= low
        sub_v, sub_set = best_from(i + 1, mask & ~hit_mask[l])
        take = (sub_v + xis[l] - paid, tuple(sorted(sub_set + (l,))))
        res = pick(skip, take)
        memo[key] = res
        return res

    value, chosen = best_from(0, (1 << len(support)) - 1)
    value = max(0.0, value)
    if value > VIOLATION_THRESHOLD and len(chosen) >= 2:
        return SLCut(order, sku, frozenset(chosen), value), value
    return None, value


def cut_violation(cut: SLCut, rmp_solution) -> float:
    order_cols = [
        (col, val)
        for col, val in rmp_solution.rho.items()
        if col.order == cut.order and val > RHO_TOL
    ]
    lhs, rhs = cut.lhs_rhs(rmp_solution.xi, order_cols)
    return rhs - lhs


@dataclass
class CutPool:
    """All separated cuts, keyed by (order, sku, locations); the active set
    per order is capped."""

    pooled: dict = field(default_factory=dict)
    active: dict = field(default_factory=dict)  # key -> SLCut
    generated: int = 0

    def add(self, cut: SLCut) -> bool:
        if cut.key in self.pooled:
            return False
        self.pooled[cut.key] = cut
        self.generated += 1
        return True

    def active_for_order(self, order: int) -> int:
        return sum(1 for c in self.active.values() if c.order == order)

    def activate(self, cut: SLCut) -> bool:
        if cut.key in self.active:
            return False
        if self.active_for_order(cut.order) >= MAX_ACTIVE_PER_ORDER:
            return False
        self.active[cut.key] = cut
        return True

    def deactivate(self, cut: SLCut) -> None:
        self.active.pop(cut.key, None)

    def active_cuts(self) -> list[SLCut]:
        return [self.active[k] for k in sorted(self.active)]

    def pool_check(self, rmp_solution) -> list[SLCut]:
        """Violated pooled (inactive) cuts, most violated first, truncated to
        respect the per-order cap."""
        cands = []
        for key in sorted(self.pooled):
            if key in self.active:
                continue
            cut = self.pooled[key]
            v = cut_violation(cut, rmp_solution)
            if v > VIOLATION_THRESHOLD:
                cands.append((v, cut))
        cands.sort(key=lambda t: (-t[0], len(t[1].locations), t[1].key))
        room = {}
        out = []
        for v, cut in cands:
            o = cut.order
            if o not in room:
                room[o] = MAX_ACTIVE_PER_ORDER - self.active_for_order(o)
            if room[o] <= 0:
                continue
            room[o] -= 1
            out.append(cut)
        return out

    def deactivate_nonbinding(self, rmp_solution) -> list[SLCut]:
        """Remove active cuts whose master row has positive slack; they stay
        pooled for later reactivation."""
        removed = []
        for key, slack in sorted(rmp_solution.cut_slack.items()):
            if slack > SLACK_TOL and key in self.active:
                removed.append(self.active[key])
                self.deactivate(self.active[key])
        return removed
