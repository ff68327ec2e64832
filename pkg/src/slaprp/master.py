"""Restricted master problem: route columns over an assignment polytope.

Rows, in order: location capacity, SKU assignment, fixed assignments, one
convexity row per order, linking rows (location x order), the always-present
order-1 linking inequalities, and the currently active higher-order linking
cuts.  Branching decisions enter as variable bounds plus ``>= 1`` aisle rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lp import EQ, GE, LE, LpModel, LpSolution, get_adapter
from .model import Instance

REDUCED_COST_TOL = 1e-6
DUAL_TOL = 1e-6


@dataclass(frozen=True)
class Column:
    """A priced route for one order: stop counts per location and its exact
    walking cost.  Super columns stop everywhere and carry a prohibitive cost
    so the LP stays feasible under any branching."""

    order: int
    cost: int
    stops: tuple[tuple[int, int], ...]  # sorted (location, count)
    is_super: bool = False

    @property
    def key(self):
        # cost is part of the identity: under optimal routing two tours over
        # the same stop multiset can differ in length, and both must be able
        # to enter the pool (the heuristic policies price one cost per
        # multiset, so duplicates still collapse there)
        return (self.order, self.stops, self.cost, self.is_super)

    def stop_count(self, loc: int) -> int:
        for l, c in self.stops:
            if l == loc:
                return c
        return 0

    def visits(self) -> frozenset[int]:
        return frozenset(l for l, _ in self.stops)

    def num_stops(self) -> int:
        return sum(c for _, c in self.stops)

    def delta(self, locations) -> int:
        """1 if the route stops in any of the given locations."""
        return 1 if any(l in locations for l, _ in self.stops) else 0


def make_column(order: int, stops, cost: int, is_super: bool = False) -> Column:
    items = tuple(sorted(dict(stops).items()))
    return Column(order, cost, items, is_super)


def column_pool_dedup(columns) -> list[Column]:
    """Drop duplicate (order, stop multiset) columns, keeping first seen."""
    seen: dict = {}
    for col in columns:
        seen.setdefault(col.key, col)
    return list(seen.values())


def add_super_columns(inst: Instance, big_cost: int) -> list[Column]:
    caps = inst.layout.capacities()
    stops = tuple((l, caps[l]) for l in range(inst.layout.num_locations))
    return [Column(o, big_cost, stops, True) for o in range(inst.num_orders)]


@dataclass
class DualValues:
    mu: np.ndarray  # per order (convexity)
    pi: np.ndarray  # (location, order), >= 0
    sigma: dict  # (order, sku, location) -> value >= 0
    lam: dict  # cut key -> value >= 0

    def sigma_sum(self, order: int, loc: int, order_skus) -> float:
        return sum(self.sigma.get((order, s, loc), 0.0) for s in order_skus)


@dataclass
class RmpSolution:
    status: str
    objective: float
    xi: np.ndarray  # (location, sku)
    rho: dict  # Column -> value
    duals: DualValues | None
    cut_slack: dict = field(default_factory=dict)  # cut key -> row slack

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class RmpError(RuntimeError):
    pass


@dataclass
class BranchConstraints:
    """Branch decisions as they land on the master: bound fixes plus >= 1
    aisle-membership rows."""

    force: tuple[tuple[int, int], ...] = ()  # (sku, loc) fixed to 1
    forbid: tuple[tuple[int, int], ...] = ()  # (sku, loc) fixed to 0
    aisle_in: tuple[tuple[int, int], ...] = ()  # (sku, aisle) sum >= 1
    aisle_out: tuple[tuple[int, int], ...] = ()  # (sku, aisle) sum <= 0


class Rmp:
    """Incremental RMP over a growing column set and a changing cut set."""

    def __init__(
        self,
        inst: Instance,
        columns,
        active_cuts=(),
        branch: BranchConstraints | None = None,
        include_sl1: bool = True,
        include_linking: bool = True,
    ):
        self.inst = inst
        self.include_sl1 = include_sl1
        self.model = LpModel("rmp")
        L, S = inst.layout.num_locations, inst.num_skus
        # assignments pinned to zero by fixed SKUs or branching make their
        # linking rows vacuous; those rows are never built
        pinned = self._pinned_zero(branch)
        self.xi_idx = np.empty((L, S), dtype=int)
        for l in range(L):
            for s in range(S):
                self.xi_idx[l, s] = self.model.add_var(f"xi_{l}_{s}", 0.0, 1.0, 0.0)
        self.cap_rows = [
            self.model.add_row(
                f"cap_{l}",
                {int(self.xi_idx[l, s]): 1.0 for s in range(S)},
                LE,
                inst.layout.capacity_of(l),
            )
            for l in range(L)
        ]
        self.assign_rows = [
            self.model.add_row(
                f"assign_{s}",
                {int(self.xi_idx[l, s]): 1.0 for l in range(L)},
                EQ,
                1.0,
            )
            for s in range(S)
        ]
        self.fixed_rows = [
            self.model.add_row(f"fixed_{s}_{l}", {int(self.xi_idx[l, s]): 1.0}, EQ, 1.0)
            for s, l in inst.fixed
        ]
        self.conv_rows = [
            self.model.add_row(f"conv_{o}", {}, EQ, 1.0) for o in range(inst.num_orders)
        ]
        self.link_rows = {}
        for o, order in enumerate(inst.orders):
            for l in range(L):
                terms = {
                    int(self.xi_idx[l, s]): -1.0 for s in order if (l, s) not in pinned
                }
                if not terms:
                    continue
                self.link_rows[(l, o)] = self.model.add_row(
                    f"link_{l}_{o}", terms, GE, 0.0
                )
        self.sl1_rows = {}
        if include_sl1:
            for o, order in enumerate(inst.orders):
                for s in order:
                    for l in range(L):
                        if (l, s) in pinned:
                            continue
                        self.sl1_rows[(o, s, l)] = self.model.add_row(
                            f"sl1_{o}_{s}_{l}",
                            {int(self.xi_idx[l, s]): -1.0},
                            GE,
                            0.0,
                        )
        if not include_linking:
            # kept as an experiment knob; the reference listing keeps both
            for r in self.link_rows.values():
                self.model.set_row_active(r, False)
        self.cut_rows: dict = {}
        self.rho_idx: dict = {}
        self.columns: dict = {}
        self.active_cuts: dict = {}
        self.aisle_rows: dict = {}
        self.add_columns(columns)
        for cut in active_cuts:
            self.activate_cut(cut)
        self.apply_branch(branch or BranchConstraints())

    def _pinned_zero(self, branch: BranchConstraints | None) -> set:
        """(location, sku) pairs whose assignment variable is fixed to 0."""
        inst = self.inst
        L = inst.layout.num_locations
        pinned = set()
        for s, lstar in inst.fixed:
            for l in range(L):
                if l != lstar:
                    pinned.add((l, s))
        if branch:
            for s, l in branch.forbid:
                pinned.add((l, s))
            for s, a in branch.aisle_out:
                for l in inst.layout.locations_in_aisle(a):
                    pinned.add((l, s))
            for s, a in branch.aisle_in:
                for l in range(L):
                    if inst.layout.aisle_of(l) != a:
                        # a SKU forced into one aisle cannot sit elsewhere
                        pinned.add((l, s))
        return pinned

    # -- construction ----------------------------------------------------

    def _base_bounds(self):
        """Root bounds of the assignment variables (fixed SKUs pinned)."""
        inst = self.inst
        L = inst.layout.num_locations
        fixed = inst.fixed_map()
        lbs = np.zeros((L, inst.num_skus))
        ubs = np.ones((L, inst.num_skus))
        for s, lstar in fixed.items():
            for l in range(L):
                if l == lstar:
                    lbs[l, s] = 1.0
                else:
                    ubs[l, s] = 0.0
        return lbs, ubs

    def apply_branch(self, branch: BranchConstraints) -> None:
        """Reset assignment bounds to the root state, then apply one node's
        branching decisions; aisle-membership rows toggle on and off so the
        model can be reused across nodes."""
        inst = self.inst
        L, S = inst.layout.num_locations, inst.num_skus
        lbs, ubs = self._base_bounds()
        for s, l in branch.force:
            lbs[l, s] = 1.0
        for s, l in branch.forbid:
            ubs[l, s] = 0.0
        for s, a in branch.aisle_out:
            for l in inst.layout.locations_in_aisle(a):
                ubs[l, s] = 0.0
        wanted = set(branch.aisle_in)
        for s, a in branch.aisle_in:
            for l in range(L):
                if inst.layout.aisle_of(l) != a:
                    ubs[l, s] = 0.0
            if (s, a) not in self.aisle_rows:
                terms = {
                    int(self.xi_idx[l, s]): 1.0
                    for l in inst.layout.locations_in_aisle(a)
                }
                self.aisle_rows[(s, a)] = self.model.add_row(
                    f"aislein_{s}_{a}", terms, GE, 1.0
                )
        for key, row in self.aisle_rows.items():
            self.model.set_row_active(row, key in wanted)
        for l in range(L):
            for s in range(S):
                self.model.set_bounds(int(self.xi_idx[l, s]), lbs[l, s], ubs[l, s])

    def set_allowed_columns(self, allowed_keys) -> None:
        """Disable pooled columns incompatible with the current node by
        zeroing their upper bound (super columns always stay)."""
        for key, var in self.rho_idx.items():
            col = self.columns[key]
            ok = col.is_super or key in allowed_keys
            self.model.set_bounds(var, 0.0, float("inf") if ok else 0.0)

    def add_columns(self, columns) -> int:
        added = 0
        for col in columns:
            if col.key in self.rho_idx:
                continue
            var = self.model.add_var(
                f"rho_{col.order}_{len(self.rho_idx)}", 0.0, float("inf"), float(col.cost)
            )
            self.rho_idx[col.key] = var
            self.columns[col.key] = col
            terms = {self.conv_rows[col.order]: 1.0}
            order = self.inst.orders[col.order]
            for l, c in col.stops:
                row = self.link_rows.get((l, col.order))
                if row is not None:
                    terms[row] = float(c)
                if self.include_sl1:
                    for s in order:
                        row = self.sl1_rows.get((col.order, s, l))
                        if row is not None:
                            terms[row] = 1.0
            for key, (cut, row) in self.active_cuts.items():
                if cut.order == col.order and col.delta(cut.locations):
                    terms[row] = 1.0
            self.model.add_column_terms(var, terms)
            added += 1
        return added

    def activate_cut(self, cut) -> None:
        key = cut.key
        if key in self.cut_rows:
            self.model.set_row_active(self.cut_rows[key], True)
            self.active_cuts[key] = (cut, self.cut_rows[key])
            return
        terms = {int(self.xi_idx[l, cut.sku]): -1.0 for l in cut.locations}
        for col in self.columns.values():
            if col.order == cut.order and col.delta(cut.locations):
                terms[self.rho_idx[col.key]] = 1.0
        row = self.model.add_row(f"slcut_{len(self.cut_rows)}", terms, GE, 0.0)
        self.cut_rows[key] = row
        self.active_cuts[key] = (cut, row)

    def deactivate_cut(self, cut) -> None:
        key = cut.key
        if key in self.active_cuts:
            _, row = self.active_cuts.pop(key)
            self.model.set_row_active(row, False)

    # -- solving ---------------------------------------------------------

    def solve(self, adapter=None, warm_start=None) -> RmpSolution:
        """Solve to optimality and extract primal values and duals.

        A numerical failure is retried once from scratch before giving up.
        """
        adapter = adapter or get_adapter()
        sol = adapter.solve(self.model, warm_start)
        if sol.status == "error":
            sol = adapter.solve(self.model, None)
        if sol.status == "infeasible":
            return RmpSolution("infeasible", float("nan"), np.zeros(0), {}, None)
        if not sol.optimal:
            raise RmpError(f"LP solve failed with status {sol.status}")
        return self._extract(sol)

    def _extract(self, sol: LpSolution) -> RmpSolution:
        inst = self.inst
        L, S = inst.layout.num_locations, inst.num_skus
        xi = np.empty((L, S))
        for l in range(L):
            for s in range(S):
                xi[l, s] = sol.x[self.xi_idx[l, s]]
        rho = {
            self.columns[key]: float(sol.x[var]) for key, var in self.rho_idx.items()
        }
        mu = np.array([sol.duals[r] for r in self.conv_rows])
        pi = np.zeros((L, inst.num_orders))
        for (l, o), r in self.link_rows.items():
            pi[l, o] = max(0.0, sol.duals[r])
        sigma = {}
        for (o, s, l), r in self.sl1_rows.items():
            v = sol.duals[r]
            if v > DUAL_TOL:
                sigma[(o, s, l)] = v
        lam, slack = {}, {}
        for key, (cut, row) in self.active_cuts.items():
            lam[key] = max(0.0, sol.duals[row])
            lhs = sum(
                rho[self.columns[k]]
                for k, var in self.rho_idx.items()
                if self.columns[k].order == cut.order
                and self.columns[k].delta(cut.locations)
            )
            rhs = sum(xi[l, cut.sku] for l in cut.locations)
            slack[key] = lhs - rhs
        duals = DualValues(mu, pi, sigma, lam)
        return RmpSolution("optimal", float(sol.objective), xi, rho, duals, slack)

    def debug_dump(self, path) -> None:
        self.model.write_lp(path)


def build_rmp(
    inst: Instance,
    columns,
    active_cuts=(),
    branch: BranchConstraints | None = None,
    include_sl1: bool = True,
) -> Rmp:
    return Rmp(inst, columns, active_cuts, branch, include_sl1)


def reduced_cost(column: Column, duals: DualValues, active_cuts, order_skus) -> float:
    """Reduced cost of a route column against the current duals."""
    for cut in active_cuts:
        if cut.key not in duals.lam:
            raise ValueError("active cut set does not match the dual values")
    value = float(column.cost) - float(duals.mu[column.order])
    for l, c in column.stops:
        value -= c * duals.pi[l, column.order]
        value -= duals.sigma_sum(column.order, l, order_skus)
    for cut in active_cuts:
        if cut.order == column.order and column.delta(cut.locations):
            value -= duals.lam[cut.key]
    return value
