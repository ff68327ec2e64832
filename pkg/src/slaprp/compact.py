"""Compact MILP formulations emitted as solver-agnostic models and files.

Five emitters: the MTZ tour formulation and its multi-commodity-flow lifting
(both policy-free, optimal routing), plus one closed-form model per heuristic
routing policy.  Conditional rules are expressed as indicator constraints; an
optional rewrite replaces each indicator with a big-M row whose constant is
derived from the variable bounds of that row alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lp import EQ, GE, LE, LpModel
from .model import DEPOT, Instance, SINGLE_BLOCK, build_graph, walk_distance
from .routing import midpoint_bay

BINARY, INTEGER, CONTINUOUS = "binary", "integer", "continuous"


@dataclass
class MipVar:
    name: str
    kind: str
    lb: float
    ub: float


@dataclass
class MipConstraint:
    name: str
    terms: dict[str, float]
    sense: str
    rhs: float


@dataclass
class MipIndicator:
    """guard = guard_value  ->  terms sense rhs"""

    name: str
    guard: str
    guard_value: int
    terms: dict[str, float]
    sense: str
    rhs: float


@dataclass
class MipModel:
    name: str
    vars: dict[str, MipVar] = field(default_factory=dict)
    constraints: list[MipConstraint] = field(default_factory=list)
    indicators: list[MipIndicator] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    obj_constant: float = 0.0
    symbols: dict[str, tuple] = field(default_factory=dict)  # var -> (symbol, indices)

    def add_var(self, symbol: str, indices: tuple, kind: str, lb=0.0, ub=1.0, obj=0.0) -> str:
        name = symbol + "".join(f"_{i}" for i in indices) if indices else symbol
        if name in self.vars:
            raise ValueError(f"duplicate variable {name}")
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        self.vars[name] = MipVar(name, kind, float(lb), float(ub))
        self.symbols[name] = (symbol, tuple(indices))
        if obj:
            self.objective[name] = self.objective.get(name, 0.0) + float(obj)
        return name

    def add_obj(self, var: str, coef: float) -> None:
        if coef:
            self.objective[var] = self.objective.get(var, 0.0) + float(coef)

    def add_con(self, name: str, terms: dict[str, float], sense: str, rhs: float) -> None:
        self.constraints.append(MipConstraint(name, {k: float(v) for k, v in terms.items() if v}, sense, float(rhs)))

    def add_ind(self, name, guard, guard_value, terms, sense, rhs) -> None:
        self.indicators.append(
            MipIndicator(name, guard, int(guard_value), {k: float(v) for k, v in terms.items() if v}, sense, float(rhs))
        )

    # -- transforms -------------------------------------------------------

    def _terms_range(self, terms) -> tuple[float, float]:
        lo = hi = 0.0
        for v, c in terms.items():
            var = self.vars[v]
            a, b = c * var.lb, c * var.ub
            lo += min(a, b)
            hi += max(a, b)
        return lo, hi

    def big_m_rewrite(self) -> "MipModel":
        """Replace every indicator by big-M rows; Ms come from the bounds of
        the variables in the row."""
        out = MipModel(self.name + "_bigm")
        out.vars = {k: MipVar(v.name, v.kind, v.lb, v.ub) for k, v in self.vars.items()}
        out.symbols = dict(self.symbols)
        out.objective = dict(self.objective)
        out.obj_constant = self.obj_constant
        out.constraints = [
            MipConstraint(c.name, dict(c.terms), c.sense, c.rhs) for c in self.constraints
        ]
        for ind in self.indicators:
            lo, hi = self._terms_range(ind.terms)
            senses = [ind.sense] if ind.sense != EQ else [LE, GE]
            for k, sense in enumerate(senses):
                terms = dict(ind.terms)
                if sense == LE:
                    m = max(0.0, hi - ind.rhs)
                    if ind.guard_value == 1:
                        # terms + M*guard <= rhs + M
                        terms[ind.guard] = terms.get(ind.guard, 0.0) + m
                        rhs = ind.rhs + m
                    else:
                        # terms - M*guard <= rhs
                        terms[ind.guard] = terms.get(ind.guard, 0.0) - m
                        rhs = ind.rhs
                else:
                    m = max(0.0, ind.rhs - lo)
                    if ind.guard_value == 1:
                        # terms - M*guard >= rhs - M
                        terms[ind.guard] = terms.get(ind.guard, 0.0) - m
                        rhs = ind.rhs - m
                    else:
                        # terms + M*guard >= rhs
                        terms[ind.guard] = terms.get(ind.guard, 0.0) + m
                        rhs = ind.rhs
                out.add_con(f"{ind.name}_m{k}", terms, sense, rhs)
        return out

    def to_lp_model(self, relax: bool) -> LpModel:
        if self.indicators:
            return self.big_m_rewrite().to_lp_model(relax)
        lp = LpModel(self.name)
        idx = {}
        for name, var in self.vars.items():
            integer = var.kind in (BINARY, INTEGER) and not relax
            idx[name] = lp.add_var(name, var.lb, var.ub, self.objective.get(name, 0.0), integer)
        for con in self.constraints:
            lp.add_row(con.name, {idx[v]: c for v, c in con.terms.items()}, con.sense, con.rhs)
        return lp

    def manifest(self) -> dict:
        return {
            name: {"symbol": sym, "indices": list(ix), "kind": self.vars[name].kind}
            for name, (sym, ix) in self.symbols.items()
        }


# ---------------------------------------------------------------------------
# Policy-free formulations on the routing graph


def _add_assignment_block(m: MipModel, inst: Instance) -> None:
    L, S = inst.layout.num_locations, inst.num_skus
    for l in range(L):
        for s in range(S):
            m.add_var("xi", (l, s), BINARY)
    for l in range(L):
        m.add_con(
            f"cap_{l}",
            {f"xi_{l}_{s}": 1.0 for s in range(S)},
            LE,
            inst.layout.capacity_of(l),
        )
    for s in range(S):
        m.add_con(f"assign_{s}", {f"xi_{l}_{s}": 1.0 for l in range(L)}, EQ, 1.0)
    for s, l in inst.fixed:
        m.add_con(f"fixed_{s}_{l}", {f"xi_{l}_{s}": 1.0}, EQ, 1.0)


def _tour_block(m: MipModel, inst: Instance, graph) -> list[tuple[int, int]]:
    """Route variables and degree/length/linking rows shared by MTZ and MCF."""
    arcs = list(graph.arcs())
    for o in range(inst.num_orders):
        for i, j in arcs:
            m.add_var("x", (o, i, j), BINARY, obj=graph.distance(i, j))
    nodes = range(1, graph.num_nodes)
    for o in range(inst.num_orders):
        m.add_con(
            f"leave_depot_{o}",
            {f"x_{o}_0_{j}": 1.0 for i, j in arcs if i == 0},
            EQ,
            1.0,
        )
        m.add_con(
            f"enter_depot_{o}",
            {f"x_{o}_{i}_0": 1.0 for i, j in arcs if j == 0},
            EQ,
            1.0,
        )
        for v in nodes:
            terms: dict[str, float] = {}
            for i, j in arcs:
                if i == v:
                    terms[f"x_{o}_{i}_{j}"] = terms.get(f"x_{o}_{i}_{j}", 0.0) + 1.0
                if j == v:
                    terms[f"x_{o}_{i}_{j}"] = terms.get(f"x_{o}_{i}_{j}", 0.0) - 1.0
            m.add_con(f"flow_{o}_{v}", terms, EQ, 0.0)
        m.add_con(
            f"length_{o}",
            {f"x_{o}_{i}_{j}": 1.0 for i, j in arcs if j != 0},
            EQ,
            len(inst.orders[o]),
        )
        for l in range(inst.layout.num_locations):
            loc_nodes = set(graph.nodes_of(l))
            terms = {f"x_{o}_{i}_{j}": 1.0 for i, j in arcs if j in loc_nodes}
            for s in inst.orders[o]:
                terms[f"xi_{l}_{s}"] = -1.0
            m.add_con(f"linkstop_{l}_{o}", terms, GE, 0.0)
    return arcs


def emit_compact_mtz(inst: Instance) -> MipModel:
    """Tour formulation with Miller-Tucker-Zemlin subtour rows (one per
    ordered storage-node pair per order)."""
    m = MipModel(f"mtz_{inst.name or 'instance'}")
    _add_assignment_block(m, inst)
    graph = build_graph(inst.layout)
    arcs = set(_tour_block(m, inst, graph))
    nodes = range(1, graph.num_nodes)
    for o in range(inst.num_orders):
        n_o = len(inst.orders[o])
        for v in nodes:
            m.add_var("u", (o, v), CONTINUOUS, 0.0, max(0, n_o - 1))
        for i in nodes:
            for j in nodes:
                if i == j:
                    continue
                terms = {f"u_{o}_{j}": 1.0, f"u_{o}_{i}": -1.0}
                if (i, j) in arcs:
                    terms[f"x_{o}_{i}_{j}"] = -float(n_o)
                m.add_con(f"mtz_{o}_{i}_{j}", terms, GE, 1.0 - n_o)
    return m


def emit_compact_mcf(inst: Instance) -> MipModel:
    """Multi-commodity-flow lifting: one unit of flow per (order, SKU) from
    the depot to the SKU's location, carried only on used arcs."""
    m = MipModel(f"mcf_{inst.name or 'instance'}")
    _add_assignment_block(m, inst)
    graph = build_graph(inst.layout)
    arcs = _tour_block(m, inst, graph)
    for o in range(inst.num_orders):
        for s in inst.orders[o]:
            for i, j in arcs:
                m.add_var("g", (o, s, i, j), CONTINUOUS, 0.0, 1.0)
                m.add_con(
                    f"cap_g_{o}_{s}_{i}_{j}",
                    {f"g_{o}_{s}_{i}_{j}": 1.0, f"x_{o}_{i}_{j}": -1.0},
                    LE,
                    0.0,
                )
            for l in range(inst.layout.num_locations):
                loc_nodes = set(graph.nodes_of(l))
                terms: dict[str, float] = {}
                for i, j in arcs:
                    if j in loc_nodes:
                        terms[f"g_{o}_{s}_{i}_{j}"] = terms.get(f"g_{o}_{s}_{i}_{j}", 0.0) + 1.0
                    if i in loc_nodes:
                        terms[f"g_{o}_{s}_{i}_{j}"] = terms.get(f"g_{o}_{s}_{i}_{j}", 0.0) - 1.0
                terms[f"xi_{l}_{s}"] = -1.0
                m.add_con(f"flowbal_{o}_{s}_{l}", terms, EQ, 0.0)
    return m


# ---------------------------------------------------------------------------
# Closed-form policy formulations (single-block layouts)


def _policy_assignment_block(m: MipModel, inst: Instance) -> None:
    """Aisle/bay-indexed assignment variables; xi_{l}_{s} with l the location
    id keeps the manifest uniform across formulations."""
    _add_assignment_block(m, inst)


def _farthest_rows(m: MipModel, inst: Instance, prefix: str = "f") -> None:
    lay = inst.layout
    nb = lay.bays_per_aisle
    for o, order in enumerate(inst.orders):
        for a in range(1, lay.num_aisles + 1):
            m.add_var(prefix, (o, a), CONTINUOUS, 0.0, nb)
            m.add_var("z", (o, a), BINARY)
            for s in order:
                terms = {f"{prefix}_{o}_{a}": 1.0}
                for b in range(1, nb + 1):
                    terms[f"xi_{lay.location_id(a, b)}_{s}"] = -float(b)
                m.add_con(f"far_{o}_{a}_{s}", terms, GE, 0.0)
            m.add_con(
                f"farvisit_{o}_{a}",
                {f"{prefix}_{o}_{a}": 1.0, f"z_{o}_{a}": -float(nb)},
                LE,
                0.0,
            )


def emit_return_mip(inst: Instance) -> MipModel:
    m = MipModel(f"return_{inst.name or 'instance'}")
    lay = inst.layout
    D, d = lay.aisle_pitch, lay.bay_pitch
    _policy_assignment_block(m, inst)
    _farthest_rows(m, inst)
    for o in range(inst.num_orders):
        m.add_var("v", (o,), CONTINUOUS, 1.0, lay.num_aisles, obj=2.0 * D)
        m.obj_constant -= 2.0 * D
        for a in range(1, lay.num_aisles + 1):
            m.add_obj(f"f_{o}_{a}", 2.0 * d)
            m.add_ind(f"vfar_{o}_{a}", f"z_{o}_{a}", 1, {f"v_{o}": 1.0}, GE, float(a))
    return m


def emit_sshape_mip(inst: Instance) -> MipModel:
    m = MipModel(f"sshape_{inst.name or 'instance'}")
    lay = inst.layout
    D, d, nb, na = lay.aisle_pitch, lay.bay_pitch, lay.bays_per_aisle, lay.num_aisles
    _policy_assignment_block(m, inst)
    _farthest_rows(m, inst)
    for o in range(inst.num_orders):
        m.add_var("s", (o,), BINARY, obj=-2.0 * d * (nb + 1))
        m.add_var("k", (o,), INTEGER, 0.0, na // 2)
        for a in range(1, na + 1):
            m.add_var("va", (o, a), BINARY, obj=2.0 * D * (a - 1))
            m.add_var("alpha", (o, a), CONTINUOUS, 0.0, nb, obj=2.0 * d)
            m.add_obj(f"z_{o}_{a}", d * (nb + 1))
        for a in range(1, na + 1):
            m.add_ind(f"vnotvis_{o}_{a}", f"z_{o}_{a}", 0, {f"va_{o}_{a}": 1.0}, LE, 0.0)
            if a > 1:
                m.add_ind(
                    f"vlast_{o}_{a}",
                    f"z_{o}_{a}",
                    1,
                    {f"va_{o}_{c}": 1.0 for c in range(1, a)},
                    LE,
                    0.0,
                )
        m.add_con(f"onefar_{o}", {f"va_{o}_{a}": 1.0 for a in range(1, na + 1)}, EQ, 1.0)
        parity = {f"z_{o}_{a}": 1.0 for a in range(1, na + 1)}
        parity[f"k_{o}"] = -2.0
        parity[f"s_{o}"] = -1.0
        m.add_con(f"parity_{o}", parity, EQ, 0.0)
        for a in range(1, na + 1):
            m.add_con(f"lin1_{o}_{a}", {f"alpha_{o}_{a}": 1.0, f"s_{o}": -float(nb)}, LE, 0.0)
            m.add_con(f"lin2_{o}_{a}", {f"alpha_{o}_{a}": 1.0, f"f_{o}_{a}": -1.0}, LE, 0.0)
            m.add_con(f"lin3_{o}_{a}", {f"alpha_{o}_{a}": 1.0, f"va_{o}_{a}": -float(nb)}, LE, 0.0)
            m.add_con(
                f"lin4_{o}_{a}",
                {
                    f"alpha_{o}_{a}": 1.0,
                    f"f_{o}_{a}": -1.0,
                    f"s_{o}": -float(nb),
                    f"va_{o}_{a}": -float(nb),
                },
                GE,
                -2.0 * nb,
            )
    return m


def _span_rows(m: MipModel, inst: Instance, indicator_s_row: bool) -> None:
    """First/last visited aisle machinery shared by midpoint and largest gap:
    v_o, v_oa, u_o, u_oa, w_oa, s_o."""
    lay = inst.layout
    na = lay.num_aisles
    for o in range(inst.num_orders):
        m.add_var("v", (o,), CONTINUOUS, 1.0, na)
        m.add_var("u", (o,), CONTINUOUS, 0.0, na)
        m.add_var("s", (o,), BINARY)
        for a in range(1, na + 1):
            m.add_var("va", (o, a), BINARY)
            m.add_var("ua", (o, a), BINARY)
            m.add_var("w", (o, a), BINARY)
            m.add_var("alpha", (o, a), BINARY)
        for a in range(1, na + 1):
            m.add_ind(f"vfar_{o}_{a}", f"z_{o}_{a}", 1, {f"v_{o}": 1.0}, GE, float(a))
            m.add_ind(f"unear_{o}_{a}", f"z_{o}_{a}", 1, {f"u_{o}": 1.0}, LE, float(a))
            m.add_con(
                f"alphadef_{o}_{a}",
                {f"alpha_{o}_{a}": 1.0, **{f"z_{o}_{c}": -1.0 for c in range(1, a)}},
                LE,
                0.0,
            )
            m.add_ind(f"ulow_{o}_{a}", f"alpha_{o}_{a}", 0, {f"u_{o}": 1.0}, GE, float(a))
        m.add_con(
            f"vdef_{o}",
            {f"v_{o}": 1.0, **{f"va_{o}_{a}": -float(a) for a in range(1, na + 1)}},
            EQ,
            0.0,
        )
        m.add_con(f"vone_{o}", {f"va_{o}_{a}": 1.0 for a in range(1, na + 1)}, EQ, 1.0)
        m.add_con(
            f"udef_{o}",
            {f"u_{o}": 1.0, **{f"ua_{o}_{a}": -float(a) for a in range(1, na + 1)}},
            EQ,
            0.0,
        )
        m.add_con(f"uone_{o}", {f"ua_{o}_{a}": 1.0 for a in range(1, na + 1)}, EQ, 1.0)
        for a in range(1, na + 1):
            m.add_con(
                f"wlow_{o}_{a}",
                {f"w_{o}_{a}": 1.0, **{f"ua_{o}_{c}": -1.0 for c in range(1, a)}},
                LE,
                0.0,
            )
            m.add_con(
                f"whigh_{o}_{a}",
                {f"w_{o}_{a}": 1.0, **{f"va_{o}_{c}": -1.0 for c in range(a + 1, na + 1)}},
                LE,
                0.0,
            )
            m.add_con(
                f"wboth_{o}_{a}",
                {
                    f"w_{o}_{a}": 1.0,
                    **{f"ua_{o}_{c}": -1.0 for c in range(1, a)},
                    **{f"va_{o}_{c}": -1.0 for c in range(a + 1, na + 1)},
                },
                GE,
                -1.0,
            )
        m.add_con(f"sspan_{o}", {f"s_{o}": 1.0, f"v_{o}": -1.0, f"u_{o}": 1.0}, LE, 0.0)
        for a in range(1, na + 1):
            if indicator_s_row:
                m.add_ind(
                    f"sdef_{o}_{a}",
                    f"va_{o}_{a}",
                    1,
                    {f"s_{o}": 1.0, f"ua_{o}_{a}": 1.0},
                    GE,
                    1.0,
                )
            else:
                m.add_con(
                    f"sdef_{o}_{a}", {f"s_{o}": 1.0, f"ua_{o}_{a}": 1.0}, GE, 1.0
                )


def emit_midpoint_mip(inst: Instance) -> MipModel:
    m = MipModel(f"midpoint_{inst.name or 'instance'}")
    lay = inst.layout
    D, d, nb, na = lay.aisle_pitch, lay.bay_pitch, lay.bays_per_aisle, lay.num_aisles
    mp = midpoint_bay(lay)
    _policy_assignment_block(m, inst)
    _farthest_rows(m, inst)
    _span_rows(m, inst, indicator_s_row=True)
    for o, order in enumerate(inst.orders):
        m.add_obj(f"v_{o}", 2.0 * D)
        m.obj_constant -= 2.0 * D
        m.add_obj(f"s_{o}", 2.0 * d * (nb + 1))
        for a in range(1, na + 1):
            m.add_var("fm", (o, a), CONTINUOUS, 0.0, mp)
            m.add_var("fp", (o, a), CONTINUOUS, 0.0, nb - mp)
            m.add_var("beta", (o, a), CONTINUOUS, 0.0, nb + 1, obj=2.0 * d)
            m.add_var("gamma", (o, a), CONTINUOUS, 0.0, nb, obj=2.0 * d)
            for s in order:
                terms_m = {f"fm_{o}_{a}": 1.0}
                for b in range(1, mp + 1):
                    terms_m[f"xi_{lay.location_id(a, b)}_{s}"] = -float(b)
                m.add_con(f"fmdef_{o}_{a}_{s}", terms_m, GE, 0.0)
                terms_p = {f"fp_{o}_{a}": 1.0}
                for b in range(mp + 1, nb + 1):
                    terms_p[f"xi_{lay.location_id(a, b)}_{s}"] = -float(nb + 1 - b)
                m.add_con(f"fpdef_{o}_{a}_{s}", terms_p, GE, 0.0)
            m.add_con(
                f"blin1_{o}_{a}", {f"beta_{o}_{a}": 1.0, f"s_{o}": -float(nb + 1)}, LE, 0.0
            )
            m.add_con(
                f"blin2_{o}_{a}",
                {f"beta_{o}_{a}": 1.0, f"fm_{o}_{a}": -1.0, f"fp_{o}_{a}": -1.0},
                LE,
                0.0,
            )
            m.add_con(
                f"blin3_{o}_{a}", {f"beta_{o}_{a}": 1.0, f"w_{o}_{a}": -float(nb + 1)}, LE, 0.0
            )
            m.add_con(
                f"blin4_{o}_{a}",
                {
                    f"beta_{o}_{a}": 1.0,
                    f"fm_{o}_{a}": -1.0,
                    f"fp_{o}_{a}": -1.0,
                    f"s_{o}": -float(nb + 1),
                    f"w_{o}_{a}": -float(nb + 1),
                },
                GE,
                -2.0 * (nb + 1),
            )
            m.add_con(
                f"glin1_{o}_{a}", {f"gamma_{o}_{a}": 1.0, f"s_{o}": float(nb)}, LE, float(nb)
            )
            m.add_con(f"glin2_{o}_{a}", {f"gamma_{o}_{a}": 1.0, f"f_{o}_{a}": -1.0}, LE, 0.0)
            m.add_con(
                f"glin3_{o}_{a}", {f"gamma_{o}_{a}": 1.0, f"va_{o}_{a}": -float(nb)}, LE, 0.0
            )
            m.add_con(
                f"glin4_{o}_{a}",
                {
                    f"gamma_{o}_{a}": 1.0,
                    f"f_{o}_{a}": -1.0,
                    f"s_{o}": float(nb),
                    f"va_{o}_{a}": -float(nb),
                },
                GE,
                -float(nb),
            )
    return m


def emit_largestgap_mip(inst: Instance) -> MipModel:
    m = MipModel(f"largestgap_{inst.name or 'instance'}")
    lay = inst.layout
    D, d, nb, na = lay.aisle_pitch, lay.bay_pitch, lay.bays_per_aisle, lay.num_aisles
    _policy_assignment_block(m, inst)
    _farthest_rows(m, inst)
    # the span block's s-row is stated unconditionally in the source
    # formulation, which forces s=1 and kills single-aisle solutions; the
    # indicator form from the midpoint model is used instead.
    _span_rows(m, inst, indicator_s_row=True)
    for o, order in enumerate(inst.orders):
        m.add_obj(f"v_{o}", 2.0 * D)
        m.obj_constant -= 2.0 * D
        m.add_obj(f"s_{o}", 2.0 * d * (nb + 1))
        for a in range(1, na + 1):
            m.add_var("G", (o, a), CONTINUOUS, 0.0, nb + 1)
            m.add_var("gamma", (o, a), CONTINUOUS, 0.0, nb + 1, obj=2.0 * d)
            m.add_var("delta", (o, a), CONTINUOUS, 0.0, nb, obj=2.0 * d)
            for b in range(0, nb + 1):
                m.add_var("gap", (o, a, b), CONTINUOUS, 0.0, nb + 1)
                m.add_var("h", (o, a, b), BINARY)
            m.add_ind(
                f"gap0novisit_{o}_{a}", f"z_{o}_{a}", 0, {f"gap_{o}_{a}_0": 1.0}, EQ, float(nb + 1)
            )
            for b in range(1, nb + 1):
                loc = lay.location_id(a, b)
                for s in order:
                    m.add_ind(
                        f"gap0pick_{o}_{a}_{b}_{s}",
                        f"xi_{loc}_{s}",
                        1,
                        {f"gap_{o}_{a}_0": 1.0},
                        LE,
                        float(b),
                    )
                bterms = {f"beta_{o}_{a}_{b}": 1.0}
                m.add_var("beta", (o, a, b), BINARY)
                for s in order:
                    bterms[f"xi_{loc}_{s}"] = bterms.get(f"xi_{loc}_{s}", 0.0) - 1.0
                m.add_con(f"betacap_{o}_{a}_{b}", bterms, LE, 0.0)
                m.add_ind(
                    f"gapzero_{o}_{a}_{b}",
                    f"beta_{o}_{a}_{b}",
                    0,
                    {f"gap_{o}_{a}_{b}": 1.0},
                    EQ,
                    0.0,
                )
                for b2 in range(b + 1, nb + 1):
                    loc2 = lay.location_id(a, b2)
                    for s in order:
                        m.add_ind(
                            f"gapnext_{o}_{a}_{b}_{b2}_{s}",
                            f"xi_{loc2}_{s}",
                            1,
                            {f"gap_{o}_{a}_{b}": 1.0},
                            LE,
                            float(b2 - b),
                        )
                m.add_con(
                    f"gapback_{o}_{a}_{b}", {f"gap_{o}_{a}_{b}": 1.0}, LE, float(nb + 1 - b)
                )
            for b in range(0, nb + 1):
                m.add_con(
                    f"Glow_{o}_{a}_{b}",
                    {f"G_{o}_{a}": 1.0, f"gap_{o}_{a}_{b}": -1.0},
                    GE,
                    0.0,
                )
                m.add_con(
                    f"Ghigh_{o}_{a}_{b}",
                    {
                        f"G_{o}_{a}": 1.0,
                        f"gap_{o}_{a}_{b}": -1.0,
                        f"h_{o}_{a}_{b}": float(nb + 1),
                    },
                    LE,
                    float(nb + 1),
                )
            m.add_con(
                f"hone_{o}_{a}", {f"h_{o}_{a}_{b}": 1.0 for b in range(0, nb + 1)}, EQ, 1.0
            )
            # printed as gamma <= b(1-s) in the source, which contradicts the
            # lower linearisation row; the midpoint analogue (active when two
            # aisles are visited) is the consistent reading
            m.add_con(
                f"glin1_{o}_{a}",
                {f"gamma_{o}_{a}": 1.0, f"s_{o}": -float(nb + 1)},
                LE,
                0.0,
            )
            m.add_con(
                f"glin2_{o}_{a}", {f"gamma_{o}_{a}": 1.0, f"G_{o}_{a}": 1.0}, LE, float(nb + 1)
            )
            m.add_con(
                f"glin3_{o}_{a}", {f"gamma_{o}_{a}": 1.0, f"w_{o}_{a}": -float(nb + 1)}, LE, 0.0
            )
            m.add_con(
                f"glin4_{o}_{a}",
                {
                    f"gamma_{o}_{a}": 1.0,
                    f"G_{o}_{a}": 1.0,
                    f"s_{o}": -float(nb + 1),
                    f"w_{o}_{a}": -float(nb + 1),
                },
                GE,
                -float(nb + 1),
            )
            m.add_con(
                f"dlin1_{o}_{a}", {f"delta_{o}_{a}": 1.0, f"s_{o}": float(nb)}, LE, float(nb)
            )
            m.add_con(f"dlin2_{o}_{a}", {f"delta_{o}_{a}": 1.0, f"f_{o}_{a}": -1.0}, LE, 0.0)
            m.add_con(
                f"dlin3_{o}_{a}", {f"delta_{o}_{a}": 1.0, f"va_{o}_{a}": -float(nb)}, LE, 0.0
            )
            m.add_con(
                f"dlin4_{o}_{a}",
                {
                    f"delta_{o}_{a}": 1.0,
                    f"f_{o}_{a}": -1.0,
                    f"s_{o}": float(nb),
                    f"va_{o}_{a}": -float(nb),
                },
                GE,
                -float(nb),
            )
    return m


_POLICY_EMITTERS = {
    "return": emit_return_mip,
    "sshape": emit_sshape_mip,
    "midpoint": emit_midpoint_mip,
    "largestgap": emit_largestgap_mip,
}


def emit_policy_mip(inst: Instance, policy: str) -> MipModel:
    if inst.layout.kind != SINGLE_BLOCK:
        raise ValueError("policy formulations require a single-block layout")
    try:
        emitter = _POLICY_EMITTERS[policy]
    except KeyError:
        raise ValueError(f"no compact formulation for policy {policy!r}") from None
    return emitter(inst)


def emit_model(inst: Instance, formulation: str) -> MipModel:
    if formulation == "mtz":
        return emit_compact_mtz(inst)
    if formulation == "mcf":
        return emit_compact_mcf(inst)
    return emit_policy_mip(inst, formulation)


# ---------------------------------------------------------------------------
# Files


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _lp_expr(terms: dict[str, float]) -> str:
    parts = []
    for v in sorted(terms):
        c = terms[v]
        if c == 0:
            continue
        parts.append(f"{'+' if c >= 0 else '-'} {_fmt(abs(c))} {v}")
    return " ".join(parts) if parts else "0"


def write_lp_text(model: MipModel, path) -> None:
    op = {LE: "<=", GE: ">=", EQ: "="}
    with open(path, "w") as fh:
        fh.write(f"\\ model {model.name}\n")
        fh.write("Minimize\n obj: ")
        obj = _lp_expr(model.objective)
        if model.obj_constant:
            obj += f" {'+' if model.obj_constant >= 0 else '-'} {_fmt(abs(model.obj_constant))}"
        fh.write(obj + "\n")
        fh.write("Subject To\n")
        for con in model.constraints:
            fh.write(f" {con.name}: {_lp_expr(con.terms)} {op[con.sense]} {_fmt(con.rhs)}\n")
        for ind in model.indicators:
            fh.write(
                f" {ind.name}: {ind.guard} = {ind.guard_value} -> "
                f"{_lp_expr(ind.terms)} {op[ind.sense]} {_fmt(ind.rhs)}\n"
            )
        fh.write("Bounds\n")
        for var in model.vars.values():
            if var.kind == BINARY:
                continue
            fh.write(f" {_fmt(var.lb)} <= {var.name} <= {_fmt(var.ub)}\n")
        binaries = [v.name for v in model.vars.values() if v.kind == BINARY]
        if binaries:
            fh.write("Binaries\n")
            for name in binaries:
                fh.write(f" {name}\n")
        generals = [v.name for v in model.vars.values() if v.kind == INTEGER]
        if generals:
            fh.write("Generals\n")
            for name in generals:
                fh.write(f" {name}\n")
        fh.write("End\n")


def write_mps_text(model: MipModel, path) -> None:
    """Fixed-form-free MPS; indicators are big-M rewritten first."""
    if model.indicators:
        model = model.big_m_rewrite()
    sense_tag = {LE: "L", GE: "G", EQ: "E"}
    with open(path, "w") as fh:
        fh.write(f"NAME {model.name}\n")
        fh.write("ROWS\n N obj\n")
        for con in model.constraints:
            fh.write(f" {sense_tag[con.sense]} {con.name}\n")
        fh.write("COLUMNS\n")
        by_var: dict[str, list[tuple[str, float]]] = {v: [] for v in model.vars}
        for con in model.constraints:
            for v, c in con.terms.items():
                by_var[v].append((con.name, c))
        integer_open = False
        for name, var in model.vars.items():
            is_int = var.kind in (BINARY, INTEGER)
            if is_int and not integer_open:
                fh.write("    MARKER                 'MARKER'                 'INTORG'\n")
                integer_open = True
            if not is_int and integer_open:
                fh.write("    MARKER                 'MARKER'                 'INTEND'\n")
                integer_open = False
            obj = model.objective.get(name, 0.0)
            entries = [("obj", obj)] if obj else []
            entries.extend(by_var[name])
            if not entries:
                entries = [("obj", 0.0)]
            for row, coef in entries:
                fh.write(f"    {name} {row} {_fmt(coef)}\n")
        if integer_open:
            fh.write("    MARKER                 'MARKER'                 'INTEND'\n")
        fh.write("RHS\n")
        if model.obj_constant:
            fh.write(f"    RHS obj {_fmt(-model.obj_constant)}\n")
        for con in model.constraints:
            if con.rhs:
                fh.write(f"    RHS {con.name} {_fmt(con.rhs)}\n")
        fh.write("BOUNDS\n")
        for name, var in model.vars.items():
            if var.kind == BINARY:
                fh.write(f" BV BND {name}\n")
                continue
            fh.write(f" LO BND {name} {_fmt(var.lb)}\n")
            fh.write(f" UP BND {name} {_fmt(var.ub)}\n")
        fh.write("ENDATA\n")


def write_model(model: MipModel, path, fmt: str = "lp_text", big_m: bool = False) -> None:
    if big_m and model.indicators:
        model = model.big_m_rewrite()
    if fmt == "lp_text":
        write_lp_text(model, path)
    elif fmt == "mps_text":
        write_mps_text(model, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Relaxation / integer values through the adapter


def lp_relaxation_value(model: MipModel, adapter=None) -> float:
    from .lp import get_adapter

    adapter = adapter or get_adapter()
    sol = adapter.solve(model.to_lp_model(relax=True))
    if not sol.optimal:
        raise RuntimeError(f"LP relaxation solve failed: {sol.status}")
    return sol.objective + model.obj_constant


def mip_value(model: MipModel, adapter=None, time_limit: float | None = None) -> float:
    from .lp import get_adapter

    adapter = adapter or get_adapter()
    sol = adapter.solve_mip(model.to_lp_model(relax=False), time_limit)
    if not sol.optimal:
        raise RuntimeError(f"MIP solve failed: {sol.status}")
    return sol.objective + model.obj_constant


def assignment_polytope(inst: Instance) -> LpModel:
    """Just the assignment rows and bounds, for integrality experiments."""
    lp = LpModel("assignment_polytope")
    L, S = inst.layout.num_locations, inst.num_skus
    idx = {}
    for l in range(L):
        for s in range(S):
            idx[(l, s)] = lp.add_var(f"xi_{l}_{s}", 0.0, 1.0)
    for l in range(L):
        lp.add_row(
            f"cap_{l}", {idx[(l, s)]: 1.0 for s in range(S)}, LE, inst.layout.capacity_of(l)
        )
    for s in range(S):
        lp.add_row(f"assign_{s}", {idx[(l, s)]: 1.0 for l in range(L)}, EQ, 1.0)
    for s, l in inst.fixed:
        lp.add_row(f"fixed_{s}_{l}", {idx[(l, s)]: 1.0}, EQ, 1.0)
    return lp
