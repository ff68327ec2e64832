"""Incremental LP model plus the solver adapter seam.

The adapter contract is the single place an LP backend plugs in: create rows
and columns incrementally, solve, and report primal values and duals.  Duals
follow the textbook convention for a minimisation problem (reduced cost of a
column = objective coefficient minus dual-weighted column entries; duals of
``>=`` rows are nonnegative, of ``<=`` rows nonpositive, of ``=`` rows free).

The default backend is HiGHS through scipy.  It does not keep a basis between
solves; ``warm_start`` is accepted and ignored.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

LE, GE, EQ = "<=", ">=", "="

INF = float("inf")


@dataclass
class _Row:
    name: str
    terms: dict[int, float]
    sense: str
    rhs: float
    active: bool = True


@dataclass
class _Var:
    name: str
    lb: float
    ub: float
    obj: float
    integer: bool = False


class LpModel:
    """A linear program assembled incrementally (columns and rows).

    Matrix entries are kept as append-only triplets so repeated solves only
    pay one vectorised pass, not a per-row rebuild.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.vars: list[_Var] = []
        self.rows: list[_Row] = []
        self._tri_r: list[int] = []
        self._tri_c: list[int] = []
        self._tri_v: list[float] = []

    def add_var(self, name, lb=0.0, ub=INF, obj=0.0, integer=False) -> int:
        self.vars.append(_Var(name, float(lb), float(ub), float(obj), integer))
        return len(self.vars) - 1

    def add_row(self, name, terms: dict[int, float], sense: str, rhs: float) -> int:
        if sense not in (LE, GE, EQ):
            raise ValueError(f"bad sense {sense!r}")
        self.rows.append(_Row(name, dict(terms), sense, float(rhs)))
        r = len(self.rows) - 1
        for j, coef in terms.items():
            if coef:
                self._tri_r.append(r)
                self._tri_c.append(j)
                self._tri_v.append(coef)
        return r

    def set_bounds(self, var: int, lb: float, ub: float) -> None:
        self.vars[var].lb = float(lb)
        self.vars[var].ub = float(ub)

    def set_row_active(self, row: int, active: bool) -> None:
        self.rows[row].active = active

    def add_column_terms(self, var: int, terms: dict[int, float]) -> None:
        """Register the entries of an existing variable in existing rows."""
        for r, coef in terms.items():
            self.rows[r].terms[var] = coef
            if coef:
                self._tri_r.append(r)
                self._tri_c.append(var)
                self._tri_v.append(coef)

    @property
    def num_vars(self) -> int:
        return len(self.vars)

    def lp_text_lines(self):
        """Debug dump in LP text format (continuous relaxation view)."""
        yield f"\\ {self.name}"
        yield "Minimize"
        terms = [
            f"{'+' if v.obj >= 0 else '-'} {abs(v.obj):.12g} {v.name}"
            for v in self.vars
            if v.obj
        ]
        yield " obj: " + (" ".join(terms) if terms else "0 " + self.vars[0].name)
        yield "Subject To"
        op = {LE: "<=", GE: ">=", EQ: "="}
        for row in self.rows:
            if not row.active:
                continue
            parts = []
            for j in sorted(row.terms):
                c = row.terms[j]
                if c == 0:
                    continue
                parts.append(f"{'+' if c >= 0 else '-'} {abs(c):.12g} {self.vars[j].name}")
            body = " ".join(parts) if parts else "0 " + self.vars[0].name
            yield f" {row.name}: {body} {op[row.sense]} {row.rhs:.12g}"
        yield "Bounds"
        for v in self.vars:
            lo = "-inf" if v.lb == -INF else f"{v.lb:.12g}"
            hi = "+inf" if v.ub == INF else f"{v.ub:.12g}"
            yield f" {lo} <= {v.name} <= {hi}"
        yield "End"

    def write_lp(self, path) -> None:
        with open(path, "w") as fh:
            for line in self.lp_text_lines():
                fh.write(line + "\n")


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | error
    objective: float
    x: np.ndarray
    duals: np.ndarray  # per row index (0.0 for inactive rows)
    basis: object = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _assemble(model: LpModel, relax: bool):
    """Split the active rows into <= (>= rows negated) and == blocks."""
    n = model.num_vars
    cost = np.array([v.obj for v in model.vars])
    lb = np.array([v.lb for v in model.vars])
    ub = np.array([v.ub for v in model.vars])
    nrows = len(model.rows)
    senses = np.array([{LE: 0, GE: 1, EQ: 2}[r.sense] for r in model.rows], dtype=np.int8)
    rhs = np.array([r.rhs for r in model.rows])
    active = np.array([r.active for r in model.rows], dtype=bool)
    # compressed positions: >=/<= rows into the inequality block, == rows into
    # the equality block
    is_ub = active & (senses != 2)
    is_eq = active & (senses == 2)
    ub_pos = np.full(nrows, -1, dtype=np.int64)
    ub_pos[is_ub] = np.arange(int(is_ub.sum()))
    eq_pos = np.full(nrows, -1, dtype=np.int64)
    eq_pos[is_eq] = np.arange(int(is_eq.sum()))
    sign = np.where(senses == 1, -1.0, 1.0)  # >= rows are negated
    tri_r = np.asarray(model._tri_r, dtype=np.int64)
    tri_c = np.asarray(model._tri_c, dtype=np.int64)
    tri_v = np.asarray(model._tri_v)
    keep_ub = is_ub[tri_r] if len(tri_r) else np.zeros(0, dtype=bool)
    keep_eq = is_eq[tri_r] if len(tri_r) else np.zeros(0, dtype=bool)
    A_ub = sparse.csr_matrix(
        (
            tri_v[keep_ub] * sign[tri_r[keep_ub]],
            (ub_pos[tri_r[keep_ub]], tri_c[keep_ub]),
        ),
        shape=(int(is_ub.sum()), n),
    )
    b_ub = (rhs * sign)[is_ub]
    A_eq = sparse.csr_matrix(
        (tri_v[keep_eq], (eq_pos[tri_r[keep_eq]], tri_c[keep_eq])),
        shape=(int(is_eq.sum()), n),
    )
    b_eq = rhs[is_eq]
    ub_rows = np.nonzero(is_ub)[0]
    eq_rows = np.nonzero(is_eq)[0]
    integrality = None
    if not relax:
        integrality = np.array([1 if v.integer else 0 for v in model.vars], dtype=int)
    return cost, lb, ub, A_ub, b_ub, A_eq, b_eq, ub_rows, eq_rows, sign, integrality


_STATUS = {0: "optimal", 1: "error", 2: "infeasible", 3: "unbounded", 4: "error"}


class ScipyHighsAdapter:
    """LP/MIP solving through scipy's HiGHS interface."""

    name = "scipy"

    def solve(self, model: LpModel, warm_start: LpSolution | None = None) -> LpSolution:
        cost, lb, ub, A_ub, b_ub, A_eq, b_eq, ub_rows, eq_rows, sign, _ = _assemble(
            model, relax=True
        )
        kw = {}
        if A_ub.shape[0]:
            kw["A_ub"] = A_ub
            kw["b_ub"] = b_ub
        if A_eq.shape[0]:
            kw["A_eq"] = A_eq
            kw["b_eq"] = b_eq
        res = linprog(cost, bounds=np.column_stack([lb, ub]), method="highs", **kw)
        status = _STATUS.get(res.status, "error")
        duals = np.zeros(len(model.rows))
        if status == "optimal":
            if len(ub_rows):
                # negated >= rows get their duals flipped back
                duals[ub_rows] = res.ineqlin.marginals * sign[ub_rows]
            if len(eq_rows):
                duals[eq_rows] = res.eqlin.marginals
            return LpSolution(status, float(res.fun), np.asarray(res.x), duals)
        return LpSolution(status, float("nan"), np.zeros(model.num_vars), duals)

    def solve_mip(self, model: LpModel, time_limit: float | None = None) -> LpSolution:
        cost, lb, ub, A_ub, b_ub, A_eq, b_eq, _, _, _, integ = _assemble(
            model, relax=False
        )
        options = {"mip_rel_gap": 0.0}
        if time_limit is not None:
            options["time_limit"] = time_limit
        constraints = []
        if A_ub.shape[0]:
            constraints.append(LinearConstraint(A_ub, -np.inf, b_ub))
        if A_eq.shape[0]:
            constraints.append(LinearConstraint(A_eq, b_eq, b_eq))
        res = milp(
            cost,
            constraints=constraints or (),
            integrality=integ,
            bounds=Bounds(lb, ub),
            options=options,
        )
        if res.status == 0:
            return LpSolution("optimal", float(res.fun), np.asarray(res.x), np.zeros(len(model.rows)))
        status = {2: "infeasible", 3: "unbounded"}.get(res.status, "error")
        return LpSolution(status, float("nan"), np.zeros(model.num_vars), np.zeros(len(model.rows)))


_ADAPTERS = {"scipy": ScipyHighsAdapter}


def get_adapter(name: str | None = None):
    """Resolve the LP backend; the SLAPRP_LP_BACKEND env var overrides."""
    key = name or os.environ.get("SLAPRP_LP_BACKEND", "scipy")
    try:
        return _ADAPTERS[key]()
    except KeyError:
        raise ValueError(f"unknown LP backend {key!r} (available: {sorted(_ADAPTERS)})")
