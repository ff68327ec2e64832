"""Shared test utilities: a reference LP-file reader and a grid shortest-path
oracle independent of the package's distance formulas."""

from __future__ import annotations

import re

from scipy.sparse import lil_matrix
from scipy.sparse.csgraph import dijkstra

from slaprp.model import DEPOT, SINGLE_BLOCK


def grid_distance_oracle(layout):
    """All-pairs walking distances on the explicit corridor grid."""
    na, nb = layout.num_aisles, layout.bays_per_aisle
    D, d = layout.aisle_pitch, layout.bay_pitch
    idx = {}
    if layout.kind == SINGLE_BLOCK:
        ys = range(0, nb + 2)
        cross_ys = (0, nb + 1)
    else:
        ys = range(-(nb + 1), nb + 2)
        cross_ys = (-(nb + 1), 0, nb + 1)
    for a in range(1, na + 1):
        for y in ys:
            idx[(a, y)] = len(idx)
    g = lil_matrix((len(idx), len(idx)))
    for a in range(1, na + 1):
        prev = None
        for y in ys:
            if prev is not None:
                g[idx[(a, prev)], idx[(a, y)]] = d
                g[idx[(a, y)], idx[(a, prev)]] = d
            prev = y
    for a in range(1, na):
        for y in cross_ys:
            g[idx[(a, y)], idx[(a + 1, y)]] = D
            g[idx[(a + 1, y)], idx[(a, y)]] = D
    dist = dijkstra(g.tocsr())

    def node(loc):
        if loc == DEPOT:
            return idx[(1, 0)]
        a, blk, b = layout.coords(loc)
        if layout.kind == SINGLE_BLOCK:
            return idx[(a, b)]
        return idx[(a, -b if blk == 0 else b)]

    def f(l1, l2):
        return dist[node(l1), node(l2)]

    return f


_SECTIONS = ("minimize", "maximize", "subject to", "bounds", "binaries", "generals", "end")


def parse_lp_text(path) -> dict:
    """Minimal reader for the LP files this package writes; returns a dict
    with variables, constraints and indicator rows."""
    text = open(path).read()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("\\")]
    section = None
    out = {"objective": None, "constraints": [], "indicators": [], "bounds": {}, "binaries": [], "generals": []}

    def parse_terms(expr: str) -> dict:
        terms = {}
        for sign, coef, var in re.findall(r"([+-])\s*([\d.eE+-]+)\s+(\w+)", " " + expr):
            value = float(coef) * (1 if sign == "+" else -1)
            terms[var] = terms.get(var, 0.0) + value
        return terms

    for raw in lines:
        line = raw.strip()
        low = line.lower()
        if low in _SECTIONS:
            section = low
            continue
        if section == "minimize":
            expr = line.split(":", 1)[1] if ":" in line else line
            out["objective"] = parse_terms("+ " + expr.strip() if not expr.strip().startswith(("+", "-")) else expr)
        elif section == "subject to":
            name, body = line.split(":", 1)
            if "->" in body:
                guard_part, row = body.split("->")
                gvar, gval = guard_part.split("=")
                m = re.match(r"(.*?)(<=|>=|=)\s*([\d.eE+-]+)\s*$", row.strip())
                out["indicators"].append(
                    {
                        "name": name.strip(),
                        "guard": gvar.strip(),
                        "value": int(gval),
                        "terms": parse_terms(_signed(m.group(1))),
                        "sense": m.group(2),
                        "rhs": float(m.group(3)),
                    }
                )
            else:
                m = re.match(r"(.*?)(<=|>=|=)\s*([\d.eE+-]+)\s*$", body.strip())
                out["constraints"].append(
                    {
                        "name": name.strip(),
                        "terms": parse_terms(_signed(m.group(1))),
                        "sense": m.group(2),
                        "rhs": float(m.group(3)),
                    }
                )
        elif section == "bounds":
            m = re.match(r"([\d.eE+-]+|-inf)\s*<=\s*(\w+)\s*<=\s*([\d.eE+-]+|\+?inf)", line)
            if m:
                lo = float("-inf") if m.group(1) == "-inf" else float(m.group(1))
                hi = float("inf") if m.group(3) in ("inf", "+inf") else float(m.group(3))
                out["bounds"][m.group(2)] = (lo, hi)
        elif section == "binaries":
            out["binaries"].append(line)
        elif section == "generals":
            out["generals"].append(line)
    return out


def _signed(expr: str) -> str:
    expr = expr.strip()
    return expr if expr.startswith(("+", "-")) else "+ " + expr
