"""Warehouse layouts, instances, the routing graph and base walking distances.

Locations are indexed aisle-major (then block for double-block layouts, then
bay).  All distances are integers; bay ``b`` sits at depth ``b * d`` from the
cross-aisle that carries the depot, and fully crossing an aisle costs
``(bays + 1) * d``.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field

DEPOT = -1

SINGLE_BLOCK = "single_block"
TWO_BLOCK = "two_block_mid_depot"

SILVA_AISLES = (1, 3, 5)
SILVA_BAYS = (5, 10)
SILVA_ORDERS = (1, 5, 10)
SILVA_ORDER_SIZES = (3, 5)

GUO_ALPHAS = (0.2, 0.3, 0.4)
GUO_ORDERS = (50, 100, 200)


@dataclass(frozen=True)
class Layout:
    """Rectangular warehouse layout.

    For ``two_block_mid_depot`` layouts, ``bays_per_aisle`` counts the bays of
    one block; each aisle carries two blocks separated by the middle
    cross-aisle, and the depot sits at the left end of that middle aisle.  For
    ``single_block`` the depot sits on the front cross-aisle, left of aisle 1.
    """

    kind: str
    num_aisles: int
    bays_per_aisle: int
    aisle_pitch: int = 1
    bay_pitch: int = 1
    capacity: int | tuple[int, ...] = 1

    def __post_init__(self):
        if self.kind not in (SINGLE_BLOCK, TWO_BLOCK):
            raise ValueError(f"unknown layout kind {self.kind!r}")
        if self.num_aisles < 1 or self.bays_per_aisle < 1:
            raise ValueError("layout needs at least one aisle and one bay")
        if self.aisle_pitch < 1 or self.bay_pitch < 1:
            raise ValueError("pitches must be positive integers")
        caps = self.capacities()
        if len(caps) != self.num_locations or any(k < 1 for k in caps):
            raise ValueError("invalid capacity vector")

    @property
    def blocks(self) -> int:
        return 2 if self.kind == TWO_BLOCK else 1

    @property
    def num_locations(self) -> int:
        return self.num_aisles * self.blocks * self.bays_per_aisle

    def capacities(self) -> tuple[int, ...]:
        if isinstance(self.capacity, int):
            return (self.capacity,) * self.num_locations
        return tuple(self.capacity)

    def capacity_of(self, loc: int) -> int:
        if isinstance(self.capacity, int):
            return self.capacity
        return self.capacity[loc]

    def total_capacity(self) -> int:
        return sum(self.capacities())

    def location_id(self, aisle: int, bay: int, block: int = 0) -> int:
        """Deterministic aisle-major location index (aisle, block, bay 1-based
        except block which is 0/1)."""
        if not (1 <= aisle <= self.num_aisles and 1 <= bay <= self.bays_per_aisle):
            raise KeyError(f"no location at aisle={aisle}, bay={bay}")
        if not (0 <= block < self.blocks):
            raise KeyError(f"invalid block {block}")
        per_aisle = self.blocks * self.bays_per_aisle
        return (aisle - 1) * per_aisle + block * self.bays_per_aisle + (bay - 1)

    def coords(self, loc: int) -> tuple[int, int, int]:
        """Return (aisle, block, bay) of a location id."""
        if not (0 <= loc < self.num_locations):
            raise KeyError(f"unknown location id {loc}")
        per_aisle = self.blocks * self.bays_per_aisle
        aisle = loc // per_aisle + 1
        rest = loc % per_aisle
        block = rest // self.bays_per_aisle
        bay = rest % self.bays_per_aisle + 1
        return aisle, block, bay

    def aisle_of(self, loc: int) -> int:
        return self.coords(loc)[0]

    def locations_in_aisle(self, aisle: int) -> list[int]:
        return [
            self.location_id(aisle, b, blk)
            for blk in range(self.blocks)
            for b in range(1, self.bays_per_aisle + 1)
        ]


def base_distance(loc1: int, loc2: int, layout: Layout) -> int:
    """Shortest walking distance between two locations (or the depot) in a
    single-block layout.

    Same aisle: straight along the aisle.  Different aisles: leave through the
    front or back cross-aisle, whichever is shorter.
    """
    if layout.kind != SINGLE_BLOCK:
        raise ValueError("base_distance only covers single-block layouts")
    D, d, nb = layout.aisle_pitch, layout.bay_pitch, layout.bays_per_aisle
    if loc1 == DEPOT and loc2 == DEPOT:
        return 0
    if loc1 == DEPOT or loc2 == DEPOT:
        loc = loc2 if loc1 == DEPOT else loc1
        a, _, b = layout.coords(loc)
        return D * (a - 1) + d * b
    a1, _, b1 = layout.coords(loc1)
    a2, _, b2 = layout.coords(loc2)
    if a1 == a2:
        return d * abs(b1 - b2)
    vertical = min(b1 + b2, 2 * (nb + 1) - b1 - b2)
    return D * abs(a1 - a2) + d * vertical


def two_block_distance(loc1: int, loc2: int, layout: Layout) -> int:
    """Shortest walking distance in a double-block layout with the depot at
    the left end of the middle cross-aisle.

    Bays are counted from the middle cross-aisle into each block, so the
    front, middle and back cross-aisles are the three horizontal corridors.
    """
    if layout.kind != TWO_BLOCK:
        raise ValueError("two_block_distance needs a two-block layout")
    D, d, nb = layout.aisle_pitch, layout.bay_pitch, layout.bays_per_aisle
    if loc1 == DEPOT and loc2 == DEPOT:
        return 0

    def cross_costs(loc: int) -> tuple[int, tuple[int, int, int]]:
        """Aisle plus walking cost to (front, middle, back) cross-aisles."""
        if loc == DEPOT:
            return 1, (nb + 1, 0, nb + 1)
        a, blk, b = layout.coords(loc)
        if blk == 0:  # between middle and front
            return a, (nb + 1 - b, b, b + nb + 1)
        return a, (b + nb + 1, b, nb + 1 - b)

    a1, c1 = cross_costs(loc1)
    a2, c2 = cross_costs(loc2)
    if a1 == a2 and loc1 != DEPOT and loc2 != DEPOT:
        _, blk1, b1 = layout.coords(loc1)
        _, blk2, b2 = layout.coords(loc2)
        if blk1 == blk2:
            return d * abs(b1 - b2)
        return d * min(v1 + v2 for v1, v2 in zip(c1, c2))
    return D * abs(a1 - a2) + d * min(v1 + v2 for v1, v2 in zip(c1, c2))


def walk_distance(loc1: int, loc2: int, layout: Layout) -> int:
    """Layout-dispatching shortest walking distance."""
    if layout.kind == SINGLE_BLOCK:
        return base_distance(loc1, loc2, layout)
    return two_block_distance(loc1, loc2, layout)


@dataclass(frozen=True)
class StorageLocation:
    id: int
    aisle: int
    bay: int
    block: int
    capacity: int
    nodes: tuple[int, ...]


class WarehouseGraph:
    """Directed routing graph: depot node 0 plus one node per visit slot of
    each location.

    ``v_l^1`` is reachable from every node, ``v_l^i`` (i >= 2) only from
    ``v_l^{i-1}``, and the depot from every node.
    """

    def __init__(self, layout: Layout):
        self.layout = layout
        self.locations: list[StorageLocation] = []
        self.node_location: list[int | None] = [None]  # node 0 = depot
        nid = 1
        for loc in range(layout.num_locations):
            a, blk, b = layout.coords(loc)
            k = layout.capacity_of(loc)
            nodes = tuple(range(nid, nid + k))
            nid += k
            self.locations.append(StorageLocation(loc, a, b, blk, k, nodes))
            self.node_location.extend([loc] * k)
        self.num_nodes = nid  # including depot
        self.depot = 0

    def nodes_of(self, loc: int) -> tuple[int, ...]:
        return self.locations[loc].nodes

    def first_node(self, loc: int) -> int:
        return self.locations[loc].nodes[0]

    def location_of(self, node: int) -> int | None:
        return self.node_location[node]

    def visit_index(self, node: int) -> int:
        """1-based visit number this node represents within its location."""
        loc = self.node_location[node]
        if loc is None:
            raise ValueError("depot has no visit index")
        return node - self.locations[loc].nodes[0] + 1

    def has_arc(self, i: int, j: int) -> bool:
        if i == j:
            return False
        if j == self.depot:
            return i != self.depot
        lj = self.node_location[j]
        if self.visit_index(j) == 1:
            if i == self.depot:
                return True
            return self.node_location[i] != lj
        return i == j - 1  # v_l^i -> v_l^{i+1} only

    def arcs(self):
        for i in range(self.num_nodes):
            for j in range(self.num_nodes):
                if self.has_arc(i, j):
                    yield i, j

    def arc_count(self) -> int:
        L = self.layout.num_locations
        ks = [loc.capacity for loc in self.locations]
        return L + sum(ks) + sum(k * (L - 1) for k in ks) + sum(k - 1 for k in ks)

    def distance(self, node_i: int, node_j: int) -> int:
        """Base walking distance between the locations of two graph nodes."""
        li = DEPOT if node_i == self.depot else self.node_location[node_i]
        lj = DEPOT if node_j == self.depot else self.node_location[node_j]
        if li == lj:
            return 0
        return walk_distance(li, lj, self.layout)


def build_graph(layout: Layout) -> WarehouseGraph:
    return WarehouseGraph(layout)


@dataclass(frozen=True)
class Instance:
    """A SLAPRP instance: layout, SKUs, orders and fixed assignments."""

    layout: Layout
    num_skus: int
    orders: tuple[tuple[int, ...], ...]
    fixed: tuple[tuple[int, int], ...] = ()  # (sku, location) pairs
    name: str = ""
    seed: int | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def num_orders(self) -> int:
        return len(self.orders)

    def skus(self) -> range:
        return range(self.num_skus)

    def fixed_map(self) -> dict[int, int]:
        return {s: l for s, l in self.fixed}

    def fixed_by_location(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for s, l in self.fixed:
            out.setdefault(l, []).append(s)
        return out

    def free_skus(self) -> list[int]:
        fixed = {s for s, _ in self.fixed}
        return [s for s in range(self.num_skus) if s not in fixed]

    def demand(self, sku: int) -> int:
        """Number of orders containing the SKU."""
        return sum(1 for o in self.orders if sku in o)

    def orders_of(self, sku: int) -> frozenset[int]:
        return frozenset(i for i, o in enumerate(self.orders) if sku in o)

    def default_policy(self) -> str:
        return self.metadata.get("policy", "optimal")


def validate_instance(inst: Instance) -> list[str]:
    """Check all instance invariants; returns a list of violations (empty if
    the instance is well formed).  Never raises on malformed data."""
    errs: list[str] = []
    layout = inst.layout
    if inst.num_skus < 1:
        errs.append("instance has no SKUs")
    if inst.num_skus > layout.total_capacity():
        errs.append(
            f"{inst.num_skus} SKUs exceed total capacity {layout.total_capacity()}"
        )
    for i, order in enumerate(inst.orders):
        if len(order) == 0:
            errs.append(f"order {i} is empty")
        if len(set(order)) != len(order):
            errs.append(f"order {i} contains duplicate SKUs")
        for s in order:
            if not (0 <= s < inst.num_skus):
                errs.append(f"order {i} references unknown SKU {s}")
    seen_sku: set[int] = set()
    per_loc: dict[int, int] = {}
    for s, l in inst.fixed:
        if not (0 <= s < inst.num_skus):
            errs.append(f"fixed assignment references unknown SKU {s}")
            continue
        if not (0 <= l < layout.num_locations):
            errs.append(f"fixed assignment references unknown location {l}")
            continue
        if s in seen_sku:
            errs.append(f"SKU {s} fixed twice")
        seen_sku.add(s)
        per_loc[l] = per_loc.get(l, 0) + 1
    for l, n in sorted(per_loc.items()):
        if n > layout.capacity_of(l):
            errs.append(f"capacity exceeded at location {l}: {n} fixed SKUs")
    return errs


def generate_silva_instance(
    aisles: int, bays: int, n_orders: int, order_size: int, seed: int
) -> Instance:
    """Single-block benchmark instance: capacity-2 locations, a full
    complement of SKUs (2 per location slot) and uniformly sampled orders."""
    if aisles not in SILVA_AISLES or bays not in SILVA_BAYS:
        raise ValueError(f"layout ({aisles}x{bays}) outside the published grid")
    if n_orders not in SILVA_ORDERS or order_size not in SILVA_ORDER_SIZES:
        raise ValueError("orders/order size outside the published grid")
    layout = Layout(SINGLE_BLOCK, aisles, bays, 1, 1, 2)
    n_skus = 2 * aisles * bays
    rng = random.Random(seed)
    orders = tuple(
        tuple(sorted(rng.sample(range(n_skus), order_size))) for _ in range(n_orders)
    )
    name = f"silva_{n_skus}_{aisles}x{bays}_o{n_orders}x{order_size}_s{seed}"
    return Instance(layout, n_skus, orders, (), name, seed, {"policy": "optimal"})


def generate_guo_instance(
    alpha: float,
    n_orders: int,
    seed: int,
    n_skus: int = 80,
    bays_per_block: int = 5,
) -> Instance:
    """Replenishment-style instance on a double-block layout: only an alpha
    fraction of the SKUs is free to place, the rest is pre-assigned.

    The published description fixes 80 stored SKUs but not the per-block bay
    count; both are parameters here and recorded in the metadata.
    """
    if not any(math.isclose(alpha, a) for a in GUO_ALPHAS):
        raise ValueError(f"alpha {alpha} not in {GUO_ALPHAS}")
    if n_orders not in GUO_ORDERS:
        raise ValueError(f"n_orders {n_orders} not in {GUO_ORDERS}")
    if n_skus % (2 * bays_per_block) != 0:
        raise ValueError("n_skus must fill an integral number of aisles")
    aisles = n_skus // (2 * bays_per_block)
    layout = Layout(TWO_BLOCK, aisles, bays_per_block, 1, 1, 1)
    rng = random.Random(seed)
    n_free = math.ceil(alpha * n_skus)
    free = sorted(rng.sample(range(n_skus), n_free))
    free_set = set(free)
    locs = list(range(layout.num_locations))
    rng.shuffle(locs)
    fixed = tuple(
        sorted((s, locs.pop()) for s in range(n_skus) if s not in free_set)
    )
    orders = tuple(
        tuple(sorted(rng.sample(range(n_skus), rng.randint(1, 10))))
        for _ in range(n_orders)
    )
    name = f"guo_a{int(round(alpha * 100))}_o{n_orders}_s{seed}"
    meta = {
        "policy": "return",
        "n_skus": n_skus,
        "bays_per_block": bays_per_block,
        "free_skus": len(free),
    }
    return Instance(layout, n_skus, orders, fixed, name, seed, meta)


def generate_random_instance(
    aisles: int,
    bays: int,
    capacity: int,
    n_skus: int,
    n_orders: int,
    max_order_size: int,
    seed: int,
    kind: str = SINGLE_BLOCK,
    n_fixed: int = 0,
) -> Instance:
    """Unconstrained random instance for testing and benchmarking."""
    layout = Layout(kind, aisles, bays, 1, 1, capacity)
    if n_skus > layout.total_capacity():
        raise ValueError("more SKUs than storage slots")
    rng = random.Random(seed)
    orders = tuple(
        tuple(sorted(rng.sample(range(n_skus), rng.randint(1, min(max_order_size, n_skus)))))
        for _ in range(n_orders)
    )
    fixed: tuple[tuple[int, int], ...] = ()
    if n_fixed:
        skus = rng.sample(range(n_skus), n_fixed)
        locs = list(range(layout.num_locations))
        rng.shuffle(locs)
        assign = []
        caps = list(layout.capacities())
        for s in skus:
            while caps[locs[-1]] == 0:
                locs.pop()
            l = locs[-1]
            caps[l] -= 1
            if caps[l] == 0:
                locs.pop()
            assign.append((s, l))
        fixed = tuple(sorted(assign))
    name = f"rand_{kind}_{aisles}x{bays}k{capacity}_s{n_skus}_o{n_orders}_seed{seed}"
    return Instance(layout, n_skus, orders, fixed, name, seed, {})


def instance_to_dict(inst: Instance) -> dict:
    cap = inst.layout.capacity
    return {
        "layout": {
            "kind": inst.layout.kind,
            "aisles": inst.layout.num_aisles,
            "bays": inst.layout.bays_per_aisle,
            "D": inst.layout.aisle_pitch,
            "d": inst.layout.bay_pitch,
            "capacity": cap if isinstance(cap, int) else list(cap),
        },
        "skus": list(range(inst.num_skus)),
        "orders": [list(o) for o in inst.orders],
        "fixed": [list(p) for p in inst.fixed],
        "seed": inst.seed,
        "name": inst.name,
        "metadata": inst.metadata,
    }


def instance_from_dict(doc: dict) -> Instance:
    lay = doc["layout"]
    cap = lay["capacity"]
    layout = Layout(
        lay["kind"],
        lay["aisles"],
        lay["bays"],
        lay["D"],
        lay["d"],
        cap if isinstance(cap, int) else tuple(cap),
    )
    skus = doc["skus"]
    if list(skus) != list(range(len(skus))):
        raise ValueError("skus must be the contiguous range 0..n-1")
    return Instance(
        layout,
        len(skus),
        tuple(tuple(o) for o in doc["orders"]),
        tuple((s, l) for s, l in doc["fixed"]),
        doc.get("name", ""),
        doc.get("seed"),
        doc.get("metadata", {}),
    )


def dumps_instance(inst: Instance) -> str:
    """Canonical JSON encoding (stable key order, fixed separators)."""
    return json.dumps(instance_to_dict(inst), sort_keys=True, separators=(",", ":")) + "\n"


def loads_instance(text: str) -> Instance:
    return instance_from_dict(json.loads(text))


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_instance(inst))


def load_instance(path) -> Instance:
    with open(path) as fh:
        inst = loads_instance(fh.read())
    errs = validate_instance(inst)
    if errs:
        raise ValueError(f"invalid instance {path}: " + "; ".join(errs))
    return inst


def instance_sha(inst: Instance) -> str:
    return hashlib.sha256(dumps_instance(inst).encode()).hexdigest()
