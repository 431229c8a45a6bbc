"""
The integer program over a spatio-temporal graph.

Variables are binary: one per node (``v``), one per spatial edge (``s``)
and one per temporal edge (``t``). Every constraint is a row
``sum(coeff * x) <= rhs`` with coefficients in {-1, +1}. The families are
never stored in full; they are enumerated on demand, and
:func:`violated_constraints` only walks the combinations whose premises
are switched on in a given assignment.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np

from .config.context import Context
from .errors import DimensionMismatchError, ValidationError
from .graph import SpatioTemporalGraph
from .log import Logger

ctxt = Context()
log = Logger(
    name=__name__,
    level=ctxt["logging"]["level"],
    filename=ctxt["logging"]["filename"],
)

COUPLE_SPATIAL = "couple_spatial"
COUPLE_TEMPORAL = "couple_temporal"
TRANS_SPATIAL = "trans_spatial"
TRANS_TEMPORAL = "trans_temporal"
TRANS_ST = "trans_st"
CONSIST_ST = "consist_st"

FAMILIES = (
    COUPLE_SPATIAL,
    COUPLE_TEMPORAL,
    TRANS_SPATIAL,
    TRANS_TEMPORAL,
    TRANS_ST,
    CONSIST_ST,
)


def check_families(families) -> frozenset:
    """Validate a collection of constraint family names."""
    if families is None:
        return frozenset(FAMILIES)
    families = frozenset(families)
    unknown = sorted(families - set(FAMILIES))
    if unknown:
        raise ValidationError(f"Unknown constraint families {unknown}; known are {list(FAMILIES)}.")
    return families


@dataclass(frozen=True)
class VarIndex:
    """
    Bijection between graph elements and variable indices.

    Node variables come first, then spatial edges, then temporal edges,
    each in the canonical order of the graph.
    """

    node_vars: dict
    spatial_vars: dict
    temporal_vars: dict
    total: int

    @classmethod
    def from_graph(cls, g: SpatioTemporalGraph) -> "VarIndex":
        node_vars = {}
        spatial_vars = {}
        temporal_vars = {}
        for det in g.nodes:
            node_vars[det.id] = len(node_vars)
        offset = len(node_vars)
        for edge in g.spatial_edges:
            spatial_vars[(edge.a, edge.b)] = offset + len(spatial_vars)
        offset += len(spatial_vars)
        for edge in g.temporal_edges:
            temporal_vars[(edge.a, edge.b)] = offset + len(temporal_vars)
        return cls(node_vars, spatial_vars, temporal_vars, offset + len(temporal_vars))

    @cached_property
    def names(self) -> list[str]:
        """Variable names as used in LP dumps, by index."""
        names = [""] * self.total
        for det_id, x in self.node_vars.items():
            names[x] = f"v_{det_id}"
        for (a, b), x in self.spatial_vars.items():
            names[x] = f"s_{a}_{b}"
        for (a, b), x in self.temporal_vars.items():
            names[x] = f"t_{a}_{b}"
        return names

    @cached_property
    def keys(self) -> list[tuple]:
        """Element key of each variable: ``("v", id)``, ``("s", a, b)`` or ``("t", a, b)``."""
        keys = [None] * self.total
        for det_id, x in self.node_vars.items():
            keys[x] = ("v", det_id)
        for (a, b), x in self.spatial_vars.items():
            keys[x] = ("s", a, b)
        for (a, b), x in self.temporal_vars.items():
            keys[x] = ("t", a, b)
        return keys

    def variable(self, key: tuple) -> int:
        """Variable index of an element key."""
        try:
            if key[0] == "v":
                return self.node_vars[key[1]]
            if key[0] == "s":
                return self.spatial_vars[(key[1], key[2])]
            if key[0] == "t":
                return self.temporal_vars[(key[1], key[2])]
        except KeyError:
            pass
        raise ValidationError(f"No variable for graph element {key}.")

    def fixed_values(self, elements: dict) -> dict:
        """Translate fixed values keyed by element into values keyed by variable."""
        return {self.variable(key): value for key, value in elements.items()}

    def spatial(self, a: int, b: int) -> int:
        return self.spatial_vars[(a, b) if a < b else (b, a)]


@dataclass(frozen=True)
class Constraint:
    """
    A row ``sum(coeff * x) <= rhs``.

    Terms are kept sorted by variable index so equal rows compare equal.
    """

    kind: str
    terms: tuple[tuple[int, int], ...]
    rhs: int
    sense: str = field(default="<=", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(sorted(self.terms)))

    def lhs(self, values) -> int:
        return sum(coeff * int(values[x]) for x, coeff in self.terms)

    def is_violated(self, values) -> bool:
        return self.lhs(values) > self.rhs

    @property
    def key(self):
        return (self.terms, self.rhs)


def _triangle(kind, x, y, z):
    """All three rotations of ``x + y - 1 <= z`` over the variables of a triangle."""
    yield Constraint(kind, ((x, 1), (y, 1), (z, -1)), 1)
    yield Constraint(kind, ((x, 1), (z, 1), (y, -1)), 1)
    yield Constraint(kind, ((y, 1), (z, 1), (x, -1)), 1)


def _quad_rows(kind, t1, t2, s1, s2):
    yield Constraint(kind, ((t1, 1), (t2, 1), (s1, 1), (s2, -1)), 2)
    yield Constraint(kind, ((t1, 1), (t2, 1), (s2, 1), (s1, -1)), 2)


class _GraphTables:
    """Adjacency of a graph in terms of variable indices."""

    def __init__(self, g: SpatioTemporalGraph, index: VarIndex):
        self.g = g
        self.index = index
        self.frame = {det.id: det.frame for det in g.nodes}
        self.forward = defaultdict(list)
        self.temporal_nbrs = defaultdict(list)
        for edge in g.temporal_edges:
            self.forward[edge.a].append(edge.b)
            self.temporal_nbrs[edge.a].append(edge.b)
            self.temporal_nbrs[edge.b].append(edge.a)
        for nbrs in self.temporal_nbrs.values():
            nbrs.sort(key=lambda n: (self.frame[n], n))

    def s(self, a, b):
        return self.index.spatial(a, b)

    def t(self, a, b):
        """Variable of the temporal edge between a and b, or None."""
        key = (a, b) if self.frame[a] < self.frame[b] else (b, a)
        return self.index.temporal_vars.get(key)


def coupling_constraints(g: SpatioTemporalGraph, index: VarIndex = None):
    """
    Rows ``e <= v_a`` and ``e <= v_b`` for every spatial, then every temporal edge.
    """
    index = index or VarIndex.from_graph(g)
    yield from _couple(COUPLE_SPATIAL, g.spatial_edges, index.spatial_vars, index)
    yield from _couple(COUPLE_TEMPORAL, g.temporal_edges, index.temporal_vars, index)


def _couple(kind, edges, edge_vars, index):
    for edge in edges:
        x = edge_vars[(edge.a, edge.b)]
        yield Constraint(kind, ((x, 1), (index.node_vars[edge.a], -1)), 0)
        yield Constraint(kind, ((x, 1), (index.node_vars[edge.b], -1)), 0)


def spatial_transitivity(g: SpatioTemporalGraph, index: VarIndex = None):
    """Triangle rows over every triple of detections of one frame."""
    tables = _GraphTables(g, index or VarIndex.from_graph(g))
    for frame in g.frames:
        for a, b, c in combinations(g.frame_nodes[frame], 3):
            yield from _triangle(TRANS_SPATIAL, tables.s(a, b), tables.s(b, c), tables.s(a, c))


def temporal_transitivity(g: SpatioTemporalGraph, index: VarIndex = None):
    """
    Triangle rows over same-type detections in three frames whose three
    temporal edges all exist.
    """
    tables = _GraphTables(g, index or VarIndex.from_graph(g))
    for det in g.nodes:
        a = det.id
        for b in tables.forward[a]:
            for c in tables.forward[b]:
                closing = tables.t(a, c)
                if closing is None:
                    continue
                yield from _triangle(TRANS_TEMPORAL, tables.t(a, b), tables.t(b, c), closing)


def spatio_temporal_transitivity(g: SpatioTemporalGraph, index: VarIndex = None):
    """
    Triangle rows over a detection and two detections of another frame that
    it reaches by temporal edges, closed by their spatial edge.
    """
    tables = _GraphTables(g, index or VarIndex.from_graph(g))
    for det in g.nodes:
        d = det.id
        by_frame = defaultdict(list)
        for n in tables.temporal_nbrs[d]:
            by_frame[tables.frame[n]].append(n)
        for frame in sorted(by_frame):
            for d1, d2 in combinations(sorted(by_frame[frame]), 2):
                yield from _triangle(TRANS_ST, tables.t(d, d1), tables.t(d, d2), tables.s(d1, d2))


def spatio_temporal_consistency(g: SpatioTemporalGraph, index: VarIndex = None):
    """
    Rows over unordered pairs of vertex-disjoint temporal edges between the
    same two frames: if both edges are on, the spatial edges at their two
    ends must agree.
    """
    tables = _GraphTables(g, index or VarIndex.from_graph(g))
    grouped = defaultdict(list)
    for edge in g.temporal_edges:
        grouped[(tables.frame[edge.a], tables.frame[edge.b])].append(edge)
    for key in sorted(grouped):
        for e1, e2 in combinations(grouped[key], 2):
            if e1.a == e2.a or e1.b == e2.b:
                continue
            yield from _quad_rows(
                CONSIST_ST,
                tables.t(e1.a, e1.b),
                tables.t(e2.a, e2.b),
                tables.s(e1.a, e2.a),
                tables.s(e1.b, e2.b),
            )


_GENERATORS = {
    TRANS_SPATIAL: spatial_transitivity,
    TRANS_TEMPORAL: temporal_transitivity,
    TRANS_ST: spatio_temporal_transitivity,
    CONSIST_ST: spatio_temporal_consistency,
}


@dataclass(frozen=True, eq=False)
class IlpInstance:
    """
    Variables, costs, enabled constraint families and fixed values.

    ``fixed`` maps variable indices to 0 or 1; fixed values are bounds and
    stay in the instance as variables.
    """

    graph: SpatioTemporalGraph
    index: VarIndex
    costs: np.ndarray
    fixed: dict = field(default_factory=dict)
    families: frozenset = frozenset(FAMILIES)

    def __post_init__(self):
        if len(self.costs) != self.index.total:
            raise DimensionMismatchError(
                f"Cost vector of length {len(self.costs)} for {self.index.total} variables."
            )
        for x, value in self.fixed.items():
            if not 0 <= x < self.index.total:
                raise ValidationError(f"Fixed variable {x} outside [0, {self.index.total}).")
            if value not in (0, 1):
                raise ValidationError(f"Fixed variable {x} has value {value}, expected 0 or 1.")

    @property
    def total(self) -> int:
        return self.index.total

    @cached_property
    def tables(self) -> _GraphTables:
        return _GraphTables(self.graph, self.index)

    def constraints(self):
        """Enumerate every row of the enabled families in family order."""
        for family in FAMILIES:
            if family not in self.families:
                continue
            if family == COUPLE_SPATIAL:
                yield from _couple(family, self.graph.spatial_edges, self.index.spatial_vars, self.index)
            elif family == COUPLE_TEMPORAL:
                yield from _couple(family, self.graph.temporal_edges, self.index.temporal_vars, self.index)
            else:
                yield from _GENERATORS[family](self.graph, self.index)

    def count_constraints(self) -> dict:
        counts = {family: 0 for family in FAMILIES if family in self.families}
        for row in self.constraints():
            counts[row.kind] += 1
        return counts

    def objective(self, values) -> float:
        return objective(self, values)


def build_instance(g: SpatioTemporalGraph, pot, fixed: dict = None, families=None) -> IlpInstance:
    """
    Assemble the integer program of a graph and its potentials.

    :param g: The graph.
    :type g: SpatioTemporalGraph
    :param pot: Costs of every node and edge of ``g``.
    :type pot: PotentialTable
    :param fixed: Variable index to value for variables held fixed.
    :type fixed: dict
    :param families: Enabled constraint families, None for all.
    :return: The instance.
    :rtype: IlpInstance
    :raises ValidationError: If the potentials do not cover the graph exactly.
    """
    missing = pot.missing(g)
    if missing:
        shown = ", ".join(missing[:20])
        more = f" and {len(missing) - 20} more" if len(missing) > 20 else ""
        errmsg = f"Potentials do not match the graph: {shown}{more}."
        log.error(errmsg)
        raise ValidationError(errmsg)
    index = VarIndex.from_graph(g)
    costs = np.zeros(index.total)
    for det_id, x in index.node_vars.items():
        costs[x] = pot.node_cost[det_id]
    for key, x in index.spatial_vars.items():
        costs[x] = pot.spatial_cost[key]
    for key, x in index.temporal_vars.items():
        costs[x] = pot.temporal_cost[key]
    if not np.all(np.isfinite(costs)):
        raise ValidationError("Potentials must be finite.")
    inst = IlpInstance(g, index, costs, dict(fixed or {}), check_families(families))
    log.debug(f"Built instance with {index.total} variables and {len(inst.fixed)} fixed.")
    return inst


def _as_values(inst: IlpInstance, assignment) -> list[int]:
    values = getattr(assignment, "values", assignment)
    values = [int(v) for v in values]
    if len(values) != inst.total:
        raise DimensionMismatchError(f"Assignment of length {len(values)} for {inst.total} variables.")
    return values


def objective(inst: IlpInstance, assignment) -> float:
    """
    Exact objective of an assignment: the sum of the costs of the
    variables set to one.
    """
    values = _as_values(inst, assignment)
    return math.fsum(float(inst.costs[x]) for x, value in enumerate(values) if value)


def violated_constraints(inst: IlpInstance, assignment, limit: int = None) -> list[Constraint]:
    """
    Return violated rows of the enabled families.

    Only combinations whose premise variables are all one are inspected.
    Rows come in family order, sorted by their terms within a family, and
    are truncated to ``limit`` (None or 0 for all).

    :param inst: The instance.
    :param assignment: Values or an Assignment over every variable.
    :param limit: Maximum number of rows returned.
    :return: The violated rows; empty iff the assignment is feasible.
    :rtype: list[Constraint]
    """
    vals = _as_values(inst, assignment)
    tables = inst.tables
    index = inst.index
    frame = tables.frame
    spatial_on = defaultdict(list)
    temporal_on = defaultdict(list)
    active_temporal = []
    for (a, b), x in index.spatial_vars.items():
        if vals[x]:
            spatial_on[a].append(b)
            spatial_on[b].append(a)
    for (a, b), x in index.temporal_vars.items():
        if vals[x]:
            temporal_on[a].append(b)
            temporal_on[b].append(a)
            active_temporal.append((a, b))
    found = {family: {} for family in FAMILIES}

    def add(kind, premises, conclusion, rhs):
        terms = [(x, 1) for x in premises]
        if conclusion is not None:
            terms.append((conclusion, -1))
        row = Constraint(kind, tuple(terms), rhs)
        found[kind].setdefault(row.key, row)

    if COUPLE_SPATIAL in inst.families:
        for (a, b), x in index.spatial_vars.items():
            if vals[x]:
                for n in (a, b):
                    if not vals[index.node_vars[n]]:
                        add(COUPLE_SPATIAL, [x], index.node_vars[n], 0)
    if COUPLE_TEMPORAL in inst.families:
        for (a, b) in active_temporal:
            x = index.temporal_vars[(a, b)]
            for n in (a, b):
                if not vals[index.node_vars[n]]:
                    add(COUPLE_TEMPORAL, [x], index.node_vars[n], 0)
    if TRANS_SPATIAL in inst.families:
        for b, nbrs in spatial_on.items():
            for a, c in combinations(sorted(nbrs), 2):
                z = tables.s(a, c)
                if not vals[z]:
                    add(TRANS_SPATIAL, [tables.s(a, b), tables.s(b, c)], z, 1)
    if TRANS_TEMPORAL in inst.families:
        for b, nbrs in temporal_on.items():
            for a, c in combinations(sorted(nbrs), 2):
                if frame[a] == frame[c]:
                    continue
                z = tables.t(a, c)
                if z is not None and not vals[z]:
                    add(TRANS_TEMPORAL, [tables.t(a, b), tables.t(b, c)], z, 1)
    if TRANS_ST in inst.families:
        for d, nbrs in temporal_on.items():
            for d1, d2 in combinations(sorted(nbrs), 2):
                if frame[d1] == frame[d2]:
                    z = tables.s(d1, d2)
                    if not vals[z]:
                        add(TRANS_ST, [tables.t(d, d1), tables.t(d, d2)], z, 1)
            for d1 in nbrs:
                for d2 in spatial_on.get(d1, ()):
                    z = tables.t(d, d2)
                    if z is not None and not vals[z]:
                        add(TRANS_ST, [tables.t(d, d1), tables.s(d1, d2)], z, 1)
    if CONSIST_ST in inst.families:
        for a, b in active_temporal:
            t1 = tables.t(a, b)
            for c in spatial_on.get(a, ()):
                for d in temporal_on.get(c, ()):
                    if d != b and frame[d] == frame[b]:
                        z = tables.s(b, d)
                        if not vals[z]:
                            add(CONSIST_ST, [t1, tables.t(c, d), tables.s(a, c)], z, 2)
            for d in spatial_on.get(b, ()):
                for c in temporal_on.get(d, ()):
                    if c != a and frame[c] == frame[a]:
                        z = tables.s(a, c)
                        if not vals[z]:
                            add(CONSIST_ST, [t1, tables.t(c, d), tables.s(b, d)], z, 2)

    rows = []
    for family in FAMILIES:
        rows.extend(found[family][key] for key in sorted(found[family]))
    if limit:
        rows = rows[:limit]
    return rows


def _lp_terms(terms, names) -> str:
    parts = []
    for x, coeff in terms:
        sign = "+" if coeff > 0 else "-"
        magnitude = abs(coeff)
        parts.append(f"{sign} {names[x]}" if magnitude == 1 else f"{sign} {magnitude!r} {names[x]}")
    return " ".join(parts) if parts else "0 dummy"


def to_lp(inst: IlpInstance) -> str:
    """
    Render the instance in CPLEX LP format.

    Every row of the enabled families is written, so this is meant for
    instances small enough to hand to an external solver.
    """
    names = inst.index.names
    lines = [f"\\ jointrack instance: {inst.total} variables", "Minimize"]
    objective_terms = " ".join(
        f"{'+' if c >= 0 else '-'} {abs(float(c))!r} {names[x]}" for x, c in enumerate(inst.costs)
    )
    lines.append(f" obj: {objective_terms}" if objective_terms else " obj: 0 dummy")
    lines.append("Subject To")
    count = 0
    for row in inst.constraints():
        lines.append(f" {row.kind}_{count}: {_lp_terms(row.terms, names)} <= {row.rhs}")
        count += 1
    if count == 0:
        lines.append(" empty: 0 dummy <= 0")
    lines.append("Bounds")
    for x in sorted(inst.fixed):
        lines.append(f" {names[x]} = {inst.fixed[x]}")
    if inst.total == 0 or count == 0:
        lines.append(" dummy = 0")
    lines.append("Binaries")
    for start in range(0, inst.total, 8):
        lines.append(" " + " ".join(names[start:start + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"
