"""
Exact minimisation of an :class:`~jointrack.ilp.IlpInstance`.

:func:`solve` is a depth-first branch-and-bound. Each search node runs
propagation over the coupling rows (held implicitly as incidence lists)
and over the rows separated so far, bounds the subtree by the cost of the
variables set to one plus every negative free cost, and tries the
completion that reaches that bound. If the completion violates rows they
are added to the active set for the rest of the search; otherwise it is
the best assignment of the subtree. Every node also offers the labelling
that :func:`greedy_partition` builds from its decided values, so a good
incumbent exists long before the search can close.

:func:`brute_force` enumerates every assignment of small instances and is
the reference the search is checked against.
"""
from __future__ import annotations

import heapq
import math
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, fields

import numpy as np

from .config.context import Context
from .errors import ConfigurationError, InfeasibleError, InstanceTooLargeError, JointrackError
from .graph import build_graph
from .ilp import (
    COUPLE_SPATIAL,
    COUPLE_TEMPORAL,
    IlpInstance,
    build_instance,
    objective,
    violated_constraints,
)
from .log import Logger
from .model import Detection
from .potentials import PotentialTable

ctxt = Context()
log = Logger(
    name=__name__,
    level=ctxt["logging"]["level"],
    filename=ctxt["logging"]["filename"],
)

MAX_BRUTE_FORCE_VARS = 24
BOUND_TOLERANCE = 1e-9
_CHUNK_BITS = 16


@dataclass(frozen=True)
class SolverConfig:
    """Search limits; zero means no limit."""

    time_limit: float = 0.0
    node_limit: int = 0
    separation_batch: int = 512

    def __post_init__(self):
        if self.time_limit < 0 or self.node_limit < 0:
            raise ConfigurationError("Solver limits must be non-negative.")
        if self.separation_batch < 1:
            raise ConfigurationError("separation_batch must be at least 1.")

    @classmethod
    def from_mapping(cls, data: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown solver settings {unknown}.")
        return cls(**data)


@dataclass
class SolveStats:
    nodes_explored: int = 0
    constraints_added: int = 0
    wall_time: float = 0.0
    proven_optimal: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Assignment:
    """Values of every variable and their objective."""

    values: tuple[int, ...]
    objective: float

    @classmethod
    def from_values(cls, inst: IlpInstance, values) -> "Assignment":
        values = tuple(int(v) for v in values)
        return cls(values, objective(inst, values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int8)


def greedy_partition(inst: IlpInstance, value=None):
    """
    Build a feasible assignment by greedy additive edge contraction.

    Every detection that is not decided out starts as its own cluster. The
    two clusters joined by the most negative summed edge cost are merged
    until no merge lowers the objective, then detections whose presence
    raises the objective are dropped. Edges inside a cluster are set to
    one and all others to zero, so the labelling meets every transitivity,
    consistency and coupling row.

    :param inst: The instance.
    :type inst: IlpInstance
    :param value: Decided values, -1 for free variables. Defaults to the
        fixed values of the instance.
    :type value: numpy.ndarray
    :return: The values, or None if the decided values cannot be kept.
    :rtype: numpy.ndarray
    """
    if value is None:
        value = np.full(inst.total, -1, dtype=np.int8)
        for x, v in inst.fixed.items():
            value[x] = v
    index = inst.index
    costs = inst.costs
    node_var = index.node_vars
    edges = sorted(index.spatial_vars.items()) + sorted(index.temporal_vars.items())

    ids = [d for d in sorted(node_var) if value[node_var[d]] != 0]
    rep = {d: d for d in ids}
    members = {d: [d] for d in ids}
    adj = {d: {} for d in ids}
    incident = defaultdict(list)
    locked = {d for d in ids if value[node_var[d]] == 1}
    joined = []
    for (a, b), x in edges:
        if a not in adj or b not in adj:
            if value[x] == 1:
                return None
            continue
        weight = math.inf if value[x] == 0 else float(costs[x])
        adj[a][b] = adj[b][a] = weight
        incident[a].append((b, x))
        incident[b].append((a, x))
        if value[x] == 1:
            joined.append((a, b))
            locked.update((a, b))

    def merge(a, b):
        keep, gone = min(a, b), max(a, b)
        adj[keep].pop(gone, None)
        for c, w in adj.pop(gone).items():
            if c == keep:
                continue
            del adj[c][gone]
            adj[keep][c] = adj[c][keep] = adj[keep].get(c, 0.0) + w
            if adj[keep][c] < 0.0:
                heapq.heappush(heap, (adj[keep][c], keep, c) if keep < c else (adj[keep][c], c, keep))
        for d in members[gone]:
            rep[d] = keep
        members[keep].extend(members.pop(gone))

    heap = []
    for (a, b) in joined:
        ra, rb = rep[a], rep[b]
        if ra == rb:
            continue
        if adj[ra].get(rb, 0.0) == math.inf:
            return None
        merge(ra, rb)
    for a in sorted(adj):
        for b, w in adj[a].items():
            if a < b and w < 0.0:
                heap.append((w, a, b))
    heapq.heapify(heap)
    while heap:
        w, a, b = heapq.heappop(heap)
        if a in adj and b in adj[a] and adj[a][b] == w:
            merge(a, b)

    selected = set(ids)
    changed = True
    while changed:
        changed = False
        for d in ids:
            if d not in selected or d in locked:
                continue
            gain = float(costs[node_var[d]]) + math.fsum(
                float(costs[x]) for e, x in incident[d] if e in selected and rep[e] == rep[d]
            )
            if gain > 0.0:
                selected.discard(d)
                changed = True

    values = np.zeros(inst.total, dtype=np.int8)
    for d in selected:
        values[node_var[d]] = 1
    for (a, b), x in edges:
        if a in selected and b in selected and rep[a] == rep[b]:
            values[x] = 1
    decided = value >= 0
    if np.any(values[decided] != value[decided]):
        return None
    return values


class _Search:
    def __init__(self, inst: IlpInstance, cfg: SolverConfig):
        self.inst = inst
        self.cfg = cfg
        self.costs = np.asarray(inst.costs, dtype=float)
        self.negative = self.costs < 0.0
        self.value = np.full(inst.total, -1, dtype=np.int8)
        self.trail = []
        self.queue = []
        self.row_queue = []
        self.rows = []
        self.row_keys = set()
        self.watches = defaultdict(list)
        self.stats = SolveStats()
        self.best_values = None
        self.best = math.inf

        index = inst.index
        self.incident = defaultdict(list)
        self.ends = {}
        coupled = []
        if COUPLE_SPATIAL in inst.families:
            coupled.append(index.spatial_vars)
        if COUPLE_TEMPORAL in inst.families:
            coupled.append(index.temporal_vars)
        for edge_vars in coupled:
            for (a, b), x in edge_vars.items():
                ends = (index.node_vars[a], index.node_vars[b])
                self.ends[x] = ends
                for n in ends:
                    self.incident[n].append(x)

    def assign(self, x, v) -> bool:
        current = self.value[x]
        if current < 0:
            self.value[x] = v
            self.trail.append(x)
            self.queue.append(x)
            return True
        return current == v

    def undo(self, mark):
        while len(self.trail) > mark:
            self.value[self.trail.pop()] = -1
        self.queue.clear()
        self.row_queue.clear()

    def check_row(self, r) -> bool:
        terms, rhs = self.rows[r]
        minimum = 0
        free = []
        for x, coeff in terms:
            v = self.value[x]
            if v < 0:
                free.append((x, coeff))
                if coeff < 0:
                    minimum += coeff
            else:
                minimum += coeff * int(v)
        if minimum > rhs:
            return False
        for x, coeff in free:
            if coeff > 0 and minimum + coeff > rhs:
                self.assign(x, 0)
            elif coeff < 0 and minimum - coeff > rhs:
                self.assign(x, 1)
        return True

    def propagate(self) -> bool:
        while self.queue or self.row_queue:
            if self.row_queue:
                if not self.check_row(self.row_queue.pop()):
                    return self._fail()
                continue
            x = self.queue.pop()
            v = self.value[x]
            if v == 0:
                for e in self.incident.get(x, ()):
                    if not self.assign(e, 0):
                        return self._fail()
            elif x in self.ends:
                for n in self.ends[x]:
                    if not self.assign(n, 1):
                        return self._fail()
            for r in self.watches.get(x, ()):
                if not self.check_row(r):
                    return self._fail()
        return True

    def _fail(self) -> bool:
        self.queue.clear()
        self.row_queue.clear()
        return False

    def add_rows(self, rows) -> int:
        added = 0
        for row in rows:
            if row.key in self.row_keys:
                continue
            self.row_keys.add(row.key)
            r = len(self.rows)
            self.rows.append((row.terms, row.rhs))
            for x, _ in row.terms:
                self.watches[x].append(r)
            self.row_queue.append(r)
            added += 1
        self.stats.constraints_added += added
        return added

    def bound(self) -> float:
        ones = self.costs[self.value == 1].sum()
        free_negative = self.costs[(self.value < 0) & self.negative].sum()
        return float(ones + free_negative)

    def completion(self) -> np.ndarray:
        candidate = self.value.copy()
        free = candidate < 0
        candidate[free] = self.negative[free]
        return candidate

    def offer(self, values):
        value = objective(self.inst, values)
        if value < self.best:
            self.best = value
            self.best_values = np.asarray(values, dtype=np.int8).copy()

    def repair(self):
        values = greedy_partition(self.inst, self.value)
        if values is not None and not violated_constraints(self.inst, values, 1):
            self.offer(values)

    def evaluate(self):
        """Return a variable to branch on, or None when the node is closed."""
        repaired = False
        while True:
            if self.bound() >= self.best - BOUND_TOLERANCE:
                return None
            if not repaired:
                repaired = True
                self.repair()
                continue
            candidate = self.completion()
            rows = violated_constraints(self.inst, candidate, self.cfg.separation_batch)
            if not rows:
                self.offer(candidate)
                return None
            if self.add_rows(rows):
                if not self.propagate():
                    return None
                continue
            free = np.flatnonzero(self.value < 0)
            if free.size == 0:
                return None
            return int(free[np.argmin(self.costs[free])])

    def out_of_budget(self, start) -> bool:
        if self.cfg.node_limit and self.stats.nodes_explored >= self.cfg.node_limit:
            return True
        if self.cfg.time_limit and time.perf_counter() - start >= self.cfg.time_limit:
            return True
        return False

    def run(self):
        start = time.perf_counter()
        for x, v in sorted(self.inst.fixed.items()):
            if not self.assign(x, v):
                raise InfeasibleError(f"Variable {x} is fixed to two values.")
        if not self.propagate():
            errmsg = "The fixed values violate the coupling constraints."
            log.error(errmsg)
            raise InfeasibleError(errmsg)

        zeros = np.zeros(self.inst.total, dtype=np.int8)
        for x, v in self.inst.fixed.items():
            zeros[x] = v
        if not violated_constraints(self.inst, zeros, 1):
            self.offer(zeros)

        stack = []
        node_ok = True
        exhausted = False
        while True:
            if node_ok:
                if self.out_of_budget(start):
                    break
                self.stats.nodes_explored += 1
                x = self.evaluate()
                if x is not None:
                    stack.append((len(self.trail), x, 0))
                    node_ok = self.assign(x, 1) and self.propagate()
                    continue
            node_ok = False
            while stack:
                mark, x, alternative = stack.pop()
                self.undo(mark)
                if alternative is not None:
                    stack.append((mark, x, None))
                    node_ok = self.assign(x, alternative) and self.propagate()
                    break
            else:
                exhausted = True
                break
            if not node_ok:
                continue

        self.stats.proven_optimal = exhausted
        self.stats.wall_time = time.perf_counter() - start
        if self.best_values is None:
            errmsg = "No feasible assignment respects the fixed values."
            log.error(errmsg)
            raise InfeasibleError(errmsg)
        return Assignment.from_values(self.inst, self.best_values), self.stats


def solve(inst: IlpInstance, cfg: SolverConfig = None):
    """
    Minimise the objective of an instance.

    :param inst: The instance.
    :type inst: IlpInstance
    :param cfg: Search limits.
    :type cfg: SolverConfig
    :return: The best assignment found and the search statistics. The
        assignment is optimal when ``stats.proven_optimal`` is set.
    :rtype: tuple[Assignment, SolveStats]
    :raises InfeasibleError: If the fixed values cannot be completed.
    """
    cfg = cfg or SolverConfig()
    if inst.total == 0:
        return Assignment((), 0.0), SolveStats(proven_optimal=True)
    assignment, stats = _Search(inst, cfg).run()
    if not check(inst, assignment):
        errmsg = "Solver returned an assignment that violates the constraints."
        log.error(errmsg)
        raise JointrackError(errmsg)
    if not stats.proven_optimal:
        log.warning(
            f"Search stopped after {stats.nodes_explored} nodes without proof of optimality; "
            f"returning objective {assignment.objective:.6g}."
        )
    log.debug(
        f"Solved {inst.total} variables: objective {assignment.objective:.6g}, "
        f"{stats.nodes_explored} nodes, {stats.constraints_added} rows added."
    )
    return assignment, stats


def check(inst: IlpInstance, assignment, exhaustive: bool = False) -> bool:
    """
    Whether an assignment satisfies every enabled constraint family and
    the fixed values.

    :param exhaustive: Test every row instead of the separation routine.
    """
    values = [int(v) for v in getattr(assignment, "values", assignment)]
    if len(values) != inst.total or any(v not in (0, 1) for v in values):
        return False
    if any(values[x] != v for x, v in inst.fixed.items()):
        return False
    if exhaustive:
        return not any(row.is_violated(values) for row in inst.constraints())
    return not violated_constraints(inst, values, 1)


def brute_force(inst: IlpInstance):
    """
    Enumerate all assignments of a small instance.

    :return: The minimum objective feasible assignment (ties go to the
        lexicographically smallest values) and the number of feasible
        assignments.
    :rtype: tuple[Assignment, int]
    :raises InstanceTooLargeError: Above 24 variables.
    """
    n = inst.total
    if n > MAX_BRUTE_FORCE_VARS:
        raise InstanceTooLargeError(
            f"Instance has {n} variables; exhaustive search handles at most {MAX_BRUTE_FORCE_VARS}."
        )
    if n == 0:
        return Assignment((), 0.0), 1
    rows = list(inst.constraints())
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    costs = np.asarray(inst.costs, dtype=float)
    feasible = 0
    candidates = []
    best_approx = math.inf
    chunk = 1 << min(n, _CHUNK_BITS)
    for begin in range(0, 1 << n, chunk):
        codes = np.arange(begin, begin + chunk, dtype=np.int64)
        bits = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.int8)
        mask = np.ones(chunk, dtype=bool)
        for x, v in inst.fixed.items():
            mask &= bits[:, x] == v
        for row in rows:
            lhs = np.zeros(chunk, dtype=np.int64)
            for x, coeff in row.terms:
                lhs += coeff * bits[:, x]
            mask &= lhs <= row.rhs
        feasible += int(mask.sum())
        if not mask.any():
            continue
        approx = bits[mask].astype(float) @ costs
        codes = codes[mask]
        low = approx.min()
        if low > best_approx + BOUND_TOLERANCE:
            continue
        best_approx = min(best_approx, low)
        keep = approx <= best_approx + BOUND_TOLERANCE
        candidates.extend(zip(approx[keep].tolist(), codes[keep].tolist()))

    best = None
    for approx, code in candidates:
        if approx > best_approx + BOUND_TOLERANCE:
            continue
        values = tuple(int((code >> int(s)) & 1) for s in shifts)
        value = objective(inst, values)
        if best is None or (value, code) < (best[0], best[1]):
            best = (value, code, values)
    if best is None:
        raise InfeasibleError("No feasible assignment respects the fixed values.")
    return Assignment(best[2], best[0]), feasible


def random_instance(
    rng: np.random.Generator,
    max_vars: int = 22,
    max_frames: int = 3,
    max_joints: int = 2,
    max_per_joint: int = 2,
    cost_range: float = 3.0,
    families=None,
) -> IlpInstance:
    """
    Draw a small random instance with uniform costs in [-cost_range, cost_range].

    Graphs are redrawn until they have at most ``max_vars`` variables.
    """
    while True:
        frames = int(rng.integers(1, max_frames + 1))
        joints = int(rng.integers(1, max_joints + 1))
        tau = int(rng.integers(1, 3))
        dets = []
        for frame in range(frames):
            for joint in range(joints):
                for _ in range(int(rng.integers(0, max_per_joint + 1))):
                    dets.append(
                        Detection(
                            id=len(dets),
                            frame=frame,
                            joint=joint,
                            x=float(rng.uniform(0, 100)),
                            y=float(rng.uniform(0, 100)),
                            score=0.5,
                            scale=1.0,
                        )
                    )
        g = build_graph(dets, tau)
        total = len(g.nodes) + len(g.spatial_edges) + len(g.temporal_edges)
        if total <= max_vars:
            break

    def draw():
        return float(rng.uniform(-cost_range, cost_range))

    table = PotentialTable(
        node_cost={det.id: draw() for det in g.nodes},
        spatial_cost={(e.a, e.b): draw() for e in g.spatial_edges},
        temporal_cost={(e.a, e.b): draw() for e in g.temporal_edges},
    )
    return build_instance(g, table, families=families)
