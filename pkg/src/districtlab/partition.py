"""District plans over a city graph.

A plan assigns every vertex to one of ``n`` districts. A plan is valid
when every district is non-empty, connected in the induced subgraph,
and has population within ``epsilon`` of the city mean ``P/n``.
"""
from __future__ import annotations

import csv
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .citygraph import CityGraph

DEFAULT_EPSILON = 0.2


class SeedStuckError(Exception):
    """From-scratch seeding kept cycling without reaching a valid plan."""


@dataclass(frozen=True)
class DistrictPlan:
    assignment: np.ndarray
    n_districts: int

    def __post_init__(self):
        # Copy unconditionally: the array gets frozen and shared.
        arr = np.array(self.assignment, dtype=np.int32)
        arr.flags.writeable = False
        object.__setattr__(self, "assignment", arr)

    @property
    def num_vertices(self) -> int:
        return len(self.assignment)

    def district_vertices(self, district: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == district)

    def canonical_bytes(self) -> bytes:
        """Label-independent fingerprint: districts renumbered by first appearance."""
        remap = np.full(self.n_districts, -1, dtype=np.int32)
        nxt = 0
        out = np.empty_like(self.assignment)
        for i, d in enumerate(self.assignment.tolist()):
            if remap[d] < 0:
                remap[d] = nxt
                nxt += 1
            out[i] = remap[d]
        return out.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, DistrictPlan):
            return NotImplemented
        return self.n_districts == other.n_districts and np.array_equal(
            self.assignment, other.assignment
        )

    def __hash__(self) -> int:
        return hash((self.n_districts, self.assignment.tobytes()))


@dataclass
class DistrictIssue:
    district: int
    reason: str  # empty | disconnected | under-populated | over-populated | malformed
    detail: str = ""


@dataclass
class ValidityReport:
    ok: bool
    issues: list[DistrictIssue] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok

    def reasons(self) -> set[str]:
        return {issue.reason for issue in self.issues}


def is_valid(graph: CityGraph, plan: DistrictPlan, epsilon: float = DEFAULT_EPSILON) -> ValidityReport:
    """Check contiguity, population balance, and well-formedness.

    Malformed plans (wrong length, out-of-range labels) fail with a
    ``malformed`` issue rather than raising.
    """
    issues: list[DistrictIssue] = []
    assign = plan.assignment
    n = plan.n_districts
    if len(assign) != graph.num_vertices:
        issues.append(DistrictIssue(-1, "malformed", f"plan covers {len(assign)} of {graph.num_vertices} vertices"))
        return ValidityReport(False, issues)
    if n < 1 or np.any(assign < 0) or np.any(assign >= n):
        issues.append(DistrictIssue(-1, "malformed", "district labels outside [0, n)"))
        return ValidityReport(False, issues)

    sizes = np.bincount(assign, minlength=n)
    pops = np.zeros(n, dtype=np.int64)
    np.add.at(pops, assign, graph.pop_total)

    ideal = graph.total_population / n
    lo, hi = (1.0 - epsilon) * ideal, (1.0 + epsilon) * ideal
    for d in range(n):
        if sizes[d] == 0:
            issues.append(DistrictIssue(d, "empty"))
            continue
        if pops[d] < lo:
            issues.append(DistrictIssue(d, "under-populated", f"pop {int(pops[d])} < {lo:.1f}"))
        elif pops[d] > hi:
            issues.append(DistrictIssue(d, "over-populated", f"pop {int(pops[d])} > {hi:.1f}"))

    for d, count in _district_component_counts(graph, assign, n, sizes):
        issues.append(DistrictIssue(d, "disconnected", f"{count} components"))

    return ValidityReport(not issues, issues)


def _district_component_counts(graph, assign, n, sizes):
    """Yield (district, component_count) for districts that are not connected."""
    visited = np.zeros(graph.num_vertices, dtype=bool)
    first = np.full(n, -1, dtype=np.int64)
    for v, d in enumerate(assign.tolist()):
        if first[d] < 0:
            first[d] = v
    neighbors = graph.neighbors
    for d in range(n):
        if sizes[d] == 0:
            continue
        reached = _flood_same_label(neighbors, assign, int(first[d]), visited)
        if reached != sizes[d]:
            # Count remaining components for the report.
            count = 1
            for v in np.flatnonzero(assign == d).tolist():
                if not visited[v]:
                    _flood_same_label(neighbors, assign, v, visited)
                    count += 1
            yield d, count


def _flood_same_label(neighbors, assign, start, visited) -> int:
    label = assign[start]
    queue = deque([start])
    visited[start] = True
    reached = 1
    while queue:
        v = queue.popleft()
        for w in neighbors[v]:
            if not visited[w] and assign[w] == label:
                visited[w] = True
                reached += 1
                queue.append(w)
    return reached


def district_populations(graph: CityGraph, plan: DistrictPlan) -> list[tuple[int, int]]:
    """Per-district (pop_total, pop_q), exact integer sums."""
    n = plan.n_districts
    pops = np.zeros(n, dtype=np.int64)
    qs = np.zeros(n, dtype=np.int64)
    np.add.at(pops, plan.assignment, graph.pop_total)
    np.add.at(qs, plan.assignment, graph.pop_q)
    return list(zip(pops.tolist(), qs.tolist()))


# -- from-scratch seed plans ----------------------------------------------


def seed_from_scratch(
    graph: CityGraph,
    n: int,
    epsilon: float = DEFAULT_EPSILON,
    rng_seed: int = 0,
    max_rounds: int = 500,
) -> DistrictPlan:
    """Grow a valid plan from random single-vertex districts.

    One random vertex per district, flood-fill of the unassigned
    remainder, then repeated rounds of (a) the most populous district
    donating boundary vertices to its least populous neighbors and
    (b) non-contiguous districts shedding their smaller components,
    until the plan passes :func:`is_valid`. Raises
    :class:`SeedStuckError` after ``max_rounds`` rounds; restarting with
    a different seed is the caller's policy.
    """
    V = graph.num_vertices
    if n < 1 or n > V:
        raise ValueError(f"need 1 <= n <= {V} districts, got {n}")
    rng = random.Random(rng_seed)

    assign = np.full(V, -1, dtype=np.int32)
    starts = rng.sample(range(V), n)
    for d, v in enumerate(starts):
        assign[v] = d

    # Flood fill: each wave expands all districts one step, in random order.
    frontier = list(starts)
    while frontier:
        rng.shuffle(frontier)
        nxt = []
        for v in frontier:
            d = assign[v]
            for w in graph.neighbors[v]:
                if assign[w] < 0:
                    assign[w] = d
                    nxt.append(w)
        frontier = nxt

    pops = np.zeros(n, dtype=np.int64)
    np.add.at(pops, assign, graph.pop_total)
    sizes = np.bincount(assign, minlength=n)
    ideal = graph.total_population / n

    for _ in range(max_rounds):
        _donate_from_largest(graph, assign, pops, sizes, ideal, rng)
        _restore_contiguity(graph, assign, pops, sizes, n, rng)
        assert not any(True for _ in _district_component_counts(graph, assign, n, sizes))
        plan = DistrictPlan(assignment=assign.copy(), n_districts=n)
        if is_valid(graph, plan, epsilon).ok:
            return plan
    raise SeedStuckError(
        f"no valid {n}-district plan after {max_rounds} rebalance rounds (seed {rng_seed})"
    )


def _donate_from_largest(graph, assign, pops, sizes, ideal, rng):
    largest = int(np.argmax(pops))
    boundary = [
        v
        for v in np.flatnonzero(assign == largest).tolist()
        if any(assign[w] != largest for w in graph.neighbors[v])
    ]
    rng.shuffle(boundary)
    for v in boundary:
        # Stop once the donor is no longer oversized; never empty it.
        if pops[largest] <= ideal or sizes[largest] <= 1:
            break
        targets = {int(assign[w]) for w in graph.neighbors[v]} - {largest}
        if not targets:
            continue
        recipient = min(targets, key=lambda d: (pops[d], d))
        _move_vertex(graph, assign, pops, sizes, v, recipient)


def _restore_contiguity(graph, assign, pops, sizes, n, rng):
    order = list(range(n))
    rng.shuffle(order)
    for d in order:
        comps = _components_of(graph, assign, d)
        if len(comps) <= 1:
            continue
        comps.sort(key=lambda comp: (-sum(int(graph.pop_total[v]) for v in comp), -len(comp)))
        for comp in comps[1:]:
            remaining = set(comp)
            while remaining:
                peel = [
                    v
                    for v in remaining
                    if any(assign[w] != d and w not in remaining for w in graph.neighbors[v])
                ]
                assert peel, "shed component lost contact with other districts"
                for v in peel:
                    targets = {
                        int(assign[w])
                        for w in graph.neighbors[v]
                        if assign[w] != d and w not in remaining
                    }
                    recipient = min(targets, key=lambda t: (pops[t], t))
                    _move_vertex(graph, assign, pops, sizes, v, recipient)
                    remaining.discard(v)


def _components_of(graph, assign, d) -> list[list[int]]:
    members = np.flatnonzero(assign == d).tolist()
    todo = set(members)
    comps = []
    while todo:
        start = min(todo)
        comp = [start]
        todo.discard(start)
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in graph.neighbors[v]:
                if w in todo:
                    todo.discard(w)
                    comp.append(w)
                    queue.append(w)
        comps.append(comp)
    return comps


def _move_vertex(graph, assign, pops, sizes, v, recipient):
    old = int(assign[v])
    assign[v] = recipient
    pop = int(graph.pop_total[v])
    pops[old] -= pop
    pops[recipient] += pop
    sizes[old] -= 1
    sizes[recipient] += 1


# -- reference layouts for grid cities -------------------------------------


def stripe_plan(rows: int, cols: int, n_districts: int) -> DistrictPlan:
    """Horizontal stripes, each running the full width of the grid."""
    if rows % n_districts != 0:
        raise ValueError(f"{rows} rows do not split into {n_districts} equal stripes")
    per = rows // n_districts
    assign = np.repeat(np.arange(n_districts, dtype=np.int32), per * cols)
    return DistrictPlan(assignment=assign, n_districts=n_districts)


def block_plan(rows: int, cols: int, blocks_down: int, blocks_across: int) -> DistrictPlan:
    """Near-square rectangular blocks in a ``blocks_down x blocks_across`` layout."""
    if rows % blocks_down != 0 or cols % blocks_across != 0:
        raise ValueError(
            f"{rows}x{cols} grid does not tile into {blocks_down}x{blocks_across} blocks"
        )
    bh, bw = rows // blocks_down, cols // blocks_across
    assign = np.empty(rows * cols, dtype=np.int32)
    for r in range(rows):
        for c in range(cols):
            assign[r * cols + c] = (r // bh) * blocks_across + (c // bw)
    return DistrictPlan(assignment=assign, n_districts=blocks_down * blocks_across)


# -- assignment files -------------------------------------------------------


def save_plan(graph: CityGraph, plan: DistrictPlan, path) -> None:
    """Write ``vertex_id,district`` rows, one per vertex, using external ids."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex_id", "district"])
        for i in range(graph.num_vertices):
            writer.writerow([graph.external_ids[i], int(plan.assignment[i])])


def load_plan(graph: CityGraph, path) -> DistrictPlan:
    """Read an assignment table written by :func:`save_plan`."""
    path = Path(path)
    index_of = {ext: i for i, ext in enumerate(graph.external_ids)}
    assign = np.full(graph.num_vertices, -1, dtype=np.int32)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["vertex_id", "district"]:
            raise ValueError(f"{path}: expected header 'vertex_id,district'")
        for row in reader:
            if not row:
                continue
            try:
                ext, d = int(row[0]), int(row[1])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: malformed assignment row {row!r}") from exc
            if ext not in index_of:
                raise ValueError(f"{path}: unknown vertex id {ext}")
            assign[index_of[ext]] = d
    if np.any(assign < 0):
        missing = graph.external_ids[int(np.flatnonzero(assign < 0)[0])]
        raise ValueError(f"{path}: vertex {missing} has no district assignment")
    return DistrictPlan(assignment=assign, n_districts=int(assign.max()) + 1)
