"""Dual-graph city model.

A city is a connected graph whose vertices are census blocks carrying a
total population and a subgroup population, and whose edges join blocks
that share a boundary. Grid cities use rook adjacency. Graphs are
immutable after construction; generation code works on private copies
via :meth:`CityGraph.with_pop_q`.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class GraphError(Exception):
    """Base class for city-graph construction and I/O failures."""


class GraphParseError(GraphError):
    """File could not be parsed as a dual-graph document."""


class GraphInvariantError(GraphError):
    """Vertex or edge data violates a dual-graph invariant."""


class DisconnectedGraphError(GraphError):
    """Graph has more than one connected component."""

    def __init__(self, component_count: int, name: str = ""):
        label = f" {name!r}" if name else ""
        super().__init__(
            f"graph{label} is disconnected: {component_count} components"
        )
        self.component_count = component_count


class CityGraph:
    """Immutable dual graph of a city.

    Vertex ids are dense integers ``0..V-1``. ``external_ids`` keeps the
    ids used by the source file (if any) so saving a loaded graph
    reproduces the original labeling.
    """

    __slots__ = (
        "name",
        "pop_total",
        "pop_q",
        "edge_u",
        "edge_v",
        "neighbors",
        "external_ids",
    )

    def __init__(
        self,
        name: str,
        pop_total,
        pop_q,
        edges,
        external_ids=None,
        validate: bool = True,
    ):
        self.name = name
        # Copy unconditionally: these arrays get frozen and shared.
        self.pop_total = np.array(pop_total, dtype=np.int64)
        self.pop_q = np.array(pop_q, dtype=np.int64)
        if external_ids is None:
            external_ids = list(range(len(self.pop_total)))
        self.external_ids = list(external_ids)

        pairs = sorted((u, v) if u < v else (v, u) for u, v in edges)
        self.edge_u = np.asarray([p[0] for p in pairs], dtype=np.int64)
        self.edge_v = np.asarray([p[1] for p in pairs], dtype=np.int64)

        n = len(self.pop_total)
        neighbors: list[list[int]] = [[] for _ in range(n)]
        for u, v in pairs:
            neighbors[u].append(v)
            neighbors[v].append(u)
        self.neighbors = neighbors

        if validate:
            self.validate()
        # Arrays are shared between plans and worker threads; freeze them.
        self.pop_total.flags.writeable = False
        self.pop_q.flags.writeable = False
        self.edge_u.flags.writeable = False
        self.edge_v.flags.writeable = False

    # -- basic accessors -------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.pop_total)

    @property
    def num_edges(self) -> int:
        return len(self.edge_u)

    @property
    def total_population(self) -> int:
        return int(self.pop_total.sum())

    @property
    def subgroup_population(self) -> int:
        return int(self.pop_q.sum())

    def edge_list(self) -> list[tuple[int, int]]:
        return list(zip(self.edge_u.tolist(), self.edge_v.tolist()))

    def with_pop_q(self, pop_q) -> "CityGraph":
        """Copy of this graph with a new subgroup distribution.

        Structure (edges, totals, ids) is shared; only ``pop_q`` differs.
        """
        new = object.__new__(CityGraph)
        new.name = self.name
        new.pop_total = self.pop_total
        q = np.array(pop_q, dtype=np.int64)
        if len(q) != self.num_vertices:
            raise GraphInvariantError(
                f"pop_q has length {len(q)}, expected {self.num_vertices}"
            )
        if np.any(q < 0) or np.any(q > self.pop_total):
            bad = int(np.flatnonzero((q < 0) | (q > self.pop_total))[0])
            raise GraphInvariantError(
                f"vertex {self.external_ids[bad]}: pop_q outside [0, pop_total]"
            )
        q.flags.writeable = False
        new.pop_q = q
        new.edge_u = self.edge_u
        new.edge_v = self.edge_v
        new.neighbors = self.neighbors
        new.external_ids = self.external_ids
        return new

    def __eq__(self, other) -> bool:
        if not isinstance(other, CityGraph):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.pop_total, other.pop_total)
            and np.array_equal(self.pop_q, other.pop_q)
            and np.array_equal(self.edge_u, other.edge_u)
            and np.array_equal(self.edge_v, other.edge_v)
        )

    def __repr__(self) -> str:
        return (
            f"CityGraph({self.name!r}, V={self.num_vertices}, "
            f"E={self.num_edges}, P={self.total_population}, "
            f"Q={self.subgroup_population})"
        )

    # -- invariants -------------------------------------------------------

    def validate(self) -> None:
        n = self.num_vertices
        if n == 0:
            raise GraphInvariantError("graph has no vertices")
        if len(self.pop_q) != n:
            raise GraphInvariantError("pop_q and pop_total lengths differ")
        if np.any(self.pop_total < 0):
            bad = int(np.flatnonzero(self.pop_total < 0)[0])
            raise GraphInvariantError(
                f"vertex {self.external_ids[bad]}: negative pop_total"
            )
        if np.any(self.pop_q < 0) or np.any(self.pop_q > self.pop_total):
            bad = int(np.flatnonzero((self.pop_q < 0) | (self.pop_q > self.pop_total))[0])
            raise GraphInvariantError(
                f"vertex {self.external_ids[bad]}: pop_q outside [0, pop_total]"
            )
        seen = set()
        for u, v in zip(self.edge_u.tolist(), self.edge_v.tolist()):
            if not (0 <= u < n and 0 <= v < n):
                raise GraphInvariantError(f"edge ({u}, {v}) references unknown vertex")
            if u == v:
                raise GraphInvariantError(
                    f"self-loop on vertex {self.external_ids[u]}"
                )
            if (u, v) in seen:
                raise GraphInvariantError(
                    f"duplicate edge ({self.external_ids[u]}, {self.external_ids[v]})"
                )
            seen.add((u, v))
        comps = self.component_count()
        if comps != 1:
            raise DisconnectedGraphError(comps, self.name)

    def component_count(self) -> int:
        """Number of connected components, by union-find over the edge list."""
        parent = list(range(self.num_vertices))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        count = self.num_vertices
        for u, v in zip(self.edge_u.tolist(), self.edge_v.tolist()):
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
                count -= 1
        return count

    def is_connected(self) -> bool:
        return self.component_count() == 1


def build_grid(rows: int, cols: int, pop_per_vertex: int) -> CityGraph:
    """Rook-adjacency grid city with a uniform population per block.

    Vertex ids are row-major: ``id = r * cols + c``. Interior vertices
    have degree 4, edges 3, corners 2; the subgroup population starts at
    zero everywhere.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"grid dimensions must be positive, got {rows}x{cols}")
    if pop_per_vertex < 1:
        raise ValueError(f"pop_per_vertex must be positive, got {pop_per_vertex}")
    n = rows * cols
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return CityGraph(
        name=f"grid-{rows}x{cols}",
        pop_total=np.full(n, pop_per_vertex, dtype=np.int64),
        pop_q=np.zeros(n, dtype=np.int64),
        edges=edges,
    )


def load_graph(path) -> CityGraph:
    """Load a dual-graph file.

    The file is a JSON object with ``name``, ``nodes`` (objects with
    integer ``id``, ``pop``, ``q``) and ``edges`` (two-element id
    arrays). External ids may be arbitrary integers; they are remapped
    to dense ids and kept for round-tripping.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise GraphParseError(f"{path}: not a valid dual-graph document: {exc}") from exc

    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise GraphParseError(f"{path}: expected an object with 'nodes' and 'edges'")
    name = doc.get("name", path.stem)

    external_ids = []
    pop_total = []
    pop_q = []
    index_of: dict[int, int] = {}
    for node in doc["nodes"]:
        try:
            ext, pop, q = int(node["id"]), int(node["pop"]), int(node["q"])
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphParseError(f"{path}: malformed node record {node!r}") from exc
        if ext in index_of:
            raise GraphParseError(f"{path}: duplicate node id {ext}")
        if q < 0 or q > pop or pop < 0:
            raise GraphInvariantError(
                f"{path}: vertex {ext}: pop_q outside [0, pop_total] (pop={pop}, q={q})"
            )
        index_of[ext] = len(external_ids)
        external_ids.append(ext)
        pop_total.append(pop)
        pop_q.append(q)

    edges = []
    for pair in doc["edges"]:
        try:
            a, b = int(pair[0]), int(pair[1])
        except (TypeError, ValueError, IndexError) as exc:
            raise GraphParseError(f"{path}: malformed edge record {pair!r}") from exc
        if a not in index_of or b not in index_of:
            raise GraphInvariantError(f"{path}: edge ({a}, {b}) references unknown vertex")
        edges.append((index_of[a], index_of[b]))

    try:
        return CityGraph(name, pop_total, pop_q, edges, external_ids=external_ids)
    except GraphError as exc:
        exc.args = (f"{path}: {exc.args[0]}",) + exc.args[1:]
        raise


def save_graph(graph: CityGraph, path) -> None:
    """Write a dual-graph file that :func:`load_graph` reproduces exactly."""
    path = Path(path)
    doc = {
        "name": graph.name,
        "nodes": [
            {"id": graph.external_ids[i], "pop": int(graph.pop_total[i]), "q": int(graph.pop_q[i])}
            for i in range(graph.num_vertices)
        ],
        "edges": [
            [graph.external_ids[u], graph.external_ids[v]]
            for u, v in zip(graph.edge_u.tolist(), graph.edge_v.tolist())
        ],
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, separators=(",", ":"))
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write dual-graph file {path}: {exc}") from exc
