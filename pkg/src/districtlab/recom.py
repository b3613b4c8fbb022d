"""Recombination Markov chain over valid district plans.

Each step picks a random cut edge (so adjacent district pairs are
weighted by shared boundary length), merges the two districts, draws a
random spanning tree of the merged region, and looks for a tree edge
whose removal leaves both sides within ``epsilon`` of the ideal
district population. Every proposal that splits successfully is
accepted; all other districts are untouched.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, replace

import numpy as np

from .citygraph import CityGraph
from .partition import DEFAULT_EPSILON, DistrictPlan, is_valid


class ChainStallError(Exception):
    """No district pair could be re-split after bounded retries."""


@dataclass
class ChainConfig:
    steps: int
    epsilon: float = DEFAULT_EPSILON
    rng_seed: int = 0
    max_split_attempts: int = 10_000
    record_every: int = 1

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.max_split_attempts < 1:
            raise ValueError("max_split_attempts must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be positive")


def recom_step(
    graph: CityGraph,
    plan: DistrictPlan,
    cfg: ChainConfig,
    rng: random.Random,
    max_pair_retries: int = 100,
) -> DistrictPlan:
    """One accepted recombination move.

    Tries up to ``cfg.max_split_attempts`` spanning trees per district
    pair and up to ``max_pair_retries`` pairs before declaring the chain
    stalled.
    """
    if plan.n_districts < 2:
        raise ValueError("recombination needs at least 2 districts")
    assign = plan.assignment
    cut_idx = np.flatnonzero(assign[graph.edge_u] != assign[graph.edge_v])
    if len(cut_idx) == 0:
        raise ChainStallError("plan has no cut edges between distinct districts")

    ideal = graph.total_population / plan.n_districts
    lo = (1.0 - cfg.epsilon) * ideal
    hi = (1.0 + cfg.epsilon) * ideal

    for _ in range(max_pair_retries):
        edge = int(cut_idx[rng.randrange(len(cut_idx))])
        da = int(assign[graph.edge_u[edge]])
        db = int(assign[graph.edge_v[edge]])
        new_assign = _split_pair(graph, assign, da, db, lo, hi, cfg.max_split_attempts, rng)
        if new_assign is not None:
            return DistrictPlan(assignment=new_assign, n_districts=plan.n_districts)
    raise ChainStallError(
        f"no balanced re-split found for any pair after {max_pair_retries} retries"
    )


def _split_pair(graph, assign, da, db, lo, hi, max_split_attempts, rng):
    """Merge districts ``da`` and ``db`` and re-split along a spanning tree."""
    in_merge = (assign == da) | (assign == db)
    members = np.flatnonzero(in_merge)
    local = np.full(graph.num_vertices, -1, dtype=np.int64)
    local[members] = np.arange(len(members))

    mask = in_merge[graph.edge_u] & in_merge[graph.edge_v]
    sub_u = local[graph.edge_u[mask]].tolist()
    sub_v = local[graph.edge_v[mask]].tolist()
    m = len(members)
    pops = graph.pop_total[members].tolist()
    total = sum(pops)

    edge_order = list(range(len(sub_u)))
    for _ in range(max_split_attempts):
        # Random spanning tree: minimum spanning tree under i.i.d. random
        # edge weights, realized as Kruskal over a shuffled edge order.
        rng.shuffle(edge_order)
        parent = list(range(m))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        tree_adj: list[list[int]] = [[] for _ in range(m)]
        picked = 0
        for e in edge_order:
            a, b = sub_u[e], sub_v[e]
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
                tree_adj[a].append(b)
                tree_adj[b].append(a)
                picked += 1
                if picked == m - 1:
                    break

        cut_vertex = _balanced_cut(tree_adj, pops, total, lo, hi, rng)
        if cut_vertex is None:
            continue
        side, tree_parent = cut_vertex
        new_assign = assign.copy()
        # Vertices in the cut subtree take one label, the rest the other.
        sub_labels = np.full(m, da, dtype=np.int32)
        stack = [side]
        seen = bytearray(m)
        seen[side] = 1
        while stack:
            x = stack.pop()
            sub_labels[x] = db
            for y in tree_adj[x]:
                if not seen[y] and not (x == side and y == tree_parent):
                    seen[y] = 1
                    stack.append(y)
        new_assign[members] = sub_labels
        return new_assign
    return None


def _balanced_cut(tree_adj, pops, total, lo, hi, rng):
    """Pick a tree edge splitting the tree into two population-feasible parts.

    Computes subtree populations in one pass from an arbitrary root and
    collects every feasible edge; one is chosen uniformly. Returns
    (subtree_root, its_parent) or None.
    """
    m = len(pops)
    parent = [-1] * m
    order = []
    stack = [0]
    seen = bytearray(m)
    seen[0] = 1
    while stack:
        v = stack.pop()
        order.append(v)
        for w in tree_adj[v]:
            if not seen[w]:
                seen[w] = 1
                parent[w] = v
                stack.append(w)

    subtree = pops[:]
    for v in reversed(order):
        p = parent[v]
        if p >= 0:
            subtree[p] += subtree[v]

    candidates = [
        v
        for v in range(m)
        if parent[v] >= 0 and lo <= subtree[v] <= hi and lo <= total - subtree[v] <= hi
    ]
    if not candidates:
        return None
    v = candidates[rng.randrange(len(candidates))]
    return v, parent[v]


def run_chain(graph: CityGraph, seed_plan: DistrictPlan, cfg: ChainConfig) -> list[DistrictPlan]:
    """Run an always-accept chain and return its ``cfg.steps`` states.

    Deterministic for a fixed ``cfg.rng_seed``. The seed plan itself is
    not included in the returned sequence.
    """
    report = is_valid(graph, seed_plan, cfg.epsilon)
    if not report.ok:
        raise ValueError(f"seed plan is invalid: {sorted(report.reasons())}")
    rng = random.Random(cfg.rng_seed)
    states = []
    current = seed_plan
    for _ in range(cfg.steps):
        current = recom_step(graph, current, cfg, rng)
        states.append(current)
    return states


def build_ensemble(
    graph: CityGraph,
    seeds: list[DistrictPlan],
    per_seed_steps: int,
    cfg: ChainConfig,
) -> list[DistrictPlan]:
    """Concatenate each seed with its chain output.

    Result size is ``len(seeds) * (per_seed_steps + 1)``. Chain rng
    streams are derived per seed from ``cfg.rng_seed`` so seeds can run
    in any order (or in parallel) with identical results.
    """
    if not seeds:
        raise ValueError("need at least one seed plan")
    n = seeds[0].n_districts
    if any(s.n_districts != n for s in seeds):
        raise ValueError("seed plans disagree on district count")
    ensemble: list[DistrictPlan] = []
    for i, seed in enumerate(seeds):
        ensemble.append(seed)
        if per_seed_steps > 0:
            derived = int(np.random.SeedSequence([cfg.rng_seed, i]).generate_state(1)[0])
            chain_cfg = replace(cfg, steps=per_seed_steps, rng_seed=derived)
            ensemble.extend(run_chain(graph, seed, chain_cfg))
    return ensemble
