"""Synthetic-city generation.

Cities are generated in three stages. Cluster-shaped weight fields are
laid over the graph (high weight near a few randomly seeded clusters,
tapering off with graph distance down to a small floor). The two
population groups are then placed by weighted draws in alternating
batches, the smaller "vulnerable" group concentrated harder than the
remainder. Finally, people are swapped between low- and high-share
blocks until the dissimilarity index lands on its target, without
disturbing where the concentrations live.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .citygraph import CityGraph, build_grid
from .metrics import UndefinedIndexError, dissimilarity

MAX_WEIGHT = 1.0
FLOOR_FRACTION = 0.01  # city-wide minimum weight, as a fraction of the maximum


class InfeasibleSpecError(Exception):
    """Generation targets cannot be met on this graph."""


class DissimilarityTargetError(Exception):
    """Swap adjustment could not reach the target index.

    ``achieved`` carries the best index reached, whether the failure was
    an iteration cap (``reason='non-convergence'``) or an integrally
    unreachable target (``reason='infeasible'``).
    """

    def __init__(self, target: float, achieved: float, reason: str):
        super().__init__(
            f"dissimilarity target {target:.4f} not reached "
            f"({reason}); best achieved {achieved:.6f}"
        )
        self.target = target
        self.achieved = achieved
        self.reason = reason


@dataclass
class GenSpec:
    """Targets and knobs for one generated city."""

    target_q_frac: float
    target_d: float
    d_tolerance: float = 0.01
    cluster_count_range: tuple[int, int] = (1, 10)
    taper_slope_range: tuple[float, float] = (0.02, 0.5)
    hot_fraction_q: float = 0.80
    hot_fraction_rest: float = 0.20
    batch_size: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.target_q_frac <= 1.0:
            raise ValueError(f"target_q_frac must be in [0, 1], got {self.target_q_frac}")
        if not 0.0 <= self.target_d <= 1.0:
            raise ValueError(f"target_d must be in [0, 1], got {self.target_d}")
        if self.d_tolerance <= 0.0:
            raise ValueError("d_tolerance must be positive")
        lo, hi = self.cluster_count_range
        if not (1 <= lo <= hi <= 10):
            raise ValueError(f"cluster_count_range must lie within [1, 10], got {lo}..{hi}")
        slo, shi = self.taper_slope_range
        if not (0.0 < slo <= shi):
            raise ValueError(f"taper_slope_range must be positive, got {slo}..{shi}")
        for frac in (self.hot_fraction_q, self.hot_fraction_rest):
            if not 0.0 < frac <= 1.0:
                raise ValueError(f"hot fractions must be in (0, 1], got {frac}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


@dataclass
class WeightField:
    """Per-vertex placement weights for one subgroup, floored above zero."""

    weights: np.ndarray
    floor: float

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.floor <= 0.0 or np.any(self.weights < self.floor):
            raise ValueError("weights must stay at or above a positive floor")


def taper_weights(
    graph: CityGraph,
    clusters: list[list[int]],
    slopes: list[float],
    floor: float = MAX_WEIGHT * FLOOR_FRACTION,
) -> WeightField:
    """Weight field from explicit clusters.

    Every vertex takes the maximum, over clusters, of the cluster's
    weight tapered linearly with breadth-first distance, never dropping
    below ``floor``.
    """
    if len(clusters) != len(slopes):
        raise ValueError("need one taper slope per cluster")
    best = np.full(graph.num_vertices, floor, dtype=np.float64)
    for cluster, slope in zip(clusters, slopes):
        dist = _bfs_distances(graph, cluster)
        np.maximum(best, MAX_WEIGHT - slope * MAX_WEIGHT * dist, out=best)
    return WeightField(weights=best, floor=floor)


def _bfs_distances(graph: CityGraph, sources) -> np.ndarray:
    dist = np.full(graph.num_vertices, np.inf)
    queue = deque()
    for v in sources:
        dist[v] = 0.0
        queue.append(v)
    while queue:
        v = queue.popleft()
        dv = dist[v]
        for w in graph.neighbors[v]:
            if dist[w] == np.inf:
                dist[w] = dv + 1.0
                queue.append(w)
    return dist


def assign_weights(
    graph: CityGraph,
    spec: GenSpec,
    subgroup: str,
    rng: np.random.Generator | None = None,
    group_total: int | None = None,
) -> WeightField:
    """Random cluster-and-taper weight field for one subgroup.

    Draws a cluster count, grows each cluster by breadth-first search
    until the max-weight vertices can house the subgroup's hot fraction,
    then tapers with a random slope per cluster.
    """
    if subgroup not in ("q", "rest"):
        raise ValueError(f"subgroup must be 'q' or 'rest', got {subgroup!r}")
    if rng is None:
        rng = np.random.default_rng(spec.rng_seed)
    p_total = graph.total_population
    if group_total is None:
        q_total = round(spec.target_q_frac * p_total)
        group_total = q_total if subgroup == "q" else p_total - q_total
    hot_fraction = spec.hot_fraction_q if subgroup == "q" else spec.hot_fraction_rest
    required = hot_fraction * group_total
    if required > p_total:
        raise InfeasibleSpecError(
            f"{subgroup!r} hot fraction needs capacity {required:.0f} "
            f"but the city only houses {p_total}"
        )

    lo, hi = spec.cluster_count_range
    k = int(rng.integers(lo, hi + 1))
    seeds = rng.choice(graph.num_vertices, size=min(k, graph.num_vertices), replace=False)

    claimed: set[int] = set()
    clusters: list[list[int]] = []
    housed = 0.0
    for i, seed in enumerate(seeds.tolist()):
        quota = (required - housed) / (len(seeds) - i)
        cluster, capacity = _grow_cluster(graph, [seed], quota, claimed, rng)
        clusters.append(cluster)
        housed += capacity
    if housed < required:
        # Clusters collided with each other; spill outward from all of them.
        starts = [v for cluster in clusters for v in cluster]
        spill, capacity = _grow_cluster(graph, starts, required - housed, claimed, rng)
        clusters[0].extend(spill)
        housed += capacity
    if housed < required:
        raise InfeasibleSpecError(
            f"graph too small to house the hot fraction of {subgroup!r} "
            f"({required:.0f} needed, {housed:.0f} available)"
        )

    slopes = rng.uniform(spec.taper_slope_range[0], spec.taper_slope_range[1], size=len(clusters))
    return taper_weights(graph, clusters, slopes.tolist())


def _grow_cluster(graph, starts, quota, claimed, rng):
    """BFS growth from ``starts`` until the grown capacity meets ``quota``.

    Vertices already claimed by earlier clusters are skipped as seeds
    and as growth targets; ``claimed`` is updated in place with every
    vertex actually taken.
    """
    cluster: list[int] = []
    capacity = 0.0
    for s in starts:
        if s not in claimed:
            claimed.add(s)
            cluster.append(s)
            capacity += float(graph.pop_total[s])
    frontier = list(starts)
    while capacity < quota and frontier:
        candidates: list[int] = []
        wave = set()
        for v in frontier:
            for w in graph.neighbors[v]:
                if w not in claimed and w not in wave:
                    wave.add(w)
                    candidates.append(w)
        rng.shuffle(candidates)
        taken = []
        for w in candidates:
            if capacity >= quota:
                break
            claimed.add(w)
            cluster.append(w)
            capacity += float(graph.pop_total[w])
            taken.append(w)
        frontier = taken
    return cluster, capacity


def place_populations(
    graph: CityGraph,
    wq: WeightField,
    wrest: WeightField,
    q_total: int,
    spec: GenSpec,
    rng: np.random.Generator | None = None,
) -> CityGraph:
    """Fill the city by alternating weighted batch draws of both groups.

    Per-vertex totals are preserved; the subgroup ends with exactly
    ``q_total`` members. Full vertices leave the candidate pool.
    """
    if rng is None:
        rng = np.random.default_rng(spec.rng_seed)
    p_total = graph.total_population
    if not 0 <= q_total <= p_total:
        raise ValueError(f"q_total must be in [0, {p_total}], got {q_total}")
    remaining = {"q": q_total, "rest": p_total - q_total}
    weights = {"q": wq.weights, "rest": wrest.weights}
    free = graph.pop_total.astype(np.int64).copy()
    placed_q = np.zeros(graph.num_vertices, dtype=np.int64)

    open_mask = free > 0
    cumulative = {g: np.cumsum(np.where(open_mask, weights[g], 0.0)) for g in ("q", "rest")}

    turn = "q"
    while remaining["q"] > 0 or remaining["rest"] > 0:
        group = turn
        turn = "rest" if turn == "q" else "q"
        amount_left = remaining[group]
        if amount_left == 0:
            continue
        cum = cumulative[group]
        total_weight = cum[-1]
        assert total_weight > 0.0, "placement ran out of open vertices with people unplaced"
        v = int(np.searchsorted(cum, rng.random() * total_weight, side="right"))
        v = min(v, graph.num_vertices - 1)
        batch = min(spec.batch_size, amount_left, int(free[v]))
        assert batch > 0
        free[v] -= batch
        remaining[group] -= batch
        if group == "q":
            placed_q[v] += batch
        if free[v] == 0:
            open_mask[v] = False
            for g in ("q", "rest"):
                cumulative[g] = np.cumsum(np.where(open_mask, weights[g], 0.0))

    assert int(free.sum()) == 0 and int(placed_q.sum()) == q_total
    return graph.with_pop_q(placed_q)


def adjust_dissimilarity(
    graph: CityGraph,
    target_d: float,
    tol: float = 0.01,
    rng_seed: int = 0,
    rng: np.random.Generator | None = None,
    max_swaps: int = 1_000_000,
    verify_each_swap: bool = False,
) -> CityGraph:
    """Swap people between blocks until the dissimilarity index hits target.

    Raising the index drains the subgroup out of its lowest-share blocks
    into its highest-share blocks (swapping against remainder-group
    members moving the other way); lowering does the reverse, pulling
    each block toward the citywide share. A block never moves past its
    proportional level by more than one person, so the block ordering by
    subgroup share is preserved as far as integer moves allow. Each swap
    moves the index monotonically toward the target. Swaps move 10
    people at a time, dropping to single people close to the target.
    """
    if not 0.0 <= target_d <= 1.0:
        raise ValueError(f"target_d must be in [0, 1], got {target_d}")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    current = dissimilarity(graph)  # raises UndefinedIndexError on empty groups
    if abs(current - target_d) <= tol:
        return graph

    if rng is None:
        rng = np.random.default_rng(rng_seed)
    pop = graph.pop_total
    q = graph.pop_q.astype(np.int64).copy()
    p_total = graph.total_population
    q_total = graph.subgroup_population
    r_total = p_total - q_total
    unit = p_total / (2.0 * q_total * r_total)  # index change per person of block deviation
    level = pop.astype(np.float64) * (q_total / p_total)  # proportional subgroup count

    occupied = np.flatnonzero(pop > 0)
    perm = rng.permutation(len(occupied))
    shuffled = occupied[perm]
    ratios = q[shuffled] / pop[shuffled]
    order = shuffled[np.argsort(ratios, kind="stable")].tolist()  # ties in random order

    # Receivers for lowering, by largest deficit first: when integer excess
    # must land on blocks with fractional levels, rounding up the blocks
    # closest to the next person minimizes the residual index.
    deficit_heap = [(-(level[v] - q[v]), v) for v in order if level[v] - q[v] > 0.0]
    heapq.heapify(deficit_heap)

    d = current
    swaps = 0
    bi, ti = 0, len(order) - 1
    while swaps < max_swaps:
        delta = target_d - d
        if abs(delta) <= unit:
            break
        gran = 10 if abs(delta) >= 0.02 else 1
        need = max(1, math.ceil(abs(delta) / (2.0 * unit)))
        if delta > 0:
            while bi < ti and q[order[bi]] == 0:
                bi += 1
            while ti > bi and q[order[ti]] == pop[order[ti]]:
                ti -= 1
            if bi >= ti:
                break
            low, high = order[bi], order[ti]
            s = min(gran, need, int(q[low]), int(pop[high] - q[high]))
            moved = _apply_swap(q, level, low, high, s)
        else:
            while ti > bi and q[order[ti]] - level[order[ti]] < 1.0:
                ti -= 1
            high = order[ti]
            excess = q[high] - level[high]
            if excess < 1.0:
                break
            low = _pop_deficit(deficit_heap, q, level)
            if low is None:
                break
            deficit = level[low] - q[low]
            if deficit >= 1.0:
                s = min(gran, need, int(math.floor(excess)), int(math.floor(deficit)))
            else:
                s = 1  # cross the level by less than one person; still lowers by 2*deficit
            moved = _apply_swap(q, level, high, low, s)
            if level[low] - q[low] > 0.0:
                heapq.heappush(deficit_heap, (-(level[low] - q[low]), low))
        new_d = d + unit * moved
        if delta > 0:
            assert new_d >= d - 1e-12, "raising swap decreased the index"
        else:
            assert new_d <= d + 1e-12, "lowering swap increased the index"
        d = new_d
        swaps += 1
        if verify_each_swap:
            check = dissimilarity(graph.with_pop_q(q))
            assert abs(check - d) < 1e-9, f"tracked index drifted: {d} vs {check}"
        if swaps % 8192 == 0:
            d = dissimilarity(graph.with_pop_q(q))

    result = graph.with_pop_q(q)
    final = dissimilarity(result)
    if abs(final - target_d) > tol:
        reason = "non-convergence" if swaps >= max_swaps else "infeasible"
        raise DissimilarityTargetError(target_d, final, reason)
    return result


def _pop_deficit(heap, q, level):
    """Largest-deficit block, skipping entries whose deficit went stale."""
    while heap:
        key, v = heapq.heappop(heap)
        deficit = level[v] - q[v]
        if deficit <= 0.0:
            continue
        if abs(-key - deficit) > 1e-9:
            heapq.heappush(heap, (-deficit, v))
            continue
        return v
    return None


def _apply_swap(q, level, donor, receiver, s):
    """Move ``s`` subgroup members donor -> receiver; return the deviation change."""
    before = abs(q[donor] - level[donor]) + abs(q[receiver] - level[receiver])
    q[donor] -= s
    q[receiver] += s
    after = abs(q[donor] - level[donor]) + abs(q[receiver] - level[receiver])
    return after - before


def generate_grid_city(
    spec: GenSpec,
    rows: int = 30,
    cols: int = 30,
    pop_per_vertex: int = 1000,
) -> CityGraph:
    """Grid city hitting a target subgroup share and dissimilarity index.

    The subgroup total comes from rounding the target share to a uniform
    per-block count, after which the full cluster/placement/swap pipeline
    redistributes it to the target index. When the target share exceeds
    one half, group labels are swapped at the end so the reported
    subgroup is always the smaller one.
    """
    rng = np.random.default_rng(spec.rng_seed)
    base = build_grid(rows, cols, pop_per_vertex)
    p_total = base.total_population
    q_uniform = round(spec.target_q_frac * pop_per_vertex)
    q_total = q_uniform * rows * cols
    if q_total == 0 or q_total == p_total:
        raise InfeasibleSpecError(
            f"target share {spec.target_q_frac} leaves one group empty; "
            "the dissimilarity index is undefined"
        )
    wq = assign_weights(base, spec, "q", rng=rng, group_total=q_total)
    wrest = assign_weights(base, spec, "rest", rng=rng, group_total=p_total - q_total)
    city = place_populations(base, wq, wrest, q_total, spec, rng=rng)
    city = adjust_dissimilarity(city, spec.target_d, spec.d_tolerance, rng=rng)
    if spec.target_q_frac > 0.5:
        city = city.with_pop_q(city.pop_total - city.pop_q)
    return city


def generate_modeled_city(template: CityGraph, spec: GenSpec) -> CityGraph:
    """Redistribute a template city's population to a target index.

    Per-block totals and the citywide subgroup count are preserved
    exactly; only where the subgroup lives changes. The template's own
    subgroup share overrides ``spec.target_q_frac``.
    """
    rng = np.random.default_rng(spec.rng_seed)
    q_total = template.subgroup_population
    p_total = template.total_population
    if q_total == 0 or q_total == p_total:
        raise UndefinedIndexError(
            f"template {template.name!r} has a degenerate subgroup (Q={q_total}, P={p_total})"
        )
    wq = assign_weights(template, spec, "q", rng=rng, group_total=q_total)
    wrest = assign_weights(template, spec, "rest", rng=rng, group_total=p_total - q_total)
    city = place_populations(template, wq, wrest, q_total, spec, rng=rng)
    city = adjust_dissimilarity(city, spec.target_d, spec.d_tolerance, rng=rng)
    assert city.subgroup_population == q_total
    assert np.array_equal(city.pop_total, template.pop_total)
    return city
