"""Built-in modeled-city templates.

Four mid-size American cities anchor the modeled-city experiments:

    =============  ==========  =============  ==========
    city           population  subgroup       districts
    =============  ==========  =============  ==========
    albuquerque       545,711        254,834          9
    charlotte         735,847        268,404          7
    pittsburgh        305,704         84,819          9
    minneapolis       382,578         79,967         13
    =============  ==========  =============  ==========

The real block-level dual graphs are external data; the templates here
are deterministic synthetic stand-ins with the same citywide totals,
district counts, and block counts, an organically grown footprint, and
a dense-core population profile with empty fringe blocks. Any dual
graph loaded from a file can be used in their place.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .citygraph import CityGraph


@dataclass(frozen=True)
class TemplateInfo:
    name: str
    total_pop: int
    subgroup_pop: int
    n_districts: int
    blocks: int
    build_seed: int


TEMPLATES: dict[str, TemplateInfo] = {
    "albuquerque": TemplateInfo("albuquerque", 545_711, 254_834, 9, 9_149, 101),
    "charlotte": TemplateInfo("charlotte", 735_847, 268_404, 7, 8_822, 102),
    "pittsburgh": TemplateInfo("pittsburgh", 305_704, 84_819, 9, 8_822, 103),
    "minneapolis": TemplateInfo("minneapolis", 382_578, 79_967, 13, 7_000, 104),
}


def template_names() -> list[str]:
    return sorted(TEMPLATES)


def district_count(name: str) -> int:
    return _info(name).n_districts


def _info(name: str) -> TemplateInfo:
    key = name.lower()
    if key not in TEMPLATES:
        raise KeyError(f"unknown template {name!r}; choose from {template_names()}")
    return TEMPLATES[key]


@lru_cache(maxsize=None)
def city_template(name: str) -> CityGraph:
    """Deterministic stand-in dual graph for a built-in city."""
    info = _info(name)
    rng = np.random.default_rng(info.build_seed)

    members, edges, center = _grow_footprint(info.blocks, rng)
    pop_total = _population_profile(info, members, center, rng)
    pop_q = _proportional_subgroup(pop_total, info.subgroup_pop)

    graph = CityGraph(info.name, pop_total, pop_q, edges)
    assert graph.total_population == info.total_pop
    assert graph.subgroup_population == info.subgroup_pop
    return graph


def _grow_footprint(blocks: int, rng: np.random.Generator):
    """Randomly grown connected region of a large grid (Eden growth).

    Returns (grid coordinates of members, induced edges on dense ids,
    center coordinate). Random accretion priorities give the footprint
    an irregular boundary while keeping it connected.
    """
    side = int(np.ceil(np.sqrt(blocks) * 2.0))
    center = (side // 2, side // 2)
    taken: dict[tuple[int, int], int] = {}
    heap: list[tuple[float, tuple[int, int]]] = [(0.0, center)]
    queued = {center}
    while len(taken) < blocks:
        _, cell = heapq.heappop(heap)
        taken[cell] = len(taken)
        r, c = cell
        for nbr in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nbr[0] < side and 0 <= nbr[1] < side and nbr not in queued:
                queued.add(nbr)
                heapq.heappush(heap, (float(rng.random()), nbr))

    edges = []
    for (r, c), i in taken.items():
        for nbr in ((r, c + 1), (r + 1, c)):
            j = taken.get(nbr)
            if j is not None:
                edges.append((i, j))
    members = [None] * blocks
    for cell, i in taken.items():
        members[i] = cell
    return members, edges, center


def _population_profile(info, members, center, rng):
    """Block populations: denser near the core, noisy, exact citywide total."""
    coords = np.asarray(members, dtype=np.float64)
    dist = np.hypot(coords[:, 0] - center[0], coords[:, 1] - center[1])
    scale = max(dist.max(), 1.0) / 2.0
    density = np.exp(-dist / scale) * rng.lognormal(mean=0.0, sigma=0.7, size=len(members))
    raw = density * (info.total_pop / density.sum())
    return _round_to_total(raw, info.total_pop)


def _round_to_total(raw: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder rounding to non-negative integers with an exact sum."""
    floors = np.floor(raw).astype(np.int64)
    shortfall = total - int(floors.sum())
    assert 0 <= shortfall <= len(raw)
    order = np.argsort(-(raw - floors), kind="stable")
    floors[order[:shortfall]] += 1
    return floors


def _proportional_subgroup(pop_total: np.ndarray, q_total: int) -> np.ndarray:
    """Near-proportional subgroup counts with an exact citywide total."""
    p_total = int(pop_total.sum())
    raw = pop_total * (q_total / p_total)
    q = np.floor(raw).astype(np.int64)
    shortfall = q_total - int(q.sum())
    frac = raw - q
    frac[q >= pop_total] = -1.0  # never push a block past its capacity
    order = np.argsort(-frac, kind="stable")
    q[order[:shortfall]] += 1
    assert int(q.sum()) == q_total and np.all(q <= pop_total)
    return q
