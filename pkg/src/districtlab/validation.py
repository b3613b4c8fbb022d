"""Ensemble spread validation via largest preserved blocks.

Fix a reference plan. For each of its districts, a sampled plan keeps
some largest set of blocks together in a single new district; the tuple
of those sets is the plan's signature. Two plans are distant (with
respect to the reference) when their signature entries are disjoint in
every reference district. Each entry covers at least 1/n of its
reference district, so no more than n plans can be pairwise distant;
how close a sample gets to that bound indicates how widely the chain
has moved through the plan space.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .partition import DistrictPlan


@dataclass
class PlanSignature:
    reference_key: str
    entries: list[frozenset[int]]
    _masks: list[int]
    _union_mask: int

    @property
    def n_districts(self) -> int:
        return len(self.entries)


@dataclass
class CoverageReport:
    set_size: int
    upper_bound: int
    ratio: float
    member_ids: list[int]
    mode: str


def _reference_key(reference: DistrictPlan) -> str:
    digest = hashlib.sha256(reference.assignment.tobytes())
    digest.update(str(reference.n_districts).encode())
    return digest.hexdigest()[:16]


def signature(plan: DistrictPlan, reference: DistrictPlan) -> PlanSignature:
    """Largest intersection of each reference district with the plan.

    Ties between equally large intersections break toward the lowest
    plan-district index.
    """
    if plan.num_vertices != reference.num_vertices:
        raise ValueError(
            f"plan covers {plan.num_vertices} vertices, reference {reference.num_vertices}"
        )
    if plan.n_districts != reference.n_districts:
        raise ValueError(
            f"plan has {plan.n_districts} districts, reference {reference.n_districts}"
        )
    n = reference.n_districts
    key = _reference_key(reference)
    entries = []
    masks = []
    union = 0
    for k in range(n):
        members = reference.district_vertices(k)
        labels = plan.assignment[members]
        counts = np.bincount(labels, minlength=n)
        winner = int(np.argmax(counts))  # argmax returns the lowest index on ties
        kept = members[labels == winner]
        assert len(kept) * n >= len(members), "largest fragment smaller than 1/n of district"
        entry_mask = 0
        for v in kept.tolist():
            entry_mask |= 1 << v
        entries.append(frozenset(kept.tolist()))
        masks.append(entry_mask)
        union |= entry_mask
    return PlanSignature(reference_key=key, entries=entries, _masks=masks, _union_mask=union)


def are_distant(a: PlanSignature, b: PlanSignature) -> bool:
    """True when every pair of same-district entries is disjoint.

    Entries of different reference districts live in disjoint vertex
    sets, so the per-district check collapses to one intersection of
    the signature unions.
    """
    if a.reference_key != b.reference_key or a.n_districts != b.n_districts:
        raise ValueError("signatures were taken against different references")
    return (a._union_mask & b._union_mask) == 0


def max_distant_set(
    ensemble: list[DistrictPlan],
    reference: DistrictPlan,
    mode: str = "greedy",
) -> tuple[list[int], int]:
    """Indices of pairwise-distant plans, plus the theoretical bound n.

    ``greedy`` scans the ensemble in order keeping every plan compatible
    with the kept set. ``exact`` solves maximum clique on the
    distantness graph, which stays tractable because cliques cannot
    exceed n.
    """
    if mode not in ("greedy", "exact"):
        raise ValueError(f"mode must be 'greedy' or 'exact', got {mode!r}")
    n = reference.n_districts
    sigs = [signature(plan, reference) for plan in ensemble]
    masks = [s._union_mask for s in sigs]

    if mode == "greedy":
        chosen: list[int] = []
        for i, mask in enumerate(masks):
            if all(mask & masks[j] == 0 for j in chosen):
                chosen.append(i)
        assert len(chosen) <= n
        return chosen, n

    adjacency = _distantness_adjacency(masks)
    chosen = _max_clique(adjacency, cap=n)
    assert len(chosen) <= n
    return sorted(chosen), n


def coverage_report(
    ensemble: list[DistrictPlan],
    reference: DistrictPlan,
    mode: str = "greedy",
) -> CoverageReport:
    members, bound = max_distant_set(ensemble, reference, mode)
    return CoverageReport(
        set_size=len(members),
        upper_bound=bound,
        ratio=len(members) / bound,
        member_ids=members,
        mode=mode,
    )


def _distantness_adjacency(masks: list[int]) -> list[int]:
    """Bitset adjacency of the pairwise-distant relation."""
    m = len(masks)
    adj = [0] * m
    for i in range(m):
        mi = masks[i]
        row = adj[i]
        for j in range(i + 1, m):
            if mi & masks[j] == 0:
                row |= 1 << j
                adj[j] |= 1 << i
        adj[i] = row
    return adj


def _max_clique(adj: list[int], cap: int) -> list[int]:
    """Branch-and-bound maximum clique over bitset adjacency.

    Candidates are pruned with a greedy colouring bound; the search also
    stops expanding once ``cap`` (the pigeonhole ceiling) is reached.
    """
    m = len(adj)
    if m == 0:
        return []
    best: list[int] = []

    def colour_bound(candidates: int) -> list[tuple[int, int]]:
        """Greedy colouring; returns (vertex, colour_count_at_vertex) in search order."""
        coloured = []
        remaining = candidates
        colour = 0
        while remaining:
            colour += 1
            available = remaining
            while available:
                v = (available & -available).bit_length() - 1
                available &= available - 1
                coloured.append((v, colour))
                available &= ~adj[v]
                remaining &= ~(1 << v)
        return coloured

    def expand(clique: list[int], candidates: int):
        nonlocal best
        if len(best) >= cap:
            return
        coloured = colour_bound(candidates)
        for v, colour in reversed(coloured):
            if len(clique) + colour <= len(best):
                return
            clique.append(v)
            if len(clique) >= cap:
                best = clique.copy()  # the pigeonhole ceiling; nothing can beat it
            else:
                nxt = candidates & adj[v]
                if nxt:
                    expand(clique, nxt)
                elif len(clique) > len(best):
                    best = clique.copy()
            clique.pop()
            candidates &= ~(1 << v)
            if len(best) >= cap:
                return

    full = (1 << m) - 1
    expand([], full)
    return best
