"""Segregation and representation metrics.

The dissimilarity index measures how far block-level subgroup shares
deviate from the citywide share: 0 when every block mirrors the city,
1 when every block is homogeneous. The fairness index compares the
share of districts where the subgroup holds a strict majority against
the subgroup's share of the population; averaging it over an ensemble
of plans estimates how available a proportional plan is.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .citygraph import CityGraph
from .partition import DistrictPlan, district_populations


class UndefinedIndexError(ValueError):
    """Metric undefined because one of the two groups is empty."""


@dataclass
class FairnessStats:
    f_values: list[float]
    f_bar: float
    dq_histogram: dict[int, int]
    n_plans: int

    @property
    def mean_dq(self) -> float:
        total = sum(dq * count for dq, count in self.dq_histogram.items())
        return total / self.n_plans


def dissimilarity(graph: CityGraph) -> float:
    """Dissimilarity index of the two block-level populations.

    Half the sum over blocks of |q_i/Q - r_i/R| where r is the
    remainder group. Undefined when either group is empty.
    """
    q_total = graph.subgroup_population
    r_total = graph.total_population - q_total
    if q_total == 0 or r_total == 0:
        raise UndefinedIndexError(
            f"dissimilarity undefined: subgroup sizes Q={q_total}, rest={r_total}"
        )
    q = graph.pop_q.astype(np.float64)
    r = (graph.pop_total - graph.pop_q).astype(np.float64)
    return float(0.5 * np.abs(q / q_total - r / r_total).sum())


def minority_majority_count(graph: CityGraph, plan: DistrictPlan) -> int:
    """Districts where the subgroup is a strict majority (2q > pop)."""
    count = 0
    for pop, q in district_populations(graph, plan):
        if 2 * q > pop:
            count += 1
    return count


def fairness(graph: CityGraph, plan: DistrictPlan, group: str = "q") -> float:
    """Ratio of the majority-district share to the group's population share.

    1 means the plan is exactly proportional for the group; below 1 the
    group is underrepresented, above 1 overrepresented. ``group`` may be
    ``"q"`` (the subgroup) or ``"rest"`` (its complement).
    """
    if group not in ("q", "rest"):
        raise ValueError(f"group must be 'q' or 'rest', got {group!r}")
    p_total = graph.total_population
    q_total = graph.subgroup_population
    group_total = q_total if group == "q" else p_total - q_total
    if group_total == 0:
        raise UndefinedIndexError(f"fairness undefined: group {group!r} is empty")
    wins = 0
    for pop, q in district_populations(graph, plan):
        held = q if group == "q" else pop - q
        if 2 * held > pop:
            wins += 1
    return (wins / plan.n_districts) / (group_total / p_total)


def ensemble_fairness(graph: CityGraph, ensemble: list[DistrictPlan]) -> FairnessStats:
    """Per-plan fairness values, their mean, and the majority-count histogram."""
    if not ensemble:
        raise ValueError("ensemble is empty")
    n = ensemble[0].n_districts
    if any(plan.n_districts != n for plan in ensemble):
        raise ValueError("ensemble mixes district counts")
    p_total = graph.total_population
    q_total = graph.subgroup_population
    if q_total == 0:
        raise UndefinedIndexError("fairness undefined: subgroup is empty")
    share = q_total / p_total

    histogram: Counter[int] = Counter()
    f_values = []
    for plan in ensemble:
        dq = minority_majority_count(graph, plan)
        histogram[dq] += 1
        f_values.append((dq / n) / share)
    f_bar = sum(f_values) / len(f_values)
    return FairnessStats(
        f_values=f_values,
        f_bar=f_bar,
        dq_histogram=dict(sorted(histogram.items())),
        n_plans=len(ensemble),
    )
