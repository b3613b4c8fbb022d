"""Districting laboratory: synthetic cities, plan ensembles, and fairness metrics."""

from .citygraph import (
    CityGraph,
    DisconnectedGraphError,
    GraphError,
    GraphInvariantError,
    GraphParseError,
    build_grid,
    load_graph,
    save_graph,
)
from .citygen import (
    DissimilarityTargetError,
    GenSpec,
    InfeasibleSpecError,
    WeightField,
    adjust_dissimilarity,
    assign_weights,
    generate_grid_city,
    generate_modeled_city,
    place_populations,
    taper_weights,
)
from .metrics import (
    FairnessStats,
    UndefinedIndexError,
    dissimilarity,
    ensemble_fairness,
    fairness,
    minority_majority_count,
)
from .partition import (
    DistrictPlan,
    SeedStuckError,
    ValidityReport,
    block_plan,
    district_populations,
    is_valid,
    load_plan,
    save_plan,
    seed_from_scratch,
    stripe_plan,
)
from .recom import ChainConfig, ChainStallError, build_ensemble, recom_step, run_chain
from .templates import city_template, district_count, template_names
from .validation import (
    CoverageReport,
    PlanSignature,
    are_distant,
    coverage_report,
    max_distant_set,
    signature,
)

__version__ = "0.1.0"
