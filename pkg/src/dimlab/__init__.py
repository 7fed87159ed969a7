"""dimlab: dyadic-grid laboratory for entropy, arithmetic, and dimension
of fractal-type subsets of the line and low-dimensional grids."""

from .errors import (
    DimLabError,
    EmptySetError,
    FormatError,
    HypothesisError,
    MeasureInvariantError,
    ResourceLimitError,
    SpecValidationError,
    ZeroMassError,
)
from .dyadic import (
    DEFAULT_MAX_DEPTH,
    DyadicInterval,
    DyadicTree,
    Vertex,
    cell_of,
    covering_count,
    descendant_count,
    descendant_range,
    discretize,
    dumps_tree,
    interval_of,
    is_full_branching,
    load_tree,
    loads_tree,
    locate,
    save_tree,
    subtree,
    validate,
)
from .measures import (
    ATOMIC,
    BOTH,
    NEITHER,
    UNIFORM,
    CoveringBoundsReport,
    LevelStats,
    ScaleProfile,
    TreeMeasure,
    avg_entropy,
    classify_local,
    cond_entropy,
    counting_measure,
    covering_bounds_check,
    default_window,
    dumps_measure,
    entropy,
    from_leaf_masses,
    greedy_cover,
    load_measure,
    loads_measure,
    local_entropy,
    restrict_renormalize,
    save_measure,
    scale_profile,
    splitting_measure,
)
from .generators import (
    GeneratorSpec,
    IfsSpec,
    MoranSpec,
    ReciprocalSpec,
    SemigroupSpec,
    build_tree,
    extract_moran_subset,
    ifs_attractor,
    iterated_ifs,
    moran_tree,
    reciprocal_tree,
    semigroup_tree,
    spec_from_json,
    spec_to_json,
)
from .arithmetic import (
    GridSetD,
    SumsetReport,
    annulus_cells,
    delta_dense_check,
    difference_set,
    distance_set,
    dumps_grid,
    grid_product,
    index_sumset,
    iterated_sumset,
    load_grid,
    loads_grid,
    save_grid,
)
from .dimension import (
    DimEstimate,
    GrowthRow,
    GrowthTable,
    assouad_estimate,
    box_estimate,
    growth_experiment,
    lower_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "DimLabError",
    "EmptySetError",
    "FormatError",
    "HypothesisError",
    "MeasureInvariantError",
    "ResourceLimitError",
    "SpecValidationError",
    "ZeroMassError",
    "DEFAULT_MAX_DEPTH",
    "DyadicInterval",
    "DyadicTree",
    "Vertex",
    "cell_of",
    "covering_count",
    "descendant_count",
    "descendant_range",
    "discretize",
    "dumps_tree",
    "interval_of",
    "is_full_branching",
    "load_tree",
    "loads_tree",
    "locate",
    "save_tree",
    "subtree",
    "validate",
    "ATOMIC",
    "BOTH",
    "NEITHER",
    "UNIFORM",
    "CoveringBoundsReport",
    "LevelStats",
    "ScaleProfile",
    "TreeMeasure",
    "avg_entropy",
    "classify_local",
    "cond_entropy",
    "counting_measure",
    "covering_bounds_check",
    "default_window",
    "dumps_measure",
    "entropy",
    "from_leaf_masses",
    "greedy_cover",
    "load_measure",
    "loads_measure",
    "local_entropy",
    "restrict_renormalize",
    "save_measure",
    "scale_profile",
    "splitting_measure",
    "GeneratorSpec",
    "IfsSpec",
    "MoranSpec",
    "ReciprocalSpec",
    "SemigroupSpec",
    "build_tree",
    "extract_moran_subset",
    "ifs_attractor",
    "iterated_ifs",
    "moran_tree",
    "reciprocal_tree",
    "semigroup_tree",
    "spec_from_json",
    "spec_to_json",
    "GridSetD",
    "SumsetReport",
    "annulus_cells",
    "delta_dense_check",
    "difference_set",
    "distance_set",
    "dumps_grid",
    "grid_product",
    "index_sumset",
    "iterated_sumset",
    "load_grid",
    "loads_grid",
    "save_grid",
    "DimEstimate",
    "GrowthRow",
    "GrowthTable",
    "assouad_estimate",
    "box_estimate",
    "growth_experiment",
    "lower_estimate",
]
