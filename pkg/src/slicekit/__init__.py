"""slicekit: locality-bounded samplers for Hamming-slice-type distributions,
exact total-variation measurement, and bipartite graph elimination."""

from .dist import (
    BoundReport,
    ExactDistribution,
    build_biased,
    build_periodic,
    build_slice,
    build_uniform,
    condition,
    eta,
    eta_lower,
    marginal,
    mix,
    point_mass,
    product,
    tvd,
)
from .errors import (
    CapacityError,
    ConditioningError,
    DiscrepancyError,
    DomainMismatchError,
    EliminationError,
    EliminationInvariantError,
    FormatError,
    SlicekitError,
)
from .graphs import (
    BipartiteGraph,
    EliminationResult,
    brute_force_best_elimination,
    eliminate_neighborhoods,
    eliminate_vertices,
    find_heavy_batch_neigh,
    find_heavy_batch_vtx,
    greedy_nonconnected,
    max_nonconnected,
    read_graph,
    vertex_elim_threshold,
    write_graph,
)
from .localfn import (
    Gate,
    LocalFunction,
    NeighborhoodReport,
    classify_neighborhoods,
    dependency_graph,
    evaluate,
    identity_fn,
    locality,
    neighborhoods,
    non_connected,
    output_distribution_enum,
    read_localfn,
    resampling_stat,
    restrict,
    write_localfn,
)
from .numerics import TowerValue, binom_bounds, entropy_bounds, err, log_star, tow
from .samplers import (
    SamplerPlan,
    build_biased_truncated,
    build_mod_sampler,
    build_parity_mod2,
    build_slice_recursive,
    build_slice_sparse,
    direct_approx_sampler,
    distr_approx,
    structural_distribution,
)

__version__ = "0.1.0"
