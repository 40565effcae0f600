"""Replacement path coverings for fault-tolerant shortest paths."""

from .derand import (
    PairCollection,
    PathFailurePair,
    SeparationClass,
    build_det,
    classify,
    conditional_objective,
    derandomize_child,
    derandomize_forest,
    enumerate_pairs,
)
from .errors import (
    CapacityError,
    ConfigError,
    FormatError,
    InputError,
    InvariantError,
    PrecisionError,
    QueryError,
    RpcError,
    SamplingError,
)
from .forest import (
    QueryResult,
    RpcForest,
    build_flat_baseline,
    build_randomized,
    deserialize,
    distance_estimate,
    distance_estimates,
    flat_family,
    query,
    serialize,
)
from .gadget import (
    build_gadget,
    build_inner_tree,
    certify_rpc_against_gadget,
    check_unique_replacement,
    lower_bound_value,
)
from .graph import (
    Graph,
    PathResult,
    hop_bounded_distance,
    parse_graph,
    read_graph,
    replacement_distance,
    shortest_path_min_hops,
    write_graph,
)
from .params import RpcParams, derive_params
from .verify import VerificationReport, Violation, verify_exhaustive, verify_statistical

__version__ = "0.1.0"
