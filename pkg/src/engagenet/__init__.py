"""Tripartite engagement-network analytics for coded interaction events.

Builds a heterogeneous (student, location, behavior) network from event
triads, clusters students with a nonparametric degree-corrected bipartite
blockmodel, extracts statistically significant location-behavior pairs per
cluster against a degree-preserving binomial null model, and compares
clusters with nonparametric statistics.
"""

from .events import (
    EventParseError,
    StudentRecord,
    TeamScore,
    UtteranceEvent,
    ValidationReport,
    extract_triads,
    load_students,
    load_team_scores,
    median_split,
    parse_event_log,
    validate_dataset,
)
from .network import (
    BipartiteGraph,
    TriadTensor,
    TripartiteNetwork,
    build_tripartite,
    project_cluster_lc,
    project_student_pair,
    weighted_degree,
)
from .sbm import (
    BipartiteBlockmodel,
    PartitionResult,
    SbmConfig,
    canonicalize,
    description_length,
    infer_partition,
)
from .sigfilter import (
    FilterConfig,
    SignificanceResult,
    SignificantEdgeFilter,
    binomial_sf,
    filter_significant,
    significance_threshold,
)
from .stats import (
    FisherReport,
    KappaReport,
    MwuReport,
    cohens_kappa,
    fisher_exact,
    mann_whitney_u,
    odds_ratio_woolf_ci,
)
from .synth import PlantedLabels, SynthConfig, adjusted_rand_index, generate_dataset
from .vocab import (
    CodingScheme,
    LocationTaxonomy,
    VocabularyError,
    default_coding_scheme,
    default_location_taxonomy,
    load_coding_scheme,
    load_location_taxonomy,
)

__version__ = "0.1.0"

__all__ = [
    "BipartiteBlockmodel",
    "BipartiteGraph",
    "CodingScheme",
    "EventParseError",
    "FilterConfig",
    "FisherReport",
    "KappaReport",
    "LocationTaxonomy",
    "MwuReport",
    "PartitionResult",
    "PlantedLabels",
    "SbmConfig",
    "SignificanceResult",
    "SignificantEdgeFilter",
    "StudentRecord",
    "SynthConfig",
    "TeamScore",
    "TriadTensor",
    "TripartiteNetwork",
    "UtteranceEvent",
    "ValidationReport",
    "VocabularyError",
    "adjusted_rand_index",
    "binomial_sf",
    "build_tripartite",
    "canonicalize",
    "cohens_kappa",
    "default_coding_scheme",
    "default_location_taxonomy",
    "description_length",
    "extract_triads",
    "filter_significant",
    "fisher_exact",
    "generate_dataset",
    "infer_partition",
    "load_coding_scheme",
    "load_location_taxonomy",
    "load_students",
    "load_team_scores",
    "mann_whitney_u",
    "median_split",
    "odds_ratio_woolf_ci",
    "parse_event_log",
    "project_cluster_lc",
    "project_student_pair",
    "significance_threshold",
    "validate_dataset",
    "weighted_degree",
]
