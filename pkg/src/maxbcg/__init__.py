"""Zone-indexed MaxBCG galaxy-cluster finder with partition-parallel runs."""

from .bcg import (
    BCGParams,
    Candidate,
    Cluster,
    ClusterMember,
    RedshiftScore,
    bcg_candidate,
    chi_square,
    cluster_members,
    filter_redshifts,
    is_cluster,
    r200,
    search_window,
)
from .catalog import (
    Galaxy,
    GalaxyCatalog,
    KCorrEntry,
    KCorrTable,
    PlantedCluster,
    RawGalaxy,
    RegionBounds,
    derive_galaxy,
    generate_synthetic_catalog,
    generate_synthetic_kcorr,
    ingest_galaxies,
    load_kcorr,
)
from .estimator import MaxBCG
from .oracle import brute_neighbors, brute_pipeline
from .partition import (
    PartitionPlan,
    RunGeometry,
    RunResult,
    plan_partitions,
    run_partitioned,
    run_sequential,
)
from .zones import NeighborHit, ZoneConfig, ZoneTable, build_zone_table, neighbors, unit_vector, zone_of

__version__ = "0.1.0"

__all__ = [
    "BCGParams",
    "Candidate",
    "Cluster",
    "ClusterMember",
    "Galaxy",
    "GalaxyCatalog",
    "KCorrEntry",
    "KCorrTable",
    "MaxBCG",
    "NeighborHit",
    "PartitionPlan",
    "PlantedCluster",
    "RawGalaxy",
    "RedshiftScore",
    "RegionBounds",
    "RunGeometry",
    "RunResult",
    "ZoneConfig",
    "ZoneTable",
    "bcg_candidate",
    "brute_neighbors",
    "brute_pipeline",
    "build_zone_table",
    "chi_square",
    "cluster_members",
    "derive_galaxy",
    "filter_redshifts",
    "generate_synthetic_catalog",
    "generate_synthetic_kcorr",
    "ingest_galaxies",
    "is_cluster",
    "load_kcorr",
    "neighbors",
    "plan_partitions",
    "r200",
    "run_partitioned",
    "run_sequential",
    "search_window",
    "unit_vector",
    "zone_of",
]
