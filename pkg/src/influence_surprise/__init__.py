"""Bayesian surprise of centrality-rank movement in growing influence networks."""

__version__ = "0.1.0"

from .centrality import PagerankConfig, ScoreTable, disruption, disruption_all, pagerank
from .ranking import RankTable, kendall_tau, rank, spearman_rho
from .surprise import (
    BetaParams,
    Hypothesis,
    SurpriseRecord,
    TrajectoryPoint,
    kl_beta,
    node_surprise,
    past_rank_prior,
    posterior_update,
    regular_growth_prior,
    total_surprise,
    trajectories,
)
from .temporal_graph import (
    EdgeEvent,
    GraphSnapshot,
    SnapshotConfig,
    SnapshotSeries,
    TemporalEdgeList,
    build_snapshots,
    ingest_edge_list,
    snapshot_stats,
)

__all__ = [
    "BetaParams", "EdgeEvent", "GraphSnapshot", "Hypothesis", "PagerankConfig", "RankTable",
    "ScoreTable", "SnapshotConfig", "SnapshotSeries", "SurpriseRecord", "TemporalEdgeList",
    "TrajectoryPoint", "build_snapshots", "disruption", "disruption_all", "ingest_edge_list",
    "kendall_tau", "kl_beta", "node_surprise", "pagerank", "past_rank_prior", "posterior_update",
    "rank", "regular_growth_prior", "snapshot_stats", "spearman_rho", "total_surprise", "trajectories",
]
