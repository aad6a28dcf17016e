"""Metrics, rollouts, and dynamical-systems experiments."""

from .clustering import best_k, kmeans, silhouette, wcss
from .experiments import (
    PhasePoint,
    SymmetryPoint,
    benettin,
    classify_growth,
    cluster_count,
    energy_experiment,
    growth_rate,
    lyapunov,
    op_count_scaling,
    phase_sweep,
    resilience_sweep,
    spatial_entropy,
    symmetry_experiment,
    symmetry_index,
)
from .metrics import (
    MetricsRecord,
    dead_dims,
    effective_rank,
    feature_std,
    metrics_record,
    spatial_std,
    ssim,
)
from .rollout import (
    RolloutTrace,
    aggregate_magnitudes,
    curve_recovery,
    fit_exp_null,
    recovery_stats,
    rollout,
)

__all__ = [
    "MetricsRecord",
    "PhasePoint",
    "RolloutTrace",
    "SymmetryPoint",
    "aggregate_magnitudes",
    "benettin",
    "best_k",
    "classify_growth",
    "cluster_count",
    "curve_recovery",
    "dead_dims",
    "effective_rank",
    "energy_experiment",
    "feature_std",
    "fit_exp_null",
    "growth_rate",
    "kmeans",
    "lyapunov",
    "metrics_record",
    "op_count_scaling",
    "phase_sweep",
    "recovery_stats",
    "resilience_sweep",
    "rollout",
    "silhouette",
    "spatial_entropy",
    "spatial_std",
    "ssim",
    "symmetry_experiment",
    "symmetry_index",
    "wcss",
]
