"""Sub-CR graph anomaly detection (C++ core)."""

from ._core import (
    CapacityError,
    DimensionError,
    Error,
    Graph,
    IoError,
    Model,
    NumericalError,
    TrainConfig,
    UndefinedMetric,
    UsageError,
    build_diffusion,
    compute_auc,
    compute_ppr,
    compute_roc,
    export_graph,
    infer,
    inject,
    load_config,
    load_graph,
    run,
    synthetic_graph,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
