"""Byzantine-robust federated learning simulator with server learning."""

from ._rofsl import (
    __version__,
    angle_filter,
    average,
    clip_norm,
    cos_sim,
    dirichlet_partition,
    dot,
    geometric_median,
    lf_score,
    loss_filter,
    make_blobs,
    norm,
    parse_config,
    robust_aggregate,
    run_experiment,
    run_repeats,
    weiszfeld,
)

__all__ = [
    "angle_filter",
    "average",
    "clip_norm",
    "cos_sim",
    "dirichlet_partition",
    "dot",
    "geometric_median",
    "lf_score",
    "loss_filter",
    "make_blobs",
    "norm",
    "parse_config",
    "robust_aggregate",
    "run_experiment",
    "run_repeats",
    "weiszfeld",
]
