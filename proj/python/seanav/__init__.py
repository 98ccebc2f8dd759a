"""Safe navigation training core.

Thin wrapper over the compiled module: a soft-min barrier shield with a
closed-form damped projection, collision-state curriculum resets, and a PPO
trainer for a planar velocity-controlled robot with simulated lidar.
"""

from ._core import (
    OBS_DIM,
    RAY_COUNT,
    Trainer,
    cast_lidar,
    config_hash,
    default_config,
    evaluate_policy,
    fuse_lse,
    generate_scenario,
    parse_config,
    project_damped,
    run_checks,
    shield_filter,
)

__all__ = [
    "OBS_DIM",
    "RAY_COUNT",
    "Trainer",
    "cast_lidar",
    "config_hash",
    "default_config",
    "evaluate_policy",
    "fuse_lse",
    "generate_scenario",
    "parse_config",
    "project_damped",
    "run_checks",
    "shield_filter",
]

__version__ = "0.1.0"
