"""Invariant neural operators: momentum-conserving operator learning.

Thin python surface over the C++ core. The heavy lifting (autodiff,
kernel integral layers, solvers) happens in the `_core` extension.
"""

from ._core import (  # noqa: F401
    AugmentSpec,
    DarcyConfig,
    Dataset,
    FrameTransform,
    LpsConfig,
    LpsMaterial,
    ModelParams,
    OperatorConfig,
    PointCloud,
    TrainConfig,
    TrainReport,
    apply_transform,
    augment,
    check_equivariance,
    check_invariance,
    compose,
    dataset_read,
    dataset_write,
    evaluate,
    fit,
    forward,
    generate_darcy_dataset,
    generate_lps_dataset,
    init_params,
    grid_search,
    init_params_for_data,
    invariant_edge_features,
    load_checkpoint,
    make_disk,
    make_grid,
    model_grad_check,
    random_transform,
    relative_l2,
    save_checkpoint,
    shallow_to_deep,
    signed_angle,
    solve_darcy,
    transform_sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
