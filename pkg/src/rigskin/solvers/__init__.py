"""Skinning-weight and rig solvers, their losses and signed distance queries."""

from .config import load_config, parse_config
from .gradcheck import central_difference, max_relative_error
from .losses import chamfer, chamfer_grad, loss_edge, loss_skel, loss_vtx
from .rig import (
    RigConfig,
    RigObjective,
    RigSolution,
    heuristic_residual,
    solve_rig,
    symmetrize_residual,
)
from .sdf import loss_sdf, loss_sdf_hinge, sdf_eval, sdf_gradient
from .skinning import (
    SkinningConfig,
    SkinningObjective,
    SkinningWeights,
    TrainingSample,
    skinning_objective_direct,
    softmax_rows,
    solve_skinning,
)

__all__ = [
    "RigConfig", "RigObjective", "RigSolution", "SkinningConfig", "SkinningObjective",
    "SkinningWeights", "TrainingSample", "central_difference", "chamfer", "chamfer_grad",
    "heuristic_residual", "load_config", "loss_edge", "loss_sdf", "loss_sdf_hinge",
    "loss_skel", "loss_vtx", "max_relative_error", "parse_config", "sdf_eval",
    "sdf_gradient", "skinning_objective_direct", "softmax_rows", "solve_rig",
    "solve_skinning", "symmetrize_residual",
]
