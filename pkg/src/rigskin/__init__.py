"""Rigging, skinning and motion transfer for character meshes.

Fits a source skeleton to a mesh, estimates skinning weights by
self-supervised reconstruction, retargets motion and evaluates the result.
"""

from . import animation, core_math, fixtures, metrics, retarget, skeleton, solvers
from .errors import RigSkinError
from .mesh import Mesh
from .skeleton import PoseTransforms, Skeleton, forward_kinematics

__version__ = "0.1.0"

__all__ = [
    "Mesh", "PoseTransforms", "RigSkinError", "Skeleton", "__version__", "animation",
    "core_math", "fixtures", "forward_kinematics", "metrics", "retarget", "skeleton", "solvers",
]
