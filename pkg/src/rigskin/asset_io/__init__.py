"""Readers and writers for motion, mesh, skeleton, weight and descriptor files."""

from .bvh import (
    BvhDocument,
    default_channels,
    from_clip,
    parse_bvh,
    read_bvh,
    save_bvh,
    write_bvh,
)
from .formats import (
    parse_descriptors,
    parse_skeleton_json,
    parse_weights,
    read_descriptors,
    read_skeleton_json,
    read_weights,
    save_descriptors,
    save_skeleton_json,
    save_weights,
    skeleton_to_dict,
    write_descriptors,
    write_skeleton_json,
    write_weights,
)
from .obj import parse_obj, read_obj, save_obj, write_obj


def read_skeleton(path):
    """Load a skeleton from ``.json`` or the hierarchy of a ``.bvh`` file."""
    if str(path).lower().endswith(".bvh"):
        return read_bvh(path).skeleton
    return read_skeleton_json(path)


__all__ = [
    "BvhDocument", "default_channels", "from_clip", "parse_bvh", "read_bvh", "save_bvh",
    "write_bvh", "parse_descriptors", "parse_skeleton_json", "parse_weights",
    "read_descriptors", "read_skeleton", "read_skeleton_json", "read_weights",
    "save_descriptors", "save_skeleton_json", "save_weights", "skeleton_to_dict",
    "write_descriptors", "write_skeleton_json", "write_weights", "parse_obj", "read_obj",
    "save_obj", "write_obj",
]
