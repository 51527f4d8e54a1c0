"""
Command-line interface.

Subcommands mirror the pipeline stages::

    rigskin synth biped_simple --seed 0 --out bundle
    rigskin augment bundle/skeleton.json --seed 1 --n-remove 1,1 --n-insert 0,0 --out aug
    rigskin rig bundle/mesh.obj aug/skeleton.json --gt-skeleton bundle/skeleton.json --out rig
    rigskin retarget bundle/motion_wave.bvh rig/skeleton.json --out ret
    rigskin skin bundle/mesh.obj rig/skeleton.json --motion ret/motion.bvh \\
        --fit-from-gt-weights-deform bundle/weights.txt \\
        --gt-skeleton bundle/skeleton.json --gt-motion bundle/motion_wave.bvh --out skin
    rigskin deform bundle/mesh.obj skin/weights.txt rig/skeleton.json ret/motion.bvh --out pred
    rigskin eval --pred-frames pred/frames --gt-frames gt/frames --mesh bundle/mesh.obj

Every command writes its outputs plus ``manifest.json`` (input and output
hashes, configuration hash, library versions) into ``--out``. Outputs depend
only on the inputs and ``--seed``.

Exit codes: 0 success, 1 usage error, 2 unreadable or malformed input,
3 solver failure.
"""

import argparse
import dataclasses
import hashlib
import json
import os
import platform
import sys
import warnings

import numpy as np

from . import __version__
from .animation import deform_clip
from .asset_io import (
    from_clip,
    read_bvh,
    read_obj,
    read_skeleton,
    read_weights,
    save_bvh,
    save_obj,
    save_skeleton_json,
    save_weights,
    write_bvh,
)
from .errors import InvalidConfig, ParseError, RigSkinError, ShapeMismatch, SizeMismatch
from .fixtures import TEMPLATES, CharacterParams, make_character
from .metrics import cd_j2j, evaluate
from .retarget import build_correspondence, retarget_pose
from .skeleton import augment_skeleton, forward_kinematics
from .solvers import TrainingSample, solve_rig, solve_skinning
from .solvers.config import load_config

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _need(path):
    if not os.path.isfile(path):
        raise InputError(f"no such file: {path}")
    return path


def _load(reader, path, *args):
    """Read an input file; any failure while loading is an input error."""
    try:
        return reader(_need(path), *args)
    except RigSkinError as exc:
        raise InputError(str(exc)) from exc


def _int_pair(text):
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi' integers, got {text!r}") from None
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return tuple(parts)


def _float_pair(text):
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi' numbers, got {text!r}") from None
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return parts


def _frame_files(directory):
    if not os.path.isdir(directory):
        raise InputError(f"no such directory: {directory}")
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(".obj"))
    if not names:
        raise InputError(f"no .obj frames in {directory}")
    return [os.path.join(directory, n) for n in names]


def _read_frames(directory, n_vertices=None):
    frames = []
    for path in _frame_files(directory):
        m = _load(read_obj, path)
        if n_vertices is not None and m.n_vertices != n_vertices:
            raise ShapeMismatch(f"{path}: {m.n_vertices} vertices, expected {n_vertices}")
        frames.append(m.vertices)
    return np.stack(frames)


def clip_on(s, doc):
    """Pose of skeleton ``s`` driven by a BVH document's rotations.

    Joints are matched by name; unmatched leaves stay unrotated. Root world
    positions are preserved even when the root offsets differ.
    """
    clip = doc.to_clip()
    index = {n: k for k, n in enumerate(doc.skeleton.names)}
    n = doc.n_frames
    rot = np.broadcast_to(np.eye(3), (n, len(s), 3, 3)).copy()
    for j, name in enumerate(s.names):
        k = index.get(name)
        if k is None:
            if not s.is_leaf(j):
                raise SizeMismatch(f"motion has no joint named {name!r}")
            continue
        rot[:, j] = clip.local_rotation[:, k]
    root = clip.root_translation + doc.skeleton.offsets[0] - s.offsets[0]
    return forward_kinematics(s, rot, root, check=False)


def _save_frames(directory, mesh, frames):
    os.makedirs(directory, exist_ok=True)
    names = []
    for f, v in enumerate(frames):
        name = f"frame_{f:04d}.obj"
        save_obj(os.path.join(directory, name), mesh, v)
        names.append(name)
    return names


def _json_dump(path, data):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _versions():
    import numba
    import scipy

    return {
        "rigskin": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _config_payload(cfg):
    if cfg is None:
        return None
    if dataclasses.is_dataclass(cfg):
        return dataclasses.asdict(cfg)
    return cfg


def write_manifest(out, command, inputs, outputs, cfg=None, settings=None):
    """Write ``manifest.json``: everything needed to reproduce the outputs.

    Paths are recorded by base name so the manifest does not depend on where
    the run happened.
    """
    payload = _config_payload(cfg)
    cfg_text = json.dumps(payload, sort_keys=True, default=list)
    data = {
        "command": command,
        "settings": settings or {},
        "config": payload,
        "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest(),
        "inputs": [{"role": role, "name": os.path.basename(p), "sha256": _sha256(p)}
                   for role, p in inputs],
        "outputs": [{"name": rel, "sha256": _sha256(os.path.join(out, rel))}
                    for rel in outputs],
        "versions": _versions(),
    }
    _json_dump(os.path.join(out, "manifest.json"), data)


def _configs(args):
    cfgs = load_config(_need(args.config) if args.config else None)
    return cfgs


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args):
    params = CharacterParams(clip_frames=args.frames)
    c = make_character(args.template, args.seed, params)
    os.makedirs(args.out, exist_ok=True)
    outputs = ["mesh.obj", "skeleton.json", "weights.txt"]
    save_obj(os.path.join(args.out, "mesh.obj"), c.mesh)
    save_skeleton_json(os.path.join(args.out, "skeleton.json"), c.skeleton)
    save_weights(os.path.join(args.out, "weights.txt"), c.gt_weights, c.skeleton.names)
    kinds = (("random_smooth",) if args.template == "two_bone_cylinder"
             else ("wave", "crouch", "random_smooth"))
    for kind, clip in zip(kinds, c.gt_clips):
        name = f"motion_{kind}.bvh"
        save_bvh(os.path.join(args.out, name), from_clip(c.skeleton, clip, c.frame_time))
        outputs.append(name)
    write_manifest(args.out, "synth", [], outputs, dataclasses.asdict(params),
                   {"template": args.template, "seed": args.seed})
    return EXIT_OK


def cmd_augment(args):
    cfg = _configs(args)["augment"]
    changes = {}
    if args.n_insert is not None:
        changes["n_insert"] = args.n_insert
    if args.n_remove is not None:
        changes["n_remove"] = args.n_remove
    if args.scale_range is not None:
        changes["scale_range"] = args.scale_range
    cfg = dataclasses.replace(cfg, **changes)
    s = _load(read_skeleton, args.skeleton)
    out_s = augment_skeleton(s, args.seed, cfg)
    os.makedirs(args.out, exist_ok=True)
    save_skeleton_json(os.path.join(args.out, "skeleton.json"), out_s)
    write_manifest(args.out, "augment", [("skeleton", args.skeleton)], ["skeleton.json"],
                   cfg, {"seed": args.seed})
    print(f"augmented skeleton: {len(s)} -> {len(out_s)} joints")
    return EXIT_OK


def cmd_rig(args):
    cfg = dataclasses.replace(_configs(args)["rig"], seed=args.seed)
    mesh = _load(read_obj, args.mesh)
    src = _load(read_skeleton, args.skeleton)
    inputs = [("mesh", args.mesh), ("skeleton", args.skeleton)]
    g_gt = None
    if args.gt_skeleton:
        gt = _load(read_skeleton, args.gt_skeleton)
        g_gt = gt.g
        inputs.append(("gt_skeleton", args.gt_skeleton))
    sol = solve_rig(mesh, src, cfg, g_gt)
    os.makedirs(args.out, exist_ok=True)
    save_skeleton_json(os.path.join(args.out, "skeleton.json"), sol.target_skeleton)
    report = {
        "iterations": len(sol.loss_trace) - 1,
        "initial_loss": sol.loss_trace[0],
        "final_loss": sol.loss_trace[-1],
        "delta_o": sol.delta_o.tolist(),
    }
    if g_gt is not None:
        report["cd_j2j"] = cd_j2j(sol.target_skeleton.g, g_gt)
    _json_dump(os.path.join(args.out, "rig_report.json"), report)
    write_manifest(args.out, "rig", inputs, ["skeleton.json", "rig_report.json"], cfg,
                   {"seed": args.seed})
    return EXIT_OK


def cmd_retarget(args):
    doc = _load(read_bvh, args.motion)
    tgt = _load(read_skeleton, args.skeleton)
    src = doc.skeleton
    corr = build_correspondence(src, tgt)
    pose = retarget_pose(doc.to_clip(), corr, tgt, src)
    os.makedirs(args.out, exist_ok=True)
    out_doc = from_clip(tgt, pose, doc.frame_time, rotation_order=args.rotation_order)
    with open(os.path.join(args.out, "motion.bvh"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_bvh(out_doc))
    _json_dump(os.path.join(args.out, "correspondence.json"), corr.named(src, tgt))
    write_manifest(args.out, "retarget", [("motion", args.motion), ("skeleton", args.skeleton)],
                   ["motion.bvh", "correspondence.json"], None,
                   {"rotation_order": args.rotation_order})
    return EXIT_OK


def cmd_skin(args):
    cfg = dataclasses.replace(_configs(args)["skinning"], seed=args.seed)
    mesh = _load(read_obj, args.mesh)
    s = _load(read_skeleton, args.skeleton)
    inputs = [("mesh", args.mesh), ("skeleton", args.skeleton)]
    motions = args.motion or []
    if not motions:
        raise UsageError("at least one --motion is required")
    docs = [_load(read_bvh, p) for p in motions]
    inputs += [("motion", p) for p in motions]
    clips = [clip_on(s, d) for d in docs]

    if args.fit_from_gt_weights_deform:
        if args.frames:
            raise UsageError("--frames and --fit-from-gt-weights-deform are exclusive")
        gt_s = _load(read_skeleton, args.gt_skeleton) if args.gt_skeleton else s
        gt_w, _ = _load(read_weights, args.fit_from_gt_weights_deform, mesh, gt_s)
        inputs.append(("gt_weights", args.fit_from_gt_weights_deform))
        if args.gt_skeleton:
            inputs.append(("gt_skeleton", args.gt_skeleton))
        gt_paths = args.gt_motion or motions
        if len(gt_paths) != len(motions):
            raise UsageError("give one --gt-motion per --motion")
        if args.gt_motion:
            inputs += [("gt_motion", p) for p in gt_paths]
            gt_docs = [_load(read_bvh, p) for p in gt_paths]
        else:
            gt_docs = docs
        targets = [deform_clip(mesh, gt_w, gt_s, clip_on(gt_s, d)) for d in gt_docs]
    else:
        if not args.frames or len(args.frames) != len(motions):
            raise UsageError("give one --frames directory per --motion, "
                             "or --fit-from-gt-weights-deform")
        targets = [_read_frames(d, mesh.n_vertices) for d in args.frames]
        for d in args.frames:
            inputs += [("frame", p) for p in _frame_files(d)]

    samples = []
    for clip, frames, path in zip(clips, targets, motions):
        if len(frames) != len(clip):
            raise ShapeMismatch(f"{path}: {len(clip)} motion frames but {len(frames)} meshes")
        samples += [TrainingSample(mesh, frames[f], clip.frame(f)) for f in range(len(clip))]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        w = solve_skinning(samples, s, cfg)
    for item in caught:
        print(f"warning: {item.message}", file=sys.stderr)

    os.makedirs(args.out, exist_ok=True)
    save_weights(os.path.join(args.out, "weights.txt"), w.weights, s.names)
    report = {"iterations": len(w.loss_trace) - 1, "initial_loss": w.loss_trace[0],
              "final_loss": w.loss_trace[-1], "samples": len(samples),
              "warnings": [str(i.message) for i in caught]}
    _json_dump(os.path.join(args.out, "skin_report.json"), report)
    write_manifest(args.out, "skin", inputs, ["weights.txt", "skin_report.json"], cfg,
                   {"seed": args.seed})
    return EXIT_OK


def cmd_deform(args):
    mesh = _load(read_obj, args.mesh)
    s = _load(read_skeleton, args.skeleton)
    w, _ = _load(read_weights, args.weights, mesh, s)
    doc = _load(read_bvh, args.motion)
    frames = deform_clip(mesh, w, s, clip_on(s, doc))
    names = _save_frames(os.path.join(args.out, "frames"), mesh, frames)
    write_manifest(args.out, "deform",
                   [("mesh", args.mesh), ("weights", args.weights), ("skeleton", args.skeleton),
                    ("motion", args.motion)],
                   [os.path.join("frames", n) for n in names])
    return EXIT_OK


def cmd_eval(args):
    kw = {}
    inputs = []
    pairs = (("pred_skeleton", "gt_skeleton"), ("pred_weights", "gt_weights"),
             ("pred_frames", "gt_frames"))
    for a, b in pairs:
        if bool(getattr(args, a)) != bool(getattr(args, b)):
            raise UsageError(f"--{a.replace('_', '-')} and --{b.replace('_', '-')} "
                             "must be given together")
    if args.pred_skeleton:
        kw["pred_skeleton"] = _load(read_skeleton, args.pred_skeleton)
        kw["gt_skeleton"] = _load(read_skeleton, args.gt_skeleton)
        inputs += [("pred_skeleton", args.pred_skeleton), ("gt_skeleton", args.gt_skeleton)]
    if args.pred_weights:
        kw["pred_weights"], _ = _load(read_weights, args.pred_weights)
        kw["gt_weights"], _ = _load(read_weights, args.gt_weights)
        inputs += [("pred_weights", args.pred_weights), ("gt_weights", args.gt_weights)]
    if args.pred_frames:
        kw["pred_frames"] = _read_frames(args.pred_frames)
        kw["gt_frames"] = _read_frames(args.gt_frames)
        if args.mesh:
            kw["edges"] = _load(read_obj, args.mesh).edges
            inputs.append(("mesh", args.mesh))
    if not kw:
        raise UsageError("nothing to evaluate; give at least one pred/gt pair")
    report = evaluate(**kw)
    text = {"kv": report.to_kv, "json": report.to_json, "table": report.to_table}[args.format]()
    sys.stdout.write(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        name = {"kv": "report.txt", "json": "report.json", "table": "report.txt"}[args.format]
        with open(os.path.join(args.out, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        write_manifest(args.out, "eval", inputs, [name], None, {"format": args.format})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="rigskin", description="Rig, skin and deform character meshes.")
    p.add_argument("--version", action="version", version=f"rigskin {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def common(sp, seed=True, config=True, out_required=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        if config:
            sp.add_argument("--config", help="INI solver configuration file")
        sp.add_argument("--out", required=out_required, help="output directory")

    sp = sub.add_parser("synth", help="generate a synthetic character bundle")
    sp.add_argument("template", choices=TEMPLATES)
    sp.add_argument("--frames", type=int, default=24, help="frames per clip (default 24)")
    common(sp, config=False)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("augment", help="randomly change a skeleton's configuration")
    sp.add_argument("skeleton", help="skeleton .json or .bvh")
    sp.add_argument("--n-insert", type=_int_pair, help="inserted pairs, 'lo,hi'")
    sp.add_argument("--n-remove", type=_int_pair, help="removed pairs, 'lo,hi'")
    sp.add_argument("--scale-range", type=_float_pair, help="per-pair bone scale, 'lo,hi'")
    common(sp)
    sp.set_defaults(func=cmd_augment)

    sp = sub.add_parser("rig", help="fit a source skeleton to a mesh")
    sp.add_argument("mesh")
    sp.add_argument("skeleton", help="source skeleton .json or .bvh")
    sp.add_argument("--gt-skeleton", help="reference joints for the chamfer term")
    common(sp)
    sp.set_defaults(func=cmd_rig)

    sp = sub.add_parser("retarget", help="transfer BVH motion onto another skeleton")
    sp.add_argument("motion", help="source .bvh")
    sp.add_argument("skeleton", help="target skeleton .json or .bvh")
    sp.add_argument("--rotation-order", default="ZYX", choices=["XYZ", "XZY", "YXZ", "YZX",
                                                                "ZXY", "ZYX"])
    common(sp, seed=False, config=False)
    sp.set_defaults(func=cmd_retarget)

    sp = sub.add_parser("skin", help="fit skinning weights from posed examples")
    sp.add_argument("mesh")
    sp.add_argument("skeleton")
    sp.add_argument("--motion", action="append", help="training .bvh (repeatable)")
    sp.add_argument("--frames", action="append",
                    help="directory of deformed .obj frames for the matching --motion")
    sp.add_argument("--fit-from-gt-weights-deform", metavar="WEIGHTS",
                    help="build training frames by deforming the mesh with these weights")
    sp.add_argument("--gt-skeleton", help="skeleton the reference weights belong to")
    sp.add_argument("--gt-motion", action="append",
                    help="motion driving the reference deformation (one per --motion)")
    common(sp)
    sp.set_defaults(func=cmd_skin)

    sp = sub.add_parser("deform", help="animate a mesh with linear blend skinning")
    sp.add_argument("mesh")
    sp.add_argument("weights")
    sp.add_argument("skeleton")
    sp.add_argument("motion", help=".bvh clip")
    common(sp, seed=False, config=False)
    sp.set_defaults(func=cmd_deform)

    sp = sub.add_parser("eval", help="compute rigging, skinning and deformation metrics")
    for name in ("skeleton", "weights", "frames"):
        sp.add_argument(f"--pred-{name}")
        sp.add_argument(f"--gt-{name}")
    sp.add_argument("--mesh", help="rest mesh supplying edges for the edge length score")
    sp.add_argument("--format", choices=["kv", "json", "table"], default="kv")
    common(sp, seed=False, config=False, out_required=False)
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rigskin {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, ParseError, InvalidConfig, OSError, ShapeMismatch, SizeMismatch) as exc:
        print(f"rigskin {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RigSkinError as exc:
        print(f"rigskin {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
