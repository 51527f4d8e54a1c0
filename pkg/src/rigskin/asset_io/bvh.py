"""
BVH 1.0 reader and writer.

Rotations are intrinsic Euler angles in degrees, applied in the joint's
channel order (``Zrotation Xrotation Yrotation`` gives ``Rz @ Rx @ Ry``).
Root position channels are a translation added to the root OFFSET.
``End Site`` blocks become leaf joints named ``<parent>_end`` with no
channels; the writer emits every leaf joint as an ``End Site``.
"""

import re
import warnings
from dataclasses import dataclass

import numpy as np

from ..core_math import euler_to_matrix, matrix_to_euler
from ..errors import ParseError, UnsupportedChannel
from ..skeleton import Skeleton, forward_kinematics

POSITION_CHANNELS = ("Xposition", "Yposition", "Zposition")
ROTATION_CHANNELS = ("Xrotation", "Yrotation", "Zrotation")
KNOWN_CHANNELS = POSITION_CHANNELS + ROTATION_CHANNELS

_NUM_FMT = ".12g"


@dataclass(frozen=True, eq=False)
class BvhDocument:
    skeleton: Skeleton
    channels: tuple          # per joint, tuple of channel tags
    frames: np.ndarray       # (F, C)
    frame_time: float

    def __post_init__(self):
        width = sum(len(c) for c in self.channels)
        frames = np.asarray(self.frames, dtype=np.float64).reshape(-1, width)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "channels", tuple(tuple(c) for c in self.channels))
        if len(self.channels) != len(self.skeleton):
            raise ValueError("one channel list per joint is required")
        if not self.frame_time > 0:
            raise ValueError("frame_time must be positive")

    @property
    def n_frames(self):
        return self.frames.shape[0]

    def channel_slices(self):
        out = []
        start = 0
        for ch in self.channels:
            out.append(slice(start, start + len(ch)))
            start += len(ch)
        return out

    def to_clip(self):
        """Local rotations and root translation per frame as :class:`PoseTransforms`."""
        n = self.n_frames
        j = len(self.skeleton)
        rot = np.broadcast_to(np.eye(3), (n, j, 3, 3)).copy()
        trans = np.zeros((n, 3))
        for k, (sl, ch) in enumerate(zip(self.channel_slices(), self.channels)):
            vals = self.frames[:, sl]
            rcols = [i for i, c in enumerate(ch) if c in ROTATION_CHANNELS]
            pcols = [i for i, c in enumerate(ch) if c in POSITION_CHANNELS]
            if rcols and n:
                order = "".join(ch[i][0] for i in rcols)
                if len(rcols) != 3:
                    raise UnsupportedChannel(
                        f"joint {self.skeleton.names[k]!r} needs exactly 3 rotation channels")
                rot[:, k] = euler_to_matrix(vals[:, rcols], order).reshape(n, 3, 3)
            if pcols:
                if k != 0:
                    if np.any(vals[:, pcols] != 0):
                        warnings.warn(f"ignoring position channels on non-root joint "
                                      f"{self.skeleton.names[k]!r}", stacklevel=2)
                    continue
                for i in pcols:
                    trans[:, "XYZ".index(ch[i][0])] = vals[:, i]
        return forward_kinematics(self.skeleton, rot, trans, check=False)


def default_channels(s, rotation_order="ZYX"):
    out = []
    rot = tuple(f"{a}rotation" for a in rotation_order)
    for k in range(len(s)):
        if k == 0:
            out.append(POSITION_CHANNELS + rot)
        elif s.is_leaf(k):
            out.append(())
        else:
            out.append(rot)
    return tuple(out)


def from_clip(s, clip, frame_time, channels=None, rotation_order="ZYX"):
    """Encode a clip (PoseTransforms with a frame dimension) as a BVH document."""
    channels = default_channels(s, rotation_order) if channels is None else channels
    rot = np.asarray(clip.local_rotation)
    trans = np.asarray(clip.root_translation)
    if rot.ndim == 3:
        rot = rot[None]
        trans = trans[None]
    n = rot.shape[0]
    cols = []
    for k, ch in enumerate(channels):
        rcols = [c for c in ch if c in ROTATION_CHANNELS]
        euler = None
        if rcols and n:
            order = "".join(c[0] for c in rcols)
            euler = matrix_to_euler(rot[:, k], order).reshape(n, 3)
        elif not ch and k != 0 and n and not np.allclose(rot[:, k], np.eye(3), atol=1e-9):
            warnings.warn(f"joint {s.names[k]!r} has no channels; its rotation is dropped",
                          stacklevel=2)
        ri = 0
        for c in ch:
            if c in ROTATION_CHANNELS:
                cols.append(euler[:, ri] if euler is not None else np.zeros(n))
                ri += 1
            elif k == 0:
                cols.append(trans[:, "XYZ".index(c[0])])
            else:
                cols.append(np.zeros(n))
    frames = np.stack(cols, axis=1) if cols else np.zeros((n, 0))
    return BvhDocument(s, channels, frames, frame_time)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\S+")


class _Tokens:
    def __init__(self, lines, source):
        self.toks = []
        self.source = source
        for ln, line in enumerate(lines, start=1):
            for m in _TOKEN.finditer(line):
                self.toks.append((m.group(), ln, m.start() + 1))
        self.i = 0

    def error(self, msg, tok=None, cls=ParseError):
        if tok is None:
            tok = self.toks[self.i] if self.i < len(self.toks) else (
                None, self.toks[-1][1] if self.toks else 1, None)
        return cls(msg, tok[1], tok[2], self.source)

    def peek(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def next(self, what="token"):
        if self.i >= len(self.toks):
            raise self.error(f"unexpected end of file, expected {what}")
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, word):
        tok = self.next(repr(word))
        if tok[0] != word:
            raise self.error(f"expected {word!r}, found {tok[0]!r}", tok)
        return tok

    def number(self):
        tok = self.next("number")
        try:
            v = float(tok[0])
        except ValueError:
            raise self.error(f"expected a number, found {tok[0]!r}", tok) from None
        if not np.isfinite(v):
            raise self.error(f"non-finite number {tok[0]!r}", tok)
        return v

    def integer(self):
        tok = self.next("integer")
        try:
            return int(tok[0])
        except ValueError:
            raise self.error(f"expected an integer, found {tok[0]!r}", tok) from None


def _parse_joint(tk, parent, names, parents, offsets, channels):
    name_tok = tk.next("joint name")
    name = name_tok[0]
    if name in ("{", "}"):
        raise tk.error("missing joint name", name_tok)
    if name in names:
        raise tk.error(f"duplicate joint name {name!r}", name_tok)
    idx = len(names)
    names.append(name)
    parents.append(parent)
    tk.expect("{")
    tk.expect("OFFSET")
    offsets.append([tk.number(), tk.number(), tk.number()])
    ch = ()
    if tk.peek() == "CHANNELS":
        tk.next()
        count_tok = tk.toks[tk.i] if tk.i < len(tk.toks) else None
        count = tk.integer()
        if count < 0 or count > 6:
            raise tk.error(f"invalid channel count {count}", count_tok)
        tags = []
        for _ in range(count):
            tok = tk.next("channel tag")
            if tok[0] not in KNOWN_CHANNELS:
                raise tk.error(f"unsupported channel {tok[0]!r}", tok, UnsupportedChannel)
            tags.append(tok[0])
        ch = tuple(tags)
    channels.append(ch)
    while True:
        tok = tk.next("'}'")
        if tok[0] == "}":
            break
        if tok[0] == "JOINT":
            _parse_joint(tk, idx, names, parents, offsets, channels)
        elif tok[0] == "End":
            site = tk.next("'Site'")
            if site[0] != "Site":
                raise tk.error(f"expected 'Site', found {site[0]!r}", site)
            end_name = f"{name}_end"
            if end_name in names:
                raise tk.error(f"duplicate joint name {end_name!r}", site)
            names.append(end_name)
            parents.append(idx)
            tk.expect("{")
            tk.expect("OFFSET")
            offsets.append([tk.number(), tk.number(), tk.number()])
            channels.append(())
            tk.expect("}")
        else:
            raise tk.error(f"unexpected token {tok[0]!r} in joint {name!r}", tok)


def parse_bvh(text, source=None):
    """Parse BVH text into a :class:`BvhDocument`.

    Raises :class:`ParseError` (with line and column) on malformed input and
    :class:`UnsupportedChannel` on unknown channel tags.
    """
    lines = text.splitlines()
    motion_line = None
    for ln, line in enumerate(lines):
        if line.strip() == "MOTION" or line.strip().startswith("MOTION "):
            motion_line = ln
            break
    if motion_line is None:
        raise ParseError("missing MOTION section", len(lines) or 1, 1, source)

    tk = _Tokens(lines[:motion_line], source)
    tk.expect("HIERARCHY")
    tk.expect("ROOT")
    names, parents, offsets, channels = [], [], [], []
    _parse_joint(tk, -1, names, parents, offsets, channels)
    if tk.peek() is not None:
        raise tk.error(f"unexpected token {tk.peek()!r} after hierarchy")

    mt = _Tokens(lines[motion_line:], source)
    # keep absolute line numbers
    mt.toks = [(t, ln + motion_line, c) for t, ln, c in mt.toks]
    mt.expect("MOTION")
    mt.expect("Frames:")
    count_tok = mt.toks[mt.i] if mt.i < len(mt.toks) else None
    n_frames = mt.integer()
    if n_frames < 0:
        raise mt.error("negative frame count", count_tok)
    mt.expect("Frame")
    mt.expect("Time:")
    ft_tok = mt.toks[mt.i] if mt.i < len(mt.toks) else None
    frame_time = mt.number()
    if frame_time <= 0:
        raise mt.error("frame time must be positive", ft_tok)
    header_end = mt.toks[mt.i - 1][1]

    width = sum(len(c) for c in channels)
    rows = []
    for ln in range(header_end, len(lines)):
        line = lines[ln]
        if not line.strip():
            continue
        toks = list(_TOKEN.finditer(line))
        if len(toks) != width:
            raise ParseError(f"frame row has {len(toks)} values, expected {width}",
                             ln + 1, 1, source)
        row = []
        for m in toks:
            try:
                v = float(m.group())
            except ValueError:
                raise ParseError(f"expected a number, found {m.group()!r}",
                                 ln + 1, m.start() + 1, source) from None
            if not np.isfinite(v):
                raise ParseError(f"non-finite number {m.group()!r}", ln + 1, m.start() + 1,
                                 source)
            row.append(v)
        rows.append(row)
    if len(rows) != n_frames:
        raise ParseError(f"header declares {n_frames} frames but {len(rows)} rows found",
                         len(lines), 1, source)
    skeleton = Skeleton(names, parents, offsets)
    frames = np.array(rows, dtype=np.float64).reshape(n_frames, width)
    return BvhDocument(skeleton, channels, frames, frame_time)


def _fmt(x):
    s = format(float(x), _NUM_FMT)
    return "0" if s == "-0" else s


def write_bvh(doc):
    """Serialize a :class:`BvhDocument` to BVH text."""
    s = doc.skeleton
    out = ["HIERARCHY"]
    order = []

    def emit(k, depth):
        order.append(k)
        pad = "\t" * depth
        if k != 0 and s.is_leaf(k) and not doc.channels[k]:
            out.append(f"{pad}End Site")
            out.append(pad + "{")
            out.append(f"{pad}\tOFFSET " + " ".join(_fmt(x) for x in s.offsets[k]))
            out.append(pad + "}")
            return
        kw = "ROOT" if k == 0 else "JOINT"
        out.append(f"{pad}{kw} {s.names[k]}")
        out.append(pad + "{")
        out.append(f"{pad}\tOFFSET " + " ".join(_fmt(x) for x in s.offsets[k]))
        ch = doc.channels[k]
        out.append(f"{pad}\tCHANNELS {len(ch)}" + "".join(" " + c for c in ch))
        kids = s.children(k)
        for c in kids:
            emit(c, depth + 1)
        if not kids:
            # a channelled leaf still needs an end site for most readers
            out.append(f"{pad}\tEnd Site")
            out.append(pad + "\t{")
            out.append(f"{pad}\t\tOFFSET 0 0 0")
            out.append(pad + "\t}")
        out.append(pad + "}")

    emit(0, 0)
    out.append("MOTION")
    out.append(f"Frames: {doc.n_frames}")
    out.append(f"Frame Time: {_fmt(doc.frame_time)}")
    # frame columns follow the depth-first joint order of the hierarchy
    slices = doc.channel_slices()
    cols = np.concatenate([np.arange(slices[k].start, slices[k].stop) for k in order]
                          + [np.zeros(0, int)]).astype(int)
    for row in np.asarray(doc.frames)[:, cols]:
        out.append(" ".join(_fmt(x) for x in row))
    return "\n".join(out) + "\n"


def read_bvh(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_bvh(fh.read(), source=str(path))


def save_bvh(path, doc):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_bvh(doc))
