"""INI-style solver configuration.

Example::

    [skinning]
    max_iter = 1500
    lambda_edge = 0.5

    [rig]
    margin_fraction = 0.02

    [augment]
    scale_range = 0.8, 1.25

Unknown sections or keys raise :class:`InvalidConfig`. Values are parsed
to the type of the field's default; tuples are comma separated.
"""

import configparser
import dataclasses

from ..errors import InvalidConfig
from ..skeleton import AugmentConfig
from .rig import RigConfig
from .skinning import SkinningConfig

SECTIONS = {"skinning": SkinningConfig, "rig": RigConfig, "augment": AugmentConfig}


def _convert(text, default, key):
    try:
        if isinstance(default, bool):
            return text.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or default is None:
            return float(text)
        if isinstance(default, tuple):
            parts = [p.strip() for p in text.split(",") if p.strip()]
            kind = type(default[0]) if default else float
            return tuple(kind(p) for p in parts)
    except ValueError:
        raise InvalidConfig(f"bad value for {key!r}: {text!r}") from None
    return text


def parse_config(text, source="<config>"):
    """Parse config text into ``{section: config dataclass}``.

    Sections that are absent get their defaults.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise InvalidConfig(f"{source}: {exc}") from None
    out = {}
    for name, cls in SECTIONS.items():
        values = {}
        if cp.has_section(name):
            fields = {f.name: f for f in dataclasses.fields(cls)}
            for key, raw in cp.items(name):
                if key not in fields:
                    raise InvalidConfig(f"{source}: unknown key {key!r} in [{name}]")
                values[key] = _convert(raw, fields[key].default, f"{name}.{key}")
        out[name] = cls(**values)
    extra = set(cp.sections()) - set(SECTIONS)
    if extra:
        raise InvalidConfig(f"{source}: unknown section(s) {sorted(extra)}")
    if hasattr(out["augment"], "validate"):
        out["augment"].validate()
    return out


def load_config(path=None):
    if path is None:
        return parse_config("")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read(), str(path))
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc.strerror}") from None


def config_dict(configs):
    """Plain-dict view for hashing and manifests."""
    return {k: dataclasses.asdict(v) for k, v in sorted(configs.items())}
