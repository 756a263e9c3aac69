"""Work profiles: which catalog bundles a discipline may see and its defaults.

``profiles.txt`` overrides the built-in profiles, one INI block each::

    [КИП и автоматика]
    catalogs = KIP, MT
    units = pressure:kPa, temperature:°C
    font = 3.5
    line = solid
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .enkat.table import PROFILE_CODES
from .enkat.units import UNITS
from .errors import ProfileError, UnknownUnit
from .geomcore import FONT_HEIGHTS, LINE_TYPES

ENV_VAR = "TCGX_PROFILE"
DEFAULT_PROFILE = "Монтажно-технологический"


@dataclass(frozen=True)
class WorkProfile:
    name: str
    catalog_tags: frozenset = frozenset()
    default_units: dict = field(default_factory=dict)  # quantity -> unit
    font_height: float = 3.5
    line_type: str = "solid"

    def sees(self, table) -> bool:
        """Whether a catalog table is visible under this profile."""
        return bool(self.catalog_tags & table.profile_tags)


_PRESSURE = {"pressure": "MPa", "temperature": "°C", "length": "mm"}

BUILTIN = {
    p.name: p
    for p in (
        WorkProfile("Монтажно-технологический", frozenset({"MT"}), dict(_PRESSURE)),
        WorkProfile("КИП и автоматика", frozenset({"KIP"}), dict(_PRESSURE)),
        WorkProfile("Строительный", frozenset({"STR"}), {"length": "mm"}),
        WorkProfile("Электротехнический", frozenset(), {"length": "mm"}),
        WorkProfile("Производственные регламенты", frozenset(), dict(_PRESSURE)),
    )
}


def _parse_tags(text, where):
    tags = frozenset(t.strip() for t in text.split(",") if t.strip())
    bad = tags - set(PROFILE_CODES)
    if bad:
        raise ProfileError(f"{where}: unknown catalog tags {sorted(bad)}")
    return tags


def _parse_units(text, where):
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        q, sep, u = item.partition(":")
        q, u = q.strip(), u.strip()
        if not sep:
            raise ProfileError(f"{where}: expected quantity:unit, got {item.strip()!r}")
        try:
            unit = UNITS.get(u)
        except UnknownUnit as exc:
            raise ProfileError(f"{where}: {exc}") from None
        if unit.quantity != q:
            raise ProfileError(f"{where}: {u} is not a {q} unit")
        out[q] = u
    return out


def load_profiles(path=None) -> dict[str, WorkProfile]:
    """Built-in profiles with the overrides from ``path`` applied."""
    profiles = dict(BUILTIN)
    if path is None:
        return profiles
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ProfileError(f"{path}: {exc}") from None
    for name in cp.sections():
        if name not in profiles:
            raise ProfileError(f"{path}: unknown profile {name!r}")
        sec = cp[name]
        where = f"{path} [{name}]"
        p = profiles[name]
        for key in sec:
            if key not in ("catalogs", "units", "font", "line"):
                raise ProfileError(f"{where}: unknown setting {key!r}")
        if "catalogs" in sec:
            p = replace(p, catalog_tags=_parse_tags(sec["catalogs"], where))
        if "units" in sec:
            p = replace(p, default_units={**p.default_units, **_parse_units(sec["units"], where)})
        if "font" in sec:
            try:
                h = float(sec["font"])
            except ValueError:
                h = None
            if h not in FONT_HEIGHTS:
                raise ProfileError(f"{where}: font height {sec['font']!r} not standard")
            p = replace(p, font_height=h)
        if "line" in sec:
            if sec["line"] not in LINE_TYPES:
                raise ProfileError(f"{where}: line type {sec['line']!r} not standard")
            p = replace(p, line_type=sec["line"])
        profiles[name] = p
    return profiles


def get_profile(name: str | None = None, path=None) -> WorkProfile:
    """Profile by name; None falls back to $TCGX_PROFILE, then the default."""
    name = name or os.environ.get(ENV_VAR) or DEFAULT_PROFILE
    profiles = load_profiles(path)
    if name not in profiles:
        raise ProfileError(f"unknown profile {name!r}; choose one of: {', '.join(profiles)}")
    return profiles[name]


def profiles_file(explicit=None) -> Path | None:
    """``explicit`` if given, else ``profiles.txt`` in the working directory if present."""
    if explicit is not None:
        return Path(explicit)
    p = Path("profiles.txt")
    return p if p.is_file() else None
