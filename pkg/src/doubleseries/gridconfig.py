"""Reader for the versioned grid files.

Format::

    # comment
    [section]
    key = item, item, ...

An item is a number, an inclusive integer range ``a..b`` or an inclusive
real range ``start:stop:step``.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import GridError

__all__ = ["load_grid", "parse_grid", "default_grid_text"]

_SECTION = re.compile(r"^\[([^\[\]]+)\]$")


def _parse_item(item: str, line: int) -> list[float]:
    item = item.strip()
    if not item:
        raise GridError("empty list item", line)
    try:
        if ".." in item:
            a, b = item.split("..")
            lo, hi = int(a), int(b)
            if hi < lo:
                raise GridError(f"empty range {item!r}", line)
            return list(range(lo, hi + 1))
        if ":" in item:
            parts = item.split(":")
            if len(parts) != 3:
                raise GridError(f"real range needs start:stop:step, got {item!r}", line)
            start, stop, step = (float(x) for x in parts)
            if step <= 0:
                raise GridError(f"step must be positive in {item!r}", line)
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(count)]
        value = float(item)
        return [int(value) if value.is_integer() and "." not in item and "e" not in item.lower() else value]
    except GridError:
        raise
    except ValueError:
        raise GridError(f"cannot parse {item!r}", line) from None


def parse_grid(text: str) -> dict[str, dict[str, list]]:
    """Parse grid text into ``{section: {key: values}}``."""
    out: dict[str, dict[str, list]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            if section in out:
                raise GridError(f"duplicate section [{section}]", lineno)
            out[section] = {}
            continue
        if section is None:
            raise GridError("key outside of any [section]", lineno)
        if "=" not in line:
            raise GridError("expected 'key = values'", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise GridError("missing key", lineno)
        if key in out[section]:
            raise GridError(f"duplicate key {key!r} in [{section}]", lineno)
        values = []
        for item in value.split(","):
            values.extend(_parse_item(item, lineno))
        out[section][key] = values
    return out


def default_grid_text() -> str:
    return resources.files("doubleseries").joinpath("grids/default.grid").read_text(encoding="utf-8")


def load_grid(source: str | Path = "default") -> dict[str, dict[str, list]]:
    """Load ``"default"`` (the packaged grid) or a grid file path."""
    if str(source) == "default":
        return parse_grid(default_grid_text())
    path = Path(source)
    if not path.is_file():
        raise GridError(f"grid file {str(path)!r} not found")
    return parse_grid(path.read_text(encoding="utf-8"))
