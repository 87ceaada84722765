"""Output emission and data-file resolution for the CLI.

CSV cells render floats with repr() so files round-trip losslessly and
repeated runs with the same seed are byte-identical. Run metadata (resolved
configuration, package version) goes into a JSON sidecar next to the CSV,
never into the CSV body.
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

from . import __version__
from .errors import MissingDataError
from .materials import MaterialsDb, load_db

__all__ = [
    "format_cell",
    "write_csv",
    "write_sidecar",
    "sidecar_path",
    "figure_path",
    "load_default_db",
]

DB_FILENAME = "materials.db"


def format_cell(value) -> str:
    if isinstance(value, float):
        # the float() strips numpy scalar wrappers whose repr is not bare
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> Path:
    out = Path(path)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(cell) for cell in row])
    return out


def sidecar_path(out) -> Path:
    return Path(str(out) + ".meta.json")


def figure_path(out) -> Path:
    p = Path(out)
    if p.suffix and p.suffix != ".png":
        return p.with_suffix(".png")
    return Path(str(p) + ".png") if not p.suffix else p


def write_sidecar(out, payload: dict) -> Path:
    meta = dict(payload)
    meta["version"] = __version__
    target = sidecar_path(out)
    if target.parent != Path(""):
        target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def load_default_db(explicit: str | None = None) -> MaterialsDb:
    """Resolve the materials database: --data flag, ./data, then packaged copy."""
    if explicit is not None:
        p = Path(explicit)
        if not p.is_file():
            raise MissingDataError(f"materials database not found: {p}")
        return load_db(p)
    local = Path("data") / DB_FILENAME
    if local.is_file():
        return load_db(local)
    packaged = resources.files("cavex").joinpath(f"data/{DB_FILENAME}")
    try:
        with resources.as_file(packaged) as p:
            return load_db(p)
    except FileNotFoundError as exc:
        raise MissingDataError(
            f"no materials database: pass --data, create data/{DB_FILENAME}, "
            f"or reinstall the package"
        ) from exc
