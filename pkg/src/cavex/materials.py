"""Materials database: isotopes, optical constants, and x-ray source records.

The database is a plain-text file with ``[isotope]``, ``[material]`` and
``[source]`` sections, one record per section, ``key = value`` pairs inside.
``#`` starts a comment. A material may appear in several sections, one per
tabulated photon energy; those entries merge into a single table.

Example:
    >>> db = load_db("data/materials.db")
    >>> db.refractive_index("Pt", 14.4125)
    (0.9999841+2.35e-06j)
    >>> db.isotope("Fe57").gamma_nev
    4.66
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MaterialsError, MissingDataError

__all__ = [
    "Isotope",
    "Material",
    "OpticalEntry",
    "SourceParams",
    "MaterialsDb",
    "load_db",
    "loads",
    "serialize",
    "save_db",
]

# Lookup tolerance for tabulated photon energies, keV.
ENERGY_TOL_KEV = 1e-3

# Grazing-incidence optics is only meaningful for weakly refracting media.
MAX_OPTICAL_CONSTANT = 1e-3

VACUUM = "vacuum"


@dataclass(frozen=True)
class Isotope:
    """A nuclear resonance line.

    Attributes:
        name: identifier, e.g. "Fe57".
        energy_kev: transition energy in keV.
        gamma_nev: total natural linewidth in neV.
        alpha: internal conversion coefficient (dimensionless).
        resonant_material: material name hosting the nuclei.
    """

    name: str
    energy_kev: float
    gamma_nev: float
    alpha: float
    resonant_material: str

    @property
    def gamma_rad_nev(self) -> float:
        """Radiative part of the linewidth, Gamma / (1 + alpha), in neV."""
        return self.gamma_nev / (1.0 + self.alpha)


@dataclass(frozen=True)
class OpticalEntry:
    energy_kev: float
    delta: float
    beta: float


@dataclass(frozen=True)
class Material:
    """Optical constants of one material, tabulated per photon energy."""

    name: str
    entries: tuple[OpticalEntry, ...]

    def entry_at(self, energy_kev: float) -> OpticalEntry:
        for e in self.entries:
            if abs(e.energy_kev - energy_kev) <= ENERGY_TOL_KEV:
                return e
        tabulated = ", ".join(f"{e.energy_kev:g}" for e in self.entries)
        raise MissingDataError(
            f"material '{self.name}' has no optical constants within "
            f"{ENERGY_TOL_KEV * 1e3:g} eV of {energy_kev:g} keV "
            f"(tabulated: {tabulated} keV)"
        )


@dataclass(frozen=True)
class SourceParams:
    """Idealized resonant pulse source: energy per pulse and relative bandwidth."""

    name: str
    pulse_energy_uj: float
    bandwidth_rel: float


@dataclass(frozen=True)
class MaterialsDb:
    """Immutable view of one loaded database file."""

    isotopes: dict[str, Isotope] = field(default_factory=dict)
    materials: dict[str, Material] = field(default_factory=dict)
    sources: dict[str, SourceParams] = field(default_factory=dict)
    origin: str = "<unset>"

    def isotope(self, name: str) -> Isotope:
        return _lookup(self.isotopes, name, "isotope")

    def material(self, name: str) -> Material:
        return _lookup(self.materials, name, "material")

    def source(self, name: str) -> SourceParams:
        return _lookup(self.sources, name, "source")

    def refractive_index(self, material: str, energy_kev: float) -> complex:
        """Complex index n = 1 - delta + i*beta at a tabulated energy.

        The pseudo-material "vacuum" resolves to exactly 1 at any energy.
        """
        if energy_kev <= 0.0:
            raise MissingDataError(f"photon energy must be positive, got {energy_kev}")
        if material.lower() == VACUUM:
            return complex(1.0, 0.0)
        entry = self.material(material).entry_at(energy_kev)
        return complex(1.0 - entry.delta, entry.beta)

    def critical_angle_rad(self, material: str, energy_kev: float) -> float:
        """Grazing critical angle sqrt(2*delta) of a material at an energy."""
        if material.lower() == VACUUM:
            return 0.0
        entry = self.material(material).entry_at(energy_kev)
        return math.sqrt(2.0 * entry.delta)


def _lookup(table: dict, name: str, kind: str):
    if name in table:
        return table[name]
    folded = {k.casefold(): v for k, v in table.items()}
    if name.casefold() in folded:
        return folded[name.casefold()]
    known = ", ".join(sorted(table)) or "(none)"
    raise MissingDataError(f"unknown {kind} '{name}'; available: {known}")


# ---------------------------------------------------------------------------
# Parsing and serialization

_SECTION_KEYS = {
    "isotope": {"name", "energy_keV", "gamma_neV", "alpha", "resonant_material"},
    "material": {"name", "energy_keV", "delta", "beta"},
    "source": {"name", "pulse_energy_uJ", "bandwidth_rel"},
}


def load_db(path: str | Path) -> MaterialsDb:
    """Load and validate a materials database file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise MaterialsError(f"cannot read materials database {p}: {exc}") from exc
    return loads(text, origin=str(p))


def loads(text: str, origin: str = "<string>") -> MaterialsDb:
    """Parse database text. Errors carry the origin and line number."""
    sections = _split_sections(text, origin)
    isotopes: dict[str, Isotope] = {}
    material_entries: dict[str, list[OpticalEntry]] = {}
    sources: dict[str, SourceParams] = {}

    for kind, lineno, fields in sections:
        where = f"{origin}:{lineno}"
        missing = _SECTION_KEYS[kind] - fields.keys()
        if missing:
            raise MaterialsError(f"{where}: [{kind}] missing keys: {sorted(missing)}")
        extra = fields.keys() - _SECTION_KEYS[kind]
        if extra:
            raise MaterialsError(f"{where}: [{kind}] unknown keys: {sorted(extra)}")
        name = fields["name"]

        if kind == "isotope":
            iso = Isotope(
                name=name,
                energy_kev=_number(fields, "energy_keV", where),
                gamma_nev=_number(fields, "gamma_neV", where),
                alpha=_number(fields, "alpha", where),
                resonant_material=fields["resonant_material"],
            )
            if iso.energy_kev <= 0 or iso.gamma_nev <= 0:
                raise MaterialsError(f"{where}: isotope {name}: energy and width must be positive")
            if iso.alpha < 0:
                raise MaterialsError(f"{where}: isotope {name}: alpha must be nonnegative")
            if name in isotopes:
                raise MaterialsError(f"{where}: duplicate isotope '{name}'")
            isotopes[name] = iso

        elif kind == "material":
            if name.lower() == VACUUM:
                raise MaterialsError(f"{where}: '{VACUUM}' is built in and cannot be redefined")
            entry = OpticalEntry(
                energy_kev=_number(fields, "energy_keV", where),
                delta=_number(fields, "delta", where),
                beta=_number(fields, "beta", where),
            )
            if entry.energy_kev <= 0:
                raise MaterialsError(f"{where}: material {name}: energy must be positive")
            if not (0.0 <= entry.delta < MAX_OPTICAL_CONSTANT):
                raise MaterialsError(
                    f"{where}: material {name}: delta={entry.delta:g} outside "
                    f"[0, {MAX_OPTICAL_CONSTANT:g})"
                )
            if not (0.0 <= entry.beta < MAX_OPTICAL_CONSTANT):
                raise MaterialsError(
                    f"{where}: material {name}: beta={entry.beta:g} outside "
                    f"[0, {MAX_OPTICAL_CONSTANT:g})"
                )
            bucket = material_entries.setdefault(name, [])
            for prev in bucket:
                if abs(prev.energy_kev - entry.energy_kev) <= ENERGY_TOL_KEV:
                    raise MaterialsError(
                        f"{where}: material {name}: duplicate entry at {entry.energy_kev:g} keV"
                    )
            bucket.append(entry)

        else:
            src = SourceParams(
                name=name,
                pulse_energy_uj=_number(fields, "pulse_energy_uJ", where),
                bandwidth_rel=_number(fields, "bandwidth_rel", where),
            )
            if src.pulse_energy_uj <= 0 or src.bandwidth_rel <= 0:
                raise MaterialsError(
                    f"{where}: source {name}: pulse energy and bandwidth must be positive"
                )
            if name in sources:
                raise MaterialsError(f"{where}: duplicate source '{name}'")
            sources[name] = src

    materials = {
        name: Material(name=name, entries=tuple(sorted(entries, key=lambda e: e.energy_kev)))
        for name, entries in material_entries.items()
    }

    for iso in isotopes.values():
        if iso.resonant_material.lower() == VACUUM:
            continue
        if iso.resonant_material not in materials:
            raise MaterialsError(
                f"{origin}: isotope {iso.name}: resonant material "
                f"'{iso.resonant_material}' is not defined"
            )
        materials[iso.resonant_material].entry_at(iso.energy_kev)

    return MaterialsDb(isotopes=isotopes, materials=materials, sources=sources, origin=origin)


def _split_sections(text: str, origin: str):
    sections = []
    current: dict[str, str] | None = None
    kind = ""
    start_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise MaterialsError(f"{origin}:{lineno}: unterminated section header {raw!r}")
            kind = line[1:-1].strip().lower()
            if kind not in _SECTION_KEYS:
                raise MaterialsError(f"{origin}:{lineno}: unknown section [{kind}]")
            current = {}
            start_line = lineno
            sections.append((kind, start_line, current))
            continue
        if "=" not in line:
            raise MaterialsError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise MaterialsError(f"{origin}:{lineno}: key outside of any section")
        key, value = (part.strip() for part in line.split("=", 1))
        if not value:
            raise MaterialsError(f"{origin}:{lineno}: empty value for '{key}'")
        if key in current:
            raise MaterialsError(f"{origin}:{lineno}: repeated key '{key}'")
        current[key] = value
    return sections


def _number(fields: dict[str, str], key: str, where: str) -> float:
    try:
        value = float(fields[key])
    except ValueError as exc:
        raise MaterialsError(f"{where}: {key}={fields[key]!r} is not a number") from exc
    if not math.isfinite(value):
        raise MaterialsError(f"{where}: {key}={fields[key]!r} is not finite")
    return value


def serialize(db: MaterialsDb) -> str:
    """Render a database back to file text at full float precision."""
    out = []
    for iso in db.isotopes.values():
        out.append("[isotope]")
        out.append(f"name = {iso.name}")
        out.append(f"energy_keV = {iso.energy_kev!r}")
        out.append(f"gamma_neV = {iso.gamma_nev!r}")
        out.append(f"alpha = {iso.alpha!r}")
        out.append(f"resonant_material = {iso.resonant_material}")
        out.append("")
    for mat in db.materials.values():
        for entry in mat.entries:
            out.append("[material]")
            out.append(f"name = {mat.name}")
            out.append(f"energy_keV = {entry.energy_kev!r}")
            out.append(f"delta = {entry.delta!r}")
            out.append(f"beta = {entry.beta!r}")
            out.append("")
    for src in db.sources.values():
        out.append("[source]")
        out.append(f"name = {src.name}")
        out.append(f"pulse_energy_uJ = {src.pulse_energy_uj!r}")
        out.append(f"bandwidth_rel = {src.bandwidth_rel!r}")
        out.append("")
    return "\n".join(out)


def save_db(db: MaterialsDb, path: str | Path) -> None:
    Path(path).write_text(serialize(db), encoding="utf-8")
