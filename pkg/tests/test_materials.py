from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from cavex import MaterialsDb, load_db, load_default_db, loads, save_db, serialize
from cavex.errors import MaterialsError, MissingDataError

_MINIMAL = """
[isotope]
name = Fe57
energy_keV = 14.4125
gamma_neV = 4.66
alpha = 8.56
resonant_material = Fe

[material]
name = Pt
energy_keV = 14.4125
delta = 1.6175e-05
beta = 2.2856e-06

[material]
name = Fe
energy_keV = 14.4125
delta = 7.44e-06
beta = 3.3818e-07

[source]
name = euxfel
pulse_energy_uJ = 1000.0
bandwidth_rel = 1.0e-4
"""


def _fe57_text(**overrides: str) -> str:
    fields = {
        "name": "Fe57",
        "energy_keV": "14.4125",
        "gamma_neV": "4.66",
        "alpha": "8.56",
        "resonant_material": "Fe",
    }
    fields.update(overrides)
    lines = ["[isotope]"] + [f"{k} = {v}" for k, v in fields.items()]
    host = "[material]\nname = Fe\nenergy_keV = 14.4125\ndelta = 7.44e-06\nbeta = 3.3818e-07"
    return "\n".join(lines) + "\n\n" + host


def test_load_canonical_db(db: MaterialsDb) -> None:
    assert set(db.isotopes) == {"Fe57", "Os187", "Tm169", "Sn119"}
    assert set(db.materials) == {"Pt", "Pd", "C", "Fe", "Os", "Tm", "Sn"}
    assert set(db.sources) == {"euxfel", "xfelo"}


def test_fe57_record(db: MaterialsDb) -> None:
    iso = db.isotope("Fe57")
    assert iso.energy_kev == 14.4125
    assert iso.gamma_nev == 4.66
    assert iso.alpha == 8.56
    assert iso.resonant_material == "Fe"
    assert iso.gamma_rad_nev == pytest.approx(4.66 / 9.56, rel=1e-12)


def test_all_isotopes_have_host_optics(db: MaterialsDb) -> None:
    # Every resonant host must be tabulated at its own transition energy.
    for iso in db.isotopes.values():
        entry = db.material(iso.resonant_material).entry_at(iso.energy_kev)
        assert entry.delta > 0.0
        assert entry.beta > 0.0


def test_source_records(db: MaterialsDb) -> None:
    eu = db.source("euxfel")
    assert eu.pulse_energy_uj == 1000.0
    assert eu.bandwidth_rel == 1.0e-4
    xo = db.source("xfelo")
    assert xo.pulse_energy_uj == 20.0
    assert xo.bandwidth_rel == 2.0e-7


def test_refractive_index_matches_entry(db: MaterialsDb) -> None:
    entry = db.material("Pt").entry_at(14.4125)
    n = db.refractive_index("Pt", 14.4125)
    assert n == complex(1.0 - entry.delta, entry.beta)


def test_vacuum_is_builtin(db: MaterialsDb) -> None:
    assert db.refractive_index("vacuum", 14.4125) == complex(1.0, 0.0)
    assert db.critical_angle_rad("vacuum", 14.4125) == 0.0


def test_critical_angle_closed_form(db: MaterialsDb) -> None:
    entry = db.material("Pt").entry_at(14.4125)
    assert db.critical_angle_rad("Pt", 14.4125) == pytest.approx(
        math.sqrt(2.0 * entry.delta), rel=1e-14
    )


def test_energy_lookup_tolerance(db: MaterialsDb) -> None:
    mat = db.material("Pt")
    assert mat.entry_at(14.4125 + 5e-4).energy_kev == 14.4125
    with pytest.raises(MissingDataError, match="no optical constants"):
        mat.entry_at(14.5)


def test_lookup_is_case_insensitive(db: MaterialsDb) -> None:
    assert db.isotope("fe57").name == "Fe57"
    assert db.material("pt").name == "Pt"


def test_unknown_names_list_alternatives(db: MaterialsDb) -> None:
    with pytest.raises(MissingDataError, match="available: Fe57"):
        db.isotope("Co57")
    with pytest.raises(MissingDataError, match="unknown material"):
        db.material("Au")
    with pytest.raises(MissingDataError, match="unknown source"):
        db.source("lcls")


def test_loads_minimal(db: MaterialsDb) -> None:
    mini = loads(_MINIMAL, origin="inline")
    assert mini.origin == "inline"
    assert mini.isotope("Fe57") == db.isotope("Fe57")
    assert mini.material("Pt").entry_at(14.4125) == db.material("Pt").entry_at(14.4125)


def test_multiple_energies_merge_into_one_material(db: MaterialsDb) -> None:
    energies = sorted(e.energy_kev for e in db.material("Pt").entries)
    assert energies == [8.4103, 9.756, 14.4125, 23.871]


def test_serialize_round_trip(db: MaterialsDb) -> None:
    again = loads(serialize(db), origin=db.origin)
    assert again == db


def test_save_and_load(tmp_path: Path, db: MaterialsDb) -> None:
    out = tmp_path / "copy.db"
    save_db(db, out)
    assert load_db(out).isotopes == db.isotopes


def test_round_trip_preserves_random_floats() -> None:
    # repr-based serialization must survive parse/serialize cycles exactly.
    rng = np.random.default_rng(7)
    for _ in range(25):
        gamma, alpha = rng.uniform(1e-9, 1e3, size=2)
        text = _fe57_text(gamma_neV=repr(float(gamma)), alpha=repr(float(alpha)))
        db1 = loads(text)
        db2 = loads(serialize(db1))
        assert db2 == db1


def test_load_default_db_matches_repo_copy(db: MaterialsDb) -> None:
    assert load_default_db().isotopes == db.isotopes


def test_packaged_db_is_byte_identical(repo_root: Path) -> None:
    canonical = (repo_root / "data" / "materials.db").read_bytes()
    packaged = (repo_root / "src" / "cavex" / "data" / "materials.db").read_bytes()
    assert packaged == canonical


def test_packaged_reference_cavity_is_byte_identical(repo_root: Path) -> None:
    canonical = (repo_root / "data" / "cavities" / "fe57_reference.cav").read_bytes()
    packaged = (
        repo_root / "src" / "cavex" / "data" / "cavities" / "fe57_reference.cav"
    ).read_bytes()
    assert packaged == canonical


def test_missing_file_error(tmp_path: Path) -> None:
    with pytest.raises(MaterialsError, match="cannot read"):
        load_db(tmp_path / "nope.db")


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("[isotope\nname = X", "unterminated section header"),
        ("[moon]\nname = X", "unknown section"),
        ("name = X", "key outside of any section"),
        ("[isotope]\nname", "expected 'key = value'"),
        ("[isotope]\nname = ", "empty value"),
        ("[isotope]\nname = A\nname = B", "repeated key"),
    ],
)
def test_parse_errors_carry_line_context(text: str, message: str) -> None:
    with pytest.raises(MaterialsError, match=message):
        loads(text)


def test_parse_error_reports_origin_and_line() -> None:
    with pytest.raises(MaterialsError, match=r"mydb:3: unknown section"):
        loads("\n\n[planet]\nname = X", origin="mydb")


def test_missing_and_unknown_keys() -> None:
    with pytest.raises(MaterialsError, match="missing keys"):
        loads("[isotope]\nname = X")
    with pytest.raises(MaterialsError, match="unknown keys"):
        loads(_fe57_text() + "\ncolor = red")


def test_non_numeric_and_non_finite_values() -> None:
    with pytest.raises(MaterialsError, match="is not a number"):
        loads(_fe57_text(alpha="many"))
    with pytest.raises(MaterialsError, match="is not finite"):
        loads(_fe57_text(alpha="inf"))


def test_isotope_validation() -> None:
    with pytest.raises(MaterialsError, match="must be positive"):
        loads(_fe57_text(energy_keV="-1.0"))
    with pytest.raises(MaterialsError, match="alpha must be nonnegative"):
        loads(_fe57_text(alpha="-0.5"))


def test_duplicate_records_rejected() -> None:
    with pytest.raises(MaterialsError, match="duplicate isotope"):
        loads(_fe57_text() + "\n\n" + _fe57_text())


def test_duplicate_material_energy_rejected() -> None:
    block = "[material]\nname = Pt\nenergy_keV = 14.4125\ndelta = 1e-5\nbeta = 1e-6"
    with pytest.raises(MaterialsError):
        loads(block + "\n\n" + block)


def test_vacuum_cannot_be_redefined() -> None:
    text = "[material]\nname = vacuum\nenergy_keV = 14.4125\ndelta = 0.0\nbeta = 0.0"
    with pytest.raises(MaterialsError, match="built in"):
        loads(text)


def test_optical_constants_must_be_small() -> None:
    text = "[material]\nname = X\nenergy_keV = 14.4125\ndelta = 0.5\nbeta = 0.0"
    with pytest.raises(MaterialsError):
        loads(text)
