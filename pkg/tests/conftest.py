from __future__ import annotations

from pathlib import Path

import pytest

from cavex import CavityTemplate, MaterialsDb, load_db


def _repo_root() -> Path:
    return Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return _repo_root()


@pytest.fixture(scope="session")
def db_path() -> Path:
    return _repo_root() / "data" / "materials.db"


@pytest.fixture(scope="session")
def db(db_path: Path) -> MaterialsDb:
    return load_db(db_path)


@pytest.fixture(scope="session")
def template() -> CavityTemplate:
    return CavityTemplate()


@pytest.fixture(scope="session")
def reference_cav_path() -> Path:
    return _repo_root() / "data" / "cavities" / "fe57_reference.cav"
