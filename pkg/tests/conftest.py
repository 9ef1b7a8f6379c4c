import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
if str(TESTS_DIR) not in sys.path:
    sys.path.insert(0, str(TESTS_DIR))

import fixtures_lib  # noqa: E402


@pytest.fixture
def triangle():
    return fixtures_lib.triangle_case()


@pytest.fixture
def ring4():
    return fixtures_lib.ring4_case()


@pytest.fixture
def sixbus():
    return fixtures_lib.sixbus_case()


@pytest.fixture(scope="session")
def rts96_dir():
    path = TESTS_DIR.parent / "cases" / "rts96"
    if not (path / "case.json").exists():
        pytest.skip("rts96 case files not present")
    return path
