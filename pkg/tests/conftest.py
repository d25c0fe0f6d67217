import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from poc_platform.crypto import abe

DATA_DIR = pathlib.Path(__file__).parent.parent / "src" / "poc_platform" / "data"


@pytest.fixture(scope="session")
def abe_setup():
    """One pairing setup shared by every crypto test (seeded for reproducibility)."""
    return abe.setup(abe.seeded_rng(0xACE))


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR
