import pathlib

import pytest


@pytest.fixture(scope="session")
def testdata() -> pathlib.Path:
    """Shared format vectors checked in at the repository root."""
    root = pathlib.Path(__file__).resolve().parent.parent.parent
    return root / "testdata"
