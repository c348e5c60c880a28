import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mimdp.parser import parse_file

MODELS = Path(__file__).resolve().parent.parent / "models"


@pytest.fixture(scope="session")
def two_stage():
    return parse_file(MODELS / "two_stage.mgcl")


@pytest.fixture(scope="session")
def die():
    return parse_file(MODELS / "die.mgcl")


@pytest.fixture(scope="session")
def models_dir():
    return MODELS
