import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mapdd.instancegen import resolve_map


@pytest.fixture(scope="session")
def warehouse():
    return resolve_map("builtin:warehouse_35x21")
