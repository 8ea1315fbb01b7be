import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from util import InProcStack  # noqa: E402


@pytest.fixture(scope="module")
def stack():
    s = InProcStack()
    yield s
    s.close()
