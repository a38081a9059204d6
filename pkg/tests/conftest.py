import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from milestoning._kernel import get_backend


def _backends():
    names = ["pure"]
    try:
        get_backend("cython")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


@pytest.fixture(params=_backends())
def backend(request):
    return get_backend(request.param)


@pytest.fixture
def kernels():
    """All available kernel backends, compiled one first."""
    return [get_backend(name) for name in _backends()]
