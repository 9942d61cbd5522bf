import importlib

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def _backends():
    names = ["gbpa._pykernels"]
    try:
        importlib.import_module("gbpa._ckernels")
        names.append("gbpa._ckernels")
    except ImportError:
        pass
    return names


BACKENDS = _backends()


@pytest.fixture(params=BACKENDS, ids=lambda n: n.rsplit("_", 1)[-1])
def backend(request):
    return importlib.import_module(request.param)


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)
