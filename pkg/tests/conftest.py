import pytest

from config import PARAM_GRID
from core.specialfn import ModelParams, RngStream


@pytest.fixture(params=PARAM_GRID, ids=lambda st: f"s={st[0]:g},t={st[1]:g}")
def params(request):
    return ModelParams(*request.param)


@pytest.fixture
def uniform_params():
    return ModelParams(1.0, 1.0)


@pytest.fixture
def rng():
    return RngStream(seed=12345)
