import json

import hypothesis
import numpy as np
import pytest

from core.basis import BasisFamily, DensityFn
from core.hmm_model import HMMSpec, TransitionMatrix

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.load_profile("fast")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="몬테카를로 수용 실험 실행")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="--runslow 필요")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def two_state_Q():
    return TransitionMatrix.checked([[0.7, 0.3], [0.4, 0.6]])


@pytest.fixture
def two_state_spec(two_state_Q):
    return HMMSpec(two_state_Q, [DensityFn.beta(2, 5), DensityFn.beta(4, 2)])


@pytest.fixture
def three_state_spec():
    Q = TransitionMatrix.checked([[0.6, 0.2, 0.2], [0.15, 0.7, 0.15], [0.2, 0.2, 0.6]])
    return HMMSpec(Q, [DensityFn.beta(1.5, 5), DensityFn.beta(6, 6), DensityFn.beta(7, 2)])


@pytest.fixture
def hist8():
    return BasisFamily('histogram', 8)


@pytest.fixture
def model_file(tmp_path, two_state_spec):
    path = tmp_path / 'model.json'
    path.write_text(json.dumps(two_state_spec.to_dict()), encoding='utf-8')
    return path
