# conftest.py
"""
Shared pytest fixtures.

Tests marked `slow` reproduce full simulation experiments and only run with
`pytest --runslow`.
"""
import numpy as np
import pytest

from contracts.models import LabeledBatch
from services.datagen import generate_pool, make_truth


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow simulation tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size simulation experiment")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def labeled_from_pool(pool, rows=None) -> LabeledBatch:
    """Label every row (or the first `rows`) of a simulated pool directly."""
    idx = np.arange(len(pool) if rows is None else rows)
    return LabeledBatch.from_records(pool.x[idx], pool.z[idx], pool.hidden_y.unseal()[idx])


@pytest.fixture
def cm_truth():
    return make_truth("conditional_mean", d=10, s=3, seed=7)


@pytest.fixture
def cm_pool(cm_truth):
    return generate_pool(cm_truth, 4000, seed=7)


@pytest.fixture
def logistic_batch():
    truth = make_truth("logistic", d=5, s=2, seed=3)
    return labeled_from_pool(generate_pool(truth, 200, seed=3))
