#!/usr/bin/env python3
"""
Tests for estimation and prediction errors.
"""
import numpy as np
import pytest

from contracts.errors import ArgumentError
from contracts.models import ClassWeights, UnlabeledPool
from infra.random_streams import normals, stream
from services.datagen import generate_pool, make_truth
from services.scoring import estimation_errors, prediction_error


def test_estimation_errors():
    errors = estimation_errors([1.0, -2.0, 0.0], [0.0, 0.0, 2.0])
    assert errors["l1"] == pytest.approx(5.0)
    assert errors["l2"] == pytest.approx(3.0)
    assert errors["linf"] == pytest.approx(2.0)
    assert estimation_errors([0.5], [0.5]) == {"l1": 0.0, "l2": 0.0, "linf": 0.0}


def test_truth_has_no_prediction_error():
    truth = make_truth("conditional_mean", d=10, s=3, seed=1)
    pool = generate_pool(truth, 100_000, seed=1, key="eval")
    assert prediction_error(truth.theta_star, pool) < 1e-4


def test_independent_rule_scores_one_half():
    gen = stream(2, "test", "independent")
    n = 100_000
    z = normals(gen, (n, 4))
    x = normals(gen, n)
    y = np.where(gen.random(n) < 0.3, 1.0, -1.0)
    pool = UnlabeledPool.from_arrays(x, z, hidden_y=y)
    assert abs(prediction_error(normals(gen, 4), pool) - 0.5) <= 4 * np.sqrt(0.25 / n) * 2


def test_explicit_weights():
    pool = UnlabeledPool.from_arrays([1.0, -1.0, 1.0, -1.0], np.zeros((4, 1)), hidden_y=[1.0, 1.0, -1.0, -1.0])
    # predictions +1, -1, +1, -1: one error per class
    assert prediction_error(np.zeros(1), pool, ClassWeights(1.0, 1.0)) == pytest.approx(0.5)
    assert prediction_error(np.zeros(1), pool, ClassWeights(3.0, 1.0)) == pytest.approx(0.5)
    with pytest.raises(ArgumentError):
        prediction_error(np.zeros(1), UnlabeledPool.from_arrays([0.0], np.zeros((1, 1))))
