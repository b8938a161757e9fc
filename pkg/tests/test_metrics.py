"""
Tests for segment accuracy and label helpers.
"""

import numpy as np
import pytest

from src.model.metrics import background_baseline, event_span, overall_accuracy
from src.utils.errors import DataError, ShapeError


def test_seven_of_ten():
    truth = np.array([0, 0, 1, 1, 2, 2, 3, 3, 3, 3])
    predicted = truth.copy()
    predicted[[0, 4, 9]] = [1, 3, 0]
    assert overall_accuracy(predicted, truth) == pytest.approx(0.7)


def test_background_counts_as_a_label():
    truth = np.array([[3, 1, 1, 3]])
    assert overall_accuracy(np.array([[3, 1, 1, 1]]), truth) == 0.75
    assert background_baseline(truth, 3) == 0.5


def test_accuracy_errors():
    with pytest.raises(ShapeError):
        overall_accuracy(np.zeros(3), np.zeros(4))
    with pytest.raises(DataError):
        overall_accuracy(np.zeros(0), np.zeros(0))


def test_event_span():
    assert event_span([5, 2, 2, 2, 5, 5], background=5) == (1, 4)
    assert event_span([1, 1], background=5) == (0, 2)
    assert event_span([5, 5, 5], background=5) is None


def test_accuracy_ignores_video_and_segment_order():
    rng = np.random.default_rng(8)
    truth = rng.integers(0, 4, size=(6, 10))
    predicted = np.where(rng.random((6, 10)) < 0.3, rng.integers(0, 4, size=(6, 10)), truth)
    base = overall_accuracy(predicted, truth)
    videos = rng.permutation(6)
    assert overall_accuracy(predicted[videos], truth[videos]) == base
    flat = rng.permutation(60)
    assert overall_accuracy(predicted.reshape(-1)[flat], truth.reshape(-1)[flat]) == base
