"""
Segment-level evaluation metrics.
"""

import numpy as np
from sklearn.metrics import accuracy_score

from ..utils.errors import DataError, ShapeError


def overall_accuracy(predicted, truth) -> float:
    """Fraction of segments whose label (background included) is predicted exactly.

    Raises:
        ShapeError: If the label arrays differ in shape
        DataError: If there are no segments
    """
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ShapeError("overall_accuracy", predicted.shape, truth.shape)
    if truth.size == 0:
        raise DataError("cannot score an empty set of segments")
    return float(accuracy_score(truth.reshape(-1), predicted.reshape(-1)))


def background_baseline(truth, n_classes: int) -> float:
    """Accuracy of labelling every segment as background."""
    truth = np.asarray(truth)
    return overall_accuracy(np.full_like(truth, n_classes), truth)


def event_span(labels, background: int):
    """``(start, end)`` of the event segments (end exclusive), or ``None``."""
    positions = np.flatnonzero(np.asarray(labels) != background)
    if positions.size == 0:
        return None
    return int(positions[0]), int(positions[-1]) + 1
