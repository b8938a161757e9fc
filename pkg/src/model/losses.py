"""
Training objectives for the fully and weakly supervised regimes.

Every probability is clamped to ``[PROB_EPS, 1 - PROB_EPS]`` before its log.
"""

from typing import Optional

import numpy as np

from ..utils.config import LOSS_LAMBDA, PROB_EPS
from ..utils.errors import DataError, NumericalError, ParameterError, ShapeError
from ..utils.tensor import Tensor, clip, log, mean_over, sum_over


def _check_finite(p: Tensor, what: str) -> None:
    if not np.all(np.isfinite(p.data)):
        raise NumericalError(f"{what}: non-finite probabilities")


def binary_cross_entropy(p: Tensor, target: np.ndarray) -> Tensor:
    """Mean of ``-(t log p + (1 - t) log(1 - p))`` over every element."""
    target = np.asarray(target, dtype=p.dtype)
    if target.shape != p.shape:
        raise ShapeError("binary_cross_entropy", p.shape, target.shape)
    clamped = clip(p, PROB_EPS, 1.0 - PROB_EPS)
    terms = target * log(clamped) + (1.0 - target) * log(1.0 - clamped)
    return -mean_over(terms)


def cross_entropy(p: Tensor, target: np.ndarray) -> Tensor:
    """Mean over leading axes of ``-sum_c y_c log p_c`` for one-hot (or soft) targets."""
    target = np.asarray(target, dtype=p.dtype)
    if target.shape != p.shape:
        raise ShapeError("cross_entropy", p.shape, target.shape)
    per_row = sum_over(target * log(clip(p, PROB_EPS, 1.0 - PROB_EPS)), axis=-1)
    return -mean_over(per_row)


def one_hot(labels, n_classes: int, dtype=np.float32) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"labels must lie in [0, {n_classes}), got range [{labels.min()}, {labels.max()}]")
    return np.eye(n_classes, dtype=dtype)[labels]


def full_loss(p_r: Tensor, p_c: Tensor, segment_labels: Optional[np.ndarray], video_labels,
              loss_lambda: float = LOSS_LAMBDA) -> Tensor:
    """``lambda * BCE(p_r, r) + (1 - lambda) * CE(p_c, y)``.

    Args:
        p_r: [..., T] relevance probabilities
        p_c: [..., C] video category distribution
        segment_labels: [..., T] integer labels, background encoded as ``C``
        video_labels: [...] integer category per video
        loss_lambda: Weight of the relevance term, in [0, 1]

    Raises:
        DataError: If segment labels are missing
        NumericalError: If a probability is not finite
    """
    if segment_labels is None:
        raise DataError("full supervision needs segment labels")
    if not 0.0 <= loss_lambda <= 1.0:
        raise ParameterError(f"loss lambda must lie in [0, 1], got {loss_lambda}")
    _check_finite(p_r, "full_loss")
    _check_finite(p_c, "full_loss")
    n_classes = p_c.shape[-1]
    relevant = (np.asarray(segment_labels) != n_classes).astype(p_r.dtype)
    bce = binary_cross_entropy(p_r, relevant)
    ce = cross_entropy(p_c, one_hot(video_labels, n_classes, p_c.dtype))
    return loss_lambda * bce + (1.0 - loss_lambda) * ce


def mil_pool(p_j: Tensor) -> Tensor:
    """Video-level category probabilities: mean of ``p_j`` over segments."""
    return mean_over(p_j, axis=-2)


def weak_loss(p_video: Tensor, video_labels) -> Tensor:
    """Multi-label soft-margin loss on pooled probabilities.

    ``video_labels`` is either a multi-hot array shaped like ``p_video`` or
    integer categories, one per video.
    """
    _check_finite(p_video, "weak_loss")
    labels = np.asarray(video_labels)
    if labels.shape == p_video.shape:
        target = labels.astype(p_video.dtype)
    else:
        target = one_hot(labels, p_video.shape[-1], p_video.dtype)
    return binary_cross_entropy(p_video, target)
