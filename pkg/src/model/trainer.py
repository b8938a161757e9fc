"""
Mini-batch training and evaluation of the parallel network.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..data.synth import VideoSample
from ..utils.config import RunConfig
from ..utils.errors import DataError, NumericalError
from ..utils.logging_utils import log_record
from ..utils.rng import Rng
from ..utils.tensor import no_grad, zero_grad
from .attention import TemperatureSchedule, tau_at
from .losses import full_loss, mil_pool, weak_loss
from .metrics import overall_accuracy
from .mpn import ModelConfig, ModelParams, decode, init_model_params, mpn_forward, stack_inputs
from .optim import AdamState, adamlike_step, gradients
from .params import clone, parameter_dict, restore, snapshot

logger = logging.getLogger(__name__)


@dataclass
class EpochReport:
    epoch: int
    train_loss: float
    tau: float
    val_accuracy: Optional[float]
    seconds: float

    def to_record(self) -> dict:
        return asdict(self)


@dataclass
class EvalResult:
    """Decoded labels and raw probabilities for a list of videos."""

    ids: List[int]
    accuracy: float
    predicted: np.ndarray  # [N, T]
    truth: np.ndarray  # [N, T]
    p_r: np.ndarray  # [N, T]
    p_c: np.ndarray  # [N, C]
    p_c_seg: np.ndarray  # [N, T, C]
    agva_weights: np.ndarray  # [N, T, R]


@dataclass
class TrainResult:
    best_params: ModelParams
    final_params: ModelParams
    reports: List[EpochReport] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: Optional[float] = None
    best_tau: float = 1.0  # temperature the best parameters were selected at


def schedule_for(config: RunConfig) -> TemperatureSchedule:
    return TemperatureSchedule(config.train.tau_start, config.train.tau_end, config.train.anneal_epochs)


def final_tau(config: RunConfig) -> float:
    """Temperature the last training epoch ran at."""
    return tau_at(schedule_for(config), config.train.epochs - 1)


def scoring_tau(config: RunConfig) -> float:
    """Temperature to evaluate saved parameters at: ``eval_tau`` when set, else the last epoch's."""
    if config.train.eval_tau > 0:
        return config.train.eval_tau
    return final_tau(config)


def evaluate(samples: Sequence[VideoSample], params: ModelParams, model_config: ModelConfig,
             tau: float = 1.0, regime: str = 'full', threshold: float = 0.5,
             batch_size: int = 64) -> EvalResult:
    """Forward every video without building a graph, decode and score.

    Raises:
        DataError: If ``samples`` is empty
    """
    if not samples:
        raise DataError("no videos to evaluate")
    parts = {key: [] for key in ('predicted', 'p_r', 'p_c', 'p_c_seg', 'agva_weights')}
    with no_grad():
        for start in range(0, len(samples), batch_size):
            batch = samples[start:start + batch_size]
            visual, audio = stack_inputs(batch)
            preds = mpn_forward(visual, audio, params, model_config, tau)
            parts['predicted'].append(decode(preds, regime, threshold))
            parts['p_r'].append(preds.p_r.data)
            parts['p_c'].append(preds.p_c.data)
            parts['p_c_seg'].append(preds.p_c_seg.data)
            parts['agva_weights'].append(preds.agva_weights.data)
    merged = {key: np.concatenate(values) for key, values in parts.items()}
    truth = np.stack([s.segment_labels for s in samples])
    return EvalResult(ids=[s.id for s in samples], accuracy=overall_accuracy(merged['predicted'], truth),
                      truth=truth, **merged)


def _batch_loss(preds, segment_labels, video_labels, config: RunConfig):
    if config.train.regime == 'full':
        return full_loss(preds.p_r, preds.p_c, segment_labels, video_labels, config.train.loss_lambda)
    return weak_loss(mil_pool(preds.p_j), video_labels)


def train(train_samples: Sequence[VideoSample], config: RunConfig, model_config: ModelConfig,
          val_samples: Sequence[VideoSample] = (), epoch_log: Optional[logging.Logger] = None,
          progress: bool = False) -> TrainResult:
    """Train from a fresh initialisation derived from ``config.train.seed``.

    The weak regime never reads segment labels. The returned ``best_params``
    are those of the epoch with the highest validation accuracy (the final
    parameters when there is no validation split) and ``best_tau`` is the
    temperature that epoch ran at.

    Raises:
        DataError: If there are no training videos
        NumericalError: If a loss or gradient becomes non-finite
    """
    if not train_samples:
        raise DataError("training split is empty")
    tc = config.train
    init_rng, shuffle_rng = Rng(tc.seed).spawn(2)
    params = init_model_params(model_config, init_rng)
    named = parameter_dict(params)
    state = AdamState()
    schedule = schedule_for(config)

    visual, audio = stack_inputs(train_samples)
    video_labels = np.array([s.video_label for s in train_samples])
    segment_labels = np.stack([s.segment_labels for s in train_samples]) if tc.regime == 'full' else None

    result = TrainResult(best_params=params, final_params=params)
    best_values = None
    n = len(train_samples)
    for epoch in tqdm(range(tc.epochs), desc='epochs', disable=not progress):
        started = time.perf_counter()
        tau = tau_at(schedule, epoch)
        order = shuffle_rng.permutation(n)
        total = 0.0
        for step, start in enumerate(range(0, n, tc.batch_size)):
            idx = order[start:start + tc.batch_size]
            zero_grad(named.values())
            preds = mpn_forward(visual[idx], audio[idx], params, model_config, tau)
            loss = _batch_loss(preds, None if segment_labels is None else segment_labels[idx],
                               video_labels[idx], config)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericalError(f"non-finite loss at epoch {epoch}, step {step}")
            loss.backward()
            adamlike_step(named, gradients(named), state, tc)
            total += value * len(idx)

        val_accuracy = None
        if val_samples:
            val_accuracy = evaluate(val_samples, params, model_config, tau, tc.regime, tc.threshold).accuracy
            if result.best_val_accuracy is None or val_accuracy > result.best_val_accuracy:
                result.best_val_accuracy = val_accuracy
                result.best_epoch = epoch
                result.best_tau = tau
                best_values = snapshot(params)
        report = EpochReport(epoch=epoch, train_loss=total / n, tau=tau,
                             val_accuracy=val_accuracy, seconds=time.perf_counter() - started)
        result.reports.append(report)
        if epoch_log is not None:
            log_record(epoch_log, report.to_record())

    zero_grad(named.values())
    if best_values is not None:
        result.best_params = clone(params)
        restore(result.best_params, best_values)
    else:
        result.best_epoch = tc.epochs - 1
        result.best_tau = final_tau(config)
    logger.info("Trained %d epochs; best epoch %d (val accuracy %s)",
                tc.epochs, result.best_epoch, result.best_val_accuracy)
    return result
