"""
Module for exporting predictions and result tables as tab-separated files.

Every file starts with the effective configuration as ``# key=value`` lines,
followed by a header row.
"""

import logging
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from ..model.metrics import event_span
from ..model.trainer import EvalResult
from ..utils.config import config_header
from ..utils.errors import DataError
from .synth import SPLITS, Dataset

logger = logging.getLogger(__name__)


def predictions_frame(result: EvalResult, n_classes: int) -> pd.DataFrame:
    """One row per (video, segment) with labels, relevance, span and region weights."""
    N, T = result.predicted.shape
    rows = {
        'video_id': np.repeat(result.ids, T),
        'segment': np.tile(np.arange(T), N),
        'true_label': result.truth.reshape(-1),
        'pred_label': result.predicted.reshape(-1),
        'p_r': result.p_r.reshape(-1),
    }
    spans = [event_span(labels, n_classes) for labels in result.predicted]
    rows['pred_start'] = np.repeat([s[0] if s else -1 for s in spans], T)
    rows['pred_end'] = np.repeat([s[1] if s else -1 for s in spans], T)
    weights = result.agva_weights.reshape(N * T, -1)
    for region in range(weights.shape[1]):
        rows[f'agva_w{region}'] = weights[:, region]
    return pd.DataFrame(rows)


def write_table(frame: pd.DataFrame, path: str, config_lines: Optional[Iterable[str]] = None) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, 'w') as f:
        f.write(config_header(config_lines or []))
        frame.to_csv(f, sep='\t', index=False, float_format='%.6g')
    logger.info("Wrote %d rows to %s", len(frame), target)
    return target


def read_table(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, sep='\t', comment='#')
    except (OSError, pd.errors.ParserError) as e:
        raise DataError(f"cannot read table {path}: {e}") from e


def export_predictions(result: EvalResult, n_classes: int, path: str,
                       config_lines: Optional[Iterable[str]] = None) -> Path:
    """Write the per-segment prediction dump; background labels are ``n_classes``."""
    lines = list(config_lines or []) + [f"background_label={n_classes}"]
    return write_table(predictions_frame(result, n_classes), path, lines)


def class_summary(dataset: Dataset) -> pd.DataFrame:
    """Videos per class and split, plus event-segment counts."""
    C = dataset.spec.n_classes
    records = []
    for split in SPLITS:
        for sample in dataset.split(split):
            records.append({
                'split': split,
                'class': sample.video_label,
                'event_segments': int(np.sum(sample.segment_labels != C)),
            })
    frame = pd.DataFrame(records, columns=['split', 'class', 'event_segments'])
    videos = frame.pivot_table(index='class', columns='split', values='event_segments',
                               aggfunc='count', fill_value=0)
    videos = videos.reindex(index=range(C), columns=list(SPLITS), fill_value=0)
    videos['total'] = videos.sum(axis=1)
    videos['event_segments'] = frame.groupby('class')['event_segments'].sum().reindex(range(C), fill_value=0)
    return videos.reset_index()


def format_table(frame: pd.DataFrame) -> str:
    """Tab-separated text with a header row, for stdout."""
    return frame.to_csv(sep='\t', index=False, float_format='%.4f')
