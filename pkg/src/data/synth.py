"""
Synthetic audio-visual event videos with known segment labels.

Each class owns a unit audio prototype and a unit visual prototype that
appears in one spatial region. A video carries exactly one event: a
contiguous span of segments where both modalities add the scaled prototypes
of its class to Gaussian noise. The remaining segments are pure noise
(background). About half of the classes share visual prototypes pairwise, so
only the audio tells those pairs apart; see ``shared_visual_classes``.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from sklearn.metrics.pairwise import euclidean_distances

from ..utils.config import SPLIT_FRACTIONS, DatasetSpec
from ..utils.errors import DataError
from ..utils.rng import Rng

logger = logging.getLogger(__name__)

SPLITS = ('train', 'val', 'test')

# child streams of the dataset seed
_PROTOTYPE_STREAM = 0
_SPLIT_STREAM = 1
_LABEL_STREAM = 2
_FIRST_VIDEO_STREAM = 3


@dataclass
class VideoSample:
    id: int
    visual: np.ndarray  # [T, R, p]
    audio: np.ndarray  # [T, q]
    segment_labels: np.ndarray  # [T]; background == n_classes
    video_label: int


@dataclass
class Prototypes:
    audio: np.ndarray  # [C, q]
    visual: np.ndarray  # [C, p]
    region: np.ndarray  # [C] active region per class


@dataclass
class SplitManifest:
    train: List[int] = field(default_factory=list)
    val: List[int] = field(default_factory=list)
    test: List[int] = field(default_factory=list)

    def ids(self, split: str) -> List[int]:
        if split not in SPLITS:
            raise DataError(f"unknown split {split!r}, expected one of {SPLITS}")
        return getattr(self, split)

    def validate(self, n_videos: int) -> None:
        """Splits must be disjoint and together cover ``0 .. n_videos - 1``.

        Raises:
            DataError: Naming the first offending id
        """
        seen: Dict[int, str] = {}
        for split in SPLITS:
            for video_id in self.ids(split):
                if video_id in seen:
                    raise DataError(f"video {video_id} is in both {seen[video_id]} and {split}")
                seen[video_id] = split
        missing = sorted(set(range(n_videos)) - set(seen))
        if missing:
            raise DataError(f"video {missing[0]} is in no split")
        extra = sorted(set(seen) - set(range(n_videos)))
        if extra:
            raise DataError(f"split lists unknown video {extra[0]}")


@dataclass
class Dataset:
    spec: DatasetSpec
    samples: List[VideoSample]
    manifest: SplitManifest

    def split(self, name: str) -> List[VideoSample]:
        by_id = {s.id: s for s in self.samples}
        return [by_id[i] for i in self.manifest.ids(name)]


def _seed_streams(spec: DatasetSpec, n: int) -> List[Rng]:
    return Rng(spec.seed).spawn(n)


def shared_visual_classes(n_classes: int) -> int:
    """Number of leading classes paired on one visual prototype.

    Pairs need an even count, so this is the largest even number not above
    ``n_classes / 2``: 2 of 5 classes at the desk default, 14 of 28 at full scale.
    """
    return 2 * (n_classes // 4)


def make_prototypes(spec: DatasetSpec) -> Prototypes:
    """Class prototypes; a pure function of the seed and the dataset dimensions."""
    rng = _seed_streams(spec, _PROTOTYPE_STREAM + 1)[_PROTOTYPE_STREAM]
    C = spec.n_classes
    audio = np.stack([rng.unit_vector(spec.audio_dim) for _ in range(C)])
    visual = np.zeros((C, spec.visual_dim), dtype=np.float32)
    region = np.zeros(C, dtype=np.int64)
    n_shared = shared_visual_classes(C)
    for c in range(C):
        if c < n_shared and c % 2 == 1:
            visual[c], region[c] = visual[c - 1], region[c - 1]
        else:
            visual[c] = rng.unit_vector(spec.visual_dim)
            region[c] = rng.integers(0, spec.n_regions)
    return Prototypes(audio=audio, visual=visual, region=region)


def make_manifest(spec: DatasetSpec) -> SplitManifest:
    """Seeded 80/10/10 split of the video ids."""
    rng = _seed_streams(spec, _SPLIT_STREAM + 1)[_SPLIT_STREAM]
    order = rng.permutation(spec.n_videos)
    n_train = int(round(SPLIT_FRACTIONS[0] * spec.n_videos))
    n_val = int(round(SPLIT_FRACTIONS[1] * spec.n_videos))
    return SplitManifest(
        train=sorted(int(i) for i in order[:n_train]),
        val=sorted(int(i) for i in order[n_train:n_train + n_val]),
        test=sorted(int(i) for i in order[n_train + n_val:]),
    )


def _make_video(video_id: int, label: int, spec: DatasetSpec, prototypes: Prototypes, rng: Rng) -> VideoSample:
    T = spec.n_segments
    length = int(rng.integers(spec.min_event_len, T + 1))
    start = int(rng.integers(0, T - length + 1))
    visual = rng.normal((T, spec.n_regions, spec.visual_dim), scale=spec.noise_sigma)
    audio = rng.normal((T, spec.audio_dim), scale=spec.noise_sigma)
    visual[start:start + length, prototypes.region[label]] += spec.signal_gain * prototypes.visual[label]
    audio[start:start + length] += spec.signal_gain * prototypes.audio[label]
    labels = np.full(T, spec.n_classes, dtype=np.int64)
    labels[start:start + length] = label
    return VideoSample(id=video_id, visual=visual, audio=audio, segment_labels=labels, video_label=label)


def generate(spec: DatasetSpec) -> Dataset:
    """Generate ``spec.n_videos`` videos with a balanced class distribution.

    Each video draws from its own child stream of ``spec.seed``, so a video
    does not depend on how many others are generated alongside it.

    Raises:
        ConfigError: If ``spec`` is invalid
    """
    spec.validate()
    streams = _seed_streams(spec, _FIRST_VIDEO_STREAM + spec.n_videos)
    prototypes = make_prototypes(spec)
    labels = np.arange(spec.n_videos) % spec.n_classes
    labels = labels[streams[_LABEL_STREAM].permutation(spec.n_videos)]
    samples = [
        _make_video(i, int(labels[i]), spec, prototypes, streams[_FIRST_VIDEO_STREAM + i])
        for i in range(spec.n_videos)
    ]
    manifest = make_manifest(spec)
    logger.info("Generated %d videos (%d classes, seed %d)", len(samples), spec.n_classes, spec.seed)
    return Dataset(spec=spec, samples=samples, manifest=manifest)


def check_labels(samples: List[VideoSample], n_classes: int) -> None:
    """Every event segment must carry the video's category.

    Raises:
        DataError: Naming the first inconsistent video
    """
    for s in samples:
        event = s.segment_labels[s.segment_labels != n_classes]
        if not 0 <= s.video_label < n_classes or np.any(event != s.video_label):
            raise DataError(f"video {s.id}: segment labels disagree with video label {s.video_label}")


def templates(spec: DatasetSpec, prototypes: Optional[Prototypes] = None) -> np.ndarray:
    """Noise-free flattened segment for every class, then an all-zero background row."""
    prototypes = prototypes if prototypes is not None else make_prototypes(spec)
    C, R, p = spec.n_classes, spec.n_regions, spec.visual_dim
    rows = np.zeros((C + 1, R * p + spec.audio_dim), dtype=np.float64)
    for c in range(C):
        start = prototypes.region[c] * p
        rows[c, start:start + p] = spec.signal_gain * prototypes.visual[c]
        rows[c, R * p:] = spec.signal_gain * prototypes.audio[c]
    return rows


def nearest_prototype_oracle(samples: List[VideoSample], spec: DatasetSpec,
                             prototypes: Optional[Prototypes] = None) -> np.ndarray:
    """Label each segment with its nearest noise-free template; ``[N, T]``."""
    if not samples:
        return np.zeros((0, spec.n_segments), dtype=np.int64)
    rows = templates(spec, prototypes)
    visual = np.stack([s.visual for s in samples])
    audio = np.stack([s.audio for s in samples])
    N, T = visual.shape[:2]
    flat = np.concatenate([visual.reshape(N * T, -1), audio.reshape(N * T, -1)], axis=1)
    nearest = np.argmin(euclidean_distances(flat.astype(np.float64), rows), axis=1)
    return nearest.reshape(N, T).astype(np.int64)
