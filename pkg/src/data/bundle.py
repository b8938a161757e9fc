"""
MPNF dataset bundles: a little-endian binary file plus a text split manifest.

Layout::

    header   "MPNF", u32 version, u32 n_videos, n_segments, n_classes,
             n_regions, visual_dim, audio_dim, min_event_len, seed,
             f32 noise_sigma, f32 signal_gain                    (48 bytes)
    record   u32 id, n_segments label bytes (255 = background),
             visual f32[T, R, p], audio f32[T, q]                (per video)

The manifest sits next to the bundle (``<bundle>.manifest.txt``): the
effective configuration as ``#`` comments, then one line per split with the
space-separated video ids.
"""

import logging
import struct
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from ..utils.config import MANIFEST_SUFFIX, DatasetSpec, config_header
from ..utils.errors import BadMagicError, ConfigError, DataError, TruncatedBundleError, VersionMismatchError
from .synth import SPLITS, Dataset, SplitManifest, VideoSample, make_manifest

logger = logging.getLogger(__name__)

MAGIC = b'MPNF'
VERSION = 1
BACKGROUND_BYTE = 255
HEADER = struct.Struct('<4s9I2f')
RECORD_ID = struct.Struct('<I')


def record_size(spec: DatasetSpec) -> int:
    T = spec.n_segments
    return RECORD_ID.size + T + 4 * T * spec.n_regions * spec.visual_dim + 4 * T * spec.audio_dim


def manifest_path(bundle_path: str) -> Path:
    return Path(str(bundle_path) + MANIFEST_SUFFIX)


def encode_header(spec: DatasetSpec) -> bytes:
    return HEADER.pack(MAGIC, VERSION, spec.n_videos, spec.n_segments, spec.n_classes,
                       spec.n_regions, spec.visual_dim, spec.audio_dim, spec.min_event_len,
                       spec.seed, spec.noise_sigma, spec.signal_gain)


def encode_record(sample: VideoSample, n_classes: int) -> bytes:
    labels = np.where(sample.segment_labels == n_classes, BACKGROUND_BYTE, sample.segment_labels)
    return b''.join([
        RECORD_ID.pack(sample.id),
        labels.astype(np.uint8).tobytes(),
        np.ascontiguousarray(sample.visual, dtype='<f4').tobytes(),
        np.ascontiguousarray(sample.audio, dtype='<f4').tobytes(),
    ])


def write_manifest(manifest: SplitManifest, path: str, config_lines: Optional[Iterable[str]] = None) -> None:
    with open(path, 'w') as f:
        f.write(config_header(config_lines or []))
        for split in SPLITS:
            f.write(' '.join([split] + [str(i) for i in manifest.ids(split)]) + '\n')


def read_manifest(path: str, n_videos: int) -> SplitManifest:
    """Parse and validate a split manifest.

    Raises:
        DataError: If the file is unreadable, names an unknown split, or the
            splits overlap or leave a video out
    """
    manifest = SplitManifest()
    try:
        with open(path, 'r') as f:
            lines = f.readlines()
    except OSError as e:
        raise DataError(f"cannot read manifest {path}: {e}") from e
    for line in lines:
        content = line.strip()
        if not content or content.startswith('#'):
            continue
        split, *ids = content.split()
        if split not in SPLITS:
            raise DataError(f"{path}: unknown split {split!r}")
        try:
            setattr(manifest, split, [int(i) for i in ids])
        except ValueError:
            raise DataError(f"{path}: non-integer id in {split} split") from None
    manifest.validate(n_videos)
    return manifest


def write_bundle(dataset: Dataset, path: str, config_lines: Optional[Iterable[str]] = None) -> Path:
    """Write the bundle and its manifest; returns the bundle path."""
    spec = dataset.spec
    if len(dataset.samples) != spec.n_videos:
        raise DataError(f"dataset holds {len(dataset.samples)} videos but its spec says {spec.n_videos}")
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, 'wb') as f:
        f.write(encode_header(spec))
        for sample in dataset.samples:
            f.write(encode_record(sample, spec.n_classes))
    write_manifest(dataset.manifest, str(manifest_path(target)), config_lines)
    logger.info("Wrote %d videos to %s", len(dataset.samples), target)
    return target


def decode_header(raw: bytes) -> DatasetSpec:
    if len(raw) < len(MAGIC) or raw[:len(MAGIC)] != MAGIC:
        raise BadMagicError(f"not an MPNF bundle (magic {raw[:len(MAGIC)]!r})")
    if len(raw) < HEADER.size:
        raise TruncatedBundleError(f"header needs {HEADER.size} bytes, file has {len(raw)}")
    (_, version, n_videos, n_segments, n_classes, n_regions, visual_dim, audio_dim,
     min_event_len, seed, noise_sigma, signal_gain) = HEADER.unpack_from(raw)
    if version != VERSION:
        raise VersionMismatchError(f"bundle version {version}, this reader supports {VERSION}")
    spec = DatasetSpec(n_videos=n_videos, n_segments=n_segments, n_classes=n_classes,
                       n_regions=n_regions, visual_dim=visual_dim, audio_dim=audio_dim,
                       noise_sigma=float(noise_sigma), signal_gain=float(signal_gain),
                       min_event_len=min_event_len, seed=seed)
    try:
        spec.validate()
    except ConfigError as e:
        raise DataError(f"bundle header describes an invalid dataset: {e}") from e
    return spec


def _decode_records(raw: bytes, spec: DatasetSpec) -> List[VideoSample]:
    T, R, p, q, C = spec.n_segments, spec.n_regions, spec.visual_dim, spec.audio_dim, spec.n_classes
    samples = []
    offset = HEADER.size
    for _ in range(spec.n_videos):
        (video_id,) = RECORD_ID.unpack_from(raw, offset)
        offset += RECORD_ID.size
        labels = np.frombuffer(raw, dtype=np.uint8, count=T, offset=offset).astype(np.int64)
        offset += T
        visual = np.frombuffer(raw, dtype='<f4', count=T * R * p, offset=offset).reshape(T, R, p)
        offset += 4 * T * R * p
        audio = np.frombuffer(raw, dtype='<f4', count=T * q, offset=offset).reshape(T, q)
        offset += 4 * T * q
        bad = labels[(labels != BACKGROUND_BYTE) & (labels >= C)]
        if bad.size:
            raise DataError(f"video {video_id}: label {bad[0]} outside [0, {C}) and not background")
        labels[labels == BACKGROUND_BYTE] = C
        event = labels[labels != C]
        samples.append(VideoSample(
            id=int(video_id),
            visual=visual.astype(np.float32),
            audio=audio.astype(np.float32),
            segment_labels=labels,
            video_label=int(event[0]) if event.size else C,
        ))
    return samples


def read_bundle(path: str) -> Dataset:
    """Load a bundle and its manifest.

    A missing manifest is rebuilt from the seed in the header.

    Raises:
        BadMagicError, VersionMismatchError, TruncatedBundleError: For a malformed header or body
        DataError: If the file is missing, has trailing bytes or inconsistent labels
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read bundle {path}: {e}") from e
    spec = decode_header(raw)
    expected = HEADER.size + spec.n_videos * record_size(spec)
    if len(raw) < expected:
        raise TruncatedBundleError(f"{path}: expected {expected} bytes for {spec.n_videos} videos, found {len(raw)}")
    if len(raw) > expected:
        raise DataError(f"{path}: {len(raw) - expected} unexpected trailing bytes")
    samples = _decode_records(raw, spec)
    ids = sorted(s.id for s in samples)
    if ids != list(range(spec.n_videos)):
        raise DataError(f"{path}: video ids are not 0..{spec.n_videos - 1}")
    side = manifest_path(path)
    if side.exists():
        manifest = read_manifest(str(side), spec.n_videos)
    else:
        logger.warning("No manifest next to %s; rebuilding the split from seed %d", path, spec.seed)
        manifest = make_manifest(spec)
    return Dataset(spec=spec, samples=samples, manifest=manifest)
