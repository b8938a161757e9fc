"""
Configuration settings: constants, default hyperparameters and the key=value run configuration.
"""

import os
from dataclasses import dataclass, field, fields
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import ConfigError

# Constants fixed by the task definition
N_SEGMENTS = 10  # 1-second segments per 10 s clip
MIN_EVENT_LEN = 2  # events are at least 2 s long
SPLIT_FRACTIONS = (0.8, 0.1, 0.1)  # train / val / test
RELEVANCE_THRESHOLD = 0.5  # p_r >= 0.5 marks an event segment
LOSS_LAMBDA = 0.6
LEARNING_RATE = 0.0002
TAU_START = 30.0
TAU_END = 1.0
ANNEAL_EPOCHS = 10
PROB_EPS = 1e-7  # clamp inside every log

# Full-scale values the desk defaults stand in for
AVE_SCALE = {
    'n_classes': 28,
    'n_regions': 49,  # 7x7 pool5 grid
    'visual_dim': 512,
    'audio_dim': 128,
    'epochs': 300,
}

# Ablation names
MCM_ORDERS = ('SA+SA', 'CMA+CMA', 'CMA+SA', 'SA+CMA')
SQUEEZE_VARIANTS = ('concat', 'product', 'addition', 'fbc')
NETWORKS = ('localization', 'classification', 'parallel')
REGIMES = ('full', 'weak')

# Seeds
DEFAULT_SEED = 1
SEED_ENV_VAR = 'MPN_SEED'

# File paths
DATA_DIR = 'data'
RUNS_DIR = 'runs'
BUNDLE_SUFFIX = '.mpnf'
MANIFEST_SUFFIX = '.manifest.txt'
EPOCH_LOG_SUFFIX = '.epochs.jsonl'

_TRUE = {'1', 'true', 'yes', 'on'}
_FALSE = {'0', 'false', 'no', 'off'}


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


@dataclass
class DatasetSpec:
    """Synthetic dataset shape and difficulty."""

    n_videos: int = 512
    n_segments: int = N_SEGMENTS
    n_classes: int = 5
    n_regions: int = 4
    visual_dim: int = 32
    audio_dim: int = 16
    noise_sigma: float = 1.0
    signal_gain: float = 3.0
    min_event_len: int = MIN_EVENT_LEN
    seed: int = DEFAULT_SEED

    def validate(self) -> None:
        for name in ('n_videos', 'n_segments', 'n_classes', 'n_regions', 'visual_dim', 'audio_dim'):
            _require(getattr(self, name) >= 1, f"{name} must be >= 1")
        # labels are stored as bytes with 255 reserved for background
        _require(self.n_classes < 255, "n_classes must be < 255")
        _require(self.noise_sigma >= 0, "noise_sigma must be >= 0")
        _require(self.min_event_len >= 2, "min_event_len must be >= 2")
        _require(self.min_event_len <= self.n_segments, "min_event_len must not exceed n_segments")
        _require(0 <= self.seed < 2**32, "seed must fit in 32 bits")


@dataclass
class AttentionConfig:
    """Co-attention widths; h * d_k and h * d_v are the projection widths."""

    d_model: int = 64
    n_heads: int = 4
    d_k: int = 16
    d_v: int = 16
    ff_hidden: int = 128
    n_mcm: int = 2
    mcm_order: str = 'SA+CMA'
    agva_hidden: int = 64

    def validate(self) -> None:
        for name in ('d_model', 'n_heads', 'd_k', 'd_v', 'ff_hidden', 'n_mcm', 'agva_hidden'):
            _require(getattr(self, name) >= 1, f"{name} must be >= 1")
        _require(self.mcm_order in MCM_ORDERS, f"unknown mcm_order {self.mcm_order!r}, expected one of {MCM_ORDERS}")


@dataclass
class FbcConfig:
    """Squeeze settings: rank r, atoms k and the shrinkage lambda."""

    rank: int = 4
    n_atoms: int = 64
    lasso_lambda: float = 0.01
    squeeze: str = 'fbc'

    @property
    def k_hid(self) -> int:
        return self.n_atoms // 2

    def validate(self) -> None:
        _require(self.rank >= 1, "rank must be >= 1")
        _require(self.n_atoms >= 2 and self.n_atoms % 2 == 0, "n_atoms must be even and >= 2")
        _require(self.lasso_lambda >= 0, "lasso_lambda must be >= 0")
        _require(self.squeeze in SQUEEZE_VARIANTS,
                 f"unknown squeeze {self.squeeze!r}, expected one of {SQUEEZE_VARIANTS}")


@dataclass
class TrainConfig:
    """Optimisation, temperature schedule, regime and ablation flags."""

    loss_lambda: float = LOSS_LAMBDA
    learning_rate: float = LEARNING_RATE
    epochs: int = 200  # 300 at full scale
    batch_size: int = 8
    seed: int = DEFAULT_SEED
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    tau_start: float = TAU_START
    tau_end: float = TAU_END
    anneal_epochs: int = ANNEAL_EPOCHS
    regime: str = 'full'
    network: str = 'parallel'
    local_to_global: bool = True
    threshold: float = RELEVANCE_THRESHOLD
    eval_tau: float = 0.0  # 0 scores at the last epoch's temperature

    def validate(self) -> None:
        _require(0.0 <= self.loss_lambda <= 1.0, "loss_lambda must lie in [0, 1]")
        _require(self.learning_rate > 0, "learning_rate must be > 0")
        _require(self.epochs >= 1, "epochs must be >= 1")
        _require(self.batch_size >= 1, "batch_size must be >= 1")
        _require(0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0, "beta1 and beta2 must lie in [0, 1)")
        _require(self.adam_eps > 0, "adam_eps must be > 0")
        _require(self.tau_start >= self.tau_end > 0, "temperatures must satisfy tau_start >= tau_end > 0")
        _require(self.anneal_epochs >= 0, "anneal_epochs must be >= 0")
        _require(self.regime in REGIMES, f"unknown regime {self.regime!r}, expected one of {REGIMES}")
        _require(self.network in NETWORKS, f"unknown network {self.network!r}, expected one of {NETWORKS}")
        _require(0.0 <= self.threshold <= 1.0, "threshold must lie in [0, 1]")
        _require(self.eval_tau >= 0, "eval_tau must be >= 0")


_SECTIONS = ('data', 'attention', 'fbc', 'train')


@dataclass
class RunConfig:
    """Union of every configurable field, addressed by flat ``key=value`` names.

    ``seed`` is the only key shared by two sections (data and train); setting it
    sets both.
    """

    data: DatasetSpec = field(default_factory=DatasetSpec)
    attention: AttentionConfig = field(default_factory=AttentionConfig)
    fbc: FbcConfig = field(default_factory=FbcConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def key_table(cls) -> Dict[str, List[Tuple[str, type]]]:
        """Map each key to the (section, type) pairs it sets."""
        table: Dict[str, List[Tuple[str, type]]] = {}
        defaults = cls()
        for section in _SECTIONS:
            for f in fields(getattr(defaults, section)):
                table.setdefault(f.name, []).append((section, f.type))
        return table

    def set(self, key: str, raw) -> None:
        """Assign ``key`` from a string (file/flag) or an already typed value.

        Raises:
            ConfigError: For unknown keys or unparsable values
        """
        table = self.key_table()
        if key not in table:
            raise ConfigError(f"unknown config key {key!r}")
        for section, kind in table[key]:
            setattr(getattr(self, section), key, _coerce(key, raw, kind))

    def get(self, key: str):
        table = self.key_table()
        if key not in table:
            raise ConfigError(f"unknown config key {key!r}")
        section, _ = table[key][0]
        return getattr(getattr(self, section), key)

    def validate(self) -> None:
        for section in _SECTIONS:
            getattr(self, section).validate()
        _require(self.attention.d_model == self.fbc.n_atoms,
                 f"d_model ({self.attention.d_model}) must equal n_atoms ({self.fbc.n_atoms}) "
                 "so excitation gates can refine co-attention outputs")

    def to_lines(self) -> List[str]:
        """Effective configuration as sorted ``key=value`` lines."""
        lines = []
        for key in sorted(self.key_table()):
            value = self.get(key)
            if isinstance(value, bool):
                value = 'true' if value else 'false'
            lines.append(f"{key}={value}")
        return lines

    def copy(self) -> 'RunConfig':
        clone = RunConfig()
        for line in self.to_lines():
            key, value = line.split('=', 1)
            clone.set(key, value)
        return clone


def _coerce(key: str, raw, kind: type):
    if not isinstance(raw, str):
        if kind is bool and isinstance(raw, bool):
            return raw
        if kind is not bool and isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return kind(raw)
        if kind is str:
            return str(raw)
        raise ConfigError(f"invalid value {raw!r} for {key}")
    text = raw.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"invalid value {text!r} for {key} (expected {kind.__name__})") from None


def parse_config_file(path: str) -> List[Tuple[str, str]]:
    """Read ``key=value`` pairs; blank lines and ``#`` comments are skipped.

    Raises:
        ConfigError: If the file is missing or a line has no ``=``
    """
    try:
        with open(path, 'r') as f:
            lines = f.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    pairs = []
    for number, line in enumerate(lines, start=1):
        content = line.split('#', 1)[0].strip()
        if not content:
            continue
        if '=' not in content:
            raise ConfigError(f"{path}:{number}: expected key=value, got {content!r}")
        key, value = content.split('=', 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def load_run_config(path: Optional[str] = None,
                    overrides: Optional[Dict[str, object]] = None,
                    environ: Optional[Dict[str, str]] = None) -> RunConfig:
    """Build the effective configuration: flag > file > MPN_SEED > default.

    Args:
        path: Optional key=value file
        overrides: Flag values keyed by config key; ``None`` values are ignored
        environ: Environment to read MPN_SEED from (defaults to ``os.environ``)

    Returns:
        Validated RunConfig
    """
    environ = os.environ if environ is None else environ
    config = RunConfig()
    explicit = set()
    if path:
        for key, value in parse_config_file(path):
            config.set(key, value)
            explicit.add(key)
    for key, value in (overrides or {}).items():
        if value is not None:
            config.set(key, value)
            explicit.add(key)
    if 'seed' not in explicit and environ.get(SEED_ENV_VAR):
        config.set('seed', environ[SEED_ENV_VAR])
    config.validate()
    return config


def config_header(lines: Iterable[str]) -> str:
    """Render config lines as ``#`` comments for text artifacts."""
    return ''.join(f"# {line}\n" for line in lines)
