"""
Parameter containers shared by every block, initialisation and persistence.

Parameter bundles are dataclasses whose leaves are ``Tensor`` objects.
``named_parameters`` walks them (dataclass fields, lists) and yields dotted
names such as ``mcms.0.visual.1.query.weight``; those names key the optimizer
state and the ``.npz`` model files. Linear weights are stored ``[in, out]`` so
row-vector inputs multiply on the left.
"""

import copy
import logging
import math
from dataclasses import dataclass, fields, is_dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..utils.errors import DataError, ShapeError
from ..utils.rng import Rng
from ..utils.tensor import Tensor, default_dtype, matmul, relu

logger = logging.getLogger(__name__)

CONFIG_ENTRY = '__config__'


@dataclass
class Linear:
    """Affine map ``x @ weight + bias``."""

    weight: Tensor
    bias: Optional[Tensor] = None


@dataclass
class LayerNormParams:
    gain: Tensor
    bias: Tensor


@dataclass
class Mlp:
    """Two-layer perceptron with a ReLU between the layers."""

    hidden: Linear
    out: Linear


def linear(x: Tensor, layer: Linear) -> Tensor:
    y = matmul(x, layer.weight)
    if layer.bias is not None:
        y = y + layer.bias
    return y


def mlp(x: Tensor, params: Mlp) -> Tensor:
    return linear(relu(linear(x, params.hidden)), params.out)


# -- initialisation -----------------------------------------------------------


def init_weight(rng: Rng, n_in: int, n_out: int) -> Tensor:
    """Xavier-uniform ``[n_in, n_out]`` matrix."""
    limit = math.sqrt(6.0 / (n_in + n_out))
    return Tensor(rng.uniform(-limit, limit, (n_in, n_out), dtype=default_dtype()), requires_grad=True)


def init_linear(rng: Rng, n_in: int, n_out: int, bias: bool = True) -> Linear:
    b = Tensor(np.zeros(n_out, dtype=default_dtype()), requires_grad=True) if bias else None
    return Linear(weight=init_weight(rng, n_in, n_out), bias=b)


def init_layer_norm(width: int) -> LayerNormParams:
    return LayerNormParams(
        gain=Tensor(np.ones(width, dtype=default_dtype()), requires_grad=True),
        bias=Tensor(np.zeros(width, dtype=default_dtype()), requires_grad=True),
    )


def init_mlp(rng: Rng, n_in: int, n_hidden: int, n_out: int) -> Mlp:
    first, second = rng.spawn(2)
    return Mlp(hidden=init_linear(first, n_in, n_hidden), out=init_linear(second, n_hidden, n_out))


# -- traversal ----------------------------------------------------------------


def _join(prefix: str, name: str) -> str:
    return f"{prefix}.{name}" if prefix else name


def named_parameters(obj, prefix: str = '') -> Iterator[Tuple[str, Tensor]]:
    """Yield ``(dotted_name, tensor)`` for every trainable tensor in ``obj``."""
    if obj is None:
        return
    if isinstance(obj, Tensor):
        if obj.requires_grad:
            yield prefix, obj
        return
    if is_dataclass(obj):
        for f in fields(obj):
            yield from named_parameters(getattr(obj, f.name), _join(prefix, f.name))
    elif isinstance(obj, (list, tuple)):
        for i, item in enumerate(obj):
            yield from named_parameters(item, _join(prefix, str(i)))


def parameter_dict(obj) -> Dict[str, Tensor]:
    return dict(named_parameters(obj))


def count_parameters(obj) -> int:
    return sum(t.size for _, t in named_parameters(obj))


def snapshot(obj) -> Dict[str, np.ndarray]:
    """Copy of every parameter value, keyed by name."""
    return {name: t.data.copy() for name, t in named_parameters(obj)}


def restore(obj, values: Dict[str, np.ndarray]) -> None:
    for name, t in named_parameters(obj):
        t.data = values[name].copy()


def clone(obj):
    """Independent copy of a parameter bundle without gradients."""
    duplicate = copy.deepcopy(obj)
    for _, t in named_parameters(duplicate):
        t.grad = None
    return duplicate


# -- persistence --------------------------------------------------------------


def save_params(obj, path: str, config_lines: Optional[List[str]] = None) -> str:
    """Write every parameter to an ``.npz`` archive, with the effective config embedded.

    Returns:
        Path actually written (``.npz`` is appended when missing)
    """
    target = Path(path)
    if target.suffix != '.npz':
        target = target.with_name(target.name + '.npz')
    target.parent.mkdir(parents=True, exist_ok=True)
    arrays = {name: t.data for name, t in named_parameters(obj)}
    arrays[CONFIG_ENTRY] = np.array('\n'.join(config_lines or []))
    np.savez(target, **arrays)
    logger.info("Saved %d parameter tensors to %s", len(arrays) - 1, target)
    return str(target)


def _open_archive(path: str):
    try:
        return np.load(path, allow_pickle=False)
    except FileNotFoundError:
        raise DataError(f"missing model file {path}") from None
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read model file {path}: {e}") from e


def read_config_lines(path: str) -> List[str]:
    """Config lines embedded in a model file by ``save_params``."""
    with _open_archive(path) as archive:
        if CONFIG_ENTRY not in archive.files:
            return []
        text = str(archive[CONFIG_ENTRY])
    return [line for line in text.split('\n') if line]


def load_params(path: str, template) -> None:
    """Fill ``template`` in place from a model file.

    Raises:
        DataError: If the file is missing or lacks a parameter
        ShapeError: If a stored tensor has a different shape
    """
    with _open_archive(path) as archive:
        for name, t in named_parameters(template):
            if name not in archive.files:
                raise DataError(f"model file {path} has no parameter {name}")
            value = archive[name]
            if value.shape != t.shape:
                raise ShapeError(f"load {name}", value.shape, t.shape)
            t.data = value.astype(t.dtype)
