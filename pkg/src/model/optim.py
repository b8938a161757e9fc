"""
Adam with bias correction, keyed by parameter name.
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from ..utils.config import TrainConfig
from ..utils.errors import NumericalError
from ..utils.tensor import Tensor


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def gradients(params: Mapping[str, Tensor]) -> Dict[str, Optional[np.ndarray]]:
    return {name: p.grad for name, p in params.items()}


def adamlike_step(params: Mapping[str, Tensor], grads: Mapping[str, Optional[np.ndarray]],
                  state: AdamState, config: TrainConfig) -> AdamState:
    """Apply one Adam update in place.

    A missing gradient counts as zero. Nothing is updated when any gradient
    is non-finite.

    Raises:
        NumericalError: Naming the first parameter with a non-finite gradient
    """
    for name, p in params.items():
        g = grads.get(name)
        if g is not None and not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {name} at step {state.step + 1}")

    state.step += 1
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        update = config.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + config.adam_eps)
        p.data = (p.data - update).astype(p.dtype)
    return state
