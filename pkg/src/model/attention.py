"""
Co-attention blocks: temperature schedule, self/cross-modal attention and the MCM stack.

Both block kinds share one body: multi-head scaled dot-product attention of a
query sequence over a context sequence, a post-norm residual, then a ReLU
feed-forward with a second post-norm residual. Self-attention passes the same
sequence as query and context. All functions accept ``[T, d]`` or ``[B, T, d]``
inputs.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from ..utils.config import ANNEAL_EPOCHS, MCM_ORDERS, TAU_END, TAU_START, AttentionConfig
from ..utils.errors import ParameterError, ShapeError
from ..utils.rng import Rng
from ..utils.tensor import Tensor, layer_norm, matmul, relu, reshape, softmax_t, swapaxes
from .params import LayerNormParams, Linear, init_layer_norm, init_linear, linear


@dataclass
class TemperatureSchedule:
    tau_start: float = TAU_START
    tau_end: float = TAU_END
    anneal_epochs: int = ANNEAL_EPOCHS


def tau_at(schedule: TemperatureSchedule, epoch: int) -> float:
    """Softmax temperature for ``epoch``: linear from tau_start down to tau_end, then flat.

    Raises:
        ParameterError: For a negative epoch
    """
    if epoch < 0:
        raise ParameterError(f"epoch must be >= 0, got {epoch}")
    if schedule.anneal_epochs == 0:
        return float(schedule.tau_end)
    frac = min(epoch, schedule.anneal_epochs) / schedule.anneal_epochs
    return float(schedule.tau_start - (schedule.tau_start - schedule.tau_end) * frac)


@dataclass
class BlockParams:
    """One attention block (used for both SA and CMA)."""

    query: Linear
    key: Linear
    value: Linear
    output: Linear
    ff_in: Linear
    ff_out: Linear
    norm_attn: LayerNormParams
    norm_ff: LayerNormParams
    n_heads: int = 1

    @property
    def width(self) -> int:
        return self.query.weight.shape[0]


@dataclass
class McmParams:
    """Per-modality blocks of one multimodal co-attention module, one per stage."""

    visual: List[BlockParams]
    audio: List[BlockParams]


def init_block(rng: Rng, width: int, config: AttentionConfig) -> BlockParams:
    q, k, v, o, f1, f2 = rng.spawn(6)
    h = config.n_heads
    return BlockParams(
        query=init_linear(q, width, h * config.d_k),
        key=init_linear(k, width, h * config.d_k),
        value=init_linear(v, width, h * config.d_v),
        output=init_linear(o, h * config.d_v, width),
        ff_in=init_linear(f1, width, config.ff_hidden),
        ff_out=init_linear(f2, config.ff_hidden, width),
        norm_attn=init_layer_norm(width),
        norm_ff=init_layer_norm(width),
        n_heads=h,
    )


def init_mcm(rng: Rng, config: AttentionConfig) -> McmParams:
    streams = rng.spawn(4)
    return McmParams(
        visual=[init_block(streams[0], config.d_model, config), init_block(streams[1], config.d_model, config)],
        audio=[init_block(streams[2], config.d_model, config), init_block(streams[3], config.d_model, config)],
    )


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    # [..., T, h*w] -> [..., h, T, w]
    width = x.shape[-1] // n_heads
    return swapaxes(reshape(x, x.shape[:-1] + (n_heads, width)), -3, -2)


def _merge_heads(x: Tensor) -> Tensor:
    y = swapaxes(x, -3, -2)
    return reshape(y, y.shape[:-2] + (y.shape[-2] * y.shape[-1],))


def multi_head_attention(query: Tensor, context: Tensor, block: BlockParams, tau: float) -> Tuple[Tensor, Tensor]:
    """Attention sublayer without residual or normalisation.

    Returns:
        (output [..., T, d], weights [..., h, T, T]); each weight row sums to 1

    Raises:
        ShapeError: If the sequences differ in length or do not match the block width
    """
    if query.shape[-1] != block.width or context.shape[-1] != block.width:
        raise ShapeError("attention width", query.shape, context.shape, (block.width,))
    if query.shape[:-1] != context.shape[:-1]:
        raise ShapeError("cross_modal_attention sequence length", query.shape, context.shape)
    q = _split_heads(linear(query, block.query), block.n_heads)
    k = _split_heads(linear(context, block.key), block.n_heads)
    v = _split_heads(linear(context, block.value), block.n_heads)
    scores = matmul(q, swapaxes(k, -1, -2)) * (1.0 / math.sqrt(q.shape[-1]))
    weights = softmax_t(scores, tau, axis=-1)
    return linear(_merge_heads(matmul(weights, v)), block.output), weights


def attention_block(query: Tensor, context: Tensor, block: BlockParams, tau: float) -> Tuple[Tensor, Tensor]:
    attended, weights = multi_head_attention(query, context, block, tau)
    x = layer_norm(query + attended, block.norm_attn.gain, block.norm_attn.bias)
    ff = linear(relu(linear(x, block.ff_in)), block.ff_out)
    return layer_norm(x + ff, block.norm_ff.gain, block.norm_ff.bias), weights


def self_attention(features: Tensor, block: BlockParams, tau: float) -> Tensor:
    """Contextualise a sequence with itself."""
    return attention_block(features, features, block, tau)[0]


def cross_modal_attention(query: Tensor, context: Tensor, block: BlockParams, tau: float) -> Tensor:
    """Each query segment attends over the other modality's segments."""
    return attention_block(query, context, block, tau)[0]


def mcm_forward(visual: Tensor, audio: Tensor, params: McmParams, tau: float,
                order: str = 'SA+CMA') -> Tuple[Tensor, Tensor]:
    """One co-attention module; ``order`` names the kind of its two stages.

    A CMA stage updates both modalities from the other's output of the
    previous stage, so neither modality sees the other's current-stage result.

    Raises:
        ParameterError: For an unknown ordering
    """
    if order not in MCM_ORDERS:
        raise ParameterError(f"unknown MCM variant {order!r}, expected one of {MCM_ORDERS}")
    for kind, visual_block, audio_block in zip(order.split('+'), params.visual, params.audio):
        if kind == 'SA':
            visual, audio = self_attention(visual, visual_block, tau), self_attention(audio, audio_block, tau)
        else:
            visual, audio = (cross_modal_attention(visual, audio, visual_block, tau),
                             cross_modal_attention(audio, visual, audio_block, tau))
    return visual, audio


def mcm_stack(visual: Tensor, audio: Tensor, modules: Sequence[McmParams], tau: float,
              order: str = 'SA+CMA') -> Tuple[Tensor, Tensor]:
    """Cascade of co-attention modules, each fed the previous module's outputs."""
    for params in modules:
        visual, audio = mcm_forward(visual, audio, params, tau, order)
    return visual, audio
