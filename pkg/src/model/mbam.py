"""
Multimodal bilinear attention: squeeze two modalities into one code, excite, refine.

The factorized bilinear coding (FBC) squeeze projects both modalities into an
``r * k`` space, multiplies them elementwise, sums each group of ``r``
consecutive coordinates into one of ``k`` atoms and shrinks the result with a
soft threshold at ``lambda / 2``, the closed-form sparse code under an L1
penalty. The concat, product and addition variants replace the squeeze for
ablations; excitation and refinement are shared.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..utils.config import SQUEEZE_VARIANTS, FbcConfig
from ..utils.errors import ParameterError, ShapeError
from ..utils.rng import Rng
from ..utils.tensor import (Tensor, absolute, concat, default_dtype, matmul, maximum, relu,
                            sigmoid, sign)
from .params import Linear, init_linear, init_weight, linear


@dataclass
class FbcParams:
    """Low-rank projections and the fixed group-sum pooling matrix ``[k, r*k]``."""

    visual: Tensor
    audio: Tensor
    pooling: Tensor


@dataclass
class ProjectionSqueezeParams:
    """Weights of the concat / product / addition ablations."""

    joint: Optional[Linear] = None
    visual: Optional[Linear] = None
    audio: Optional[Linear] = None


@dataclass
class ExcitationParams:
    """Bias-free gate MLPs and the per-modality pre-gate projections."""

    visual_hidden: Tensor
    visual_out: Tensor
    audio_hidden: Tensor
    audio_out: Tensor
    refine_visual: Linear
    refine_audio: Linear


@dataclass
class MbamParams:
    excitation: ExcitationParams
    fbc: Optional[FbcParams] = None
    projection: Optional[ProjectionSqueezeParams] = None


@dataclass
class FusedCode:
    z: Tensor
    pre_threshold: Optional[Tensor] = None


def pooling_matrix(n_atoms: int, rank: int, dtype=None) -> np.ndarray:
    """Binary ``[k, r*k]`` matrix summing each consecutive group of ``rank`` coordinates."""
    dtype = dtype or default_dtype()
    pooling = np.zeros((n_atoms, rank * n_atoms), dtype=dtype)
    for atom in range(n_atoms):
        pooling[atom, atom * rank:(atom + 1) * rank] = 1.0
    return pooling


def init_mbam(rng: Rng, visual_dim: int, audio_dim: int, config: FbcConfig) -> MbamParams:
    k, r, k_hid = config.n_atoms, config.rank, config.k_hid
    streams = rng.spawn(9)
    excitation = ExcitationParams(
        visual_hidden=init_weight(streams[0], k, k_hid),
        visual_out=init_weight(streams[1], k_hid, k),
        audio_hidden=init_weight(streams[2], k, k_hid),
        audio_out=init_weight(streams[3], k_hid, k),
        refine_visual=init_linear(streams[4], visual_dim, k),
        refine_audio=init_linear(streams[5], audio_dim, k),
    )
    params = MbamParams(excitation=excitation)
    if config.squeeze == 'fbc':
        params.fbc = FbcParams(
            visual=init_weight(streams[6], visual_dim, r * k),
            audio=init_weight(streams[7], audio_dim, r * k),
            pooling=Tensor(pooling_matrix(k, r)),
        )
    elif config.squeeze == 'concat':
        params.projection = ProjectionSqueezeParams(joint=init_linear(streams[8], visual_dim + audio_dim, k))
    else:
        first, second = streams[8].spawn(2)
        params.projection = ProjectionSqueezeParams(
            visual=init_linear(first, visual_dim, k), audio=init_linear(second, audio_dim, k))
    return params


def soft_threshold(x: Tensor, threshold: float) -> Tensor:
    """``sign(x) * max(|x| - threshold, 0)``."""
    return sign(x) * maximum(absolute(x) - threshold, 0.0)


def fbc_squeeze(visual: Tensor, audio: Tensor, params: FbcParams, lasso_lambda: float) -> FusedCode:
    """Sparse joint code ``z`` [..., k] of per-segment visual and audio features.

    Raises:
        ShapeError: If the inputs do not match the projections or each other
    """
    if visual.shape[-1] != params.visual.shape[0] or audio.shape[-1] != params.audio.shape[0]:
        raise ShapeError("fbc_squeeze", visual.shape, audio.shape, params.visual.shape, params.audio.shape)
    if visual.shape[:-1] != audio.shape[:-1]:
        raise ShapeError("fbc_squeeze segments", visual.shape, audio.shape)
    joint = matmul(visual, params.visual) * matmul(audio, params.audio)
    coded = matmul(joint, Tensor(params.pooling.data.T))
    return FusedCode(z=soft_threshold(coded, lasso_lambda / 2.0), pre_threshold=coded)


def squeeze_ablation(variant: str, visual: Tensor, audio: Tensor, params: MbamParams,
                     lasso_lambda: float = 0.0) -> FusedCode:
    """Fuse with the named squeeze; ``fbc`` delegates to ``fbc_squeeze``.

    Raises:
        ParameterError: For an unknown variant or missing weights
    """
    if variant not in SQUEEZE_VARIANTS:
        raise ParameterError(f"unknown squeeze variant {variant!r}, expected one of {SQUEEZE_VARIANTS}")
    if variant == 'fbc':
        if params.fbc is None:
            raise ParameterError("fbc squeeze requested but the model has no FBC weights")
        return fbc_squeeze(visual, audio, params.fbc, lasso_lambda)
    proj = params.projection
    if proj is None:
        raise ParameterError(f"{variant} squeeze requested but the model has no projection weights")
    if variant == 'concat':
        return FusedCode(z=linear(concat([visual, audio], axis=-1), proj.joint))
    if variant == 'product':
        return FusedCode(z=linear(visual, proj.visual) * linear(audio, proj.audio))
    return FusedCode(z=linear(visual, proj.visual) + linear(audio, proj.audio))


def excitation(code: FusedCode, params: ExcitationParams) -> Tuple[Tensor, Tensor]:
    """Channel gates ``(phi_v, phi_a)`` in (0, 1), one per atom."""
    z = code.z
    phi_v = sigmoid(matmul(relu(matmul(z, params.visual_hidden)), params.visual_out))
    phi_a = sigmoid(matmul(relu(matmul(z, params.audio_hidden)), params.audio_out))
    return phi_v, phi_a


def refine(visual: Tensor, audio: Tensor, phi_v: Tensor, phi_a: Tensor,
           params: ExcitationParams) -> Tuple[Tensor, Tensor]:
    """Gate the projected features: ``relu(f(x)) * phi``."""
    v_hat = relu(linear(visual, params.refine_visual))
    a_hat = relu(linear(audio, params.refine_audio))
    if v_hat.shape != phi_v.shape or a_hat.shape != phi_a.shape:
        raise ShapeError("refine", v_hat.shape, phi_v.shape, a_hat.shape, phi_a.shape)
    return v_hat * phi_v, a_hat * phi_a
