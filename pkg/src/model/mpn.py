"""
Multimodal parallel network: audio-guided pooling, a classification subnetwork
and a localization subnetwork run side by side on the same inputs.

The classification subnetwork (co-attention stack, joint self-attention,
classifier) predicts the event category for the whole video and per segment.
The localization subnetwork (MBAM squeeze, excitation, refine, relevance
heads) predicts per-segment event relevance. With local-to-global
interaction on, the localization gates also scale the classification
features. Two single-branch variants exist for ablations.
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..utils.config import NETWORKS, REGIMES, RELEVANCE_THRESHOLD, AttentionConfig, DatasetSpec, FbcConfig, RunConfig
from ..utils.errors import ParameterError, ShapeError
from ..utils.rng import Rng
from ..utils.tensor import Tensor, concat, matmul, max_over, relu, reshape, sigmoid, softmax_t, tanh
from .attention import BlockParams, McmParams, init_block, init_mcm, mcm_stack, self_attention
from .mbam import FusedCode, MbamParams, excitation, init_mbam, refine, squeeze_ablation
from .params import Linear, Mlp, init_linear, init_mlp, linear, mlp

logger = logging.getLogger(__name__)


@dataclass
class ModelConfig:
    """Everything the forward pass needs besides the parameters."""

    attention: AttentionConfig
    fbc: FbcConfig
    n_classes: int
    visual_dim: int
    audio_dim: int
    network: str = 'parallel'
    local_to_global: bool = True

    @classmethod
    def from_run(cls, run: RunConfig, data: Optional[DatasetSpec] = None) -> 'ModelConfig':
        data = data or run.data
        return cls(
            attention=run.attention,
            fbc=run.fbc,
            n_classes=data.n_classes,
            visual_dim=data.visual_dim,
            audio_dim=data.audio_dim,
            network=run.train.network,
            local_to_global=run.train.local_to_global,
        )

    @property
    def background(self) -> int:
        return self.n_classes

    def validate(self) -> None:
        if self.network not in NETWORKS:
            raise ParameterError(f"unknown network {self.network!r}, expected one of {NETWORKS}")
        gated = self.network == 'parallel' and self.local_to_global
        if gated and self.attention.d_model != self.fbc.n_atoms:
            raise ShapeError("local-to-global gate", (self.attention.d_model,), (self.fbc.n_atoms,))


@dataclass
class AgvaParams:
    """Additive audio-guided attention over spatial regions."""

    visual: Linear
    audio: Linear
    score: Linear


@dataclass
class ClassifierParams:
    """Shared first layer with a video-level and a segment-level output layer."""

    hidden: Linear
    video: Linear
    segment: Linear


@dataclass
class ModelParams:
    agva: AgvaParams
    visual_in: Optional[Linear] = None
    audio_in: Optional[Linear] = None
    mcms: Optional[List[McmParams]] = None
    final_sa: Optional[BlockParams] = None
    classifier: Optional[ClassifierParams] = None
    mbam: Optional[MbamParams] = None
    relevance_visual: Optional[Mlp] = None
    relevance_audio: Optional[Mlp] = None
    # single-branch ablations
    segment_relevance: Optional[Mlp] = None
    auxiliary_classifier: Optional[ClassifierParams] = None


class ClassificationOutput(NamedTuple):
    p_c: Tensor
    p_c_seg: Tensor
    features: Tensor


class LocalizationOutput(NamedTuple):
    p_r: Tensor
    p_r_visual: Tensor
    p_r_audio: Tensor
    phi_v: Tensor
    phi_a: Tensor
    v_hat: Tensor
    a_hat: Tensor
    code: FusedCode


@dataclass
class Predictions:
    """Model outputs for a batch ``[B, ...]`` or a single video."""

    p_r: Tensor
    p_c: Tensor
    p_c_seg: Tensor
    p_j: Tensor
    agva_weights: Tensor
    p_r_visual: Optional[Tensor] = None
    p_r_audio: Optional[Tensor] = None
    code: Optional[FusedCode] = None


def _init_classifier(rng: Rng, width: int, hidden: int, n_classes: int) -> ClassifierParams:
    first, video, segment = rng.spawn(3)
    return ClassifierParams(
        hidden=init_linear(first, width, hidden),
        video=init_linear(video, hidden, n_classes),
        segment=init_linear(segment, hidden, n_classes),
    )


def init_model_params(config: ModelConfig, rng: Rng) -> ModelParams:
    """Fresh parameters for ``config``; only the blocks its network uses are built."""
    config.validate()
    att = config.attention
    p, q, d, k = config.visual_dim, config.audio_dim, att.d_model, config.fbc.n_atoms
    streams = rng.spawn(12)
    agva_v, agva_a, agva_w = streams[0].spawn(3)
    params = ModelParams(agva=AgvaParams(
        visual=init_linear(agva_v, p, att.agva_hidden),
        audio=init_linear(agva_a, q, att.agva_hidden, bias=False),
        score=init_linear(agva_w, att.agva_hidden, 1, bias=False),
    ))
    if config.network in ('parallel', 'classification'):
        params.visual_in = init_linear(streams[1], p, d)
        params.audio_in = init_linear(streams[2], q, d)
        params.mcms = [init_mcm(child, att) for child in streams[3].spawn(att.n_mcm)]
        params.final_sa = init_block(streams[4], 2 * d, att)
        params.classifier = _init_classifier(streams[5], 2 * d, d, config.n_classes)
    if config.network in ('parallel', 'localization'):
        params.mbam = init_mbam(streams[6], p, q, config.fbc)
        params.relevance_visual = init_mlp(streams[7], k, config.fbc.k_hid, 1)
        params.relevance_audio = init_mlp(streams[8], k, config.fbc.k_hid, 1)
    if config.network == 'classification':
        params.segment_relevance = init_mlp(streams[9], 2 * d, d, 1)
    if config.network == 'localization':
        params.auxiliary_classifier = _init_classifier(streams[10], 2 * k, k, config.n_classes)
    return params


def audio_guided_attention(visual: Tensor, audio: Tensor, params: AgvaParams) -> Tuple[Tensor, Tensor]:
    """Pool ``R`` regions per segment with weights conditioned on the segment's audio.

    Args:
        visual: [..., T, R, p] region features
        audio: [..., T, q]

    Returns:
        (pooled [..., T, p], weights [..., T, R])
    """
    if visual.shape[:-2] != audio.shape[:-1]:
        raise ShapeError("audio_guided_attention", visual.shape, audio.shape)
    n_regions, width = visual.shape[-2], visual.shape[-1]
    hv = linear(visual, params.visual)
    ha = linear(audio, params.audio)
    ha = reshape(ha, ha.shape[:-1] + (1, ha.shape[-1]))
    scores = linear(tanh(hv + ha), params.score)
    weights = softmax_t(reshape(scores, scores.shape[:-1]), 1.0, axis=-1)
    pooled = matmul(reshape(weights, weights.shape[:-1] + (1, n_regions)), visual)
    return reshape(pooled, pooled.shape[:-2] + (width,)), weights


def classify(features: Tensor, params: ClassifierParams) -> Tuple[Tensor, Tensor]:
    """Video-level (max-pooled over segments) and segment-level category distributions."""
    p_c_seg = softmax_t(linear(_hidden(features, params), params.segment), 1.0, axis=-1)
    # keep the pooled segment axis so a single video still multiplies as a matrix
    pooled = max_over(features, axis=-2, keepdims=True)
    logits = linear(_hidden(pooled, params), params.video)
    p_c = softmax_t(reshape(logits, logits.shape[:-2] + logits.shape[-1:]), 1.0, axis=-1)
    return p_c, p_c_seg


def _hidden(x: Tensor, params: ClassifierParams) -> Tensor:
    return relu(linear(x, params.hidden))


def relevance(features: Tensor, params: Mlp) -> Tensor:
    """Per-segment probability from a one-output MLP, ``[..., T]``."""
    scores = sigmoid(mlp(features, params))
    return reshape(scores, scores.shape[:-1])


def classification_forward(visual: Tensor, audio: Tensor, params: ModelParams, config: ModelConfig,
                           tau: float, gates: Optional[Tuple[Tensor, Tensor]] = None) -> ClassificationOutput:
    """Co-attention stack and classifier.

    Args:
        visual: [..., T, p] audio-guided visual features
        audio: [..., T, q]
        gates: Optional ``(phi_v, phi_a)`` multiplied into the last co-attention outputs

    Raises:
        ShapeError: If a gate does not match the co-attention output
    """
    v = linear(visual, params.visual_in)
    a = linear(audio, params.audio_in)
    v, a = mcm_stack(v, a, params.mcms, tau, config.attention.mcm_order)
    if gates is not None:
        phi_v, phi_a = gates
        if phi_v.shape != v.shape or phi_a.shape != a.shape:
            raise ShapeError("local-to-global gate", v.shape, phi_v.shape, a.shape, phi_a.shape)
        v = v * phi_v
        a = a * phi_a
    features = self_attention(concat([v, a], axis=-1), params.final_sa, tau)
    p_c, p_c_seg = classify(features, params.classifier)
    return ClassificationOutput(p_c=p_c, p_c_seg=p_c_seg, features=features)


def localization_forward(visual: Tensor, audio: Tensor, params: ModelParams,
                         config: ModelConfig) -> LocalizationOutput:
    """MBAM and the relevance heads; ``p_r`` is the product of the two modal relevances."""
    code = squeeze_ablation(config.fbc.squeeze, visual, audio, params.mbam, config.fbc.lasso_lambda)
    phi_v, phi_a = excitation(code, params.mbam.excitation)
    v_hat, a_hat = refine(visual, audio, phi_v, phi_a, params.mbam.excitation)
    p_r_visual = relevance(v_hat, params.relevance_visual)
    p_r_audio = relevance(a_hat, params.relevance_audio)
    return LocalizationOutput(
        p_r=p_r_audio * p_r_visual, p_r_visual=p_r_visual, p_r_audio=p_r_audio,
        phi_v=phi_v, phi_a=phi_a, v_hat=v_hat, a_hat=a_hat, code=code,
    )


def mpn_forward(visual, audio, params: ModelParams, config: ModelConfig, tau: float) -> Predictions:
    """Full forward pass.

    Args:
        visual: [B, T, R, p] or [T, R, p] region features (array or Tensor)
        audio: [B, T, q] or [T, q]
        params: Parameters built by ``init_model_params`` for ``config``
        config: Network variant and widths
        tau: Softmax temperature of the co-attention blocks

    Returns:
        Predictions; ``p_j`` is ``p_r`` times the segment-level category distribution

    Raises:
        ParameterError: For an unknown network variant
    """
    if config.network not in NETWORKS:
        raise ParameterError(f"unknown network {config.network!r}, expected one of {NETWORKS}")
    dtype = params.agva.visual.weight.dtype
    v_regions = visual if isinstance(visual, Tensor) else Tensor(np.asarray(visual, dtype=dtype))
    a = audio if isinstance(audio, Tensor) else Tensor(np.asarray(audio, dtype=dtype))
    v, agva_weights = audio_guided_attention(v_regions, a, params.agva)

    loc: Optional[LocalizationOutput] = None
    if config.network == 'parallel':
        loc = localization_forward(v, a, params, config)
        gates = (loc.phi_v, loc.phi_a) if config.local_to_global else None
        cls = classification_forward(v, a, params, config, tau, gates)
        p_r, p_c, p_c_seg = loc.p_r, cls.p_c, cls.p_c_seg
    elif config.network == 'classification':
        cls = classification_forward(v, a, params, config, tau)
        p_r, p_c, p_c_seg = relevance(cls.features, params.segment_relevance), cls.p_c, cls.p_c_seg
    else:
        loc = localization_forward(v, a, params, config)
        p_c, p_c_seg = classify(concat([loc.v_hat, loc.a_hat], axis=-1), params.auxiliary_classifier)
        p_r = loc.p_r

    p_j = reshape(p_r, p_r.shape + (1,)) * p_c_seg
    return Predictions(
        p_r=p_r, p_c=p_c, p_c_seg=p_c_seg, p_j=p_j, agva_weights=agva_weights,
        p_r_visual=loc.p_r_visual if loc else None,
        p_r_audio=loc.p_r_audio if loc else None,
        code=loc.code if loc else None,
    )


def decode_scores(p_r: np.ndarray, p_c: np.ndarray, p_c_seg: Optional[np.ndarray] = None,
                  regime: str = 'full', threshold: float = RELEVANCE_THRESHOLD) -> np.ndarray:
    """Segment labels from probabilities; background is encoded as ``n_classes``.

    In the full regime every event segment takes the video's argmax category;
    in the weak regime each takes its own segment-level argmax.
    """
    if regime not in REGIMES:
        raise ParameterError(f"unknown regime {regime!r}, expected one of {REGIMES}")
    p_r = np.asarray(p_r)
    p_c = np.asarray(p_c)
    background = p_c.shape[-1]
    if regime == 'weak':
        if p_c_seg is None:
            raise ParameterError("weak-regime decoding needs segment-level probabilities")
        categories = np.argmax(np.asarray(p_c_seg), axis=-1)
    else:
        categories = np.broadcast_to(np.argmax(p_c, axis=-1)[..., None], p_r.shape)
    return np.where(p_r >= threshold, categories, background).astype(np.int64)


def decode(preds: Predictions, regime: str = 'full', threshold: float = RELEVANCE_THRESHOLD) -> np.ndarray:
    return decode_scores(preds.p_r.data, preds.p_c.data, preds.p_c_seg.data, regime, threshold)


def stack_inputs(samples: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    """Batch ``visual``/``audio`` arrays of samples along a new leading axis."""
    visual = np.stack([s.visual for s in samples])
    audio = np.stack([s.audio for s in samples])
    return visual, audio
