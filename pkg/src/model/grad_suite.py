"""
Finite-difference checks for every block of the network at a tiny scale.

Each check builds its block in 64-bit precision, reduces the block output to a
scalar with a fixed random readout and compares autodiff gradients with
central differences over inputs and parameters. Inputs of soft-threshold
blocks are redrawn until no pre-threshold value sits within ``KINK_MARGIN``
of a kink.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from ..utils.config import AttentionConfig, FbcConfig
from ..utils.errors import ConfigError, NumericalError
from ..utils.grad_check import DEFAULT_H, DEFAULT_TOL, GradCheckReport, grad_check
from ..utils.rng import Rng
from ..utils.tensor import Tensor, concat, float64_mode, layer_norm, no_grad, sigmoid, softmax_t, sum_over
from .attention import cross_modal_attention, init_block, init_mcm, mcm_stack, self_attention
from .losses import binary_cross_entropy, full_loss, mil_pool, weak_loss
from .mbam import FusedCode, excitation, fbc_squeeze, init_mbam, refine
from .mpn import ModelConfig, audio_guided_attention, classify, init_model_params, mpn_forward, relevance
from .params import init_layer_norm, named_parameters

logger = logging.getLogger(__name__)

KINK_MARGIN = 1e-3
MAX_REDRAWS = 50
SUITE_TAU = 2.0


@dataclass
class Scale:
    n_segments: int
    n_regions: int
    visual_dim: int
    audio_dim: int
    n_classes: int
    attention: AttentionConfig
    fbc: FbcConfig
    max_coords: Optional[int] = 12


SCALES = {
    'tiny': Scale(
        n_segments=3, n_regions=2, visual_dim=6, audio_dim=4, n_classes=3,
        attention=AttentionConfig(d_model=8, n_heads=2, d_k=4, d_v=4, ff_hidden=16, n_mcm=2, agva_hidden=8),
        fbc=FbcConfig(rank=2, n_atoms=8, lasso_lambda=0.1),
    ),
}


def _miswired_sigmoid(x: Tensor) -> Tensor:
    # backward drops the (1 - s) factor
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    out = Tensor.from_op(s, (x,), "sigmoid")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g * s)
    return out


def _leaf(rng: Rng, shape, scale: float = 1.0) -> Tensor:
    return Tensor(rng.normal(shape, scale=scale, dtype=np.float64), requires_grad=True)


def _readout(f: Callable[[], Tensor], rng: Rng) -> Callable[[], Tensor]:
    with no_grad():
        shape = f().shape
    weights = Tensor(rng.normal(shape, dtype=np.float64))
    return lambda: sum_over(f() * weights)


def _kink_free(values: np.ndarray, threshold: float) -> bool:
    distance = np.abs(np.abs(values) - threshold)
    return bool(np.all(distance > KINK_MARGIN))


@dataclass
class _Check:
    name: str
    objective: Callable[[], Tensor]
    params: Dict[str, Tensor] = field(default_factory=dict)


def _with_params(prefix: str, obj, extra: Optional[Dict[str, Tensor]] = None) -> Dict[str, Tensor]:
    named = dict(extra or {})
    named.update({f"{prefix}.{name}": t for name, t in named_parameters(obj)})
    return named


def _attention_checks(scale: Scale, rng: Rng) -> List[_Check]:
    att = scale.attention
    T, d = scale.n_segments, att.d_model
    r = rng.spawn(12)
    checks = []

    x = _leaf(r[0], (2, 4))
    checks.append(_Check('softmax_t', _readout(lambda: softmax_t(x, SUITE_TAU, axis=-1), r[1]), {'x': x}))

    x_ln = _leaf(r[2], (T, d))
    norm = init_layer_norm(d)
    norm.gain.data = 1.0 + 0.1 * r[3].normal((d,), dtype=np.float64)
    checks.append(_Check('layer_norm', _readout(lambda: layer_norm(x_ln, norm.gain, norm.bias), r[4]),
                         _with_params('norm', norm, {'x': x_ln})))

    f = _leaf(r[5], (T, d))
    sa = init_block(r[6], d, att)
    checks.append(_Check('SA', _readout(lambda: self_attention(f, sa, SUITE_TAU), r[7]),
                         _with_params('sa', sa, {'f': f})))

    q, c = _leaf(r[8], (T, d)), _leaf(r[8], (T, d))
    cma = init_block(r[9], d, att)
    checks.append(_Check('CMA', _readout(lambda: cross_modal_attention(q, c, cma, SUITE_TAU), r[10]),
                         _with_params('cma', cma, {'query': q, 'context': c})))

    v_in, a_in = r[11].spawn(2)
    v, a = _leaf(v_in, (T, d)), _leaf(a_in, (T, d))
    mcm_rngs = r[11].spawn(3)
    modules = [init_mcm(child, att) for child in mcm_rngs[:2]]
    order = att.mcm_order

    def cascade():
        v_out, a_out = mcm_stack(v, a, modules, SUITE_TAU, order)
        return concat([v_out, a_out], axis=-1)
    checks.append(_Check('MCM', _readout(cascade, mcm_rngs[2]),
                         _with_params('mcm', modules, {'v': v, 'a': a})))
    return checks


def _mbam_checks(scale: Scale, rng: Rng) -> List[_Check]:
    T, p, q, k = scale.n_segments, scale.visual_dim, scale.audio_dim, scale.fbc.n_atoms
    lam = scale.fbc.lasso_lambda
    r = rng.spawn(8)
    mbam = init_mbam(r[0], p, q, scale.fbc)
    draws = r[1].spawn(MAX_REDRAWS)
    for draw in draws:
        v_rng, a_rng = draw.spawn(2)
        fv, fa = _leaf(v_rng, (T, p)), _leaf(a_rng, (T, q))
        with no_grad():
            code = fbc_squeeze(fv, fa, mbam.fbc, lam)
        if _kink_free(code.pre_threshold.data, lam / 2.0):
            break
    else:
        raise NumericalError(f"no kink-free FBC input after {MAX_REDRAWS} draws")
    checks = [_Check('FBC', _readout(lambda: fbc_squeeze(fv, fa, mbam.fbc, lam).z, r[2]),
                     _with_params('fbc', mbam.fbc, {'visual': fv, 'audio': fa}))]

    z = _leaf(r[3], (T, k))
    exc = mbam.excitation

    def gates():
        phi_v, phi_a = excitation(FusedCode(z=z), exc)
        return concat([phi_v, phi_a], axis=-1)
    checks.append(_Check('excitation', _readout(gates, r[4]),
                         {'z': z, 'visual_hidden': exc.visual_hidden, 'visual_out': exc.visual_out,
                          'audio_hidden': exc.audio_hidden, 'audio_out': exc.audio_out}))

    v_rng, a_rng, gv_rng, ga_rng = r[5].spawn(4)
    rv, ra = _leaf(v_rng, (T, p)), _leaf(a_rng, (T, q))
    phi_v = Tensor(0.5 * (1.0 + np.tanh(gv_rng.normal((T, k), dtype=np.float64))), requires_grad=True)
    phi_a = Tensor(0.5 * (1.0 + np.tanh(ga_rng.normal((T, k), dtype=np.float64))), requires_grad=True)

    def refined():
        v_hat, a_hat = refine(rv, ra, phi_v, phi_a, exc)
        return v_hat + a_hat
    checks.append(_Check('refine', _readout(refined, r[6]),
                         _with_params('refine', [exc.refine_visual, exc.refine_audio],
                                      {'visual': rv, 'audio': ra, 'phi_v': phi_v, 'phi_a': phi_a})))
    return checks


def _head_checks(scale: Scale, rng: Rng, sig: Callable[[Tensor], Tensor]) -> List[_Check]:
    T, C, R = scale.n_segments, scale.n_classes, scale.n_regions
    p, q, k = scale.visual_dim, scale.audio_dim, scale.fbc.n_atoms
    r = rng.spawn(14)
    model_config = ModelConfig(attention=scale.attention, fbc=scale.fbc, n_classes=C,
                               visual_dim=p, audio_dim=q)
    params = init_model_params(model_config, r[0])
    checks = []

    regions, audio = _leaf(r[1], (T, R, p)), _leaf(r[2], (T, q))
    checks.append(_Check('AGVA', _readout(lambda: audio_guided_attention(regions, audio, params.agva)[0], r[3]),
                         _with_params('agva', params.agva, {'visual': regions, 'audio': audio})))

    feats = _leaf(r[4], (T, 2 * scale.attention.d_model))
    checks.append(_Check('heads.classifier',
                         _readout(lambda: classify(feats, params.classifier)[0], r[5]),
                         _with_params('classifier', params.classifier, {'features': feats})))
    seg_feats = _leaf(r[6], (T, 2 * scale.attention.d_model))
    checks.append(_Check('heads.segment_classifier',
                         _readout(lambda: classify(seg_feats, params.classifier)[1], r[7]),
                         _with_params('classifier', params.classifier, {'features': seg_feats})))
    rel_feats = _leaf(r[8], (T, k))
    checks.append(_Check('heads.relevance', _readout(lambda: relevance(rel_feats, params.relevance_visual), r[9]),
                         _with_params('relevance', params.relevance_visual, {'features': rel_feats})))

    labels_rng, logits_rng = r[10].spawn(2)
    segment_labels = labels_rng.integers(0, C + 1, size=(2, T))
    video_labels = labels_rng.integers(0, C, size=2)
    r_logit, c_logit = _leaf(logits_rng, (2, T)), _leaf(logits_rng, (2, C))
    checks.append(_Check('loss.full', lambda: full_loss(sigmoid(r_logit), softmax_t(c_logit, 1.0),
                                                        segment_labels, video_labels, 0.6),
                         {'r_logit': r_logit, 'c_logit': c_logit}))

    j_logit = _leaf(r[11], (2, T, C))
    checks.append(_Check('loss.weak', lambda: weak_loss(mil_pool(sigmoid(j_logit)), video_labels),
                         {'j_logit': j_logit}))

    w, x = _leaf(r[12], (4, 1)), Tensor(r[13].normal((5, 4), dtype=np.float64))
    targets = (r[13].uniform(0, 1, (5, 1)) > 0.5).astype(np.float64)
    checks.append(_Check('loss.bce_sigmoid', lambda: binary_cross_entropy(sig(x @ w), targets), {'w': w}))
    return checks


def _end_to_end_checks(scale: Scale, rng: Rng) -> List[_Check]:
    T, C, R = scale.n_segments, scale.n_classes, scale.n_regions
    p, q = scale.visual_dim, scale.audio_dim
    r = rng.spawn(3)
    model_config = ModelConfig(attention=scale.attention, fbc=scale.fbc, n_classes=C, visual_dim=p, audio_dim=q)
    params = init_model_params(model_config, r[0])
    lam = scale.fbc.lasso_lambda
    for draw in r[1].spawn(MAX_REDRAWS):
        v_rng, a_rng = draw.spawn(2)
        visual = v_rng.normal((2, T, R, p), dtype=np.float64)
        audio = a_rng.normal((2, T, q), dtype=np.float64)
        with no_grad():
            preds = mpn_forward(visual, audio, params, model_config, SUITE_TAU)
        if _kink_free(preds.code.pre_threshold.data, lam / 2.0):
            break
    else:
        raise NumericalError(f"no kink-free end-to-end input after {MAX_REDRAWS} draws")
    segment_labels = r[2].integers(0, C + 1, size=(2, T))
    video_labels = r[2].integers(0, C, size=2)
    named = _with_params('model', params)

    def supervised():
        out = mpn_forward(visual, audio, params, model_config, SUITE_TAU)
        return full_loss(out.p_r, out.p_c, segment_labels, video_labels, 0.6)

    def weakly_supervised():
        out = mpn_forward(visual, audio, params, model_config, SUITE_TAU)
        return weak_loss(mil_pool(out.p_j), video_labels)

    return [_Check('end_to_end.full', supervised, named), _Check('end_to_end.weak', weakly_supervised, named)]


def run_suite(scale_name: str = 'tiny', inject_bug: bool = False, seed: int = 0,
              h: float = DEFAULT_H, tol: float = DEFAULT_TOL, progress: bool = False) -> List[GradCheckReport]:
    """Check every block; returns one report per block in a fixed order.

    Args:
        scale_name: Key of ``SCALES``
        inject_bug: Swap in a sigmoid with a wrong backward rule (negative control)

    Raises:
        ConfigError: For an unknown scale
        NumericalError: If a check cannot find kink-free inputs or hits a non-finite value
    """
    if scale_name not in SCALES:
        raise ConfigError(f"unknown grad-check scale {scale_name!r}, expected one of {sorted(SCALES)}")
    scale = SCALES[scale_name]
    sig = _miswired_sigmoid if inject_bug else sigmoid
    reports = []
    with float64_mode():
        streams = Rng(seed).spawn(5)
        checks = (_attention_checks(scale, streams[0]) + _mbam_checks(scale, streams[1])
                  + _head_checks(scale, streams[2], sig) + _end_to_end_checks(scale, streams[3]))
        for check in checks:
            report = grad_check(check.objective, check.params, h=h, tol=tol, max_coords=scale.max_coords,
                                rng=streams[4], name=check.name, progress=progress)
            logger.info(report.summary())
            reports.append(report)
    return reports
