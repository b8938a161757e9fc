"""
Tests for the parallel network forward pass and decoding.
"""

import numpy as np
import pytest

from src.model.mpn import (ModelConfig, audio_guided_attention, classification_forward, decode, decode_scores,
                           init_model_params, mpn_forward)
from src.utils.config import AttentionConfig, FbcConfig
from src.utils.errors import ParameterError, ShapeError
from src.utils.rng import Rng
from src.utils.tensor import Tensor

T, R, P, Q, C = 4, 3, 6, 5, 3


def _model_config(**kwargs):
    settings = dict(
        attention=AttentionConfig(d_model=8, n_heads=2, d_k=4, d_v=4, ff_hidden=16, n_mcm=2, agva_hidden=8),
        fbc=FbcConfig(rank=2, n_atoms=8),
        n_classes=C, visual_dim=P, audio_dim=Q,
    )
    settings.update(kwargs)
    return ModelConfig(**settings)


def _inputs(seed=0, batch=()):
    rng = Rng(seed)
    return rng.normal(batch + (T, R, P)), rng.normal(batch + (T, Q))


def test_agva_single_region_returns_the_region():
    rng = Rng(1)
    params = init_model_params(_model_config(), rng).agva
    visual = rng.normal((T, 1, P))
    pooled, weights = audio_guided_attention(Tensor(visual), Tensor(rng.normal((T, Q))), params)
    np.testing.assert_array_equal(weights.data, 1.0)
    np.testing.assert_allclose(pooled.data, visual[:, 0], rtol=1e-6)


def test_agva_matches_unrolled_oracle():
    rng = Rng(2)
    params = init_model_params(_model_config(), rng).agva
    params.visual.bias.data = rng.normal(params.visual.bias.shape, scale=0.1)
    visual, audio = rng.normal((2, 3, P)), rng.normal((2, Q))
    pooled, weights = audio_guided_attention(Tensor(visual), Tensor(audio), params)
    for t in range(2):
        scores = []
        for region in range(3):
            hidden = np.tanh(visual[t, region] @ params.visual.weight.data + params.visual.bias.data
                             + audio[t] @ params.audio.weight.data)
            scores.append(float(hidden @ params.score.weight.data[:, 0]))
        e = np.exp(np.array(scores) - max(scores))
        w = e / e.sum()
        np.testing.assert_allclose(weights.data[t], w, rtol=1e-5)
        np.testing.assert_allclose(pooled.data[t], w @ visual[t], rtol=1e-5, atol=1e-6)


def test_agva_shape_mismatch():
    params = init_model_params(_model_config(), Rng(0)).agva
    with pytest.raises(ShapeError):
        audio_guided_attention(Tensor(np.zeros((T, R, P))), Tensor(np.zeros((T + 1, Q))), params)


def test_prediction_shapes_and_product_rule():
    config = _model_config()
    params = init_model_params(config, Rng(3))
    visual, audio = _inputs(4, batch=(2,))
    preds = mpn_forward(visual, audio, params, config, 1.0)
    assert preds.p_r.shape == (2, T)
    assert preds.p_c.shape == (2, C)
    assert preds.p_c_seg.shape == (2, T, C)
    assert preds.agva_weights.shape == (2, T, R)
    np.testing.assert_allclose(preds.p_c.data.sum(axis=-1), 1.0, atol=1e-6)
    np.testing.assert_allclose(preds.p_r.data, preds.p_r_audio.data * preds.p_r_visual.data, rtol=1e-6)
    assert np.all(preds.p_r.data <= np.minimum(preds.p_r_audio.data, preds.p_r_visual.data) + 1e-7)
    np.testing.assert_allclose(preds.p_j.data, preds.p_r.data[..., None] * preds.p_c_seg.data, rtol=1e-6)


@pytest.mark.parametrize("network", ['parallel', 'classification', 'localization'])
def test_single_video_forward(network):
    config = _model_config(network=network)
    params = init_model_params(config, Rng(3))
    visual, audio = _inputs(4)
    preds = mpn_forward(visual, audio, params, config, 1.0)
    assert preds.p_r.shape == (T,)
    assert preds.p_c.shape == (C,)
    assert preds.p_c_seg.shape == (T, C)
    assert preds.agva_weights.shape == (T, R)
    assert preds.p_c.data.sum() == pytest.approx(1.0, abs=1e-6)
    assert decode(preds).shape == (T,)


def test_batched_forward_equals_per_video():
    config = _model_config()
    params = init_model_params(config, Rng(5))
    visual, audio = _inputs(6, batch=(3,))
    batched = mpn_forward(visual, audio, params, config, 2.0)
    for b in range(3):
        single = mpn_forward(visual[b], audio[b], params, config, 2.0)
        np.testing.assert_allclose(batched.p_r.data[b], single.p_r.data, rtol=1e-4, atol=1e-6)
        np.testing.assert_allclose(batched.p_c.data[b], single.p_c.data, rtol=1e-4, atol=1e-6)


def test_segment_permutation_leaves_video_category_unchanged():
    config = _model_config()
    params = init_model_params(config, Rng(7))
    visual, audio = _inputs(8)
    order = np.array([2, 0, 3, 1])
    base = mpn_forward(visual, audio, params, config, 1.0)
    permuted = mpn_forward(visual[order], audio[order], params, config, 1.0)
    np.testing.assert_allclose(permuted.p_c.data, base.p_c.data, rtol=1e-4, atol=1e-6)
    np.testing.assert_allclose(permuted.p_r.data, base.p_r.data[order], rtol=1e-4, atol=1e-6)


def test_without_interaction_category_ignores_localization_weights():
    config = _model_config(local_to_global=False)
    params = init_model_params(config, Rng(9))
    visual, audio = _inputs(10)
    before = mpn_forward(visual, audio, params, config, 1.0).p_c.data.copy()
    params.mbam.excitation.visual_out.data += 5.0
    params.mbam.fbc.visual.data *= -3.0
    after = mpn_forward(visual, audio, params, config, 1.0)
    np.testing.assert_array_equal(after.p_c.data, before)


def test_interaction_gates_change_category():
    config = _model_config()
    params = init_model_params(config, Rng(9))
    visual, audio = _inputs(10)
    gated = mpn_forward(visual, audio, params, config, 1.0)
    config.local_to_global = False
    plain = mpn_forward(visual, audio, params, config, 1.0)
    assert not np.allclose(gated.p_c.data, plain.p_c.data, rtol=0.0, atol=1e-7)
    np.testing.assert_array_equal(gated.p_r.data, plain.p_r.data)


def test_open_gates_equal_no_interaction():
    config = _model_config()
    params = init_model_params(config, Rng(11))
    rng = Rng(12)
    v, a = Tensor(rng.normal((T, P))), Tensor(rng.normal((T, Q)))
    ones = Tensor(np.ones((T, 8), dtype=np.float32))
    gated = classification_forward(v, a, params, config, 1.0, (ones, ones))
    plain = classification_forward(v, a, params, config, 1.0)
    np.testing.assert_array_equal(gated.p_c.data, plain.p_c.data)


@pytest.mark.parametrize("network", ['classification', 'localization'])
def test_single_branch_networks(network):
    config = _model_config(network=network)
    params = init_model_params(config, Rng(13))
    visual, audio = _inputs(14, batch=(2,))
    preds = mpn_forward(visual, audio, params, config, 1.0)
    assert preds.p_r.shape == (2, T) and preds.p_c.shape == (2, C)
    if network == 'classification':
        assert params.mbam is None and preds.p_r_audio is None
    else:
        assert params.mcms is None


def test_unknown_network():
    config = _model_config()
    params = init_model_params(config, Rng(0))
    config.network = 'sequential'
    with pytest.raises(ParameterError):
        mpn_forward(*_inputs(), params, config, 1.0)


def test_gate_width_must_match_model_width():
    config = _model_config(fbc=FbcConfig(rank=2, n_atoms=6))
    with pytest.raises(ShapeError):
        init_model_params(config, Rng(0))


def test_decode_threshold_is_inclusive():
    p_r = np.array([0.5, 0.4999999, 0.9, 0.0])
    p_c = np.array([0.1, 0.7, 0.2])
    np.testing.assert_array_equal(decode_scores(p_r, p_c), [1, 3, 1, 3])


def test_decode_weak_uses_segment_categories():
    p_r = np.array([0.8, 0.8, 0.1])
    p_c = np.array([0.9, 0.05, 0.05])
    p_c_seg = np.array([[0.1, 0.8, 0.1], [0.7, 0.2, 0.1], [0.2, 0.2, 0.6]])
    np.testing.assert_array_equal(decode_scores(p_r, p_c, p_c_seg, regime='weak'), [1, 0, 3])
    np.testing.assert_array_equal(decode_scores(p_r, p_c, p_c_seg, regime='full'), [0, 0, 3])


def test_decode_all_low_relevance_is_background():
    labels = decode_scores(np.full((2, 10), 0.2), np.full((2, 4), 0.25))
    assert np.all(labels == 4)


def test_unknown_regime():
    with pytest.raises(ParameterError):
        decode_scores(np.ones(2), np.ones(3), regime='semi')
