import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finpersona.exceptions import DataError, DimensionError
from finpersona.personalizer import (
    AdamW,
    ModelConfig,
    PersonalizationBatch,
    PersonalizerModel,
    TemporalPersonalizer,
    TrainConfig,
    argmax_labels,
    attention_pool,
    build_batch,
    clip_global_norm,
    forward,
    init_params,
    loss_and_grads,
    month_labels,
    multitask_loss,
    standardize,
    train,
)
from finpersona.personalizer.network import log_softmax, softmax
from finpersona.rules import HEAD_SIZES, HEADS

SMALL = dict(f_features=3, s_features=2, k_months=4, d_proj=4, d_hidden=3, d_attn=3, d_embed=2, d_trunk=5)


def _batch(n, cfg, rng):
    return {
        "temporal": rng.normal(size=(n, cfg.k_months, cfg.f_features)),
        "static": rng.normal(size=(n, cfg.s_features)),
        "segment": rng.integers(0, 5, n),
        "intent": rng.integers(0, 5, n),
    }


def _labels(n, rng):
    return {h: rng.integers(0, HEAD_SIZES[h], n) for h in HEADS}


def _raw_batch(n, k, f, s, rng):
    temporal = rng.normal(size=(n, k, f))
    return PersonalizationBatch(
        np.arange(1, n + 1), temporal, rng.normal(size=(n, s)),
        rng.integers(0, 5, n), rng.integers(0, 5, n),
    )


# ---------------------------------------------------------------- forward


def test_zero_network_gives_zero_logits_and_uniform_attention(rng):
    cfg = ModelConfig(**SMALL, dropout=0.0)
    params = {k: np.zeros_like(v) for k, v in init_params(cfg).items()}
    out, _ = forward(params, cfg, _batch(7, cfg, rng))
    for h in HEADS:
        assert out["logits"][h].shape == (7, HEAD_SIZES[h])
        assert np.all(out["logits"][h] == 0.0)
    np.testing.assert_allclose(out["attention"], 0.25)


def test_infinite_score_selects_single_step(rng):
    H = rng.normal(size=(3, 4, 5))
    scores = rng.normal(size=(3, 4))
    scores[:, 2] = np.inf
    pooled, alpha = attention_pool(H, scores)
    np.testing.assert_array_equal(pooled, H[:, 2])
    np.testing.assert_array_equal(alpha, np.eye(4)[[2, 2, 2]])


def test_softmax_shift_invariant_and_normalized(rng):
    s = rng.normal(size=(10, 6))
    np.testing.assert_allclose(softmax(s), softmax(s + 100.0), atol=1e-15)
    np.testing.assert_allclose(softmax(s).sum(axis=1), 1.0)


def test_attention_weights_sum_to_one(rng):
    cfg = ModelConfig(**SMALL)
    out, _ = forward(init_params(cfg), cfg, _batch(20, cfg, rng))
    np.testing.assert_allclose(out["attention"].sum(axis=1), 1.0, atol=1e-12)
    assert np.all(out["attention"] >= 0)


def test_fused_width_shrinks_per_disabled_embedding():
    full = ModelConfig(**SMALL)
    assert ModelConfig(**SMALL, use_intent=False).fused_width == full.fused_width - full.d_embed
    assert ModelConfig(**SMALL, use_segment=False).fused_width == full.fused_width - full.d_embed
    both = ModelConfig(**SMALL, use_intent=False, use_segment=False)
    assert both.fused_width == full.fused_width - 2 * full.d_embed


def test_disabled_temporal_attends_to_last_month(rng):
    cfg = ModelConfig(**SMALL, use_temporal=False)
    out, _ = forward(init_params(cfg), cfg, _batch(4, cfg, rng))
    np.testing.assert_array_equal(out["attention"], np.eye(cfg.k_months)[[-1] * 4])


def test_bad_shapes_and_ids_raise(rng):
    cfg = ModelConfig(**SMALL)
    params = init_params(cfg)
    b = _batch(3, cfg, rng)
    with pytest.raises(DimensionError):
        forward(params, cfg, {**b, "temporal": b["temporal"][:, :2]})
    with pytest.raises(DimensionError):
        forward(params, cfg, {**b, "static": b["static"][:, :1]})
    with pytest.raises(DimensionError):
        forward(params, cfg, {**b, "intent": b["intent"][:2]})
    with pytest.raises(DataError):
        forward(params, cfg, {**b, "segment": np.array([0, 5, 1])})
    with pytest.raises(DataError):
        forward(params, cfg, {**b, "intent": np.array([-1, 0, 1])})
    with pytest.raises(DimensionError):
        ModelConfig(**{**SMALL, "d_hidden": 0})


# ---------------------------------------------------------------- gradients


def _numeric_grad(params, cfg, batch, labels, name, eps=1e-6):
    p = params[name]
    g = np.zeros_like(p)
    for idx in np.ndindex(p.shape):
        old = p[idx]
        p[idx] = old + eps
        up = multitask_loss(forward(params, cfg, batch)[0]["logits"], labels)
        p[idx] = old - eps
        down = multitask_loss(forward(params, cfg, batch)[0]["logits"], labels)
        p[idx] = old
        g[idx] = (up - down) / (2 * eps)
    return g


@pytest.mark.parametrize("flags", list(itertools.product([True, False], repeat=3)))
def test_gradients_match_finite_differences(flags):
    use_temporal, use_segment, use_intent = flags
    rng = np.random.default_rng(5)
    cfg = ModelConfig(**SMALL, dropout=0.0, use_temporal=use_temporal,
                      use_segment=use_segment, use_intent=use_intent, seed=3)
    params = init_params(cfg)
    batch = _batch(2, cfg, rng)
    labels = _labels(2, rng)
    _, grads = loss_and_grads(params, cfg, batch, labels)
    for name in params:
        num = _numeric_grad(params, cfg, batch, labels, name)
        denom = max(np.linalg.norm(num) + np.linalg.norm(grads[name]), 1e-10)
        rel = np.linalg.norm(num - grads[name]) / denom
        assert rel < 1e-4 or np.abs(num - grads[name]).max() < 1e-9, (name, rel)


def test_unused_tensors_get_zero_gradient(rng):
    cfg = ModelConfig(**SMALL, dropout=0.0, use_temporal=False, use_segment=False, use_intent=False)
    params = init_params(cfg)
    _, grads = loss_and_grads(params, cfg, _batch(3, cfg, rng), _labels(3, rng))
    for name in ("gru_fwd_Wx", "gru_bwd_Wh", "attn_W", "attn_q", "seg_emb", "intent_emb"):
        assert np.all(grads[name] == 0.0)


# ---------------------------------------------------------------- loss


def test_uniform_logits_loss():
    logits = {h: np.zeros((5, HEAD_SIZES[h])) for h in HEADS}
    labels = {h: np.zeros(5, dtype=int) for h in HEADS}
    expected = math.log(6) + math.log(4) + math.log(3) + math.log(3)
    assert multitask_loss(logits, labels) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(5.3752, abs=1e-4)


def test_saturated_logits_loss_near_zero():
    labels = {h: np.arange(4) % HEAD_SIZES[h] for h in HEADS}
    logits = {h: 50.0 * np.eye(HEAD_SIZES[h])[labels[h]] for h in HEADS}
    assert multitask_loss(logits, labels) < 1e-3


def test_log_softmax_matches_direct_formula(rng):
    z = rng.normal(scale=3.0, size=(50, 6))
    direct = np.log(np.exp(z) / np.exp(z).sum(axis=1, keepdims=True))
    np.testing.assert_allclose(log_softmax(z), direct, atol=1e-9)


def test_log_softmax_stable_for_large_logits():
    z = np.array([[1000.0, 0.0, -1000.0]])
    out = log_softmax(z)
    assert np.all(np.isfinite(out))
    assert out[0, 0] == pytest.approx(0.0)


def test_out_of_range_labels_raise():
    logits = {h: np.zeros((2, HEAD_SIZES[h])) for h in HEADS}
    labels = {h: np.zeros(2, dtype=int) for h in HEADS}
    with pytest.raises(DataError):
        multitask_loss(logits, {**labels, "channel": np.array([0, 4])})
    with pytest.raises(DataError):
        multitask_loss(logits, {**labels, "product": np.array([-1, 0])})
    with pytest.raises(DimensionError):
        multitask_loss(logits, {**labels, "level": np.array([0])})


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-50, 50))
def test_loss_invariant_to_constant_shift(seed, c):
    rng = np.random.default_rng(seed)
    logits = {h: rng.normal(size=(4, HEAD_SIZES[h])) for h in HEADS}
    labels = _labels(4, rng)
    shifted = {h: v + c for h, v in logits.items()}
    assert multitask_loss(shifted, labels) == pytest.approx(multitask_loss(logits, labels), abs=1e-9)
    np.testing.assert_array_equal(argmax_labels(logits), argmax_labels(shifted))


def test_argmax_ties_go_to_lowest_index():
    logits = {h: np.zeros((2, HEAD_SIZES[h])) for h in HEADS}
    logits["product"][1, [2, 4]] = 1.0
    preds = argmax_labels(logits)
    assert preds[0].tolist() == [0, 0, 0, 0]
    assert preds[1, 0] == 2


# ---------------------------------------------------------------- optimizer


def test_clip_global_norm_oracle(rng):
    grads = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=5)}
    total = math.sqrt(sum(float((g**2).sum()) for g in grads.values()))
    before = {k: v.copy() for k, v in grads.items()}
    assert clip_global_norm(grads, 0.5) == pytest.approx(total)
    after = math.sqrt(sum(float((g**2).sum()) for g in grads.values()))
    assert after == pytest.approx(0.5)
    for k in grads:
        np.testing.assert_allclose(grads[k], before[k] * 0.5 / total)
    small = {k: v * 1e-3 for k, v in before.items()}
    copy = {k: v.copy() for k, v in small.items()}
    clip_global_norm(small, 1.0)
    for k in small:
        np.testing.assert_array_equal(small[k], copy[k])


def test_adamw_single_step_oracle():
    p = {"W": np.array([[1.0, -2.0]]), "b": np.array([0.5])}
    g = {"W": np.array([[0.1, 0.3]]), "b": np.array([-0.2])}
    lr, wd = 0.01, 0.1
    opt = AdamW(p, lr=lr, weight_decay=wd)
    opt.step(p, g)
    # after one step the bias-corrected ratio is g/|g| up to eps
    W = np.array([[1.0, -2.0]])
    W = W - lr * wd * W
    W = W - lr * np.array([[0.1, 0.3]]) / (np.abs([[0.1, 0.3]]) + 1e-8)
    np.testing.assert_allclose(p["W"], W, rtol=1e-12)
    np.testing.assert_allclose(p["b"], [0.5 + lr * 0.2 / (0.2 + 1e-8)], rtol=1e-12)


def test_adamw_decay_only_on_matrices():
    p = {"W": np.ones((2, 2)), "b": np.ones(2)}
    g = {"W": np.zeros((2, 2)), "b": np.zeros(2)}
    opt = AdamW(p, lr=0.1, weight_decay=0.5)
    opt.step(p, g)
    np.testing.assert_allclose(p["W"], 0.95)
    np.testing.assert_array_equal(p["b"], 1.0)


# ---------------------------------------------------------------- training


def _train_data(n, seed=0):
    rng = np.random.default_rng(seed)
    raw = _raw_batch(n, 4, 3, 2, rng)
    # product depends on the last month, channel on the static block
    Y = np.stack([
        (raw.temporal[:, -1, 0] > 0).astype(int) * 2,
        (raw.static[:, 0] > 0).astype(int),
        raw.segment % 3,
        raw.intent % 3,
    ], axis=1)
    return raw, Y


def _configs(raw, **kw):
    m = dict(f_features=raw.temporal.shape[2] + 1, s_features=raw.static.shape[1], k_months=4,
             d_proj=8, d_hidden=8, d_attn=8, d_embed=4, d_trunk=16, dropout=0.0)
    t = dict(lr=1e-2, batch_size=32, max_epochs=30, patience=30, seed=0)
    for k, v in kw.items():
        (m if k in ModelConfig.__dataclass_fields__ else t)[k] = v
    return ModelConfig(**m), TrainConfig(**t)


def _std(raw):
    from finpersona.personalizer.model import _fit_scaler

    return standardize(raw, _fit_scaler(raw))


def test_zero_learning_rate_keeps_initial_weights():
    raw, Y = _train_data(64)
    b = _std(raw)
    mcfg, tcfg = _configs(raw, lr=0.0, max_epochs=3, patience=5)
    model, _ = train(b, Y, b, Y, mcfg, tcfg)
    init = init_params(mcfg)
    for k in init:
        np.testing.assert_array_equal(model.params[k], init[k])


def test_overfits_small_dataset():
    raw, Y = _train_data(200)
    b = _std(raw)
    mcfg, tcfg = _configs(raw)
    _, hist = train(b, Y, b, Y, mcfg, tcfg)
    assert hist[29]["train_loss"] < hist[0]["train_loss"]
    assert hist[-1]["val_macro_f1"] > hist[0]["val_macro_f1"]


def test_early_stopping_contract():
    raw, Y = _train_data(120, seed=1)
    rv, Yv = _train_data(60, seed=2)
    b, bv = _std(raw), _std(rv)
    mcfg, tcfg = _configs(raw, max_epochs=60, patience=3, lr=5e-2)
    model, hist = train(b, Y, bv, Yv, mcfg, tcfg)
    scores = [r["val_macro_f1"] for r in hist]
    best_epoch = int(np.argmax(scores)) + 1
    if len(hist) < 60:
        assert len(hist) == best_epoch + 3
    for r in hist[best_epoch:]:
        assert r["val_macro_f1"] <= scores[best_epoch - 1]
    # the returned weights are those of the best epoch
    _, tb = _configs(raw, max_epochs=best_epoch, patience=3, lr=5e-2)
    again, _ = train(b, Y, bv, Yv, mcfg, tb)
    for k in model.params:
        np.testing.assert_array_equal(model.params[k], again.params[k])


def test_training_is_deterministic():
    raw, Y = _train_data(80)
    b = _std(raw)
    mcfg, tcfg = _configs(raw, max_epochs=4, dropout=0.2)
    m1, h1 = train(b, Y, b, Y, mcfg, tcfg)
    m2, h2 = train(b, Y, b, Y, mcfg, tcfg)
    assert h1 == h2
    for k in m1.params:
        np.testing.assert_array_equal(m1.params[k], m2.params[k])


def test_train_rejects_bad_inputs():
    raw, Y = _train_data(10)
    b = _std(raw)
    mcfg, tcfg = _configs(raw, max_epochs=1)
    with pytest.raises(DataError):
        train(b.take(np.array([], dtype=int)), Y[:0], b, Y, mcfg, tcfg)
    with pytest.raises(DimensionError):
        train(b, Y[:, :3], b, Y, mcfg, tcfg)


def test_model_json_round_trip(tmp_path):
    raw, Y = _train_data(40)
    est = TemporalPersonalizer(d_proj=4, d_hidden=4, d_attn=4, d_embed=2, d_trunk=8,
                               max_epochs=2, seed=3).fit(raw, Y)
    path = tmp_path / "m.json"
    est.model_.save(path)
    loaded = PersonalizerModel.load(path)
    for k in est.model_.params:
        np.testing.assert_array_equal(loaded.params[k], est.model_.params[k])
    again = TemporalPersonalizer.from_model(loaded)
    np.testing.assert_array_equal(again.predict(raw), est.predict(raw))


def test_estimator_api(tmp_path):
    raw, Y = _train_data(60)
    est = TemporalPersonalizer(d_proj=4, d_hidden=4, d_attn=4, d_embed=2, d_trunk=8, max_epochs=3)
    assert est.get_params()["d_hidden"] == 4
    with pytest.raises(DataError):
        est.predict(raw)
    est.fit(raw, Y)
    assert est.predict(raw).shape == (60, 4)
    proba = est.predict_proba(raw)
    for h in HEADS:
        np.testing.assert_allclose(proba[h].sum(axis=1), 1.0)
    assert 0.0 <= est.score(raw, Y) <= 1.0
    recs = est.predict_records(raw)
    assert len(recs) == 60 and recs[0].attention_weights.shape == (4,)
    assert set(recs[0].action) == set(HEADS)
    assert est.loss(raw, Y) > 0


def test_standardize_marks_unobserved_months():
    rng = np.random.default_rng(0)
    raw = _raw_batch(5, 4, 3, 2, rng)
    raw.temporal[0, :2] = np.nan
    b = _std(raw)
    assert b.temporal.shape == (5, 4, 4)
    np.testing.assert_array_equal(b.temporal[0, :2], 0.0)
    np.testing.assert_array_equal(b.temporal[:, :, -1][0], [0, 0, 1, 1])
    assert np.all(b.temporal[1:, :, -1] == 1)


# ---------------------------------------------------------------- batches


def test_intent_months_align_with_history(small_data):
    _, static, months = small_data
    ids = np.sort(static["customer_id"].to_numpy())[:10]
    per_month = np.tile(np.arange(6) % 5, (10, 1))
    b = build_batch(static, months, ids, np.zeros(10, int), per_month, end_months=[4, 6])
    assert len(b) == 20
    assert b.intent_months.shape == (20, 6)
    # item for month 4: two unobserved leading slots then months 1..4
    assert b.intent_months[0].tolist() == [-1, -1, 0, 1, 2, 3]
    assert b.intent_months[1].tolist() == [0, 1, 2, 3, 4, 0]
    np.testing.assert_array_equal(b.intent, b.intent_months[:, -1])
    assert np.isnan(b.temporal[0, :2]).all() and not np.isnan(b.temporal[0, 2:]).any()
    np.testing.assert_array_equal(b.month_index[:2], [4, 6])
    Y = month_labels(months, ids, end_months=[4, 6])
    assert Y.shape == (20, 4)
    sub = b.take(np.array([1, 3]))
    assert sub.intent_months.shape == (2, 6)
    with pytest.raises(DimensionError):
        PersonalizationBatch(b.customer_ids, b.temporal, b.static, b.segment, b.intent,
                             intent_months=b.intent_months[:, :3])


def test_build_batch_errors(small_data):
    _, static, months = small_data
    ids = np.sort(static["customer_id"].to_numpy())[:4]
    with pytest.raises(DataError):
        build_batch(static, months, ids[::-1], np.zeros(4, int), np.zeros(4, int))
    with pytest.raises(DimensionError):
        build_batch(static, months, ids, np.zeros(3, int), np.zeros(4, int))
    with pytest.raises(DataError):
        build_batch(static, months, ids, np.zeros(4, int), np.zeros((4, 6), int), end_months=[7])


def test_learns_rule_table_with_clean_labels():
    # noiseless labels and true segment/intent ids: every action is a lookup
    # in the rule table, so a converged network should reproduce it
    from finpersona.synthgen import GeneratorConfig, generate

    cfg = GeneratorConfig(n_customers=4400, seed=3, label_noise=0.0)
    static, months = generate(cfg)
    static = static.sort_values("customer_id")
    ids = static["customer_id"].to_numpy()
    seg = static["true_segment"].to_numpy()
    intent = months.pivot(index="customer_id", columns="month_index", values="true_intent").loc[ids].to_numpy()

    def items(sl, ends=None):
        b = build_batch(static, months, ids[sl], seg[sl], intent[sl], end_months=ends)
        return b, month_labels(months, ids[sl], end_months=ends)

    train_b, train_y = items(slice(0, 4000), [4, 5, 6])
    val = items(slice(4000, 4300))
    test_b, test_y = items(slice(4300, 4400))
    est = TemporalPersonalizer(max_epochs=150, patience=30, lr=1e-3, batch_size=64, seed=0)
    est.fit(train_b, train_y, eval_set=val)
    correct = (est.predict(test_b) == test_y).all(axis=1).sum()
    assert correct >= 95
