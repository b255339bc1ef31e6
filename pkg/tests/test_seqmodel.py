import numpy as np
import pytest

from tgmc import numerics
from tgmc.seqmodel import (SeqModel, SeqModelConfig, activity_mask,
                           decoder_weight_model, mse_loss_and_grad,
                           predict_next, seq_forward, seq_train)

from oracles import hand_vanilla_rollout


def build(cell="lstm", layers=1, input_dim=2, output_dim=None, hidden_dim=None,
          seed=3, dtype=np.float64):
    cfg = SeqModelConfig(cell=cell, layers=layers, input_dim=input_dim,
                         output_dim=output_dim or input_dim,
                         hidden_dim=hidden_dim)
    return SeqModel(cfg, numerics.make_rng(seed), dtype=dtype)


# ---------------------------------------------------------------------------
# config and parameters
# ---------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        SeqModelConfig(cell="elman")
    with pytest.raises(ValueError):
        SeqModelConfig(layers=4)
    with pytest.raises(ValueError):
        SeqModelConfig(input_dim=0)
    with pytest.raises(ValueError):
        SeqModelConfig(hidden_dim=-1)


def test_hidden_defaults_to_input_dim():
    cfg = SeqModelConfig(input_dim=7)
    assert cfg.hidden_dim == 7


@pytest.mark.parametrize("cell,gates", [("vanilla", 1), ("gru", 3), ("lstm", 4)])
def test_parameter_shapes(cell, gates):
    m = build(cell=cell, layers=2, input_dim=3, output_dim=2, hidden_dim=4)
    p = m.params()
    assert p["l1/w_x"].shape == (gates * 4, 3)
    assert p["l2/w_x"].shape == (gates * 4, 4)   # stacked layer reads hidden
    assert p["l1/w_h"].shape == (gates * 4, 4)
    assert p["l1/b"].shape == (gates * 4,)
    assert np.all(p["l1/b"] == 0)
    assert p["proj/w"].shape == (2, 4)
    assert np.all(p["proj/b"] == 0)


def test_named_prefixes_role():
    m = build()
    names = set(m.named("user"))
    assert "seq/user/l1/w_x" in names and "seq/user/proj/w" in names


def test_load_params_roundtrip():
    m = build(cell="gru", layers=2)
    saved = {k: v.copy() for k, v in m.params().items()}
    m.zero_params()
    assert np.all(m.proj_w == 0)
    m.load_params(saved)
    for k, v in m.params().items():
        assert np.array_equal(v, saved[k])


# ---------------------------------------------------------------------------
# forward semantics
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("cell", ["vanilla", "gru", "lstm"])
def test_zero_parameters_give_zero_states_and_outputs(cell):
    # sigmoid(0)=1/2 gates times zero states stay exactly zero everywhere
    m = build(cell=cell, layers=2, input_dim=3)
    m.zero_params()
    x = numerics.make_rng(0).standard_normal((4, 6, 3))
    y = seq_forward(m, x)
    assert np.all(y == 0)


def test_seq_forward_shapes():
    m = build(cell="lstm", layers=2, input_dim=3, output_dim=2, hidden_dim=5)
    x = np.zeros((7, 4, 3))
    assert seq_forward(m, x).shape == (7, 4, 2)
    # a single row may be passed without the leading axis
    assert seq_forward(m, np.zeros((4, 3))).shape == (4, 2)


def test_seq_forward_validates_input():
    m = build(input_dim=3)
    with pytest.raises(ValueError):
        seq_forward(m, np.zeros((2, 4, 5)))
    with pytest.raises(ValueError):
        seq_forward(m, np.zeros((2, 0, 3)))


def test_vanilla_scalar_recurrence_matches_oracle():
    m = build(cell="vanilla", layers=1, input_dim=1, hidden_dim=1)
    w, r, b = 0.7, -0.4, 0.2
    m.layers[0]["w_x"][...] = w
    m.layers[0]["w_h"][...] = r
    m.layers[0]["b"][...] = b
    m.proj_w[...] = 1.0
    m.proj_b[...] = 0.0
    xs = [0.5, -1.0, 2.0, 0.1]
    got = seq_forward(m, np.array(xs).reshape(1, 4, 1))[0, :, 0]
    want = hand_vanilla_rollout(w, r, b, xs)
    assert np.allclose(got, want, atol=1e-12)


def test_vanilla_rollout_matches_oracle():
    m = build(cell="vanilla", layers=1, input_dim=1, hidden_dim=1)
    w, r, b = 0.9, 0.3, -0.1
    m.layers[0]["w_x"][...] = w
    m.layers[0]["w_h"][...] = r
    m.layers[0]["b"][...] = b
    m.proj_w[...] = 1.0
    xs = [0.2, 0.4, 0.6]
    preds = predict_next(m, np.array(xs).reshape(3, 1), steps=3)
    want = hand_vanilla_rollout(w, r, b, xs, steps_ahead=2)[-3:]
    assert np.allclose(preds[:, 0], want, atol=1e-12)


def test_gru_single_step_hand_computed():
    m = build(cell="gru", layers=1, input_dim=2, hidden_dim=2)
    rng = numerics.make_rng(9)
    x = rng.standard_normal((1, 1, 2))
    y = seq_forward(m, x)

    def sig(a):
        return 1.0 / (1.0 + np.exp(-a))

    wx, wh, b = m.layers[0]["w_x"], m.layers[0]["w_h"], m.layers[0]["b"]
    ax = x[0, 0] @ wx.T + b          # single bias, applied on the input side
    h0 = np.zeros(2)
    ah = h0 @ wh.T
    z = sig(ax[0:2] + ah[0:2])       # gate blocks ordered update, reset, cand
    r = sig(ax[2:4] + ah[2:4])
    n = np.tanh(ax[4:6] + r * ah[4:6])
    h1 = z * h0 + (1.0 - z) * n
    want = m.proj_w @ h1 + m.proj_b
    assert np.allclose(y[0, 0], want, atol=1e-12)


def test_lstm_single_step_hand_computed():
    m = build(cell="lstm", layers=1, input_dim=2, hidden_dim=2)
    rng = numerics.make_rng(4)
    x = rng.standard_normal((1, 1, 2))
    y = seq_forward(m, x)

    def sig(a):
        return 1.0 / (1.0 + np.exp(-a))

    wx, wh, b = m.layers[0]["w_x"], m.layers[0]["w_h"], m.layers[0]["b"]
    a = x[0, 0] @ wx.T + np.zeros(2) @ wh.T + b
    i, f, g, o = sig(a[0:2]), sig(a[2:4]), np.tanh(a[4:6]), sig(a[6:8])
    c1 = f * 0.0 + i * g             # gate blocks ordered input, forget, cell, output
    h1 = o * np.tanh(c1)
    want = m.proj_w @ h1 + m.proj_b
    assert np.allclose(y[0, 0], want, atol=1e-12)


def test_stacked_layers_feed_hidden_state_upward():
    m2 = build(cell="vanilla", layers=2, input_dim=2, hidden_dim=2, seed=8)
    x = numerics.make_rng(1).standard_normal((3, 5, 2))
    y2 = seq_forward(m2, x)

    # replicate: run layer 1 alone, then feed its hidden states to layer 2
    m_lo = build(cell="vanilla", layers=1, input_dim=2, hidden_dim=2, seed=0)
    for k in ("w_x", "w_h", "b"):
        m_lo.layers[0][k][...] = m2.layers[0][k]
    m_lo.proj_w[...] = np.eye(2)
    m_lo.proj_b[...] = 0.0
    h_lo = seq_forward(m_lo, x)

    m_hi = build(cell="vanilla", layers=1, input_dim=2, hidden_dim=2, seed=0)
    for k in ("w_x", "w_h", "b"):
        m_hi.layers[0][k][...] = m2.layers[1][k]
    m_hi.proj_w[...] = m2.proj_w
    m_hi.proj_b[...] = m2.proj_b
    assert np.allclose(seq_forward(m_hi, h_lo), y2, atol=1e-12)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def test_mse_hand_value():
    pred = np.zeros((1, 2, 2))
    target = np.array([[[1.0, 0.0], [0.0, 2.0]]])
    loss, grad = mse_loss_and_grad(pred, target)
    # (1 + 4) / 2 steps
    assert loss == pytest.approx(2.5)
    assert grad[0, 0, 0] == pytest.approx(-1.0)   # 2/2 * (0-1)
    assert grad[0, 1, 1] == pytest.approx(-2.0)


def test_mse_mask_removes_rows():
    pred = np.zeros((2, 2, 1))
    target = np.ones((2, 2, 1))
    mask = np.array([[1.0, 1.0], [0.0, 0.0]])
    loss, grad = mse_loss_and_grad(pred, target, mask)
    assert loss == pytest.approx(1.0)
    assert np.all(grad[1] == 0)


def test_activity_mask_turns_on_at_first_nonzero():
    seq = np.zeros((2, 4, 2))
    seq[0, 1, 0] = 5.0   # row 0 becomes active at step 1
    mask = activity_mask(seq)
    assert mask[0].tolist() == [0, 1, 1, 1]
    assert mask[1].tolist() == [0, 0, 0, 0]


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("cell", ["vanilla", "gru", "lstm"])
def test_training_reduces_loss(cell):
    rng = numerics.make_rng(2)
    # linear drift rows: next step = current + constant velocity
    base = rng.standard_normal((12, 1, 3))
    vel = rng.standard_normal((12, 1, 3)) * 0.1
    steps = np.arange(8).reshape(1, 8, 1)
    seqs = base + vel * steps
    m = build(cell=cell, layers=1, input_dim=3, hidden_dim=8, seed=5)
    curve = seq_train(m, seqs, epochs=200, learning_rate=1e-2)
    assert curve[-1] < 0.05 * curve[0]


def test_training_is_deterministic():
    seqs = numerics.make_rng(0).standard_normal((5, 6, 2))
    runs = []
    for _ in range(2):
        m = build(cell="gru", layers=2, input_dim=2, seed=11)
        seq_train(m, seqs, epochs=20)
        runs.append({k: v.copy() for k, v in m.params().items()})
    for k in runs[0]:
        assert np.array_equal(runs[0][k], runs[1][k])


def test_train_validates_sequences():
    m = build(input_dim=2)
    with pytest.raises(ValueError):
        seq_train(m, np.zeros((3, 1, 2)))
    with pytest.raises(ValueError):
        seq_train(m, np.zeros((3, 2)))


def test_trained_constant_sequence_predicts_constant():
    seqs = np.full((4, 6, 2), 0.5)
    seqs[1] = -0.25
    seqs[2] = 0.8
    seqs[3] = 0.1
    m = build(cell="lstm", layers=1, input_dim=2, hidden_dim=8, seed=6)
    seq_train(m, seqs, epochs=400, learning_rate=2e-2)
    pred = predict_next(m, seqs, steps=1)
    assert np.abs(pred[:, 0] - seqs[:, -1]).max() < 0.05


# ---------------------------------------------------------------------------
# roll-out
# ---------------------------------------------------------------------------

def test_predict_next_shapes():
    m = build(cell="lstm", layers=1, input_dim=3, hidden_dim=4)
    seqs = np.zeros((6, 5, 3))
    assert predict_next(m, seqs, steps=1).shape == (6, 1, 3)
    assert predict_next(m, seqs, steps=3).shape == (6, 3, 3)
    assert predict_next(m, np.zeros((5, 3)), steps=2).shape == (2, 3)


def test_predict_next_validates():
    m = build(input_dim=2)
    with pytest.raises(ValueError):
        predict_next(m, np.zeros((2, 4, 2)), steps=0)
    m_rect = build(input_dim=3, output_dim=2)
    with pytest.raises(ValueError):
        predict_next(m_rect, np.zeros((2, 4, 3)), steps=2)
    # one step ahead is fine for rectangular models
    assert predict_next(m_rect, np.zeros((2, 4, 3)), steps=1).shape == (2, 1, 2)


def test_rollout_extends_history_step_by_step():
    m = build(cell="gru", layers=2, input_dim=2, seed=13)
    seqs = numerics.make_rng(7).standard_normal((3, 5, 2))
    two = predict_next(m, seqs, steps=2)
    one = predict_next(m, seqs, steps=1)
    extended = np.concatenate([seqs, one], axis=1)
    again = predict_next(m, extended, steps=1)
    assert np.allclose(two[:, 0], one[:, 0])
    assert np.allclose(two[:, 1], again[:, 0], atol=1e-12)


# ---------------------------------------------------------------------------
# decoder-weight trajectories
# ---------------------------------------------------------------------------

def test_decoder_weight_model_shapes_and_default_width():
    rng = numerics.make_rng(1)
    q = rng.standard_normal((4, 5, 3, 3)) * 0.1
    model, q_next, losses = decoder_weight_model(q, epochs=5)
    assert q_next.shape == (5, 3, 3)
    assert model.config.hidden_dim == 9       # d*d below the cap
    assert model.config.layers == 1
    assert len(losses) == 5


def test_decoder_weight_model_learns_constant_weights():
    q0 = numerics.make_rng(2).standard_normal((5, 2, 2)) * 0.3
    q = np.repeat(q0[None], 6, axis=0)
    _, q_next, _ = decoder_weight_model(q, epochs=400, learning_rate=2e-2)
    assert np.abs(q_next - q0).max() < 0.05


def test_decoder_weight_model_validates():
    with pytest.raises(ValueError):
        decoder_weight_model(np.zeros((1, 5, 3, 3)))
    with pytest.raises(ValueError):
        decoder_weight_model(np.zeros((4, 5, 3, 2)))
    with pytest.raises(ValueError):
        decoder_weight_model([np.zeros((5, 3, 3)), np.zeros((5, 2, 2))])
