import numpy as np
import pytest

from tgmc import numerics
from tgmc.numerics import (AdamState, DropoutSpec, adam_step, dropout_apply,
                           dropout_mask, glorot_uniform, gradient_check,
                           make_rng, softmax_rowwise, spawn_rngs)

from oracles import hand_adam_step, naive_matmul, naive_softmax


def test_matmul_matches_triple_loop(rng):
    a = rng.normal(size=(4, 5))
    b = rng.normal(size=(5, 3))
    np.testing.assert_allclose(numerics.matmul(a, b), naive_matmul(a, b),
                               rtol=1e-12)


def test_matmul_shape_mismatch():
    with pytest.raises(ValueError):
        numerics.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_softmax_peaked_row():
    # one unit logit against four zeros
    probs = softmax_rowwise(np.array([[1.0, 0.0, 0.0, 0.0, 0.0]]))
    e = np.exp(1.0)
    assert probs[0, 0] == pytest.approx(e / (e + 4), abs=1e-12)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_softmax_handles_large_logits():
    probs = softmax_rowwise(np.array([[1000.0, 0.0, -1000.0]]))
    assert np.all(np.isfinite(probs))
    assert probs[0, 0] == pytest.approx(1.0)


def test_softmax_matches_naive(rng):
    logits = rng.normal(size=(6, 5))
    ours = softmax_rowwise(logits)
    for i in range(6):
        np.testing.assert_allclose(ours[i], naive_softmax(logits[i]), rtol=1e-12)


def test_activation_gradients_finite_difference(rng):
    x = rng.normal(size=20)
    h = 1e-7
    for fn, grad in [(numerics.tanh, numerics.tanh_grad),
                     (numerics.sigmoid, numerics.sigmoid_grad)]:
        numeric = (fn(x + h) - fn(x - h)) / (2 * h)
        np.testing.assert_allclose(grad(x), numeric, atol=1e-6)


def test_sigmoid_extreme_inputs_stable():
    out = numerics.sigmoid(np.array([-1e4, -40.0, 0.0, 40.0, 1e4]))
    assert np.all(np.isfinite(out))
    assert out[0] == 0.0 and out[-1] == 1.0 and out[2] == 0.5


def test_relu_grad_zero_at_origin():
    g = numerics.relu_grad(np.array([-1.0, 0.0, 2.0]))
    np.testing.assert_array_equal(g, [0.0, 0.0, 1.0])


def test_glorot_bounds(rng):
    w = glorot_uniform(rng, 30, 20)
    s = np.sqrt(6.0 / 50.0)
    assert w.shape == (30, 20) and w.dtype == np.float32
    assert np.all(np.abs(w) <= s)
    assert np.abs(w).max() > 0.5 * s  # actually spreads over the range


def test_spawn_rngs_disjoint_and_reproducible():
    a = spawn_rngs(7, 4)
    b = spawn_rngs(7, 4)
    draws_a = [g.random(3).tolist() for g in a]
    draws_b = [g.random(3).tolist() for g in b]
    assert draws_a == draws_b
    assert draws_a[0] != draws_a[1]


def test_dropout_mask_values(rng):
    mask = dropout_mask(rng, (1000,), 0.3)
    kept = mask[mask > 0]
    assert set(np.unique(mask)) <= {0.0, np.float32(1.0 / 0.7)}
    assert 0.6 < len(kept) / 1000 < 0.8


def test_dropout_mc_mean_preserved():
    # inverted scaling keeps the expectation: MC average ~= input
    rng = make_rng(0)
    x = np.ones((200, 50), dtype=np.float32)
    spec = DropoutSpec(0.3, "train")
    total = np.zeros_like(x, dtype=np.float64)
    n = 400
    for _ in range(n):
        total += dropout_apply(x, spec, rng)
    assert abs(total.mean() / n - 1.0) < 0.01


def test_dropout_eval_identity(rng):
    x = rng.normal(size=(5, 5))
    out = dropout_apply(x, DropoutSpec(0.5, "eval"), rng)
    assert out is x


def test_dropout_spec_validation():
    with pytest.raises(ValueError):
        DropoutSpec(1.0, "train")
    with pytest.raises(ValueError):
        DropoutSpec(0.3, "test")


def test_adam_first_step_matches_hand_value():
    # any positive gradient with fresh moments moves the weight by ~lr
    p = {"w": np.array([1.0], dtype=np.float64)}
    g = {"w": np.array([0.5], dtype=np.float64)}
    state = AdamState(learning_rate=0.1)
    adam_step(p, g, state)
    expect = hand_adam_step(1.0, 0.5, lr=0.1)
    assert p["w"][0] == pytest.approx(expect, rel=1e-9)
    assert p["w"][0] == pytest.approx(0.9, abs=1e-6)


def test_adam_bias_correction_two_steps():
    p = {"w": np.array([0.0])}
    state = AdamState(learning_rate=0.01)
    adam_step(p, {"w": np.array([1.0])}, state)
    first = p["w"][0]
    adam_step(p, {"w": np.array([1.0])}, state)
    # constant gradient: each step remains ~lr in the same direction
    assert first == pytest.approx(-0.01, abs=1e-6)
    assert p["w"][0] == pytest.approx(-0.02, abs=1e-5)


def test_adam_rejects_nonfinite_gradient():
    state = AdamState(learning_rate=0.01)
    with pytest.raises(FloatingPointError):
        adam_step({"w": np.zeros(2)}, {"w": np.array([np.nan, 0.0])}, state)


def test_adam_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState(learning_rate=0.01))


def test_gradient_check_catches_wrong_gradient(rng):
    w = rng.normal(size=(3, 3))
    params = {"w": w}

    def f():
        return float((w * w).sum())

    good = {"w": 2 * w}
    bad = {"w": 2 * w + 0.01}
    assert gradient_check(f, params, good) < 1e-8
    assert gradient_check(f, params, bad) > 1e-3


def test_check_finite_raises():
    with pytest.raises(FloatingPointError):
        numerics.check_finite("x", np.array([1.0, np.inf]))
