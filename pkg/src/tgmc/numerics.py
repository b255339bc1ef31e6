"""Dense numeric kernels shared by every learnable component.

Everything here operates on plain 2-D ``numpy`` arrays (row-major). Training
runs in float32; gradient verification re-runs the same code paths in
float64. Gradients throughout the package are hand-derived, so the
finite-difference checker at the bottom of this module is the ground truth
every layer is validated against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray

DEFAULT_DTYPE = np.float32


def check_finite(name: str, x: Array) -> Array:
    """Reject NaN/Inf at checkpoint boundaries."""
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in '{name}'")
    return x


# ---------------------------------------------------------------------------
# basic kernels
# ---------------------------------------------------------------------------

def matmul(a: Array, b: Array) -> Array:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def add(a: Array, b: Array) -> Array:
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")
    return a + b


def hadamard(a: Array, b: Array) -> Array:
    if a.shape != b.shape:
        raise ValueError(f"hadamard shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def transpose(a: Array) -> Array:
    if a.ndim != 2:
        raise ValueError(f"transpose expects a matrix, got ndim={a.ndim}")
    return a.T.copy()


# ---------------------------------------------------------------------------
# activations and their exact derivatives
# ---------------------------------------------------------------------------

def relu(x: Array) -> Array:
    return np.maximum(x, 0)


def relu_grad(x: Array) -> Array:
    """Derivative w.r.t. the pre-activation (subgradient 0 at x == 0)."""
    return (x > 0).astype(x.dtype)


def tanh(x: Array) -> Array:
    return np.tanh(x)


def tanh_grad(x: Array) -> Array:
    t = np.tanh(x)
    return 1.0 - t * t


def sigmoid(x: Array) -> Array:
    # Split by sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(x: Array) -> Array:
    s = sigmoid(x)
    return s * (1.0 - s)


def softmax_rowwise(logits: Array) -> Array:
    """Row-wise softmax with max-subtraction for stability."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# initialization and RNG plumbing
# ---------------------------------------------------------------------------

def glorot_uniform(rng: np.random.Generator, rows: int, cols: int,
                   dtype=DEFAULT_DTYPE) -> Array:
    """Uniform [-s, s] with s = sqrt(6 / (fan_in + fan_out))."""
    s = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-s, s, size=(rows, cols)).astype(dtype)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """n independent child streams of one root seed.

    Children are pre-spawned in index order, so results do not depend on
    which thread consumes which stream first.
    """
    root = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in root.spawn(n)]


# ---------------------------------------------------------------------------
# dropout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DropoutSpec:
    rate: float = 0.0
    mode: str = "eval"  # "train" | "eval"

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.rate}")
        if self.mode not in ("train", "eval"):
            raise ValueError(f"unknown dropout mode '{self.mode}'")


def dropout_mask(rng: np.random.Generator, shape, rate: float,
                 dtype=DEFAULT_DTYPE) -> Array:
    """Inverted-dropout mask: kept entries carry 1/(1-rate), dropped 0."""
    keep = rng.random(shape) >= rate
    return (keep / (1.0 - rate)).astype(dtype)


def dropout_apply(x: Array, spec: DropoutSpec, rng: np.random.Generator) -> Array:
    """Expectation-preserving dropout; identity in eval mode or at rate 0."""
    if spec.mode == "eval" or spec.rate == 0.0:
        return x
    return x * dropout_mask(rng, x.shape, spec.rate, dtype=x.dtype)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Adam optimizer state over a named parameter set.

    Moment buffers are created lazily per parameter name, shaped like the
    parameter. The step counter is shared by all parameters in the set.
    """

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def adam_step(params: dict[str, Array], grads: dict[str, Array],
              state: AdamState) -> None:
    """One Adam update with bias correction, applied in place.

    Every gradient must be finite: a NaN/Inf gradient aborts training with a
    diagnostic naming the offending parameter.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for '{name}': "
                             f"{g.shape} vs {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for '{name}' "
                                     f"at step {t}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        p -= (state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(p.dtype)


# ---------------------------------------------------------------------------
# finite-difference gradient checker
# ---------------------------------------------------------------------------

def gradient_check(f, params: dict[str, Array], analytic: dict[str, Array],
                   step: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    ``f`` is a zero-argument callable returning a scalar; it must read the
    arrays in ``params``, which are perturbed in place one element at a time
    and restored afterwards. Run in float64: float32 round-off drowns the
    h=1e-5 differences.

    Relative error per element is |a - n| / max(1, |a|, |n|); the maximum
    over all elements of all parameters is returned.
    """
    worst = 0.0
    for name, p in params.items():
        a = analytic[name]
        if a.shape != p.shape:
            raise ValueError(f"analytic gradient shape mismatch for '{name}'")
        flat = p.reshape(-1)
        a_flat = np.asarray(a, dtype=np.float64).reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            f_plus = float(f())
            flat[k] = orig - step
            f_minus = float(f())
            flat[k] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise FloatingPointError(
                    f"non-finite objective while perturbing '{name}'")
            numeric = (f_plus - f_minus) / (2.0 * step)
            err = abs(a_flat[k] - numeric) / max(1.0, abs(a_flat[k]), abs(numeric))
            worst = max(worst, err)
    return worst
