"""Gradient verification harness.

Every hand-derived backward pass is compared against central finite
differences on small randomized instances, in float64 (the 1e-5 probe step
drowns in float32 round-off). Each check builds a deterministic scalar
objective, computes analytic gradients once, and lets the checker perturb
every parameter element in place.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import numerics
from .decoder import DecoderParams, init_decoder_params, nll_loss
from .encoder import encoder_backward, encoder_forward, init_encoder_params
from .graph import NormalizationSpec, build_rating_window
from .ingest import RatingTable
from .numerics import DropoutSpec, gradient_check
from .seqmodel import (SeqModel, SeqModelConfig, _forward_with_cache,
                       mse_loss_and_grad, seq_backward)

DEFAULT_TOLERANCE = 1e-5


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    n_params: int
    seconds: float

    def passed(self, tolerance: float = DEFAULT_TOLERANCE) -> bool:
        return self.max_rel_err < tolerance


def _random_window(rng: np.random.Generator, n_users: int, n_items: int,
                   n_ratings: int = 5):
    """A small random window; some rating levels may stay empty."""
    cells = [(u, v) for u in range(n_users) for v in range(n_items)]
    take = rng.integers(n_users + n_items, len(cells), endpoint=True)
    chosen = rng.choice(len(cells), size=int(take), replace=False)
    users = np.array([cells[c][0] for c in chosen], dtype=np.int64)
    items = np.array([cells[c][1] for c in chosen], dtype=np.int64)
    ratings = rng.integers(1, n_ratings, size=users.size, endpoint=True)
    events = RatingTable(users, items, ratings, np.zeros(users.size, np.int64))
    return build_rating_window(events, (n_users, n_items, n_ratings))


def check_encoder(seed: int = 0, accum: str = "sum", dropout: float = 0.0,
                  step: float = 1e-5) -> CheckResult:
    """Joint encoder+decoder NLL objective, gradients for every weight.

    With dropout > 0 the mask is frozen by re-seeding the mask stream on
    every objective evaluation, so the perturbed losses see the same mask
    as the analytic pass.
    """
    t0 = time.perf_counter()
    rng = numerics.make_rng(seed)
    n_users = int(rng.integers(3, 7))
    n_items = int(rng.integers(3, 7))
    window = _random_window(rng, n_users, n_items)
    hidden = int(rng.integers(3, 6))
    latent = int(rng.integers(2, min(5, hidden + 1)))
    enc = init_encoder_params(rng, n_users, n_items, 5, hidden, latent,
                              accum, dtype=np.float64)
    dec = init_decoder_params(rng, 5, latent, dtype=np.float64)
    norm = NormalizationSpec("symmetric")
    mode = "train" if dropout > 0 else "eval"
    spec = DropoutSpec(dropout, mode)
    mask_seed = seed + 104729
    batch = (window.observed.user, window.observed.item,
             window.observed.rating)

    def objective() -> float:
        mask_rng = numerics.make_rng(mask_seed)
        acts = encoder_forward(window, enc, norm, spec, mask_rng)
        loss, _ = nll_loss(batch, (acts.z_user, acts.z_item), dec)
        return loss

    mask_rng = numerics.make_rng(mask_seed)
    acts = encoder_forward(window, enc, norm, spec, mask_rng)
    _, dgrads = nll_loss(batch, (acts.z_user, acts.z_item), dec)
    egrads = encoder_backward(acts, (dgrads.user_emb, dgrads.item_emb))
    params = {**enc.named(), **dec.named()}
    analytic = {**egrads.named(),
                **{f"dec/r{r + 1}": dgrads.q[r] for r in range(5)}}
    err = gradient_check(objective, params, analytic, step=step)
    n = sum(p.size for p in params.values())
    label = f"encoder[{accum}]" + ("+dropout" if dropout > 0 else "")
    return CheckResult(label, err, n, time.perf_counter() - t0)


def check_decoder(seed: int = 0, step: float = 1e-5) -> CheckResult:
    """NLL gradients w.r.t. the bilinear weights and both embedding sides."""
    t0 = time.perf_counter()
    rng = numerics.make_rng(seed)
    n_users, n_items, d = 5, 4, 3
    u = rng.normal(0.0, 1.0, (n_users, d))
    v = rng.normal(0.0, 1.0, (n_items, d))
    dec = init_decoder_params(rng, 5, d, dtype=np.float64)
    users = rng.integers(0, n_users, size=12)
    items = rng.integers(0, n_items, size=12)
    ratings = rng.integers(1, 5, size=12, endpoint=True)

    def objective() -> float:
        loss, _ = nll_loss((users, items, ratings), (u, v), dec)
        return loss

    _, grads = nll_loss((users, items, ratings), (u, v), dec)
    params = {**dec.named(), "emb/user": u, "emb/item": v}
    analytic = {**{f"dec/r{r + 1}": grads.q[r] for r in range(5)},
                "emb/user": grads.user_emb, "emb/item": grads.item_emb}
    err = gradient_check(objective, params, analytic, step=step)
    n = sum(p.size for p in params.values())
    return CheckResult("decoder", err, n, time.perf_counter() - t0)


def _check_seq(model: SeqModel, name: str, rng: np.random.Generator,
               rows: int, steps: int, step: float) -> CheckResult:
    t0 = time.perf_counter()
    cfg = model.config
    x = rng.normal(0.0, 1.0, (rows, steps, cfg.input_dim))
    target = rng.normal(0.0, 1.0, (rows, steps, cfg.output_dim))

    def objective() -> float:
        y, _ = _forward_with_cache(model, x)
        loss, _ = mse_loss_and_grad(y, target)
        return loss

    y, cache = _forward_with_cache(model, x)
    _, d_y = mse_loss_and_grad(y, target)
    analytic = seq_backward(model, cache, d_y)
    params = model.params()
    err = gradient_check(objective, params, analytic, step=step)
    n = sum(p.size for p in params.values())
    return CheckResult(name, err, n, time.perf_counter() - t0)


def check_cell(cell: str, layers: int, seed: int = 0,
               step: float = 1e-5) -> CheckResult:
    rng = numerics.make_rng(seed)
    steps = int(rng.integers(2, 6))
    cfg = SeqModelConfig(cell=cell, layers=layers, input_dim=2, output_dim=2,
                         hidden_dim=3)
    model = SeqModel(cfg, rng, dtype=np.float64)
    return _check_seq(model, f"{cell}x{layers}", rng, rows=2, steps=steps,
                      step=step)


def check_weight_model(seed: int = 0, step: float = 1e-5) -> CheckResult:
    """The decoder-weight forecaster: shared LSTM over flattened matrices."""
    rng = numerics.make_rng(seed)
    d = 2
    cfg = SeqModelConfig(cell="lstm", layers=1, input_dim=d * d,
                         output_dim=d * d, hidden_dim=min(d * d, 2500))
    model = SeqModel(cfg, rng, dtype=np.float64)
    return _check_seq(model, "decoder-weight", rng, rows=5, steps=4,
                      step=step)


def run_all(seed: int = 0, step: float = 1e-5) -> list[CheckResult]:
    """The full gradient suite: encoder (both accumulations, with and
    without dropout), decoder NLL, all cells at 1-3 layers, weight model."""
    results = [
        check_encoder(seed, accum="sum", dropout=0.0, step=step),
        check_encoder(seed + 1, accum="stack", dropout=0.0, step=step),
        check_encoder(seed + 2, accum="sum", dropout=0.3, step=step),
        check_decoder(seed, step=step),
    ]
    for cell in ("vanilla", "gru", "lstm"):
        for layers in (1, 2, 3):
            results.append(check_cell(cell, layers, seed, step=step))
    results.append(check_weight_model(seed, step=step))
    return results
