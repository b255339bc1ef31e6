"""Bilinear softmax decoder over rating levels.

The probability of user i giving item j score r is softmax over r of the
bilinear forms u_i^T Q_r v_j, one learnable d x d matrix per rating level.
Training minimizes the summed negative log-likelihood of the observed
ratings; continuous predictions are the expectation of the resulting
distribution over the rating scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .numerics import Array


@dataclass
class DecoderParams:
    """One d x d bilinear matrix per rating level, stacked as (R, d, d)."""

    q: Array

    @property
    def n_ratings(self) -> int:
        return self.q.shape[0]

    @property
    def latent(self) -> int:
        return self.q.shape[1]

    def named(self) -> dict[str, Array]:
        return {f"dec/r{r + 1}": self.q[r] for r in range(self.n_ratings)}

    def astype(self, dtype) -> "DecoderParams":
        return DecoderParams(self.q.astype(dtype))


def init_decoder_params(rng: np.random.Generator, n_ratings: int, latent: int,
                        dtype=numerics.DEFAULT_DTYPE) -> DecoderParams:
    q = np.stack([numerics.glorot_uniform(rng, latent, latent, dtype)
                  for _ in range(n_ratings)])
    return DecoderParams(q)


def rating_logits(u_rows: Array, v_rows: Array, params: DecoderParams) -> Array:
    """Bilinear logits u^T Q_r v for row-aligned embedding batches: (n, R)."""
    if u_rows.shape != v_rows.shape or u_rows.shape[-1] != params.latent:
        raise ValueError(f"embedding shapes {u_rows.shape} / {v_rows.shape} "
                         f"do not match decoder latent dim {params.latent}")
    n = u_rows.shape[0]
    logits = np.empty((n, params.n_ratings), dtype=u_rows.dtype)
    for r in range(params.n_ratings):
        logits[:, r] = np.einsum("nd,nd->n", u_rows @ params.q[r], v_rows)
    return logits


def decode_probs(u: Array, v: Array, params: DecoderParams) -> Array:
    """Rating distribution for one (user, item) embedding pair."""
    u = np.atleast_2d(u)
    v = np.atleast_2d(v)
    return numerics.softmax_rowwise(rating_logits(u, v, params))[0]


def decode_probs_batch(u_rows: Array, v_rows: Array,
                       params: DecoderParams) -> Array:
    return numerics.softmax_rowwise(rating_logits(u_rows, v_rows, params))


@dataclass
class DecoderGrads:
    q: Array            # (R, d, d)
    user_emb: Array     # N_U x d, scatter-added over the batch
    item_emb: Array     # N_V x d


def nll_loss(batch, embeddings: tuple[Array, Array],
             params: DecoderParams) -> tuple[float, DecoderGrads]:
    """Summed negative log-likelihood of a batch of observed ratings.

    ``batch`` carries parallel arrays (users, items, ratings); ``embeddings``
    is the full (U, V) pair the batch indexes into. Returns the scalar loss
    and exact gradients w.r.t. Q and the full embedding matrices (rows
    outside the batch get zero gradient). Log-sum-exp keeps the loss finite
    under extreme logits.
    """
    if hasattr(batch, "user"):
        users, items, ratings = batch.user, batch.item, batch.rating
    else:
        users, items, ratings = batch
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    ratings = np.asarray(ratings, dtype=np.int64)
    if users.size == 0:
        raise ValueError("nll_loss needs a non-empty batch")
    if ratings.min() < 1 or ratings.max() > params.n_ratings:
        raise ValueError(f"rating outside [1, {params.n_ratings}] in batch")

    u_full, v_full = embeddings
    u_rows = u_full[users]
    v_rows = v_full[items]
    logits = rating_logits(u_rows, v_rows, params)

    shifted = logits - logits.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    denom = ex.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(denom)
    true_col = ratings - 1
    rows = np.arange(len(users))
    loss = float(-log_probs[rows, true_col].sum())

    d_logits = ex / denom
    d_logits[rows, true_col] -= 1.0

    dtype = u_full.dtype
    d_q = np.empty_like(params.q)
    d_u_rows = np.zeros_like(u_rows)
    d_v_rows = np.zeros_like(v_rows)
    for r in range(params.n_ratings):
        w = d_logits[:, r:r + 1].astype(dtype)
        d_q[r] = (u_rows * w).T @ v_rows
        d_u_rows += w * (v_rows @ params.q[r].T)
        d_v_rows += w * (u_rows @ params.q[r])

    d_u_full = np.zeros_like(u_full)
    d_v_full = np.zeros_like(v_full)
    np.add.at(d_u_full, users, d_u_rows)
    np.add.at(d_v_full, items, d_v_rows)
    return loss, DecoderGrads(q=d_q, user_emb=d_u_full, item_emb=d_v_full)


def expected_rating(dist: Array) -> float:
    """Expectation of a rating distribution; lies in [1, R]."""
    dist = np.asarray(dist, dtype=np.float64)
    scale = np.arange(1, dist.shape[-1] + 1, dtype=np.float64)
    # float32 probabilities can sum a hair past 1; clip the round-off.
    return float(np.clip(dist @ scale, 1.0, dist.shape[-1]))


def expected_rating_batch(dists: Array) -> Array:
    scale = np.arange(1, dists.shape[-1] + 1, dtype=np.float64)
    values = np.asarray(dists, dtype=np.float64) @ scale
    return np.clip(values, 1.0, dists.shape[-1])
