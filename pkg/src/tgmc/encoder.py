"""Graph-convolutional encoder over one rating window.

Forward map, per side (users shown; items are symmetric):

    msg_r  = A_r @ W_r^T          per rating level r, A_r carrying 1/c
    M      = accum(msg_1 ... msg_R)        sum or stack
    h      = relu(M)                       then dropout in train mode
    z      = relu(h @ W_dense^T)           the latent embeddings

Node features are one-hot, so the level-r message into a node is a
normalized gather of the columns of W_r belonging to its level-r
neighbours; no feature matrix is ever materialized. The backward pass is
the exact chain rule of the above and is validated against finite
differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .graph import ITEM_TO_USER, USER_TO_ITEM, NormalizationSpec, RatingWindow
from .numerics import Array, DropoutSpec

ACCUM_MODES = ("sum", "stack")


@dataclass
class EncoderParams:
    """Per-window learnable encoder weights.

    ``w_msg_to_user[r]`` is H x n_items (columns indexed by the sending
    item), ``w_msg_to_item[r]`` is H x n_users. The dense layers map the
    accumulated hidden width (H for sum accumulation, R*H for stack) down to
    the latent dimension d, one matrix per side. No biases anywhere, so
    isolated nodes map exactly to the zero embedding.
    """

    n_users: int
    n_items: int
    n_ratings: int
    hidden: int
    latent: int
    accum: str
    w_msg_to_user: list[Array]
    w_msg_to_item: list[Array]
    w_dense_user: Array
    w_dense_item: Array

    @property
    def acc_width(self) -> int:
        return self.hidden if self.accum == "sum" else self.hidden * self.n_ratings

    def named(self) -> dict[str, Array]:
        out = {}
        for r in range(self.n_ratings):
            out[f"enc/user/item_to_user/r{r + 1}"] = self.w_msg_to_user[r]
            out[f"enc/item/user_to_item/r{r + 1}"] = self.w_msg_to_item[r]
        out["enc/user/dense"] = self.w_dense_user
        out["enc/item/dense"] = self.w_dense_item
        return out

    def astype(self, dtype) -> "EncoderParams":
        return EncoderParams(
            self.n_users, self.n_items, self.n_ratings, self.hidden,
            self.latent, self.accum,
            [w.astype(dtype) for w in self.w_msg_to_user],
            [w.astype(dtype) for w in self.w_msg_to_item],
            self.w_dense_user.astype(dtype), self.w_dense_item.astype(dtype))


def init_encoder_params(rng: np.random.Generator, n_users: int, n_items: int,
                        n_ratings: int, hidden: int, latent: int,
                        accum: str = "sum",
                        dtype=numerics.DEFAULT_DTYPE) -> EncoderParams:
    if accum not in ACCUM_MODES:
        raise ValueError(f"unknown accumulation mode '{accum}'")
    if not (hidden > 0 and latent > 0):
        raise ValueError("hidden and latent widths must be positive")
    w_to_user = [numerics.glorot_uniform(rng, hidden, n_items, dtype)
                 for _ in range(n_ratings)]
    w_to_item = [numerics.glorot_uniform(rng, hidden, n_users, dtype)
                 for _ in range(n_ratings)]
    acc = hidden if accum == "sum" else hidden * n_ratings
    w_dense_user = numerics.glorot_uniform(rng, latent, acc, dtype)
    w_dense_item = numerics.glorot_uniform(rng, latent, acc, dtype)
    return EncoderParams(n_users, n_items, n_ratings, hidden, latent, accum,
                         w_to_user, w_to_item, w_dense_user, w_dense_item)


@dataclass
class EncoderActivations:
    """Forward activations plus everything the backward pass needs."""

    z_user: Array            # N_U x d
    z_item: Array            # N_V x d
    h_user: Array            # N_U x acc_width, post accumulation + relu
    h_item: Array
    # backward cache
    accum_user: Array        # pre-relu accumulated messages
    accum_item: Array
    mask_user: Array | None  # scaled dropout masks (None in eval mode)
    mask_item: Array | None
    h_user_dropped: Array
    h_item_dropped: Array
    pre_z_user: Array        # pre-relu dense outputs
    pre_z_item: Array
    window: RatingWindow
    params: EncoderParams
    norm: NormalizationSpec


def _side_forward(adj, weights, w_dense, accum, dropout, rng, dtype):
    msgs = [adj[r] @ weights[r].T.astype(dtype, copy=False)
            for r in range(len(weights))]
    if accum == "sum":
        acc = msgs[0]
        for m in msgs[1:]:
            acc = acc + m
    else:
        acc = np.concatenate(msgs, axis=1)
    h = numerics.relu(acc)
    mask = None
    if dropout.mode == "train" and dropout.rate > 0.0:
        mask = numerics.dropout_mask(rng, h.shape, dropout.rate, dtype=dtype)
        h_dropped = h * mask
    else:
        h_dropped = h
    pre_z = h_dropped @ w_dense.T
    z = numerics.relu(pre_z)
    return z, h, acc, mask, h_dropped, pre_z


def encoder_forward(window: RatingWindow, params: EncoderParams,
                    norm: NormalizationSpec, dropout: DropoutSpec,
                    rng: np.random.Generator | None = None) -> EncoderActivations:
    """Full-graph forward pass over one window, both sides."""
    if window.n_users != params.n_users or window.n_items != params.n_items \
            or window.n_ratings != params.n_ratings:
        raise ValueError("window and encoder parameters are dimensioned "
                         f"inconsistently: window ({window.n_users}, "
                         f"{window.n_items}, R={window.n_ratings}) vs params "
                         f"({params.n_users}, {params.n_items}, "
                         f"R={params.n_ratings})")
    if dropout.mode == "train" and dropout.rate > 0.0 and rng is None:
        raise ValueError("train-mode dropout needs an rng")
    dtype = params.w_dense_user.dtype
    adj_u = window.normalized_adjacency(norm, ITEM_TO_USER, dtype=dtype)
    adj_i = window.normalized_adjacency(norm, USER_TO_ITEM, dtype=dtype)

    z_u, h_u, acc_u, mask_u, hd_u, pre_u = _side_forward(
        adj_u, params.w_msg_to_user, params.w_dense_user, params.accum,
        dropout, rng, dtype)
    z_i, h_i, acc_i, mask_i, hd_i, pre_i = _side_forward(
        adj_i, params.w_msg_to_item, params.w_dense_item, params.accum,
        dropout, rng, dtype)

    return EncoderActivations(
        z_user=z_u, z_item=z_i, h_user=h_u, h_item=h_i,
        accum_user=acc_u, accum_item=acc_i,
        mask_user=mask_u, mask_item=mask_i,
        h_user_dropped=hd_u, h_item_dropped=hd_i,
        pre_z_user=pre_u, pre_z_item=pre_i,
        window=window, params=params, norm=norm)


@dataclass
class EncoderGrads:
    w_msg_to_user: list[Array]
    w_msg_to_item: list[Array]
    w_dense_user: Array
    w_dense_item: Array

    def named(self) -> dict[str, Array]:
        out = {}
        for r in range(len(self.w_msg_to_user)):
            out[f"enc/user/item_to_user/r{r + 1}"] = self.w_msg_to_user[r]
            out[f"enc/item/user_to_item/r{r + 1}"] = self.w_msg_to_item[r]
        out["enc/user/dense"] = self.w_dense_user
        out["enc/item/dense"] = self.w_dense_item
        return out


def _side_backward(d_z, pre_z, h_dropped, mask, accum_pre, adj, w_dense,
                   accum, hidden, n_levels):
    d_pre = d_z * (pre_z > 0)
    d_w_dense = d_pre.T @ h_dropped
    d_h_dropped = d_pre @ w_dense
    d_h = d_h_dropped * mask if mask is not None else d_h_dropped
    d_acc = d_h * (accum_pre > 0)
    d_weights = []
    for r in range(n_levels):
        d_msg = d_acc if accum == "sum" else d_acc[:, r * hidden:(r + 1) * hidden]
        # msg_r = A_r @ W_r^T  =>  dW_r = (A_r^T @ d_msg)^T
        d_weights.append(np.ascontiguousarray((adj[r].T @ d_msg).T))
    return d_weights, d_w_dense


def encoder_backward(acts: EncoderActivations,
                     grad_wrt_embeddings: tuple[Array, Array]) -> EncoderGrads:
    """Exact gradients of encoder_forward w.r.t. all encoder parameters.

    ``grad_wrt_embeddings`` is (dL/dz_user, dL/dz_item). Message weights of
    levels (or columns) untouched by the window get zero gradient because
    the corresponding adjacency entries are empty.
    """
    for field_name in ("pre_z_user", "pre_z_item", "accum_user", "accum_item"):
        if getattr(acts, field_name) is None:
            raise ValueError(f"activation cache missing '{field_name}'; "
                             "run encoder_forward first")
    d_zu, d_zi = grad_wrt_embeddings
    params = acts.params
    if d_zu.shape != acts.z_user.shape or d_zi.shape != acts.z_item.shape:
        raise ValueError("embedding gradient shapes do not match activations")
    dtype = params.w_dense_user.dtype
    adj_u = acts.window.normalized_adjacency(acts.norm, ITEM_TO_USER, dtype=dtype)
    adj_i = acts.window.normalized_adjacency(acts.norm, USER_TO_ITEM, dtype=dtype)

    d_msg_u, d_dense_u = _side_backward(
        d_zu, acts.pre_z_user, acts.h_user_dropped, acts.mask_user,
        acts.accum_user, adj_u, params.w_dense_user, params.accum,
        params.hidden, params.n_ratings)
    d_msg_i, d_dense_i = _side_backward(
        d_zi, acts.pre_z_item, acts.h_item_dropped, acts.mask_item,
        acts.accum_item, adj_i, params.w_dense_item, params.accum,
        params.hidden, params.n_ratings)

    return EncoderGrads(w_msg_to_user=d_msg_u, w_msg_to_item=d_msg_i,
                        w_dense_user=d_dense_u, w_dense_item=d_dense_i)
