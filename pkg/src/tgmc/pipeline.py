"""End-to-end orchestration: per-window model training, trajectory model
fitting, future-window prediction, evaluation, and baselines.

Stage order is strict: every training window is fitted first (concurrently,
each trainer owning its own parameters and RNG stream), then the trajectory
models consume the frozen per-window embeddings and decoder weights, then
prediction rolls both forward and decodes. Test windows are never read
before evaluation.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint as ckpt
from . import numerics
from .decoder import (DecoderParams, decode_probs_batch, expected_rating_batch,
                      init_decoder_params, nll_loss)
from .encoder import (EncoderParams, encoder_backward, encoder_forward,
                      init_encoder_params)
from .graph import NormalizationSpec, RatingWindow, build_rating_window
from .ingest import (DatasetStats, IdMaps, RatingTable, TrainTestSplit,
                     WindowedDataset, train_test_split)
from .numerics import AdamState, Array, DropoutSpec, adam_step
from .seqmodel import (SeqModel, SeqModelConfig, activity_mask,
                       decoder_weight_model, predict_next, seq_train)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class WindowTrainConfig:
    """Hyperparameters for one window's encoder+decoder fit."""
    epochs: int = 2500
    batch_size: int = 100_000
    learning_rate: float = 1e-2
    dropout: float = 0.3
    hidden_dim: int = 500
    latent_dim: int = 50
    accum: str = "sum"
    normalization: str = "symmetric"
    seed: int = 42

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.hidden_dim,
               self.latent_dim) <= 0:
            raise ValueError("epochs, batch_size and dims must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.latent_dim > self.hidden_dim:
            raise ValueError("latent_dim cannot exceed hidden_dim")


@dataclass
class TemporalTrainConfig:
    """Hyperparameters for the trajectory models."""
    cell: str = "lstm"
    layers: int = 2
    epochs: int = 250
    learning_rate: float = 1e-2
    share_user_item: bool = True
    seed: int = 42
    decoder: str = "rnn"          # "rnn" predicts future Q, "last" reuses Q_T
    weight_layers: int = 1        # depth of the decoder-weight model
    mask_inactive_rows: bool = False

    def __post_init__(self):
        if self.cell not in ("vanilla", "gru", "lstm"):
            raise ValueError(f"unknown cell '{self.cell}'")
        if self.layers not in (1, 2, 3) or self.weight_layers not in (1, 2, 3):
            raise ValueError("layers must be 1, 2 or 3")
        if self.epochs <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs and learning_rate must be positive")
        if self.decoder not in ("rnn", "last"):
            raise ValueError("decoder must be 'rnn' or 'last'")


def config_hash(*configs) -> str:
    payload = [getattr(c, "__dict__", c) for c in configs]
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# per-window training
# ---------------------------------------------------------------------------

@dataclass
class WindowModel:
    """Frozen artifacts of one trained window."""
    t: int
    encoder: EncoderParams
    decoder: DecoderParams
    u_emb: Array                 # (N_U, d), eval-mode
    v_emb: Array                 # (N_V, d), eval-mode
    loss_curve: list[float] = field(default_factory=list)


def _copy_encoder(params: EncoderParams) -> EncoderParams:
    return EncoderParams(
        n_users=params.n_users, n_items=params.n_items,
        n_ratings=params.n_ratings, hidden=params.hidden,
        latent=params.latent, accum=params.accum,
        w_msg_to_user=[w.copy() for w in params.w_msg_to_user],
        w_msg_to_item=[w.copy() for w in params.w_msg_to_item],
        w_dense_user=params.w_dense_user.copy(),
        w_dense_item=params.w_dense_item.copy())


def _train_one_window(window: RatingWindow, enc: EncoderParams,
                      dec: DecoderParams, cfg: WindowTrainConfig,
                      rng: np.random.Generator) -> WindowModel:
    norm = NormalizationSpec(cfg.normalization)
    n_users, n_items, d = enc.n_users, enc.n_items, enc.latent
    if window.n_edges == 0:
        logger.warning("window %d has no edges; embeddings stay zero and the "
                       "decoder keeps its initialization", window.t)
        zeros_u = np.zeros((n_users, d), dtype=numerics.DEFAULT_DTYPE)
        zeros_v = np.zeros((n_items, d), dtype=numerics.DEFAULT_DTYPE)
        return WindowModel(window.t, enc, dec, zeros_u, zeros_v, [])

    params = {**enc.named(), **dec.named()}
    state = AdamState(learning_rate=cfg.learning_rate)
    drop_train = DropoutSpec(cfg.dropout, "train")
    n = window.n_edges
    users = window.observed.user.astype(np.int64)
    items = window.observed.item.astype(np.int64)
    ratings = window.observed.rating.astype(np.int64)
    curve = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if n > cfg.batch_size else np.arange(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            acts = encoder_forward(window, enc, norm, drop_train, rng)
            loss, dgrads = nll_loss(
                (users[sel], items[sel], ratings[sel]),
                (acts.z_user, acts.z_item), dec)
            egrads = encoder_backward(acts, (dgrads.user_emb, dgrads.item_emb))
            grads = {**egrads.named(),
                     **{f"dec/r{r + 1}": dgrads.q[r]
                        for r in range(dec.n_ratings)}}
            adam_step(params, grads, state)
            epoch_loss += loss
        curve.append(epoch_loss / n)

    eval_acts = encoder_forward(window, enc, norm, DropoutSpec(cfg.dropout, "eval"))
    return WindowModel(window.t, enc, dec,
                       eval_acts.z_user.copy(), eval_acts.z_item.copy(), curve)


def train_window_models(dataset: WindowedDataset, cfg: WindowTrainConfig,
                        max_workers: int | None = None) -> list[WindowModel]:
    """Fit encoder+decoder per training window.

    All windows start from the same initial parameters (one init stream) so
    the resulting embedding trajectories are directly comparable rows; each
    window's dropout/batch sampling runs on its own pre-spawned stream, which
    keeps results independent of scheduling order.
    """
    split = train_test_split(dataset)
    t_train = len(split.train)
    stats = dataset.stats
    streams = numerics.spawn_rngs(cfg.seed, t_train + 1)
    init_rng = streams[0]
    enc0 = init_encoder_params(init_rng, stats.n_users, stats.n_items,
                               stats.n_ratings, cfg.hidden_dim,
                               cfg.latent_dim, cfg.accum)
    dec0 = init_decoder_params(init_rng, stats.n_ratings, cfg.latent_dim)

    def job(idx: int) -> WindowModel:
        window = build_rating_window(split.train[idx], stats, t=idx)
        return _train_one_window(window, _copy_encoder(enc0),
                                 DecoderParams(q=dec0.q.copy()),
                                 cfg, streams[idx + 1])

    workers = max_workers or min(t_train, os.cpu_count() or 1)
    if workers <= 1:
        return [job(i) for i in range(t_train)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(t_train)))


# ---------------------------------------------------------------------------
# temporal stage
# ---------------------------------------------------------------------------

@dataclass
class TemporalModels:
    user_model: SeqModel
    item_model: SeqModel            # same object when shared
    weight_model: SeqModel | None   # None when decoder="last"
    shared: bool
    final_losses: dict[str, float]


def embedding_sequences(models: list[WindowModel]) -> tuple[Array, Array]:
    """Row-aligned (N, T, d) stacks of the per-window embeddings."""
    u_seq = np.stack([m.u_emb for m in models], axis=1)
    v_seq = np.stack([m.v_emb for m in models], axis=1)
    return u_seq, v_seq


def weight_sequences(models: list[WindowModel]) -> Array:
    """(T, R, d, d) stack of the per-window decoder weights."""
    return np.stack([m.decoder.q for m in models], axis=0)


def train_temporal(models: list[WindowModel],
                   cfg: TemporalTrainConfig) -> TemporalModels:
    """Fit trajectory models on the frozen per-window artifacts."""
    if len(models) < 2:
        raise ValueError("need at least two trained windows to fit "
                         "a trajectory (got %d)" % len(models))
    u_seq, v_seq = embedding_sequences(models)
    d = u_seq.shape[2]
    seq_cfg = SeqModelConfig(cell=cfg.cell, layers=cfg.layers, input_dim=d,
                             output_dim=d, hidden_dim=d,
                             share_user_item=cfg.share_user_item)
    rngs = numerics.spawn_rngs(cfg.seed, 3)
    losses: dict[str, float] = {}

    if cfg.share_user_item:
        model = SeqModel(seq_cfg, rngs[0])
        rows = np.concatenate([u_seq, v_seq], axis=0)
        mask = activity_mask(rows) if cfg.mask_inactive_rows else None
        curve = seq_train(model, rows, epochs=cfg.epochs,
                          learning_rate=cfg.learning_rate, mask=mask)
        losses["shared"] = curve[-1]
        user_model = item_model = model
    else:
        user_model = SeqModel(seq_cfg, rngs[0])
        item_model = SeqModel(seq_cfg, rngs[1])
        u_mask = activity_mask(u_seq) if cfg.mask_inactive_rows else None
        v_mask = activity_mask(v_seq) if cfg.mask_inactive_rows else None
        losses["user"] = seq_train(user_model, u_seq, epochs=cfg.epochs,
                                   learning_rate=cfg.learning_rate,
                                   mask=u_mask)[-1]
        losses["item"] = seq_train(item_model, v_seq, epochs=cfg.epochs,
                                   learning_rate=cfg.learning_rate,
                                   mask=v_mask)[-1]

    weight_model = None
    if cfg.decoder == "rnn":
        q_seq = weight_sequences(models)
        w_cfg = SeqModelConfig(cell="lstm", layers=cfg.weight_layers,
                               input_dim=d * d, output_dim=d * d,
                               hidden_dim=min(d * d, 2500))
        weight_model, _, w_curve = decoder_weight_model(
            q_seq, config=w_cfg, rng=rngs[2], epochs=cfg.epochs,
            learning_rate=cfg.learning_rate)
        losses["decoder"] = w_curve[-1]

    return TemporalModels(user_model=user_model, item_model=item_model,
                          weight_model=weight_model,
                          shared=cfg.share_user_item, final_losses=losses)


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

@dataclass
class TrainedState:
    """Everything prediction needs, frozen after the training stages."""
    window_models: list[WindowModel]
    temporal: TemporalModels | None
    stats: DatasetStats
    id_maps: IdMaps
    user_seen: Array            # bool per dense user id: appears in training
    item_seen: Array
    window_cfg: WindowTrainConfig
    temporal_cfg: TemporalTrainConfig | None


@dataclass
class PredictionRecord:
    user_raw: object
    item_raw: object
    window: int
    predicted: float
    actual: int
    cold_start: bool


def _seen_flags(split: TrainTestSplit, stats: DatasetStats):
    user_seen = np.zeros(stats.n_users, dtype=bool)
    item_seen = np.zeros(stats.n_items, dtype=bool)
    for table in split.train:
        user_seen[table.user] = True
        item_seen[table.item] = True
    return user_seen, item_seen


def _rollout(state: TrainedState, horizon: int):
    """Embeddings and decoder weights for train-end + 1 .. + horizon.

    Returns (u_hat, v_hat, q_hat) where u_hat is (h, N_U, d) and q_hat is
    (h, R, d, d). Without temporal models (static reduction) the last
    window's artifacts are repeated at every horizon.
    """
    last = state.window_models[-1]
    d = last.u_emb.shape[1]
    r_levels = last.decoder.n_ratings
    if state.temporal is None:
        u_hat = np.repeat(last.u_emb[None], horizon, axis=0)
        v_hat = np.repeat(last.v_emb[None], horizon, axis=0)
        q_hat = np.repeat(last.decoder.q[None], horizon, axis=0)
        return u_hat, v_hat, q_hat
    u_seq, v_seq = embedding_sequences(state.window_models)
    tm = state.temporal
    u_hat = predict_next(tm.user_model, u_seq, steps=horizon).transpose(1, 0, 2)
    v_hat = predict_next(tm.item_model, v_seq, steps=horizon).transpose(1, 0, 2)
    if tm.weight_model is None:
        q_hat = np.repeat(last.decoder.q[None], horizon, axis=0)
    else:
        q_seq = weight_sequences(state.window_models)
        flat = q_seq.reshape(q_seq.shape[0], r_levels, d * d).transpose(1, 0, 2)
        q_flat = predict_next(tm.weight_model, flat, steps=horizon)
        q_hat = q_flat.transpose(1, 0, 2).reshape(horizon, r_levels, d, d)
    return u_hat, v_hat, q_hat


def predict_window(state: TrainedState, horizon: int,
                   queries) -> list[PredictionRecord]:
    """Expected ratings for (raw user, raw item) queries h windows ahead.

    Queries whose user or item never appears in a training window are still
    answered (their trajectory rows are rolled out from zero history) and
    flagged cold-start. Raw ids absent from the dataset's id maps are errors.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    users = []
    items = []
    for raw_u, raw_v in queries:
        if raw_u not in state.id_maps.users:
            raise ValueError(f"unknown user id {raw_u!r}")
        if raw_v not in state.id_maps.items:
            raise ValueError(f"unknown item id {raw_v!r}")
        users.append(state.id_maps.users.dense(raw_u))
        items.append(state.id_maps.items.dense(raw_v))
    u_hat, v_hat, q_hat = _rollout(state, horizon)
    return _decode_queries(state, u_hat[-1], v_hat[-1], q_hat[-1],
                           np.asarray(users), np.asarray(items),
                           window=len(state.window_models) + horizon - 1,
                           actuals=None)


def _decode_queries(state: TrainedState, u_emb, v_emb, q, users, items,
                    window: int, actuals) -> list[PredictionRecord]:
    dec = DecoderParams(q=q.astype(np.float32))
    probs = decode_probs_batch(u_emb[users], v_emb[items], dec)
    predicted = expected_rating_batch(probs).astype(np.float32)
    cold = ~(state.user_seen[users] & state.item_seen[items])
    out = []
    for k in range(len(users)):
        out.append(PredictionRecord(
            user_raw=state.id_maps.users.raw(int(users[k])),
            item_raw=state.id_maps.items.raw(int(items[k])),
            window=window,
            predicted=float(predicted[k]),
            actual=int(actuals[k]) if actuals is not None else -1,
            cold_start=bool(cold[k])))
    return out


def predict_test_windows(state: TrainedState,
                         split: TrainTestSplit) -> list[PredictionRecord]:
    """One prediction per held-out rating, all horizons in one roll-out."""
    horizon = len(split.test)
    if horizon == 0:
        raise ValueError("no test windows to predict")
    u_hat, v_hat, q_hat = _rollout(state, horizon)
    records: list[PredictionRecord] = []
    for k, table in enumerate(split.test):
        if len(table) == 0:
            continue
        users = table.user.astype(np.int64)
        items = table.item.astype(np.int64)
        records.extend(_decode_queries(
            state, u_hat[k], v_hat[k], q_hat[k], users, items,
            window=split.test_indices[k], actuals=table.rating))
    return records


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    rmse: float
    mae: float
    count: int
    cold_start_count: int
    per_window: dict[int, dict]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "mae": self.mae,
            "count": self.count,
            "cold_start_count": self.cold_start_count,
            "per_window": {str(k): v for k, v in sorted(self.per_window.items())},
            "metadata": self.metadata,
        }


def _metrics(pred: Array, actual: Array) -> tuple[float, float]:
    err = pred.astype(np.float64) - actual.astype(np.float64)
    return float(np.sqrt(np.mean(err * err))), float(np.mean(np.abs(err)))


def evaluate(records: list[PredictionRecord],
             metadata: dict | None = None) -> EvalReport:
    """RMSE/MAE overall and per window; cold-start queries counted apart."""
    if not records:
        raise ValueError("cannot evaluate an empty prediction set")
    pred = np.array([r.predicted for r in records], dtype=np.float64)
    actual = np.array([r.actual for r in records], dtype=np.float64)
    windows = np.array([r.window for r in records])
    cold = np.array([r.cold_start for r in records], dtype=bool)
    rmse, mae = _metrics(pred, actual)
    per_window = {}
    for w in sorted(set(windows.tolist())):
        m = windows == w
        w_rmse, w_mae = _metrics(pred[m], actual[m])
        per_window[int(w)] = {"rmse": w_rmse, "mae": w_mae,
                              "count": int(m.sum()),
                              "cold_start": int((m & cold).sum())}
    return EvalReport(rmse=rmse, mae=mae, count=len(records),
                      cold_start_count=int(cold.sum()),
                      per_window=per_window, metadata=metadata or {})


def aggregate_reports(reports: list[EvalReport]) -> dict:
    """Across-seed summary: mean and population std of both metrics."""
    rmses = np.array([r.rmse for r in reports])
    maes = np.array([r.mae for r in reports])
    return {
        "runs": len(reports),
        "rmse_mean": float(rmses.mean()),
        "rmse_std": float(rmses.std()),
        "mae_mean": float(maes.mean()),
        "mae_std": float(maes.std()),
        "per_run": [{"seed": r.metadata.get("seed"), "rmse": r.rmse,
                     "mae": r.mae} for r in reports],
    }


# ---------------------------------------------------------------------------
# end-to-end runs
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    state: TrainedState
    records: list[PredictionRecord]
    report: EvalReport


def run_experiment(dataset: WindowedDataset, window_cfg: WindowTrainConfig,
                   temporal_cfg: TemporalTrainConfig | None,
                   max_workers: int | None = None) -> RunResult:
    """Train all stages on the dataset's split and score the test windows.

    ``temporal_cfg=None`` skips the trajectory stage entirely: predictions
    then come from the last training window's model at every horizon (the
    static special case).
    """
    split = train_test_split(dataset)
    models = train_window_models(dataset, window_cfg, max_workers=max_workers)
    temporal = None
    if temporal_cfg is not None:
        temporal = train_temporal(models, temporal_cfg)
    user_seen, item_seen = _seen_flags(split, dataset.stats)
    state = TrainedState(window_models=models, temporal=temporal,
                         stats=dataset.stats, id_maps=dataset.id_maps,
                         user_seen=user_seen, item_seen=item_seen,
                         window_cfg=window_cfg, temporal_cfg=temporal_cfg)
    records = predict_test_windows(state, split)
    meta = {
        "seed": window_cfg.seed,
        "config_hash": config_hash(window_cfg, temporal_cfg or {}),
        "accumulative": dataset.config.accumulative,
        "train_windows": len(split.train),
        "test_windows": len(split.test),
        "temporal": temporal_cfg is not None,
        "cell": temporal_cfg.cell if temporal_cfg else None,
    }
    return RunResult(state=state, records=records,
                     report=evaluate(records, meta))


def static_state_from(run: RunResult) -> TrainedState:
    """The static special case carved out of an accumulative run.

    With accumulation on, the last training window is exactly the union of
    all training events, so its trained model is a single-window fit of the
    pooled data; dropping the temporal models yields the static predictor.
    """
    src = run.state
    return TrainedState(window_models=[src.window_models[-1]], temporal=None,
                        stats=src.stats, id_maps=src.id_maps,
                        user_seen=src.user_seen, item_seen=src.item_seen,
                        window_cfg=src.window_cfg, temporal_cfg=None)


# ---------------------------------------------------------------------------
# matrix-factorization baseline
# ---------------------------------------------------------------------------

def pmf_baseline(dataset: WindowedDataset, d: int = 50,
                 learning_rate: float = 0.005, reg: float = 0.02,
                 epochs: int = 100, batch_size: int = 10_000,
                 seed: int = 42) -> RunResult:
    """Plain matrix factorization with squared loss and L2, SGD-trained on
    all pooled training ratings; predictions clamp to [1, R]."""
    split = train_test_split(dataset)
    pooled = split.train[0]
    if dataset.config.accumulative:
        pooled = split.train[-1]
    else:
        for t in range(1, len(split.train)):
            pooled = pooled.concat(split.train[t])
        pooled = pooled.dedup_latest()
    if len(pooled) == 0:
        raise ValueError("no training ratings to fit the baseline")
    stats = dataset.stats
    rng = numerics.make_rng(seed)
    p = rng.normal(0.0, 0.1, (stats.n_users, d))
    q = rng.normal(0.0, 0.1, (stats.n_items, d))
    users = pooled.user.astype(np.int64)
    items = pooled.item.astype(np.int64)
    ratings = pooled.rating.astype(np.float64)
    n = len(pooled)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            sel = order[start:start + batch_size]
            bu, bi, br = users[sel], items[sel], ratings[sel]
            err = np.einsum("nd,nd->n", p[bu], q[bi]) - br
            gp = np.zeros_like(p)
            gq = np.zeros_like(q)
            np.add.at(gp, bu, err[:, None] * q[bi] + reg * p[bu])
            np.add.at(gq, bi, err[:, None] * p[bu] + reg * q[bi])
            p -= learning_rate * gp
            q -= learning_rate * gq

    user_seen, item_seen = _seen_flags(split, stats)
    records = []
    for k, table in enumerate(split.test):
        if len(table) == 0:
            continue
        bu = table.user.astype(np.int64)
        bi = table.item.astype(np.int64)
        pred = np.clip(np.einsum("nd,nd->n", p[bu], q[bi]),
                       1.0, stats.n_ratings).astype(np.float32)
        cold = ~(user_seen[bu] & item_seen[bi])
        for j in range(len(table)):
            records.append(PredictionRecord(
                user_raw=dataset.id_maps.users.raw(int(bu[j])),
                item_raw=dataset.id_maps.items.raw(int(bi[j])),
                window=split.test_indices[k],
                predicted=float(pred[j]),
                actual=int(table.rating[j]),
                cold_start=bool(cold[j])))
    meta = {"seed": seed, "baseline": "pmf", "d": d,
            "learning_rate": learning_rate, "reg": reg, "epochs": epochs}
    report = evaluate(records, meta)
    return RunResult(state=None, records=records, report=report)


# ---------------------------------------------------------------------------
# checkpoint plumbing
# ---------------------------------------------------------------------------

def save_window_model(path, model: WindowModel,
                      cfg: WindowTrainConfig) -> None:
    arrays = {**model.encoder.named(), **model.decoder.named(),
              "emb/user": model.u_emb, "emb/item": model.v_emb}
    meta = {"kind": "window", "t": model.t, "accum": model.encoder.accum,
            "hidden": model.encoder.hidden, "latent": model.encoder.latent,
            "n_ratings": model.encoder.n_ratings,
            "hyperparameters": vars(cfg), "seed": cfg.seed}
    ckpt.save_checkpoint(path, arrays, meta)


def load_window_model(path) -> WindowModel:
    arrays, meta = ckpt.load_checkpoint(path)
    if meta.get("kind") != "window":
        raise ckpt.CheckpointError(f"{path} is not a window checkpoint")
    r_levels = int(meta["n_ratings"])
    w_to_user = [arrays[f"enc/user/item_to_user/r{r + 1}"] for r in range(r_levels)]
    w_to_item = [arrays[f"enc/item/user_to_item/r{r + 1}"] for r in range(r_levels)]
    enc = EncoderParams(
        n_users=w_to_item[0].shape[1], n_items=w_to_user[0].shape[1],
        n_ratings=r_levels, hidden=int(meta["hidden"]),
        latent=int(meta["latent"]), accum=meta["accum"],
        w_msg_to_user=w_to_user, w_msg_to_item=w_to_item,
        w_dense_user=arrays["enc/user/dense"],
        w_dense_item=arrays["enc/item/dense"])
    dec = DecoderParams(q=np.stack([arrays[f"dec/r{r + 1}"]
                                    for r in range(r_levels)]))
    return WindowModel(t=int(meta["t"]), encoder=enc, decoder=dec,
                       u_emb=arrays["emb/user"], v_emb=arrays["emb/item"])


def save_temporal_models(path, temporal: TemporalModels,
                         cfg: TemporalTrainConfig) -> None:
    arrays = {}
    roles = {}
    if temporal.shared:
        arrays.update(temporal.user_model.named("shared"))
        roles["shared"] = vars(temporal.user_model.config)
    else:
        arrays.update(temporal.user_model.named("user"))
        arrays.update(temporal.item_model.named("item"))
        roles["user"] = vars(temporal.user_model.config)
        roles["item"] = vars(temporal.item_model.config)
    if temporal.weight_model is not None:
        arrays.update(temporal.weight_model.named("decoder"))
        roles["decoder"] = vars(temporal.weight_model.config)
    meta = {"kind": "temporal", "shared": temporal.shared, "roles": roles,
            "final_losses": temporal.final_losses,
            "hyperparameters": vars(cfg), "seed": cfg.seed}
    ckpt.save_checkpoint(path, arrays, meta)


def _rebuild_seq_model(arrays: dict, role: str, cfg_dict: dict) -> SeqModel:
    cfg = SeqModelConfig(**cfg_dict)
    model = SeqModel(cfg, numerics.make_rng(0))
    prefix = f"seq/{role}/"
    values = {k[len(prefix):]: v for k, v in arrays.items()
              if k.startswith(prefix)}
    model.load_params(values)
    return model


def load_temporal_models(path) -> TemporalModels:
    arrays, meta = ckpt.load_checkpoint(path)
    if meta.get("kind") != "temporal":
        raise ckpt.CheckpointError(f"{path} is not a temporal checkpoint")
    roles = meta["roles"]
    if meta["shared"]:
        shared = _rebuild_seq_model(arrays, "shared", roles["shared"])
        user_model = item_model = shared
    else:
        user_model = _rebuild_seq_model(arrays, "user", roles["user"])
        item_model = _rebuild_seq_model(arrays, "item", roles["item"])
    weight_model = None
    if "decoder" in roles:
        weight_model = _rebuild_seq_model(arrays, "decoder", roles["decoder"])
    return TemporalModels(user_model=user_model, item_model=item_model,
                          weight_model=weight_model, shared=bool(meta["shared"]),
                          final_losses=meta.get("final_losses", {}))
