# The temporal stage in one picture: train a model per window, stack each
# user's and item's embeddings into a trajectory, fit a shared LSTM over
# the trajectories, roll it forward, and decode the forecast. The
# comparison point is the static shortcut that reuses the last window's
# model for every future step.
#
#   python demos/03_forecast_vs_static.py

import numpy as np

from tgmc.ingest import WindowingConfig, build_windows, train_test_split
from tgmc.pipeline import (TemporalTrainConfig, TrainedState,
                           WindowTrainConfig, embedding_sequences, evaluate,
                           predict_test_windows, train_temporal,
                           train_window_models, _seen_flags)
from tgmc.synth import DriftConfig, drift_table

stream = DriftConfig(n_users=300, n_items=200, n_events=40_000,
                     n_windows=11, drift=3.0, noise=0.25, seed=7)
ds = build_windows(drift_table(stream), WindowingConfig(
    window_length_seconds=stream.window_seconds, accumulative=True,
    train_windows=9))
split = train_test_split(ds)

window_cfg = WindowTrainConfig(epochs=400, batch_size=10**9,
                               learning_rate=2e-3, dropout=0.3,
                               hidden_dim=32, latent_dim=8, seed=3)
models = train_window_models(ds, window_cfg)
user_seen, item_seen = _seen_flags(split, ds.stats)

u_seq, v_seq = embedding_sequences(models)
rows = np.concatenate([u_seq, v_seq], axis=0)
steps = np.linalg.norm(rows[:, 1:] - rows[:, :-1], axis=(0, 2))
norms = np.linalg.norm(rows[:, 1:], axis=(0, 2))
print("trajectory step size relative to frame norm, per transition:")
print("  " + " ".join(f"{s / n:.2f}" for s, n in zip(steps, norms)))

static_state = TrainedState([models[-1]], None, ds.stats, ds.id_maps,
                            user_seen, item_seen, window_cfg, None)
static = evaluate(predict_test_windows(static_state, split), {})

temporal_cfg = TemporalTrainConfig(cell="lstm", layers=2, epochs=800,
                                   learning_rate=5e-3, share_user_item=True,
                                   decoder="rnn", mask_inactive_rows=True,
                                   seed=3)
temporal = train_temporal(models, temporal_cfg)
state = TrainedState(models, temporal, ds.stats, ds.id_maps, user_seen,
                     item_seen, window_cfg, temporal_cfg)
forecast = evaluate(predict_test_windows(state, split), {})

print(f"\nstatic reuse of last window: rmse {static.rmse:.4f}"
      f"  mae {static.mae:.4f}")
print(f"rolled-forward trajectories: rmse {forecast.rmse:.4f}"
      f"  mae {forecast.mae:.4f}")
print("\nthe tension to notice: the last accumulative window already pools")
print("every training event, so the static arm is a strong, stale model,")
print("while the forecast arm pays a jitter tax (independently trained")
print("windows make bumpy trajectories) to chase the drift. the step sizes")
print("above are that tax; the drift rate in the stream config is the")
print("prize. at this desk scale the tax usually wins; the full-scale")
print("regime in scripts/reproduce_full.py is where the trade flips")
