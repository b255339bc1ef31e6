# A sanity anchor: plain matrix factorization with squared loss, trained
# on the pooled ratings with no graph and no time axis. The windowed
# model should be in the same neighborhood on easy data; if it weren't,
# something deeper than tuning would be off.
#
#   python demos/05_pmf_baseline.py

import numpy as np

from tgmc.ingest import WindowingConfig, build_windows, train_test_split
from tgmc.pipeline import WindowTrainConfig, pmf_baseline, run_experiment
from tgmc.synth import DriftConfig, drift_table

cfg = DriftConfig(n_users=250, n_items=150, n_events=12_000, n_windows=5,
                  drift=0.5, noise=0.3, seed=21)
table = drift_table(cfg)
ds = build_windows(table, WindowingConfig(
    window_length_seconds=cfg.window_seconds, accumulative=True,
    train_windows=3))

pmf = pmf_baseline(ds, d=8, learning_rate=0.003, reg=0.05, epochs=60,
                   batch_size=2000, seed=1)
print(f"matrix factorization  rmse {pmf.report.rmse:.4f}"
      f"  mae {pmf.report.mae:.4f}  ({pmf.report.count} test ratings)")

window_cfg = WindowTrainConfig(epochs=300, batch_size=10**9,
                               learning_rate=0.01, dropout=0.0,
                               hidden_dim=24, latent_dim=8, seed=1)
result = run_experiment(ds, window_cfg, None)
static = result.report
print(f"last-window graph model rmse {static.rmse:.4f}"
      f"  mae {static.mae:.4f}")

test_ratings = np.concatenate([t.rating for t in train_test_split(ds).test])
floor = float(np.sqrt(((test_ratings - 3.0) ** 2).mean()))
print(f"predict-the-midpoint floor rmse {floor:.4f}")
assert pmf.report.rmse < floor and static.rmse < floor
