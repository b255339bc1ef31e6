# Train one graph-convolutional window model and poke at what it learned:
# the loss curve, the rating distribution it decodes for a few user-item
# pairs, and the expectation that becomes the predicted rating.
#
#   python demos/02_single_window.py

import numpy as np

from tgmc.decoder import decode_probs_batch, expected_rating_batch
from tgmc.graph import build_rating_window
from tgmc.ingest import WindowingConfig, build_windows
from tgmc.pipeline import WindowTrainConfig, train_window_models
from tgmc.synth import DriftConfig, drift_table

cfg = DriftConfig(n_users=150, n_items=90, n_events=6000, n_windows=2,
                  window_seconds=30 * 86_400, seed=4)
ds = build_windows(drift_table(cfg), WindowingConfig(
    window_length_seconds=cfg.window_seconds, accumulative=True,
    train_windows=1))

train_cfg = WindowTrainConfig(epochs=120, batch_size=10**9,
                              learning_rate=0.01, dropout=0.0,
                              hidden_dim=24, latent_dim=8, seed=0)
model = train_window_models(ds, train_cfg)[0]

curve = model.loss_curve
print("negative log-likelihood per edge, every 20 epochs:")
print("  " + "  ".join(f"{curve[i]:.3f}" for i in range(0, len(curve), 20)))
print(f"final {curve[-1]:.3f} (uniform guess would sit at "
      f"{np.log(5):.3f})")

# embeddings are row-per-node matrices; isolated nodes stay at zero
print("\nuser embeddings", model.u_emb.shape, "item embeddings",
      model.v_emb.shape)

# decode a few observed pairs: the softmax over levels 1..5 and its
# expectation, next to the rating actually given
events = ds.window_events(0)
pick = np.arange(0, len(events), len(events) // 5)[:5]
u = model.u_emb[events.user[pick]]
v = model.v_emb[events.item[pick]]
probs = decode_probs_batch(u, v, model.decoder)
expect = expected_rating_batch(probs)
print("\npair        P(1..5)                                predicted  actual")
for k, idx in enumerate(pick):
    p = " ".join(f"{x:.2f}" for x in probs[k])
    print(f"({events.user[idx]:>4},{events.item[idx]:>4})  [{p}]"
          f"   {expect[k]:.2f}      {events.rating[idx]}")

assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
print("\nrows sum to one; expectations stay inside [1, 5]:",
      float(expect.min()), "-", float(expect.max()))
