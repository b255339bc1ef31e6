# Walk through the ingest layer: parse a rating stream, split it into
# fixed-length time windows, and see what the accumulative representation
# does to per-window density.
#
# Run from the repository root:
#   python demos/01_windowing.py

import tempfile
from pathlib import Path

import numpy as np

from tgmc.ingest import WindowingConfig, build_windows, parse_ratings, \
    train_test_split
from tgmc.synth import DriftConfig, write_drift_file

# A seeded synthetic stream in the MovieLens-1M line format. Small enough
# to eyeball, large enough that windows differ.
stream = Path(tempfile.mkdtemp()) / "ratings.dat"
cfg = DriftConfig(n_users=200, n_items=120, n_events=8000, n_windows=6,
                  window_seconds=14 * 86_400, drift=2.0, seed=1)
write_drift_file(stream, cfg)
print("wrote", stream)
print(open(stream).readline().strip(), "<- user::item::rating::timestamp")

events, id_maps = parse_ratings(stream, "movielens-1m")
print(f"\nparsed {len(events)} events, {len(id_maps.users)} users, "
      f"{len(id_maps.items)} items")
print("timestamps span", int(events.ts.max() - events.ts.min()), "seconds")

# Half-open windows of fixed length. A re-rated pair keeps only its latest
# rating inside each window.
wcfg = WindowingConfig(window_length_seconds=cfg.window_seconds,
                       accumulative=False, train_windows=4)
raw = build_windows(events, wcfg, id_maps)
print(f"\n{raw.n_windows} windows of {cfg.window_seconds // 86_400} days")
print(f"{'window':<8}{'events':>8}{'density':>10}")
for t in range(raw.n_windows):
    print(f"{t:<8}{len(raw.window_events(t)):>8}{raw.density(t):>10.4f}")

# The accumulative variant pools windows 1..t, so sparse early windows get
# denser training matrices while timestamps still decide membership.
acc = build_windows(events, WindowingConfig(
    window_length_seconds=cfg.window_seconds, accumulative=True,
    train_windows=4), id_maps)
print("\naccumulative pool sizes:",
      [len(acc.window_events(t)) for t in range(acc.n_windows)])

# Train/test split: leading windows train, trailing windows are always the
# raw events of their own window, never pooled.
split = train_test_split(acc)
print("train windows", split.train_indices, "sizes",
      [len(t) for t in split.train])
print("test windows ", split.test_indices, "sizes",
      [len(t) for t in split.test])

# causality check: every test timestamp is strictly after every train one
last_train_ts = max(int(t.ts.max()) for t in split.train)
first_test_ts = min(int(t.ts.min()) for t in split.test)
assert last_train_ts < first_test_ts
print("\nno test event precedes a train event:", last_train_ts, "<",
      first_test_ts)
