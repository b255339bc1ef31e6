"""Seeded synthetic rating streams with temporal drift.

Produces desk-scale datasets in the same shape as the public MovieLens-1M
dump (``user::item::rating::timestamp`` lines, ids 1-based, timestamps in
epoch seconds) so the full parse -> window -> train -> predict path runs
unchanged. Preferences follow a latent-factor model whose item factors
drift linearly over time, which gives trajectory models something real to
extrapolate while a pooled static model sees a moving target. Staggered
arrival settings additionally mimic how rating sites grow: users join over
the stream, rate a burst, then taper, so per-window volumes rise and
pooled embeddings of recent joiners are still settling.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numerics
from .ingest import RatingTable

_2000_01_01 = 946_684_800


@dataclass
class DriftConfig:
    n_users: int = 1200
    n_items: int = 700
    n_events: int = 100_000
    n_windows: int = 11
    window_seconds: int = 91 * 86_400
    latent: int = 4
    drift: float = 1.6
    noise: float = 0.35
    # staggered arrivals: fraction of the span over which users keep joining
    # (0 = everyone active from the first window), burst multiplier on the
    # joining window, and per-window activity decay afterwards
    arrival_span: float = 0.0
    burst: float = 1.0
    decay: float = 1.0
    origin: int = _2000_01_01
    seed: int = 7

    def __post_init__(self):
        if min(self.n_users, self.n_items, self.n_events, self.n_windows,
               self.window_seconds, self.latent) <= 0:
            raise ValueError("all sizes must be positive")
        if not 0.0 <= self.arrival_span <= 1.0:
            raise ValueError("arrival_span must be in [0, 1]")
        if self.burst <= 0 or not 0.0 < self.decay <= 1.0:
            raise ValueError("burst must be positive and decay in (0, 1]")
        per_window = self.n_events // self.n_windows
        if per_window > self.n_users * self.n_items:
            raise ValueError("more events per window than user-item cells")

    @property
    def staggered(self) -> bool:
        return (self.arrival_span > 0.0 or self.burst != 1.0
                or self.decay != 1.0)


def _activity_weights(rng: np.random.Generator, n: int):
    w = rng.lognormal(0.0, 0.8, size=n)
    return w / w.sum()


def _largest_remainder(total: int, mass: np.ndarray) -> np.ndarray:
    """Split ``total`` proportionally to ``mass``, at least 1 per bucket."""
    share = total * mass / mass.sum()
    counts = np.maximum(np.floor(share).astype(int), 1)
    short = total - counts.sum()
    if short > 0:
        frac = share - np.floor(share)
        counts[np.argsort(-frac)[:short]] += 1
    while counts.sum() > total:
        counts[np.argmax(counts)] -= 1
    return counts


def generate_drift_events(cfg: DriftConfig | None = None):
    """Raw event arrays (user, item, rating, ts), ids 1-based, ts-sorted."""
    cfg = cfg or DriftConfig()
    rng = numerics.make_rng(cfg.seed)
    k = cfg.latent
    user_vec = rng.normal(0.0, 1.0, (cfg.n_users, k)) / np.sqrt(k)
    item_vec = rng.normal(0.0, 1.0, (cfg.n_items, k)) / np.sqrt(k)
    trend = rng.normal(0.0, 1.0, (cfg.n_items, k)) / np.sqrt(k)

    user_w = _activity_weights(rng, cfg.n_users)
    item_w = _activity_weights(rng, cfg.n_items)

    if cfg.staggered:
        # users join across the leading arrival_span of the stream, rate a
        # burst in their joining window, then taper off geometrically
        join_limit = max(int(np.ceil(cfg.arrival_span * cfg.n_windows)), 1)
        joined = rng.integers(0, join_limit, size=cfg.n_users)
        age = np.arange(cfg.n_windows)[:, None] - joined[None, :]
        act = np.where(age < 0, 0.0, cfg.decay ** np.maximum(age, 0))
        act[age == 0] = cfg.burst
        window_w = user_w[None, :] * act          # (T, n_users)
        mass = window_w.sum(axis=1)
        counts = _largest_remainder(cfg.n_events, mass)
    else:
        window_w = np.tile(user_w, (cfg.n_windows, 1))
        per_window = cfg.n_events // cfg.n_windows
        counts = [per_window] * cfg.n_windows
        counts[-1] += cfg.n_events - per_window * cfg.n_windows

    log_item = np.log(item_w)

    all_users, all_items, all_scores, all_ts = [], [], [], []
    for t in range(cfg.n_windows):
        want = counts[t]
        # Gumbel top-k over the joint weight grid: exact weighted sampling
        # of distinct (user, item) pairs under the seeded stream
        with np.errstate(divide="ignore"):
            log_w = (np.log(window_w[t])[:, None] + log_item[None, :]).ravel()
        active_cells = int((window_w[t] > 0).sum()) * cfg.n_items
        if want > active_cells:
            raise ValueError(f"window {t} wants {want} events but only "
                             f"{active_cells} user-item cells are active")
        keys = log_w + rng.gumbel(size=log_w.size)
        top = np.argpartition(-keys, want - 1)[:want]
        top.sort()
        users, items = np.divmod(top, cfg.n_items)
        phase = t / max(cfg.n_windows - 1, 1)
        b_t = item_vec[items] + cfg.drift * phase * trend[items]
        score = np.einsum("nk,nk->n", user_vec[users], b_t)
        score = score + rng.normal(0.0, cfg.noise, size=want)
        lo = cfg.origin + t * cfg.window_seconds
        ts = lo + rng.integers(0, cfg.window_seconds, size=want)
        all_users.append(users)
        all_items.append(items)
        all_scores.append(score)
        all_ts.append(ts)

    users = np.concatenate(all_users)
    items = np.concatenate(all_items)
    scores = np.concatenate(all_scores)
    ts = np.concatenate(all_ts).astype(np.int64)

    # pin the stream's extremes so the span covers exactly n_windows windows
    ts[0] = cfg.origin
    ts[-1] = cfg.origin + cfg.n_windows * cfg.window_seconds - 1

    z = (scores - scores.mean()) / scores.std()
    ratings = np.digitize(z, [-1.2, -0.4, 0.4, 1.2]) + 1

    order = np.argsort(ts, kind="stable")
    return (users[order].astype(np.int64) + 1,
            items[order].astype(np.int64) + 1,
            ratings[order].astype(np.int64),
            ts[order])


def write_drift_file(path, cfg: DriftConfig | None = None) -> Path:
    """Write the synthetic stream as ``user::item::rating::ts`` lines."""
    path = Path(path)
    users, items, ratings, ts = generate_drift_events(cfg)
    with open(path, "w", encoding="utf-8") as fh:
        for k in range(len(users)):
            fh.write(f"{users[k]}::{items[k]}::{ratings[k]}::{ts[k]}\n")
    return path


def drift_table(cfg: DriftConfig | None = None) -> RatingTable:
    """The same stream as dense-id RatingTable (ids made 0-based)."""
    users, items, ratings, ts = generate_drift_events(cfg)
    return RatingTable(users - 1, items - 1, ratings, ts)
