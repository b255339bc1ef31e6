"""Per-window bipartite rating graphs, partitioned by rating level.

Each window's observed ratings become R edge sets (one per rating score)
with degree counts and per-edge normalization constants for message
passing. Windows are immutable once built and safe to share across
threads; normalized adjacency matrices are cached per normalization mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ingest import RatingTable

ITEM_TO_USER = "item_to_user"
USER_TO_ITEM = "user_to_item"


@dataclass(frozen=True)
class NormalizationSpec:
    mode: str = "symmetric"  # "left" | "symmetric"

    def __post_init__(self):
        if self.mode not in ("left", "symmetric"):
            raise ValueError(f"unknown normalization mode '{self.mode}'")


class RatingWindow:
    """Bipartite adjacency of one window, split by rating level.

    ``edge_users[r]`` / ``edge_items[r]`` hold the level-(r+1) edges sorted
    by (user, item); ``user_degree[r][i]`` counts the level-(r+1) neighbours
    of user i (and symmetrically for items).
    """

    def __init__(self, t: int, n_users: int, n_items: int, n_ratings: int,
                 edge_users: list[np.ndarray], edge_items: list[np.ndarray],
                 observed: RatingTable):
        self.t = t
        self.n_users = n_users
        self.n_items = n_items
        self.n_ratings = n_ratings
        self.edge_users = edge_users
        self.edge_items = edge_items
        self.observed = observed
        self.user_degree = np.stack([
            np.bincount(edge_users[r], minlength=n_users)
            for r in range(n_ratings)]).astype(np.int64)
        self.item_degree = np.stack([
            np.bincount(edge_items[r], minlength=n_items)
            for r in range(n_ratings)]).astype(np.int64)
        # sorted (user, item) keys per level, for O(log n) edge membership
        self._edge_keys = [edge_users[r].astype(np.int64) * n_items
                           + edge_items[r] for r in range(n_ratings)]
        self._norm_cache: dict = {}

    @property
    def n_edges(self) -> int:
        return len(self.observed)

    def edge_count(self, level: int) -> int:
        return len(self.edge_users[level])

    def has_edge(self, user: int, item: int, rating: int) -> bool:
        keys = self._edge_keys[rating - 1]
        pos = np.searchsorted(keys, user * self.n_items + item)
        return pos < len(keys) and keys[pos] == user * self.n_items + item

    def edge_norm_values(self, level: int, spec: NormalizationSpec,
                         direction: str) -> np.ndarray:
        """1/c for every level edge, aligned with edge_users/edge_items."""
        du = self.user_degree[level][self.edge_users[level]]
        di = self.item_degree[level][self.edge_items[level]]
        if spec.mode == "symmetric":
            c = np.sqrt(du.astype(np.float64) * di)
        elif direction == ITEM_TO_USER:
            c = du.astype(np.float64)   # receiver is the user
        else:
            c = di.astype(np.float64)   # receiver is the item
        return 1.0 / c

    def normalized_adjacency(self, spec: NormalizationSpec, direction: str,
                             dtype=np.float64) -> list[sp.csr_matrix]:
        """Per-level sparse matrices carrying 1/c on each edge.

        ITEM_TO_USER returns (n_users x n_items) matrices whose product with
        item-indexed message columns aggregates into users; USER_TO_ITEM is
        the (n_items x n_users) counterpart.
        """
        key = (spec.mode, direction, np.dtype(dtype).str)
        if key in self._norm_cache:
            return self._norm_cache[key]
        mats = []
        for r in range(self.n_ratings):
            vals = self.edge_norm_values(r, spec, direction).astype(dtype)
            if direction == ITEM_TO_USER:
                shape = (self.n_users, self.n_items)
                rows, cols = self.edge_users[r], self.edge_items[r]
            else:
                shape = (self.n_items, self.n_users)
                rows, cols = self.edge_items[r], self.edge_users[r]
            mats.append(sp.csr_matrix((vals, (rows, cols)), shape=shape))
        self._norm_cache[key] = mats
        return mats


def build_rating_window(events: RatingTable, stats, t: int = 0) -> RatingWindow:
    """Build the per-level adjacency of one window's events.

    ``stats`` is (n_users, n_items, n_ratings) or any object with those
    attributes. Edges are sorted by (user, item) within each level so the
    construction is deterministic.
    """
    if hasattr(stats, "n_users"):
        n_users, n_items, n_ratings = stats.n_users, stats.n_items, stats.n_ratings
    else:
        n_users, n_items, n_ratings = stats

    if len(events):
        if events.rating.min() < 1 or events.rating.max() > n_ratings:
            raise ValueError(f"rating outside [1, {n_ratings}] in window {t}")
        if events.user.min() < 0 or events.user.max() >= n_users:
            raise ValueError(f"user index out of range in window {t}")
        if events.item.min() < 0 or events.item.max() >= n_items:
            raise ValueError(f"item index out of range in window {t}")

    edge_users, edge_items = [], []
    for r in range(1, n_ratings + 1):
        mask = events.rating == r
        users = events.user[mask].astype(np.int64)
        items = events.item[mask].astype(np.int64)
        order = np.lexsort((items, users))
        edge_users.append(users[order])
        edge_items.append(items[order])
    return RatingWindow(t, n_users, n_items, n_ratings,
                        edge_users, edge_items, observed=events)


def normalization(window: RatingWindow, spec: NormalizationSpec,
                  edge: tuple[int, int, int], direction: str) -> float:
    """Normalization constant c for one existing edge (user, item, rating).

    Left mode: degree of the message-receiving node at that rating level.
    Symmetric mode: sqrt(user_degree * item_degree). Always >= 1 because the
    edge itself contributes to both endpoint degrees.
    """
    if direction not in (ITEM_TO_USER, USER_TO_ITEM):
        raise ValueError(f"unknown direction '{direction}'")
    user, item, rating = edge
    if not 1 <= rating <= window.n_ratings:
        raise ValueError(f"rating level {rating} out of range")
    if not window.has_edge(user, item, rating):
        raise ValueError(f"edge ({user}, {item}, r={rating}) not in window")
    level = rating - 1
    du = int(window.user_degree[level][user])
    di = int(window.item_degree[level][item])
    if spec.mode == "symmetric":
        return float(np.sqrt(du * di))
    return float(du) if direction == ITEM_TO_USER else float(di)
