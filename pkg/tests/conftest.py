import numpy as np
import pytest

from tgmc import ingest, numerics
from tgmc.graph import build_rating_window


@pytest.fixture
def rng():
    return numerics.make_rng(12345)


def make_table(triples, ts_start=0):
    """RatingTable from (user, item, rating) triples, timestamps increasing."""
    users = np.array([t[0] for t in triples], dtype=np.int64)
    items = np.array([t[1] for t in triples], dtype=np.int64)
    ratings = np.array([t[2] for t in triples], dtype=np.int64)
    ts = np.arange(ts_start, ts_start + len(triples), dtype=np.int64)
    return ingest.RatingTable(users, items, ratings, ts)


def make_window(triples, n_users, n_items, n_ratings=5, t=0):
    return build_rating_window(make_table(triples), (n_users, n_items, n_ratings), t=t)


@pytest.fixture
def tiny_window():
    """4 users x 3 items, 6 edges over 3 rating levels."""
    return make_window(
        [(0, 0, 5), (0, 1, 3), (1, 0, 5), (2, 2, 1), (3, 1, 3), (3, 2, 5)],
        n_users=4, n_items=3)
