"""Rating-log ingestion: parsing, id remapping, time windowing, train/test split.

Raw logs come in three grammars (``movielens-1m``, ``netflix-monthly``,
plain ``csv``). Events are remapped to dense 0-based user/item indices in
first-appearance order and partitioned into fixed-length, half-open time
windows. A dataset can expose its training windows either as-is or
accumulatively (window t = union of raw windows 1..t), which densifies the
early sparse windows; test windows are always the raw events of their
window.
"""

from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

WINDOW_MAGIC = b"TGMCWIN1"
WINDOW_RECORD_DTYPE = np.dtype([("user", "<u4"), ("item", "<u4"),
                                ("rating", "u1"), ("ts", "<i8")])
MANIFEST_NAME = "manifest.json"


class ParseError(ValueError):
    """Malformed input line; carries the 1-based line number."""


class ValidationError(ValueError):
    """Well-formed input with an out-of-contract value."""


@dataclass(frozen=True)
class RatingEvent:
    user: int      # dense 0-based index
    item: int      # dense 0-based index
    rating: int    # integer score in 1..R
    ts: int        # seconds since Unix epoch (UTC)


class RatingTable:
    """Array-backed sequence of rating events.

    Columns are parallel numpy arrays; indexing yields ``RatingEvent`` views
    so the table can be treated as a list of events without paying per-event
    object cost in bulk paths.
    """

    __slots__ = ("user", "item", "rating", "ts")

    def __init__(self, user, item, rating, ts):
        self.user = np.asarray(user, dtype=np.int32)
        self.item = np.asarray(item, dtype=np.int32)
        self.rating = np.asarray(rating, dtype=np.int8)
        self.ts = np.asarray(ts, dtype=np.int64)
        n = len(self.user)
        if not (len(self.item) == len(self.rating) == len(self.ts) == n):
            raise ValueError("rating table columns differ in length")

    @classmethod
    def empty(cls) -> "RatingTable":
        return cls([], [], [], [])

    @classmethod
    def from_events(cls, events) -> "RatingTable":
        events = list(events)
        return cls([e.user for e in events], [e.item for e in events],
                   [e.rating for e in events], [e.ts for e in events])

    def __len__(self) -> int:
        return len(self.user)

    def __getitem__(self, i: int) -> RatingEvent:
        return RatingEvent(int(self.user[i]), int(self.item[i]),
                           int(self.rating[i]), int(self.ts[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RatingTable):
            return NotImplemented
        return (len(self) == len(other)
                and bool(np.array_equal(self.user, other.user))
                and bool(np.array_equal(self.item, other.item))
                and bool(np.array_equal(self.rating, other.rating))
                and bool(np.array_equal(self.ts, other.ts)))

    def take(self, idx) -> "RatingTable":
        return RatingTable(self.user[idx], self.item[idx],
                           self.rating[idx], self.ts[idx])

    def concat(self, other: "RatingTable") -> "RatingTable":
        return RatingTable(np.concatenate([self.user, other.user]),
                           np.concatenate([self.item, other.item]),
                           np.concatenate([self.rating, other.rating]),
                           np.concatenate([self.ts, other.ts]))

    def dedup_latest(self) -> "RatingTable":
        """Keep one event per (user, item): latest timestamp, input order
        breaking timestamp ties in favour of the later event."""
        if len(self) == 0:
            return self
        arrival = np.arange(len(self))
        order = np.lexsort((arrival, self.ts, self.item, self.user))
        u = self.user[order]
        it = self.item[order]
        # last entry of each (user, item) run wins
        boundary = np.ones(len(u), dtype=bool)
        boundary[:-1] = (u[1:] != u[:-1]) | (it[1:] != it[:-1])
        keep = order[boundary]
        keep.sort()  # restore input order among survivors
        return self.take(keep)


class IdMap:
    """Bijection between raw identifiers and dense 0-based indices."""

    def __init__(self, raw_ids=()):
        self.raw_ids: list = list(raw_ids)
        self._to_dense = {raw: i for i, raw in enumerate(self.raw_ids)}

    def intern(self, raw) -> int:
        idx = self._to_dense.get(raw)
        if idx is None:
            idx = len(self.raw_ids)
            self.raw_ids.append(raw)
            self._to_dense[raw] = idx
        return idx

    def dense(self, raw) -> int:
        try:
            return self._to_dense[raw]
        except KeyError:
            raise KeyError(f"unknown raw id {raw!r}") from None

    def raw(self, dense: int):
        return self.raw_ids[dense]

    def __len__(self) -> int:
        return len(self.raw_ids)

    def __contains__(self, raw) -> bool:
        return raw in self._to_dense


@dataclass
class IdMaps:
    users: IdMap = field(default_factory=IdMap)
    items: IdMap = field(default_factory=IdMap)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

PARSE_FORMATS = ("movielens-1m", "netflix-monthly", "csv")


def _coerce_raw_id(token: str):
    return int(token) if token.lstrip("-").isdigit() else token


def _parse_rating(token: str, max_rating: int, lineno: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ParseError(f"line {lineno}: rating '{token}' is not an integer") from None
    if not 1 <= value <= max_rating:
        raise ValidationError(
            f"line {lineno}: rating {value} outside [1, {max_rating}]")
    return value


def _date_to_epoch(token: str, lineno: int) -> int:
    try:
        day = datetime.strptime(token, "%Y-%m-%d")
    except ValueError:
        raise ParseError(f"line {lineno}: bad date '{token}'") from None
    return int(day.replace(tzinfo=timezone.utc).timestamp())


def parse_ratings(source, format: str, max_rating: int = 5):
    """Parse a rating log into a RatingTable plus raw-id maps.

    ``source`` may be a byte stream, a path, or a text stream. Events are
    returned in input order; raw user/item ids are remapped to dense 0-based
    indices in first-appearance order. Duplicate (user, item) pairs are
    kept; windowing applies its own dedup policy later.
    """
    if format not in PARSE_FORMATS:
        raise ValueError(f"unknown format '{format}' (expected one of {PARSE_FORMATS})")

    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return parse_ratings(fh, format, max_rating=max_rating)
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    if isinstance(source, io.TextIOBase):
        text = source
    else:
        text = io.TextIOWrapper(source, encoding="utf-8", newline="")

    maps = IdMaps()
    users: list[int] = []
    items: list[int] = []
    ratings: list[int] = []
    stamps: list[int] = []

    def emit(raw_user, raw_item, rating, ts):
        users.append(maps.users.intern(raw_user))
        items.append(maps.items.intern(raw_item))
        ratings.append(rating)
        stamps.append(ts)

    current_movie = None  # netflix block header state
    for lineno, line in enumerate(text, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        if format == "movielens-1m":
            parts = line.split("::")
            if len(parts) != 4:
                raise ParseError(f"line {lineno}: expected 4 '::'-separated "
                                 f"fields, got {len(parts)}")
            rating = _parse_rating(parts[2], max_rating, lineno)
            try:
                ts = int(parts[3])
            except ValueError:
                raise ParseError(f"line {lineno}: bad timestamp '{parts[3]}'") from None
            emit(_coerce_raw_id(parts[0]), _coerce_raw_id(parts[1]), rating, ts)
        elif format == "netflix-monthly":
            if line.endswith(":"):
                current_movie = _coerce_raw_id(line[:-1])
                continue
            if current_movie is None:
                raise ParseError(f"line {lineno}: rating line before any "
                                 f"'MovieID:' header")
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(f"line {lineno}: expected 'user,rating,date'")
            rating = _parse_rating(parts[1], max_rating, lineno)
            ts = _date_to_epoch(parts[2].strip(), lineno)
            emit(_coerce_raw_id(parts[0]), current_movie, rating, ts)
        else:  # csv
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 4:
                raise ParseError(f"line {lineno}: expected 4 comma-separated "
                                 f"fields, got {len(parts)}")
            if lineno == 1 and not parts[2].lstrip("-").isdigit():
                continue  # optional header row
            rating = _parse_rating(parts[2], max_rating, lineno)
            try:
                ts = int(parts[3])
            except ValueError:
                raise ParseError(f"line {lineno}: bad timestamp '{parts[3]}'") from None
            emit(_coerce_raw_id(parts[0]), _coerce_raw_id(parts[1]), rating, ts)

    table = RatingTable(users, items, ratings, stamps)
    if len(table) and table.ts.min() < 0:
        raise ValidationError("negative timestamp in input")
    return table, maps


# ---------------------------------------------------------------------------
# windowing
# ---------------------------------------------------------------------------

@dataclass
class WindowingConfig:
    window_length_seconds: int
    accumulative: bool = False
    train_windows: int = 1
    origin: int | None = None  # timestamp of first event, set by build_windows

    def __post_init__(self):
        if self.window_length_seconds <= 0:
            raise ValueError("window_length_seconds must be positive")
        if self.train_windows < 1:
            raise ValueError("train_windows must be >= 1")


@dataclass(frozen=True)
class DatasetStats:
    n_users: int
    n_items: int
    n_ratings: int   # R: ratings take values 1..n_ratings
    n_windows: int   # T


class WindowedDataset:
    """T raw per-window rating sets plus windowing config and id maps.

    Raw windows are stored deduplicated (latest timestamp wins per
    (user, item) within a window). Accumulative access re-deduplicates
    across the union 1..t so a re-rated pair keeps its most recent score.
    """

    def __init__(self, raw_windows: list[RatingTable], stats: DatasetStats,
                 config: WindowingConfig, id_maps: IdMaps):
        self.raw_windows = raw_windows
        self.stats = stats
        self.config = config
        self.id_maps = id_maps
        self._acc_cache: dict[int, RatingTable] = {}

    @property
    def n_windows(self) -> int:
        return self.stats.n_windows

    def raw_window(self, t: int) -> RatingTable:
        """Raw (non-accumulated) events of 0-based window t."""
        return self.raw_windows[t]

    def window_events(self, t: int) -> RatingTable:
        """Window t as seen by training: accumulated if configured."""
        if not self.config.accumulative:
            return self.raw_windows[t]
        if t not in self._acc_cache:
            merged = self.raw_windows[0]
            for s in range(1, t + 1):
                merged = merged.concat(self.raw_windows[s])
            self._acc_cache[t] = merged.dedup_latest()
        return self._acc_cache[t]

    def window_of_timestamp(self, ts: int) -> int:
        return int((ts - self.config.origin) // self.config.window_length_seconds)

    def density(self, t: int) -> float:
        cells = self.stats.n_users * self.stats.n_items
        return len(self.window_events(t)) / cells if cells else 0.0


def build_windows(events: RatingTable, config: WindowingConfig,
                  id_maps: IdMaps | None = None,
                  max_rating: int = 5) -> WindowedDataset:
    """Partition events into T fixed-length windows.

    T = ceil((max_ts - min_ts + 1) / delta) with half-open windows
    [origin + t*delta, origin + (t+1)*delta). Within each window, duplicate
    (user, item) pairs collapse to the latest-timestamp rating.
    """
    if len(events) == 0:
        raise ValueError("cannot window an empty event set")
    delta = config.window_length_seconds
    t_min = int(events.ts.min())
    t_max = int(events.ts.max())
    n_windows = math.ceil((t_max - t_min + 1) / delta)
    if n_windows == 1:
        logger.warning("window length %ds covers the whole %ds span: T=1 "
                       "reduces to a static (single-window) model",
                       delta, t_max - t_min + 1)
    assignment = (events.ts - t_min) // delta

    raw_windows = []
    for t in range(n_windows):
        raw_windows.append(events.take(assignment == t).dedup_latest())

    if id_maps is None:
        id_maps = IdMaps(IdMap(range(int(events.user.max()) + 1)),
                         IdMap(range(int(events.item.max()) + 1)))
    stats = DatasetStats(n_users=len(id_maps.users), n_items=len(id_maps.items),
                         n_ratings=max_rating, n_windows=n_windows)
    config.origin = t_min
    return WindowedDataset(raw_windows, stats, config, id_maps)


@dataclass
class TrainTestSplit:
    train: list[RatingTable]        # windows 1..T_train, accumulated if configured
    test: list[RatingTable]         # raw events of windows T_train+1..T
    train_indices: list[int]
    test_indices: list[int]


def train_test_split(dataset: WindowedDataset,
                     config: WindowingConfig | None = None) -> TrainTestSplit:
    """Leading windows train, trailing windows test.

    Test windows are always the raw events of their window: accumulation is
    a training-side densification only. Causality holds by construction
    (every test timestamp falls in a later window than every train event).
    """
    config = config or dataset.config
    t_train = config.train_windows
    if dataset.n_windows <= t_train:
        raise ValueError(f"train_windows={t_train} needs more than "
                         f"{dataset.n_windows} total windows")
    train = [dataset.window_events(t) for t in range(t_train)]
    test = [dataset.raw_window(t) for t in range(t_train, dataset.n_windows)]
    return TrainTestSplit(train=train, test=test,
                          train_indices=list(range(t_train)),
                          test_indices=list(range(t_train, dataset.n_windows)))


# ---------------------------------------------------------------------------
# serialization: JSON manifest + one binary file per raw window
# ---------------------------------------------------------------------------

def _window_filename(t: int) -> str:
    return f"window_{t + 1:04d}.bin"


def save_window_binary(path: Path, window: RatingTable) -> None:
    records = np.empty(len(window), dtype=WINDOW_RECORD_DTYPE)
    records["user"] = window.user
    records["item"] = window.item
    records["rating"] = window.rating
    records["ts"] = window.ts
    with open(path, "wb") as fh:
        fh.write(WINDOW_MAGIC)
        fh.write(np.uint32(len(window)).astype("<u4").tobytes())
        fh.write(records.tobytes())


def load_window_binary(path: Path) -> RatingTable:
    blob = Path(path).read_bytes()
    if blob[:8] != WINDOW_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:8]!r}")
    count = int(np.frombuffer(blob, dtype="<u4", count=1, offset=8)[0])
    records = np.frombuffer(blob, dtype=WINDOW_RECORD_DTYPE, count=count, offset=12)
    if len(records) != count:
        raise ValueError(f"{path}: truncated window file")
    return RatingTable(records["user"].astype(np.int32),
                       records["item"].astype(np.int32),
                       records["rating"].astype(np.int8),
                       records["ts"].astype(np.int64))


def save_dataset(dataset: WindowedDataset, out_dir) -> Path:
    out_dir = Path(out_dir)
    windows_dir = out_dir / "windows"
    windows_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for t, window in enumerate(dataset.raw_windows):
        name = _window_filename(t)
        save_window_binary(windows_dir / name, window)
        files.append(name)
    manifest = {
        "format": "tgmc-windows-v1",
        "stats": {
            "n_users": dataset.stats.n_users,
            "n_items": dataset.stats.n_items,
            "n_ratings": dataset.stats.n_ratings,
            "n_windows": dataset.stats.n_windows,
        },
        "config": {
            "window_length_seconds": dataset.config.window_length_seconds,
            "accumulative": dataset.config.accumulative,
            "train_windows": dataset.config.train_windows,
            "origin": dataset.config.origin,
        },
        "id_maps": {
            "users": dataset.id_maps.users.raw_ids,
            "items": dataset.id_maps.items.raw_ids,
        },
        "windows": [{"file": f, "count": len(w)}
                    for f, w in zip(files, dataset.raw_windows)],
    }
    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest_path


def load_dataset(in_dir) -> WindowedDataset:
    in_dir = Path(in_dir)
    manifest = json.loads((in_dir / MANIFEST_NAME).read_text())
    if manifest.get("format") != "tgmc-windows-v1":
        raise ValueError(f"{in_dir}: unrecognized manifest format")
    raw_windows = [load_window_binary(in_dir / "windows" / entry["file"])
                   for entry in manifest["windows"]]
    stats = DatasetStats(**manifest["stats"])
    config = WindowingConfig(**manifest["config"])
    id_maps = IdMaps(IdMap(manifest["id_maps"]["users"]),
                     IdMap(manifest["id_maps"]["items"]))
    return WindowedDataset(raw_windows, stats, config, id_maps)
