"""Event-log parsing, session segmentation, vocabularies and holdout splits."""

from __future__ import annotations

import calendar
import csv
import io
import logging
import struct
from collections import OrderedDict, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import BinaryIO, Hashable, Iterable, Iterator, TextIO

from .rng import CounterRNG

log = logging.getLogger(__name__)

DAY = 86400
INTERVALS = ("day", "week", "month", "tag-bundle")
EVENT_HEADER = ("user_id", "item_id", "timestamp")
STORE_MAGIC = b"DGRS1"


class FormatError(ValueError):
    """Input file does not follow the expected layout."""


@dataclass(frozen=True)
class Event:
    user_id: str
    item_id: str
    timestamp: int
    session_key: str | None = None

    def __post_init__(self):
        if not self.user_id or not self.item_id:
            raise ValueError("user_id and item_id must be non-empty")
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass(frozen=True)
class Session:
    """One user session.

    ``start`` is the calendar interval start (UTC) for time-based
    segmentation, or the first event timestamp for tag bundles. It orders
    sessions across users; ``time_index`` only orders one user's sessions.
    """

    user: Hashable
    time_index: int
    start: int
    items: tuple

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class SessionStore:
    by_user: dict = field(default_factory=dict)
    max_timestamp: int = 0

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_user.values())

    def __iter__(self) -> Iterator[Session]:
        for sessions in self.by_user.values():
            yield from sessions

    @property
    def users(self) -> list:
        return list(self.by_user)

    @property
    def n_events(self) -> int:
        return sum(len(s) for s in self)

    @property
    def avg_session_length(self) -> float:
        n = len(self)
        return self.n_events / n if n else 0.0

    def horizon(self, user) -> int:
        return len(self.by_user.get(user, ()))

    def item_set(self) -> set:
        return {i for s in self for i in s.items}

    def check(self, n_items: int | None = None) -> None:
        for user, sessions in self.by_user.items():
            prev = 0
            for s in sessions:
                if s.user != user or s.time_index <= prev or not s.items:
                    raise ValueError(f"store invariant broken for user {user!r}")
                prev = s.time_index
                if n_items is not None and any(not 0 <= i < n_items for i in s.items):
                    raise ValueError(f"item index out of range in {s}")


@dataclass(frozen=True)
class SplitConfig:
    holdout_days: int
    interval: str = "week"
    seed: int = 0

    def __post_init__(self):
        if self.holdout_days < 1:
            raise ValueError("holdout_days must be >= 1")
        if self.interval not in INTERVALS:
            raise ValueError(f"unknown interval {self.interval!r}; expected one of {INTERVALS}")


class Vocab:
    """Bijection between opaque ids and contiguous indices from 0."""

    def __init__(self, ids: Iterable[str] = ()):
        self._ids: list[str] = []
        self._index: dict[str, int] = {}
        for x in ids:
            self.add(x)

    def add(self, key: str) -> int:
        idx = self._index.get(key)
        if idx is None:
            idx = self._index[key] = len(self._ids)
            self._ids.append(key)
        return idx

    def index(self, key: str) -> int:
        return self._index[key]

    def get(self, key: str, default=None):
        return self._index.get(key, default)

    def id(self, idx: int) -> str:
        return self._ids[idx]

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def __contains__(self, key) -> bool:
        return key in self._index

    def __len__(self) -> int:
        return len(self._ids)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self._ids == other._ids


ItemVocab = Vocab
UserVocab = Vocab


# -- parsing -----------------------------------------------------------------

def _text(stream: BinaryIO | TextIO) -> TextIO:
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def parse_events(stream, max_error_rate: float = 0.10) -> tuple[list[Event], list[RowError]]:
    """Read ``user_id,item_id,timestamp[,session_key]`` rows.

    Bad rows are collected and returned; parsing only fails outright when the
    header is missing or more than ``max_error_rate`` of the rows are bad.
    """
    reader = csv.reader(_text(stream))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header[:3]) != EVENT_HEADER:
        raise FormatError(f"missing header {','.join(EVENT_HEADER)}; got {header!r}")
    keyed = len(header) > 3 and header[3].strip() == "session_key"

    events: list[Event] = []
    errors: list[RowError] = []
    rows = 0
    for line, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        rows += 1
        try:
            if len(row) < 3:
                raise ValueError(f"expected at least 3 fields, got {len(row)}")
            user, item, ts = row[0].strip(), row[1].strip(), row[2].strip()
            try:
                stamp = int(ts)
            except ValueError:
                raise ValueError(f"timestamp {ts!r} is not an integer") from None
            key = row[3].strip() if keyed and len(row) > 3 else None
            events.append(Event(user, item, stamp, key or None))
        except ValueError as exc:
            errors.append(RowError(line, str(exc)))
    if rows and len(errors) > max_error_rate * rows:
        raise FormatError(f"{len(errors)} of {rows} rows malformed; first: {errors[0]}")
    for err in errors:
        log.warning("events line %d skipped: %s", err.line, err.message)
    return events, errors


def parse_hetrec_delicious(stream) -> list[Event]:
    """Convert hetrec-2011 ``user_taggedbookmarks-timestamps.dat`` rows.

    Columns are ``userID bookmarkID tagID timestamp`` (tab separated,
    millisecond timestamps). Tags become items; bookmarks become session keys.
    """
    events = []
    text = _text(stream)
    next(text, None)
    for line in text:
        parts = line.split()
        if len(parts) < 4:
            continue
        user, bookmark, tag, ms = parts[:4]
        events.append(Event(user, tag, int(ms) // 1000, bookmark))
    return events


# -- segmentation ------------------------------------------------------------

def interval_start(ts: int, interval: str) -> int:
    """UTC start of the calendar interval containing ``ts``. Weeks start Monday."""
    if interval == "day":
        return ts - ts % DAY
    if interval == "week":
        days = ts // DAY
        # 1970-01-01 was a Thursday, three days after a Monday.
        return (days - (days + 3) % 7) * DAY
    if interval == "month":
        dt = datetime.fromtimestamp(ts, tz=timezone.utc)
        return calendar.timegm((dt.year, dt.month, 1, 0, 0, 0))
    raise ValueError(f"no calendar interval {interval!r}")


def segment_sessions(events: Iterable[Event], interval: str = "week",
                     max_session_len: int = 20) -> SessionStore:
    """Bucket each user's events into sessions.

    Events keep their input order on equal timestamps. Overlong sessions keep
    their most recent ``max_session_len`` items.
    """
    if interval not in INTERVALS:
        raise ValueError(f"unknown interval {interval!r}")
    if max_session_len < 1:
        raise ValueError("max_session_len must be >= 1")
    per_user: dict[str, list[tuple[int, int, Event]]] = OrderedDict()
    max_ts = 0
    for pos, ev in enumerate(events):
        per_user.setdefault(ev.user_id, []).append((ev.timestamp, pos, ev))
        max_ts = max(max_ts, ev.timestamp)

    store = SessionStore(max_timestamp=max_ts)
    for user, rows in per_user.items():
        rows.sort(key=lambda r: (r[0], r[1]))
        buckets: dict = OrderedDict()
        for ts, _, ev in rows:
            if interval == "tag-bundle":
                if ev.session_key is None:
                    raise FormatError("tag-bundle segmentation needs a session_key column")
                key = ev.session_key
            else:
                key = interval_start(ts, interval)
            buckets.setdefault(key, []).append(ev)
        ordered = []
        for key, evs in buckets.items():
            start = evs[0].timestamp if interval == "tag-bundle" else key
            ordered.append((start, evs))
        ordered.sort(key=lambda b: b[0])  # stable: ties keep first-seen order
        sessions = []
        for t, (start, evs) in enumerate(ordered, start=1):
            items = tuple(ev.item_id for ev in evs[-max_session_len:])
            sessions.append(Session(user, t, start, items))
        store.by_user[user] = sessions
    return store


# -- splitting ---------------------------------------------------------------

def split_holdout(store: SessionStore, config: SplitConfig):
    """Hold out sessions starting in the final ``holdout_days`` days.

    The cutoff is measured from the latest timestamp in the whole store.
    Holdout sessions are shuffled with the split seed and halved into
    validation (the smaller half on odd counts) and test. Items never seen in
    training are removed from held-out sessions; emptied sessions vanish.
    """
    cutoff = store.max_timestamp - config.holdout_days * DAY
    train = SessionStore(max_timestamp=store.max_timestamp)
    held: list[Session] = []
    for user, sessions in store.by_user.items():
        kept = [s for s in sessions if s.start <= cutoff]
        held.extend(s for s in sessions if s.start > cutoff)
        if kept:
            train.by_user[user] = kept

    seen = train.item_set()
    filtered = []
    for s in held:
        items = tuple(i for i in s.items if i in seen)
        if items:
            filtered.append(Session(s.user, s.time_index, s.start, items))
    if not filtered:
        log.warning("holdout is empty (cutoff %d); valid/test will be empty", cutoff)

    order = CounterRNG(config.seed, "holdout-split").permutation(len(filtered))
    shuffled = [filtered[i] for i in order]
    n_valid = len(shuffled) // 2
    valid = _store_from(shuffled[:n_valid], store.max_timestamp)
    test = _store_from(shuffled[n_valid:], store.max_timestamp)
    return train, valid, test


def _store_from(sessions: Iterable[Session], max_ts: int) -> SessionStore:
    grouped = defaultdict(list)
    for s in sessions:
        grouped[s.user].append(s)
    out = SessionStore(max_timestamp=max_ts)
    for user in sorted(grouped, key=str):
        out.by_user[user] = sorted(grouped[user], key=lambda s: s.time_index)
    return out


def merge_stores(*stores: SessionStore) -> SessionStore:
    """Union of disjoint stores, each user's sessions ordered by time index."""
    grouped: dict = OrderedDict()
    max_ts = 0
    for st in stores:
        max_ts = max(max_ts, st.max_timestamp)
        for user, sessions in st.by_user.items():
            grouped.setdefault(user, []).extend(sessions)
    out = SessionStore(max_timestamp=max_ts)
    for user, sessions in grouped.items():
        out.by_user[user] = sorted(sessions, key=lambda s: s.time_index)
    return out


# -- vocabularies ------------------------------------------------------------

def build_vocabs(train: SessionStore) -> tuple[Vocab, Vocab]:
    """Index items and users in order of first appearance in ``train``."""
    if len(train) == 0:
        raise ValueError("cannot build vocabularies from an empty training store")
    items, users = Vocab(), Vocab()
    for user, sessions in train.by_user.items():
        users.add(user)
        for s in sessions:
            for i in s.items:
                items.add(i)
    return items, users


def encode_store(store: SessionStore, items: Vocab, users: Vocab) -> tuple[SessionStore, int]:
    """Map raw ids to vocabulary indices.

    Sessions of users missing from ``users`` are dropped (count returned);
    items missing from ``items`` are removed.
    """
    out = SessionStore(max_timestamp=store.max_timestamp)
    dropped = 0
    for user, sessions in store.by_user.items():
        uidx = users.get(user)
        if uidx is None:
            dropped += len(sessions)
            continue
        encoded = []
        for s in sessions:
            idx = tuple(items.index(i) for i in s.items if i in items)
            if idx:
                encoded.append(Session(uidx, s.time_index, s.start, idx))
            else:
                dropped += 1
        if encoded:
            out.by_user[uidx] = encoded
    return out, dropped


# -- binary store ------------------------------------------------------------
# magic "DGRS1" | i64 max_timestamp | vocab(items) | vocab(users) |
# u64 n_users_with_sessions | per user: u32 user, u64 n_sessions |
# per session: u32 time_index, i64 start, u64 length, length * u32 item
# vocab: u64 count | per entry: u32 byte length, utf-8 bytes.  All little-endian.

def _write_vocab(out: BinaryIO, vocab: Vocab) -> None:
    out.write(struct.pack("<Q", len(vocab)))
    for key in vocab.ids:
        raw = str(key).encode("utf-8")
        out.write(struct.pack("<I", len(raw)))
        out.write(raw)


def _read_exact(src: BinaryIO, n: int) -> bytes:
    buf = src.read(n)
    if len(buf) != n:
        raise FormatError("truncated store file")
    return buf


def _read_vocab(src: BinaryIO) -> Vocab:
    (count,) = struct.unpack("<Q", _read_exact(src, 8))
    vocab = Vocab()
    for _ in range(count):
        (n,) = struct.unpack("<I", _read_exact(src, 4))
        vocab.add(_read_exact(src, n).decode("utf-8"))
    return vocab


def write_store(out: BinaryIO, store: SessionStore, items: Vocab, users: Vocab) -> None:
    out.write(STORE_MAGIC)
    out.write(struct.pack("<q", store.max_timestamp))
    _write_vocab(out, items)
    _write_vocab(out, users)
    out.write(struct.pack("<Q", len(store.by_user)))
    for user, sessions in store.by_user.items():
        out.write(struct.pack("<IQ", user, len(sessions)))
        for s in sessions:
            out.write(struct.pack("<IqQ", s.time_index, s.start, len(s.items)))
            out.write(struct.pack(f"<{len(s.items)}I", *s.items))


def read_store(src: BinaryIO) -> tuple[SessionStore, Vocab, Vocab]:
    if _read_exact(src, len(STORE_MAGIC)) != STORE_MAGIC:
        raise FormatError("not a session store (bad magic)")
    (max_ts,) = struct.unpack("<q", _read_exact(src, 8))
    items = _read_vocab(src)
    users = _read_vocab(src)
    store = SessionStore(max_timestamp=max_ts)
    (n_users,) = struct.unpack("<Q", _read_exact(src, 8))
    for _ in range(n_users):
        user, n_sessions = struct.unpack("<IQ", _read_exact(src, 12))
        sessions = []
        for _ in range(n_sessions):
            t, start, length = struct.unpack("<IqQ", _read_exact(src, 20))
            seq = struct.unpack(f"<{length}I", _read_exact(src, 4 * length))
            sessions.append(Session(user, t, start, tuple(seq)))
        store.by_user[user] = sessions
    return store, items, users
