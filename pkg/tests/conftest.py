import io

import numpy as np
import pytest

from dgrec.encoder import SessionContext
from dgrec.graphstore import SocialGraph
from dgrec.ingest import DAY, Session, SessionStore


def csv_bytes(text: str) -> io.BytesIO:
    return io.BytesIO(text.encode("utf-8"))


def make_store(spec: dict, week: bool = True) -> SessionStore:
    """``{user: [items of t=1], [items of t=2], ...}`` -> store with weekly starts."""
    by_user = {}
    for u, sessions in spec.items():
        by_user[u] = [Session(u, t, (t - 1) * 7 * DAY + (u if isinstance(u, int) else 0), tuple(items))
                      for t, items in enumerate(sessions, start=1)]
    max_ts = max((s.start for ss in by_user.values() for s in ss), default=0)
    return SessionStore(by_user, max_ts)


@pytest.fixture
def small_world():
    """Five users on a ring plus a chord, three weekly sessions each, 8 items."""
    rng = np.random.default_rng(3)
    spec = {u: [list(rng.integers(0, 8, size=int(rng.integers(2, 5)))) for _ in range(3)] for u in range(5)}
    store = make_store(spec)
    graph = SocialGraph(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)])
    return store, SessionContext(store), graph
