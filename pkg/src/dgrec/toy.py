"""Tiny fixed instance for gradient checking and smoke tests."""

from __future__ import annotations

from dataclasses import dataclass

from .config import ModelConfig
from .encoder import SessionContext
from .graphstore import SocialGraph
from .ingest import DAY, Session, SessionStore
from .model import DGRec, make_batch, training_sessions
from .rng import CounterRNG
from .tensorcore import ops

TOY_EDGES = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]


@dataclass
class ToyInstance:
    model: DGRec
    store: SessionStore
    context: SessionContext
    graph: SocialGraph

    def loss_builder(self):
        """Closure rebuilding the mean training loss from current parameters."""
        sessions = training_sessions(self.store)
        batch = make_batch(sessions, self.context, self.graph, self.model.config, ("gradcheck",))

        def build():
            out = self.model.forward(batch, train=False)
            return ops.scale(ops.sum_all(out.loss_rows), 1.0 / out.n_positions)

        return build


def toy_instance(seed: int = 0, mode: str = "full", n_users: int = 4, n_items: int = 6,
                 sessions_per_user: int = 3, length: int = 3) -> ToyInstance:
    """4 users, 6 items, hidden = embed = 5, two layers with fan-outs (2, 2), float64."""
    cfg = ModelConfig(hidden=5, embed=5, layers=2, fanouts=(2, 2), dropout=0.0, mode=mode,
                      seed=seed, dtype="float64")
    rng = CounterRNG(seed, "toy")
    by_user = {}
    for u in range(n_users):
        by_user[u] = [Session(u, t, (t - 1) * 7 * DAY + u, tuple(rng.below(n_items) for _ in range(length)))
                      for t in range(1, sessions_per_user + 1)]
    store = SessionStore(by_user, sessions_per_user * 7 * DAY)
    edges = [(a, b) for a, b in TOY_EDGES if a < n_users and b < n_users]
    graph = SocialGraph(n_users, edges)
    return ToyInstance(DGRec(cfg, n_items, n_users), store, SessionContext(store), graph)
