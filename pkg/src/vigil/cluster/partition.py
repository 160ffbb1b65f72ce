"""Per-tick load partitioning by rendezvous hashing.

Each model goes to the worker with the highest keyed hash score, so the
mapping is deterministic, uniform in expectation, and membership changes
move only the models owned by the changed worker.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from ..errors import InvalidInput


@dataclass(frozen=True)
class Assignment:
    tick_id: int
    term: int
    shards: dict = field(default_factory=dict)  # worker_id -> tuple of model_ids

    def all_models(self) -> tuple[str, ...]:
        out = []
        for worker in sorted(self.shards):
            out.extend(self.shards[worker])
        return tuple(out)

    def worker_of(self, model_id: str) -> str | None:
        for worker, shard in self.shards.items():
            if model_id in shard:
                return worker
        return None


def rendezvous_score(model_id: str, worker_id: str) -> int:
    digest = hashlib.blake2b(f"{model_id}\x00{worker_id}".encode("utf-8"),
                             digest_size=8).digest()
    return int.from_bytes(digest, "big")


def partition_models(model_ids, live_workers, tick_id: int = 0,
                     term: int = 0) -> Assignment:
    """Assign every model to exactly one live worker.

    The caller passes non-leader nodes; in degraded single-node mode it
    passes the leader itself.  Empty model list yields empty shards.
    """
    workers = list(live_workers)
    if len(set(workers)) != len(workers):
        raise InvalidInput("duplicate worker ids", workers=workers)
    models = list(model_ids)
    if len(set(models)) != len(models):
        raise InvalidInput("duplicate model ids")
    if not workers:
        if models:
            raise InvalidInput("no live workers for non-empty model list")
        return Assignment(tick_id=tick_id, term=term, shards={})
    shards: dict[str, list[str]] = {w: [] for w in workers}
    for model_id in models:
        best = max(workers, key=lambda w: (rendezvous_score(model_id, w), w))
        shards[best].append(model_id)
    return Assignment(tick_id=tick_id, term=term,
                      shards={w: tuple(s) for w, s in shards.items()})
