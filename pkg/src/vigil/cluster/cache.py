"""In-memory model cache: strict LRU, keyed by (model_id, version).

Safe for concurrent use.  A miss loads outside the cache lock but
atomically per key, so concurrent readers of the same key trigger one
load; other keys proceed in parallel.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

from ..errors import ModelUnavailable, NotFound, VigilError
from ..models import deserialize_model

DEFAULT_CAPACITY = 1024


@dataclass
class CacheEntry:
    key: tuple[str, int]
    model: object
    last_used_at: float
    size_estimate: int


class ModelCache:
    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._entries: OrderedDict[tuple[str, int], CacheEntry] = OrderedDict()
        self._loading: dict[tuple[str, int], threading.Event] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.evictions = 0
        self._clock = 0.0

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    @property
    def hit_ratio(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0

    def keys(self) -> list[tuple[str, int]]:
        with self._lock:
            return list(self._entries)

    def get(self, model_id: str, version: int, loader,
            size_estimate: int = 0):
        """Return the cached model, loading it via `loader()` on a miss."""
        key = (model_id, int(version))
        while True:
            with self._lock:
                entry = self._entries.get(key)
                if entry is not None:
                    self._entries.move_to_end(key)
                    self._clock += 1
                    entry.last_used_at = self._clock
                    self.hits += 1
                    return entry.model
                event = self._loading.get(key)
                if event is None:
                    event = threading.Event()
                    self._loading[key] = event
                    break
            event.wait()  # another thread is loading this key; then re-check
        try:
            model = loader()
        except BaseException:
            with self._lock:
                del self._loading[key]
            event.set()
            raise
        with self._lock:
            self.misses += 1
            self._clock += 1
            self._entries[key] = CacheEntry(key, model, self._clock,
                                            size_estimate)
            self._entries.move_to_end(key)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
                self.evictions += 1
            del self._loading[key]
        event.set()
        return model

    def invalidate(self, model_id: str, version: int | None = None) -> None:
        with self._lock:
            if version is not None:
                self._entries.pop((model_id, int(version)), None)
            else:
                for key in [k for k in self._entries if k[0] == model_id]:
                    del self._entries[key]


def cache_get(cache: ModelCache, model_id: str, version: int,
              artifact_store, artifact_ref: str | None = None,
              registry=None):
    """Cache read-through against the artifact store.

    The artifact ref comes either directly or from the registry record;
    a missing artifact surfaces as ModelUnavailable.
    """
    def load():
        ref = artifact_ref
        if ref is None:
            if registry is None:
                raise ModelUnavailable("no artifact ref and no registry",
                                       model_id=model_id, version=version)
            try:
                ref = registry.get(model_id, version).artifact_ref
            except NotFound as exc:
                raise ModelUnavailable("model not registered",
                                       model_id=model_id,
                                       version=version) from exc
        try:
            blob = artifact_store.load(ref)
        except NotFound as exc:
            raise ModelUnavailable("model artifact missing",
                                   model_id=model_id, version=version,
                                   artifact_ref=ref) from exc
        try:
            model, _ = deserialize_model(blob)
        except VigilError as exc:
            raise ModelUnavailable("model artifact undeserializable",
                                   model_id=model_id, version=version) from exc
        return model

    return cache.get(model_id, version, load)
