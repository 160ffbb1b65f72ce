"""Per-feature attribution of an isolation forest score.

Shapley values over the coalition game v(S) = score of a hybrid point that
takes the features in S from the scored point and the rest from the
training medians. Coalition values are memoized by bitmask; when the
requested permutation budget covers f! the full enumeration is used, so
small feature counts give the exact Shapley decomposition. By
construction the attributions telescope: their sum equals
score(point) - score(medians) exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
import itertools
import math

import numpy as np

from ..errors import InvalidInput
from .iforest import IsolationForestModel

DEFAULT_PERMUTATIONS = 64


@dataclass(frozen=True)
class AttributionReport:
    feature_names: tuple[str, ...]
    feature_contributions: tuple[float, ...]
    baseline_score: float
    point_score: float
    permutations_used: int
    exact: bool

    def ranked(self) -> list[tuple[str, float]]:
        """Features with their contributions, largest magnitude first."""
        order = sorted(range(len(self.feature_names)),
                       key=lambda i: abs(self.feature_contributions[i]),
                       reverse=True)
        return [(self.feature_names[i], self.feature_contributions[i]) for i in order]


def attribute(model: IsolationForestModel, point,
              permutations: int = DEFAULT_PERMUTATIONS,
              seed: int = 0) -> AttributionReport:
    point = np.asarray(point, dtype=float)
    f = len(model.feature_names)
    if point.shape != (f,):
        raise InvalidInput("point does not match the model's features",
                           expected=f, got=list(point.shape))
    if permutations < 1:
        raise InvalidInput("need at least one permutation",
                           permutations=permutations)

    baseline = np.asarray(model.train_medians, dtype=float)
    cache: dict[int, float] = {}

    def value(mask: int) -> float:
        got = cache.get(mask)
        if got is not None:
            return got
        hybrid = baseline.copy()
        for i in range(f):
            if mask >> i & 1:
                hybrid[i] = point[i]
        v = model.score_one(hybrid)
        cache[mask] = v
        return v

    total = math.factorial(f)
    if permutations >= total:
        perms = list(itertools.permutations(range(f)))
        exact = True
    else:
        rng = np.random.default_rng(seed)
        perms = [tuple(rng.permutation(f)) for _ in range(permutations)]
        exact = False

    contrib = np.zeros(f)
    for perm in perms:
        mask = 0
        prev = value(0)
        for i in perm:
            mask |= 1 << i
            cur = value(mask)
            contrib[i] += cur - prev
            prev = cur
    contrib /= len(perms)

    return AttributionReport(
        feature_names=model.feature_names,
        feature_contributions=tuple(float(c) for c in contrib),
        baseline_score=value(0),
        point_score=value((1 << f) - 1),
        permutations_used=len(perms),
        exact=exact,
    )
