"""Isolation forest scorer for multivariate points.

Trees are stored as flat arrays (feature, threshold, child indexes, node
size) so a batch of points can be pushed down all trees with vectorized
masks instead of per-point recursion. Split feature and split value are
drawn uniformly, features with zero range in the node are excluded, and
growth stops at the standard height limit ceil(log2(subsample size)).
Scores follow s(x) = 2 ** (-E[h(x)] / c(n)) with the average unsuccessful
search length c(n); a truncated leaf of size m contributes c(m) extra
depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from ..errors import FitFailure, InsufficientData, InvalidInput
from ..timeseries import Boundary, quantile_boundary
from .base import register_model_type

MODEL_TYPE = "iforest_mv"

EULER_GAMMA = 0.5772156649

DEFAULT_N_TREES = 100
DEFAULT_SUBSAMPLE = 256
DEFAULT_CONTAMINATION = 0.01


def c_factor(n: int) -> float:
    """Average path length of an unsuccessful BST search among n points."""
    if n < 2:
        raise InvalidInput("c_factor needs n >= 2", n=n)
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


def _c_factor_array(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    out = np.zeros_like(n)
    big = n >= 2
    nb = n[big]
    out[big] = 2.0 * (np.log(nb - 1.0) + EULER_GAMMA) - 2.0 * (nb - 1.0) / nb
    return out


@dataclass
class _Tree:
    feature: np.ndarray    # int32, -1 at leaves
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32
    right: np.ndarray      # int32
    size: np.ndarray       # int32, training points that reached the node

    def to_payload(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "size": self.size.tolist(),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "_Tree":
        return cls(
            feature=np.asarray(payload["feature"], dtype=np.int32),
            threshold=np.asarray(payload["threshold"], dtype=float),
            left=np.asarray(payload["left"], dtype=np.int32),
            right=np.asarray(payload["right"], dtype=np.int32),
            size=np.asarray(payload["size"], dtype=np.int32),
        )


def _grow_tree(data: np.ndarray, rng: np.random.Generator,
               height_limit: int) -> _Tree:
    feature, threshold, left, right, size = [], [], [], [], []

    def add_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(0)
        return len(feature) - 1

    # Iterative depth-first build; recursion depth is bounded anyway but the
    # explicit stack keeps node order deterministic and allocation flat.
    root = add_node()
    stack = [(root, np.arange(len(data)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        size[node] = len(idx)
        if depth >= height_limit or len(idx) <= 1:
            continue
        sub = data[idx]
        lo = sub.min(axis=0)
        hi = sub.max(axis=0)
        usable = np.flatnonzero(hi > lo)
        if len(usable) == 0:
            continue
        f = int(usable[rng.integers(len(usable))])
        split = rng.uniform(lo[f], hi[f])
        go_left = sub[:, f] < split
        ln = add_node()
        rn = add_node()
        feature[node] = f
        threshold[node] = split
        left[node] = ln
        right[node] = rn
        stack.append((ln, idx[go_left], depth + 1))
        stack.append((rn, idx[~go_left], depth + 1))
    return _Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        size=np.asarray(size, dtype=np.int32),
    )


def _path_lengths(tree: _Tree, points: np.ndarray) -> np.ndarray:
    """Adjusted path length of each point: depth + c(leaf size)."""
    m = len(points)
    node = np.zeros(m, dtype=np.int32)
    depth = np.zeros(m, dtype=float)
    active = tree.feature[node] >= 0
    while np.any(active):
        cur = node[active]
        f = tree.feature[cur]
        goes_left = points[active, f] < tree.threshold[cur]
        node[active] = np.where(goes_left, tree.left[cur], tree.right[cur])
        depth[active] += 1.0
        active = tree.feature[node] >= 0
    return depth + _c_factor_array(tree.size[node])


@dataclass
class IsolationForestModel:
    """Trained forest with a score decision boundary and feature baseline."""

    feature_names: tuple[str, ...]
    trees: list[_Tree]
    subsample_n: int
    contamination: float
    score_boundary: Boundary
    train_medians: tuple[float, ...]
    train_summary: dict | None = None
    extras: dict = field(default_factory=dict)

    model_type = MODEL_TYPE
    flow = "multivariate"

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    @property
    def feature_count(self) -> int:
        return len(self.feature_names)

    def score(self, points) -> np.ndarray:
        """Anomaly scores in (0, 1) for a batch of points, one per row."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != len(self.feature_names):
            raise InvalidInput("feature count mismatch",
                               expected=len(self.feature_names),
                               got=pts.shape[1])
        total = np.zeros(len(pts))
        for tree in self.trees:
            total += _path_lengths(tree, pts)
        avg = total / len(self.trees)
        return np.power(2.0, -avg / c_factor(self.subsample_n))

    def score_one(self, point) -> float:
        return float(self.score(np.asarray(point, dtype=float)[None, :])[0])

    def to_payload(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "trees": [t.to_payload() for t in self.trees],
            "subsample_n": self.subsample_n,
            "contamination": self.contamination,
            "boundary": {
                "lower": float(self.score_boundary.lower),
                "upper": float(self.score_boundary.upper),
                "method": self.score_boundary.method,
                "params": self.score_boundary.params,
            },
            "train_medians": [float(v) for v in self.train_medians],
            "train_summary": self.train_summary,
            "extras": self.extras,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "IsolationForestModel":
        b = payload["boundary"]
        return cls(
            feature_names=tuple(payload["feature_names"]),
            trees=[_Tree.from_payload(t) for t in payload["trees"]],
            subsample_n=payload["subsample_n"],
            contamination=payload["contamination"],
            score_boundary=Boundary(b["lower"], b["upper"], b["method"],
                                    b.get("params", {})),
            train_medians=tuple(payload["train_medians"]),
            train_summary=payload.get("train_summary"),
            extras=payload.get("extras", {}),
        )


register_model_type(MODEL_TYPE, IsolationForestModel.from_payload)


def iforest_fit(data, num_trees: int = DEFAULT_N_TREES,
                subsample_n: int = DEFAULT_SUBSAMPLE,
                seed: int = 0,
                contamination: float = DEFAULT_CONTAMINATION,
                feature_names=None) -> IsolationForestModel:
    """Train a forest on rows of aligned feature values.

    ``subsample_n`` is clamped to the row count when the training set is
    smaller. Raises InsufficientData below 2 rows and FitFailure when every
    feature is constant across the whole training set (no split is
    possible).
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise InvalidInput("training data must be 2-dimensional",
                           shape=list(data.shape))
    n, f = data.shape
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(f))
    if f != len(feature_names):
        raise InvalidInput("feature count mismatch",
                           expected=len(feature_names), got=f)
    if not np.all(np.isfinite(data)):
        raise InvalidInput("training data contains non-finite values")
    if n < 2:
        raise InsufficientData("need at least 2 training rows", n=n)
    if not (0.0 < contamination < 0.5):
        raise InvalidInput("contamination must be in (0, 0.5)",
                           contamination=contamination)
    if np.all(data.max(axis=0) == data.min(axis=0)):
        raise FitFailure("all features are constant; nothing to isolate")

    rng = np.random.default_rng(seed)
    sub_n = min(subsample_n, n)
    if sub_n < 2:
        raise InvalidInput("subsample_n must be at least 2",
                           subsample_n=subsample_n)
    height_limit = math.ceil(math.log2(sub_n))
    trees = []
    for _ in range(num_trees):
        idx = rng.choice(n, size=sub_n, replace=False)
        trees.append(_grow_tree(data[idx], rng, height_limit))

    model = IsolationForestModel(
        feature_names=tuple(feature_names),
        trees=trees,
        subsample_n=sub_n,
        contamination=contamination,
        score_boundary=Boundary(0.0, 1.0, "quantile", {}),
        train_medians=tuple(float(v) for v in np.median(data, axis=0)),
    )
    train_scores = model.score(data)
    model.score_boundary = quantile_boundary(train_scores, 0.0,
                                             1.0 - contamination)
    return model


def iforest_score(model: IsolationForestModel, points) -> np.ndarray:
    return model.score(points)
