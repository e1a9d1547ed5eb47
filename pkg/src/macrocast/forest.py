"""Regression random forest.

Trees are grown by exhaustive variance-reduction search over midpoints of
consecutive distinct feature values, with a fresh random subset of ``mtry``
features drawn at every node. Each tree of a forest sees a bootstrap resample
of size N drawn from its own random stream, keyed on ``(seed, tree index)``,
so forests are bit-reproducible however the trees are scheduled.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import FitError, ParamError, ParseError, ShapeError

__all__ = [
    "ForestParams",
    "SplitNode",
    "Leaf",
    "RegressionTree",
    "Forest",
    "ForecastPoint",
    "best_split",
    "fit_tree",
    "predict_tree",
    "fit_forest",
    "predict_forest",
    "tree_rng",
    "bootstrap_indices",
    "dumps_forest",
    "loads_forest",
]


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 500
    mtry: int | None = None  # None -> max(1, p // 3)
    min_node_size: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ParamError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.mtry is not None and self.mtry < 1:
            raise ParamError(f"mtry must be >= 1, got {self.mtry}")
        if self.min_node_size < 1:
            raise ParamError(f"min_node_size must be >= 1, got {self.min_node_size}")
        if not 0 <= self.seed < 2**64:
            raise ParamError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def resolved_mtry(self, n_features: int) -> int:
        mtry = self.mtry if self.mtry is not None else max(1, n_features // 3)
        if mtry > n_features:
            raise ParamError(f"mtry={mtry} exceeds feature count {n_features}")
        return mtry


@dataclass(frozen=True)
class Leaf:
    value: float
    count: int


@dataclass(frozen=True)
class SplitNode:
    feature: int
    threshold: float
    left: SplitNode | Leaf
    right: SplitNode | Leaf


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """A fitted tree in flat-array form; ``root`` gives the nested view."""

    n_features: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray

    def __post_init__(self) -> None:
        for name in ("feature", "threshold", "left", "right", "value", "count"):
            getattr(self, name).setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def root(self) -> SplitNode | Leaf:
        return self._node(0)

    def _node(self, k: int) -> SplitNode | Leaf:
        if self.feature[k] < 0:
            return Leaf(float(self.value[k]), int(self.count[k]))
        return SplitNode(
            int(self.feature[k]),
            float(self.threshold[k]),
            self._node(int(self.left[k])),
            self._node(int(self.right[k])),
        )

    def preorder(self) -> list[int]:
        out, stack = [], [0]
        while stack:
            k = stack.pop()
            out.append(k)
            if self.feature[k] >= 0:
                stack.append(int(self.right[k]))
                stack.append(int(self.left[k]))
        return out

    def same_structure(self, other: RegressionTree) -> bool:
        return self.n_features == other.n_features and all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("feature", "threshold", "left", "right", "value", "count")
        )

    def predict(self, x) -> float:
        return predict_tree(self, x)

    def predict_many(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        return _kernels.route_many(
            self.feature, self.threshold, self.left, self.right, self.value, X
        )


@dataclass(frozen=True)
class ForecastPoint:
    mean: float
    sigma: float
    tree_values: np.ndarray


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[RegressionTree, ...]
    params: ForestParams
    n_samples: int
    n_features: int
    content_hash: str
    mtry: int = field(default=0)

    @property
    def training_fingerprint(self) -> tuple[int, int, str]:
        return (self.n_samples, self.n_features, self.content_hash)

    def predict(self, x) -> ForecastPoint:
        return predict_forest(self, x)


def _as_matrix(X, n_features: int | None = None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1 and n_features is not None:
        X = X.reshape(-1, n_features) if X.size else X.reshape(0, n_features)
    if X.ndim != 2:
        raise ShapeError(f"feature matrix must be 2-D, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] == 0 or y.size == 0:
        raise FitError("empty training set")
    if X.shape[1] == 0:
        raise FitError("training set has no features")
    if X.shape[0] != y.size:
        raise ShapeError(f"X has {X.shape[0]} rows but y has {y.size} values")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise FitError("training data contains non-finite values")
    return X, y


def mean_and_sigma(values: np.ndarray) -> tuple[float, float]:
    """Arithmetic mean and Bessel-corrected standard deviation.

    Identical inputs return their common value and exactly zero spread, and a
    single value has zero spread by convention.
    """
    values = np.asarray(values, dtype=np.float64)
    first = values[0]
    if np.all(values == first):
        return float(first), 0.0
    mean = float(values.mean())
    dev = values - mean
    return mean, math.sqrt(float(dev @ dev) / (len(values) - 1))


def best_split(X_sub, y_sub, candidate_features: Sequence[int]):
    """Variance-minimising split of one node.

    Returns ``(feature, threshold, sse_reduction)`` or ``None`` when no
    threshold between distinct values lowers the sum of squared errors.
    Ties go to the lowest feature index, then the lowest threshold.
    """
    X_sub = np.ascontiguousarray(X_sub, dtype=np.float64)
    if X_sub.ndim == 1:
        X_sub = X_sub.reshape(-1, 1)
    y_sub = np.ascontiguousarray(y_sub, dtype=np.float64).ravel()
    if X_sub.shape[0] != y_sub.size:
        raise ShapeError(f"X has {X_sub.shape[0]} rows but y has {y_sub.size} values")
    feats = np.array(sorted(set(int(f) for f in candidate_features)), dtype=np.int64)
    if feats.size and (feats[0] < 0 or feats[-1] >= X_sub.shape[1]):
        raise ShapeError(f"candidate features {feats.tolist()} out of range")
    if y_sub.size < 2 or feats.size == 0 or np.all(y_sub == y_sub[0]):
        return None
    n = y_sub.size
    sse = np.empty((feats.size, n - 1))
    f, t, red = _kernels.split_search(
        X_sub,
        y_sub,
        _presort(X_sub),
        0,
        n,
        feats,
        sse,
        np.empty_like(sse),
        np.empty(n),
        _kernels.reciprocals(n),
    )
    if f < 0:
        return None
    return int(f), float(t), float(red)


def _presort(X: np.ndarray) -> np.ndarray:
    ranks, n_ranks = _kernels.dense_ranks(X)
    return _kernels.presort_rows(ranks, n_ranks, np.arange(X.shape[0]))


def fit_tree(X, y, params: ForestParams, rng: np.random.Generator) -> RegressionTree:
    """Grow one unpruned tree on ``(X, y)`` exactly as given (no resampling).

    Nodes with fewer than ``2 * min_node_size`` rows, constant targets, or no
    improving split become leaves holding the mean target. Feature subsets are
    drawn from ``rng`` as one block of uniforms per tree.
    """
    X, y = _check_xy(X, y)
    return _grow(X, y, params.resolved_mtry(X.shape[1]), params.min_node_size, rng)


def _grow(X, y, mtry, min_node_size, rng) -> RegressionTree:
    n, p = X.shape
    keys = rng.random((2 * n, mtry))
    arrays = _kernels.grow_tree(X, y, _presort(X), mtry, min_node_size, keys)
    return RegressionTree(p, *arrays)


def predict_tree(tree: RegressionTree, x) -> float:
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if x.size != tree.n_features:
        raise ShapeError(f"expected {tree.n_features} features, got {x.size}")
    return float(
        _kernels.route(tree.feature, tree.threshold, tree.left, tree.right, tree.value, x)
    )


def tree_rng(seed: int, b: int) -> np.random.Generator:
    """Random stream for tree ``b`` of a forest seeded with ``seed``.

    Philox keyed on the seed, with the tree index in the top word of the
    counter, so streams never overlap and need no sequential state.
    """
    return np.random.Generator(np.random.Philox(key=seed, counter=b << 192))


class _TreeStreams:
    """Reusable equivalent of :func:`tree_rng` (not thread-safe; one per worker)."""

    def __init__(self, seed: int):
        self._bits = np.random.Philox(key=seed)
        self._state = self._bits.state
        self._key = self._state["state"]["key"]
        self.rng = np.random.Generator(self._bits)

    def at(self, b: int) -> np.random.Generator:
        state = dict(self._state)
        state["state"] = {"counter": np.array([0, 0, 0, b], dtype=np.uint64), "key": self._key}
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        self._bits.state = state
        return self.rng


def bootstrap_indices(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` row indices drawn uniformly with replacement."""
    return np.minimum((rng.random(n) * n).astype(np.int64), n - 1)


def _fit_one(X, y, ranks, n_ranks, params, mtry, rng):
    # same draws, in the same order, as bootstrap_indices then fit_tree
    n, p = X.shape
    u = rng.random(n + 2 * n * mtry)
    idx = np.minimum((u[:n] * n).astype(np.int64), n - 1)
    keys = u[n:].reshape(2 * n, mtry)
    arrays = _kernels.grow_resampled(X, y, ranks, n_ranks, idx, mtry, params.min_node_size, keys)
    return RegressionTree(p, *arrays)


def content_hash(X: np.ndarray, y: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(X.shape, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(X, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(y, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def fit_forest(X, y, params: ForestParams, n_jobs: int = 1) -> Forest:
    X, y = _check_xy(X, y)
    mtry = params.resolved_mtry(X.shape[1])
    ranks, n_ranks = _kernels.dense_ranks(X)

    def chunk(bs: range) -> list[RegressionTree]:
        streams = _TreeStreams(params.seed)
        return [_fit_one(X, y, ranks, n_ranks, params, mtry, streams.at(b)) for b in bs]

    B = params.n_trees
    if n_jobs > 1:
        step = -(-B // n_jobs)
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = pool.map(chunk, [range(i, min(i + step, B)) for i in range(0, B, step)])
            trees = tuple(t for part in parts for t in part)
    else:
        trees = tuple(chunk(range(B)))
    return Forest(trees, params, X.shape[0], X.shape[1], content_hash(X, y), mtry)


def predict_forest(forest: Forest, x) -> ForecastPoint:
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if x.size != forest.n_features:
        raise ShapeError(f"expected {forest.n_features} features, got {x.size}")
    route = _kernels.route
    vals = np.fromiter(
        (route(t.feature, t.threshold, t.left, t.right, t.value, x) for t in forest.trees),
        dtype=np.float64,
        count=len(forest.trees),
    )
    vals.setflags(write=False)
    mean, sigma = mean_and_sigma(vals)
    return ForecastPoint(mean, sigma, vals)


# --- text serialisation -----------------------------------------------------


def _g(v: float) -> str:
    return format(float(v), ".17g")


def dumps_forest(forest: Forest) -> str:
    p = forest.params
    lines = [
        "FOREST v1 n_trees={} mtry={} min_node_size={} seed={} n_samples={} n_features={} hash={}".format(
            p.n_trees,
            "auto" if p.mtry is None else p.mtry,
            p.min_node_size,
            p.seed,
            forest.n_samples,
            forest.n_features,
            forest.content_hash,
        )
    ]
    for b, tree in enumerate(forest.trees):
        lines.append(f"T {b} {tree.n_nodes}")
        for k in tree.preorder():
            if tree.feature[k] >= 0:
                lines.append(f"S {int(tree.feature[k])} {_g(tree.threshold[k])}")
            else:
                lines.append(f"L {_g(tree.value[k])} {int(tree.count[k])}")
    return "\n".join(lines) + "\n"


def _parse_tree(tokens: list[list[str]], n_features: int) -> RegressionTree:
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def build(pos: int) -> tuple[int, int]:
        if pos >= len(tokens):
            raise ParseError("truncated tree body")
        tok = tokens[pos]
        k = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        count.append(0)
        if tok[0] == "L":
            value[k] = float(tok[1])
            count[k] = int(tok[2])
            return k, pos + 1
        if tok[0] != "S":
            raise ParseError(f"unexpected node record {' '.join(tok)!r}")
        feature[k] = int(tok[1])
        threshold[k] = float(tok[2])
        lk, pos = build(pos + 1)
        rk, pos = build(pos)
        left[k], right[k] = lk, rk
        # split value and count are derived from the children
        value[k] = (value[lk] * count[lk] + value[rk] * count[rk]) / (count[lk] + count[rk])
        count[k] = count[lk] + count[rk]
        return k, pos

    _, end = build(0)
    if end != len(tokens):
        raise ParseError("trailing node records after tree")
    return RegressionTree(
        n_features,
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        np.array(count, dtype=np.int64),
    )


def loads_forest(text: str) -> Forest:
    """Inverse of :func:`dumps_forest`.

    Node numbering is rebuilt in pre-order, so the result predicts identically
    but need not share array layout with the original.
    """
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0][:2] != ["FOREST", "v1"]:
        raise ParseError("missing FOREST v1 header")
    meta = dict(tok.split("=", 1) for tok in lines[0][2:])
    mtry = None if meta["mtry"] == "auto" else int(meta["mtry"])
    params = ForestParams(int(meta["n_trees"]), mtry, int(meta["min_node_size"]), int(meta["seed"]))
    n_features = int(meta["n_features"])
    trees = []
    i = 1
    while i < len(lines):
        head = lines[i]
        if head[0] != "T":
            raise ParseError(f"expected tree header, got {' '.join(head)!r}")
        n_nodes = int(head[2])
        trees.append(_parse_tree(lines[i + 1 : i + 1 + n_nodes], n_features))
        i += 1 + n_nodes
    if len(trees) != params.n_trees:
        raise ParseError(f"header says {params.n_trees} trees, found {len(trees)}")
    return Forest(
        tuple(trees),
        params,
        int(meta["n_samples"]),
        n_features,
        meta["hash"],
        params.resolved_mtry(n_features),
    )
