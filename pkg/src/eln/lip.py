"""Feature maps for linear-in-parameter models ``y = h(x) @ beta``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


def sigmoid(x):
    return expit(x)


class FeatureMap:
    input_dim: int

    def output_dim(self) -> int:
        raise NotImplementedError

    def _transform(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected inputs of dimension {self.input_dim}, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite input")
        return self._transform(X)

    def map_row(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("map_row expects a single input vector")
        return self.transform(x[None, :])[0]

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Linear(FeatureMap):
    input_dim: int

    def output_dim(self):
        return self.input_dim

    def _transform(self, X):
        return X.copy()

    def to_dict(self):
        return {"kind": "linear", "input_dim": self.input_dim}


@dataclass(frozen=True, eq=False)
class Rvflnn(FeatureMap):
    """Random vector functional link net: ``[x | sigmoid(x W' + b)]``."""

    W: np.ndarray
    b: np.ndarray
    direct_link: bool = True

    @property
    def input_dim(self):
        return self.W.shape[1]

    @property
    def hidden(self):
        return self.W.shape[0]

    def output_dim(self):
        return self.hidden + (self.input_dim if self.direct_link else 0)

    def _transform(self, X):
        H = sigmoid(X @ self.W.T + self.b)
        return np.hstack([X, H]) if self.direct_link else H

    def to_dict(self):
        return {"kind": "rvflnn", "input_dim": self.input_dim, "W": self.W.tolist(), "b": self.b.tolist(), "direct_link": self.direct_link}


@dataclass(frozen=True, eq=False)
class RbfMap(FeatureMap):
    """``h_k(x) = exp(-|x - a_k|^2 / (2 width^2))`` over a set of anchor points."""

    anchors: np.ndarray
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("RBF width must be > 0")

    @property
    def input_dim(self):
        return self.anchors.shape[1]

    def output_dim(self):
        return self.anchors.shape[0]

    def _transform(self, X):
        sq = (
            np.sum(X * X, axis=1)[:, None]
            - 2.0 * X @ self.anchors.T
            + np.sum(self.anchors * self.anchors, axis=1)[None, :]
        )
        return np.exp(-np.maximum(sq, 0.0) / (2.0 * self.width**2))

    def to_dict(self):
        return {"kind": "rbf", "anchors": self.anchors.tolist(), "width": self.width}


def rvflnn_init(d: int, K: int = 200, seed: int = 0, direct_link: bool = True) -> Rvflnn:
    rng = np.random.default_rng(seed)
    W = rng.uniform(-1.0, 1.0, size=(K, d))
    b = rng.uniform(0.0, 1.0, size=K)
    return Rvflnn(W, b, direct_link)


def feature_map_from_dict(doc: dict) -> FeatureMap:
    kind = doc["kind"]
    if kind == "linear":
        return Linear(int(doc["input_dim"]))
    if kind == "rvflnn":
        W = np.asarray(doc["W"], dtype=float).reshape(-1, int(doc["input_dim"]))
        return Rvflnn(W, np.asarray(doc["b"], dtype=float), bool(doc["direct_link"]))
    if kind == "rbf":
        return RbfMap(np.asarray(doc["anchors"], dtype=float), float(doc["width"]))
    raise ValueError(f"unknown feature map kind {kind!r}")


def map_row(fm: FeatureMap, x) -> np.ndarray:
    return fm.map_row(x)


def build_design_matrix(fm: FeatureMap, X) -> np.ndarray:
    return fm.transform(X)
