"""Fit ELN weights by matching the loss curve to the negative error density.

The weights minimize ``theta' K theta + 2 theta' xi`` where ``K`` holds the
pairwise integrals of the Gaussian nodes and ``xi`` their sample means, so
that ``l(e)`` approximates ``-p(e)``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .kernels import gauss
from .network import ElnModel


WIDTH_FLOOR_RATIO = 1e-3


class CenterStrategy(str, enum.Enum):
    ALL = "all"
    RANDOM = "random"
    KMEANS = "kmeans"


@dataclass(frozen=True)
class ElnFitConfig:
    M: int = 50
    sigma: float = 1.0
    epsilon: float = 0.0
    gamma1: float = 1e-3
    centers: CenterStrategy = CenterStrategy.RANDOM
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "centers", CenterStrategy(self.centers))
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.epsilon < 0 or self.gamma1 < 0:
            raise ValueError("epsilon and gamma1 must be >= 0")


def kmeans_1d(x, k: int, rng: np.random.Generator, max_iter: int = 100) -> np.ndarray:
    """Lloyd's iteration on scalar data, initialized from ``k`` distinct sample values."""
    x = np.asarray(x, dtype=float)
    distinct = np.unique(x)
    if distinct.size <= k:
        return distinct
    centers = np.sort(rng.choice(distinct, size=k, replace=False))
    for _ in range(max_iter):
        # centers stay sorted, so nearest-center assignment is a searchsorted on midpoints
        labels = np.searchsorted((centers[:-1] + centers[1:]) / 2.0, x)
        sums = np.bincount(labels, weights=x, minlength=k)
        counts = np.bincount(labels, minlength=k)
        new = np.where(counts > 0, sums / np.maximum(counts, 1), centers)
        new.sort()
        if np.array_equal(new, centers):
            break
        centers = new
    return centers


def select_centers(errors, M: int, strategy=CenterStrategy.RANDOM, seed: int = 0) -> np.ndarray:
    errors = np.asarray(errors, dtype=float).ravel()
    if errors.size == 0:
        raise ValueError("no error samples")
    if M < 1:
        raise ValueError("M must be >= 1")
    strategy = CenterStrategy(strategy)
    if strategy is CenterStrategy.ALL:
        return errors.copy()
    rng = np.random.default_rng(seed)
    if strategy is CenterStrategy.RANDOM:
        idx = rng.choice(errors.size, size=min(M, errors.size), replace=False)
        return errors[idx]
    return kmeans_1d(errors, M, rng)


def draw_widths(M: int, sigma: float, epsilon: float, seed: int = 0) -> np.ndarray:
    """Perturbed widths ``max(sigma + n_i, floor)`` with ``n_i ~ N(0, epsilon)``.

    ``epsilon`` is a variance. The floor is ``max(epsilon, sigma * 1e-3)``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0:
        return np.full(M, float(sigma))
    rng = np.random.default_rng([seed, 1])
    raw = sigma + math.sqrt(epsilon) * rng.standard_normal(M)
    hard_floor = sigma * WIDTH_FLOOR_RATIO
    if np.any(raw < hard_floor) and epsilon < hard_floor:
        warnings.warn(f"kernel widths clamped to {hard_floor:g}", RuntimeWarning, stacklevel=2)
    return np.maximum(raw, max(epsilon, hard_floor))


def gram_matrix(centers, widths) -> np.ndarray:
    """``K_ij = G_{sqrt(s_i^2 + s_j^2)}(c_i - c_j)``, the integral of the product of two nodes."""
    c = np.asarray(centers, dtype=float)
    s = np.asarray(widths, dtype=float)
    if c.shape != s.shape:
        raise ValueError("centers and widths must have equal length")
    return gauss(c[:, None] - c[None, :], np.sqrt(s[:, None] ** 2 + s[None, :] ** 2))


def xi_hat(centers, widths, errors) -> np.ndarray:
    errors = np.asarray(errors, dtype=float).ravel()
    if errors.size == 0:
        raise ValueError("no error samples")
    c = np.asarray(centers, dtype=float)
    s = np.asarray(widths, dtype=float)
    return gauss(errors[:, None] - c, s).mean(axis=0)


def solve_theta(K, xi, gamma1: float = 0.0) -> np.ndarray:
    """``theta = -(K + gamma1 I)^-1 xi`` via a Cholesky factorization."""
    K = np.asarray(K, dtype=float)
    A = K + gamma1 * np.eye(K.shape[0])
    try:
        factor = linalg.cho_factor(A, lower=True, check_finite=True)
    except linalg.LinAlgError:
        raise np.linalg.LinAlgError("singular Gram system; increase gamma1") from None
    return -linalg.cho_solve(factor, np.asarray(xi, dtype=float))


def _dedupe(values: np.ndarray) -> np.ndarray:
    _, first = np.unique(values, return_index=True)
    return values[np.sort(first)]


def fit_eln(errors, config: ElnFitConfig = ElnFitConfig(), widths=None) -> ElnModel:
    """Train an all-Gaussian ELN on ``errors``.

    ``widths`` may be passed to reuse a previously drawn width vector; it is
    truncated to the number of distinct centers.
    """
    errors = np.asarray(errors, dtype=float).ravel()
    centers = _dedupe(select_centers(errors, config.M, config.centers, config.seed))
    if widths is None:
        widths = draw_widths(centers.size, config.sigma, config.epsilon, config.seed)
    else:
        widths = np.resize(np.asarray(widths, dtype=float), centers.size)
    K = gram_matrix(centers, widths)
    theta = solve_theta(K, xi_hat(centers, widths, errors), config.gamma1)
    return ElnModel.gaussian(centers, widths, theta)


def loss_curve_csv(model: ElnModel, grid) -> str:
    grid = np.asarray(grid, dtype=float)
    rows = ["e,loss"] + [f"{e!r},{l!r}" for e, l in zip(grid.tolist(), np.atleast_1d(model.loss(grid)).tolist())]
    return "\n".join(rows) + "\n"
