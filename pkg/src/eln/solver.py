"""Fixed-point training of linear-in-parameter models under an ELN loss.

Each iteration evaluates the training errors, optionally refits the ELN on
them, and solves the weighted normal equations

    (H' Lambda H - gamma2 I) beta = H' Lambda d - H' vartheta

with ``Lambda = diag(psi(e_i))`` and ``vartheta_i = xi(e_i)``. ``gamma2`` is
the sample-scaled regularizer (N times the per-sample one). Multi-output
targets are solved column by column, with an ELN fitted on the pooled
errors when it is adaptive.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import linalg

from .kernels import Laplacian
from .lip import FeatureMap, feature_map_from_dict
from .network import ElnModel
from .pdf_match import CenterStrategy, ElnFitConfig, draw_widths, fit_eln

log = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class RidgeMse:
    pass


@dataclass(frozen=True)
class FixedEln:
    model: ElnModel
    bias_correction: bool = False


@dataclass(frozen=True)
class AdaptiveEln:
    """Refit the loss every iteration.

    Either ``config`` (PDF matching) or ``builder`` (any ``errors -> ElnModel``
    callable, e.g. a QMEE constructor) must be set. Random centers are
    redrawn every iteration from a seed sequence derived from the config
    seed. With ``redraw_centers`` false the same draw is reused, so the
    centers are the current errors of one fixed sample subset and the
    iteration map is deterministic (needed for a true fixed point).
    """

    config: Optional[ElnFitConfig] = None
    builder: Optional[Callable[[np.ndarray], ElnModel]] = None
    bias_correction: bool = True
    redraw_centers: bool = True

    def __post_init__(self):
        if (self.config is None) == (self.builder is None):
            raise ValueError("AdaptiveEln needs exactly one of config or builder")


@dataclass(frozen=True)
class Irls:
    model: ElnModel


LossMode = Union[RidgeMse, FixedEln, AdaptiveEln, Irls]


@dataclass(frozen=True)
class SolverConfig:
    loss: LossMode = field(default_factory=RidgeMse)
    gamma2: float = 1e-3
    T: int = 50
    tau: float = 1e-7

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.gamma2 < 0:
            raise ValueError("gamma2 must be >= 0")


@dataclass(frozen=True, eq=False)
class TrainedModel:
    feature_map: FeatureMap
    beta: np.ndarray
    bias: np.ndarray
    iterations: int
    converged: bool
    loss: Optional[ElnModel] = None

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        Y = self.feature_map.transform(np.atleast_2d(X)) @ self.beta + self.bias
        return Y[0] if single else Y

    def classify(self, X) -> np.ndarray:
        return np.argmax(np.atleast_2d(self.predict(np.atleast_2d(X))), axis=1)

    def to_dict(self) -> dict:
        return {
            "feature_map": self.feature_map.to_dict(),
            "beta": self.beta.tolist(),
            "bias": self.bias.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "loss": None if self.loss is None else self.loss.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        return cls(
            feature_map_from_dict(doc["feature_map"]),
            np.asarray(doc["beta"], dtype=float),
            np.asarray(doc["bias"], dtype=float),
            int(doc["iterations"]),
            bool(doc["converged"]),
            None if doc.get("loss") is None else ElnModel.from_dict(doc["loss"]),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))


def _solve(A, b, message):
    try:
        x = linalg.solve(A, b, assume_a="sym")
    except (linalg.LinAlgError, ValueError):
        raise SingularSystemError(message) from None
    if not np.all(np.isfinite(x)):
        raise SingularSystemError(message)
    return x


def ridge_fit(H, d, gamma: float) -> np.ndarray:
    """``(H'H + gamma I)^-1 H'd``."""
    H = np.asarray(H, dtype=float)
    A = H.T @ H + gamma * np.eye(H.shape[1])
    return _solve(A, H.T @ np.asarray(d, dtype=float), "singular ridge system; increase gamma")


def assemble_step(H, d, eln: ElnModel, errors, gamma2: float) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    d = np.asarray(d, dtype=float)
    psi, vartheta = eln.psi_xi(errors)
    A = H.T @ (psi[:, None] * H) - gamma2 * np.eye(H.shape[1])
    rhs = H.T @ (psi * d - vartheta)
    return _solve(A, rhs, "fixed-point system singular; adjust gamma2 or sigma")


def irls_weight(model: ElnModel, e, h: float = 1e-6):
    """``l'(e) / e``; at ``e == 0`` the limit is taken as a symmetric difference of ``l'``."""
    e = np.asarray(e, dtype=float)
    zero = e == 0
    if np.any(zero) and any(isinstance(b, Laplacian) for b in model.bases):
        raise ValueError("IRLS weight undefined at e=0 for Laplacian nodes")
    w = np.empty_like(e)
    nz = ~zero
    w[nz] = model.deriv(e[nz]) / e[nz]
    if np.any(zero):
        w[zero] = (model.deriv(h) - model.deriv(-h)) / (2.0 * h)
    return float(w) if w.ndim == 0 else w


def irls_step(H, d, model: ElnModel, errors, gamma2: float) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    w = irls_weight(model, errors)
    A = H.T @ (w[:, None] * H) + gamma2 * np.eye(H.shape[1])
    return _solve(A, H.T @ (w * np.asarray(d, dtype=float)), "IRLS system singular; adjust gamma2")


def objective(H, d, eln: ElnModel, beta, gamma2: float) -> float:
    """Empirical ELN loss plus ``gamma2 / (2N) * |beta|^2`` for a single output."""
    H = np.asarray(H, dtype=float)
    beta = np.asarray(beta, dtype=float)
    e = np.asarray(d, dtype=float) - H @ beta
    return eln.empirical_loss(e) + gamma2 / (2.0 * H.shape[0]) * float(beta @ beta)


def _iteration_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence([seed, t]).generate_state(1)[0])


def fixed_point_fit(fm: FeatureMap, X, d, cfg: SolverConfig) -> TrainedModel:
    H = fm.transform(X)
    D = np.asarray(d, dtype=float)
    single = D.ndim == 1
    D = D.reshape(H.shape[0], -1)
    if D.shape[0] == 0:
        raise ValueError("empty training set")
    beta = np.zeros((H.shape[1], D.shape[1]))
    mode = cfg.loss

    if isinstance(mode, RidgeMse):
        beta = ridge_fit(H, D, cfg.gamma2)
        return _finish(fm, H, D, beta, 1, True, None, False, single)

    widths = None
    if isinstance(mode, AdaptiveEln) and mode.config is not None:
        c = mode.config
        n_nodes = D.size if c.centers is CenterStrategy.ALL else min(c.M, D.size)
        widths = draw_widths(n_nodes, c.sigma, c.epsilon, c.seed)

    eln = mode.model if isinstance(mode, (FixedEln, Irls)) else None
    converged = False
    t = 0
    for t in range(1, cfg.T + 1):
        E = D - H @ beta
        if isinstance(mode, AdaptiveEln):
            if mode.builder is not None:
                eln = mode.builder(E.ravel())
            else:
                c = mode.config
                if mode.redraw_centers:
                    c = ElnFitConfig(c.M, c.sigma, c.epsilon, c.gamma1, c.centers, _iteration_seed(c.seed, t))
                eln = fit_eln(E.ravel(), c, widths=widths)
        step = irls_step if isinstance(mode, Irls) else assemble_step
        new = np.column_stack([step(H, D[:, k], eln, E[:, k], cfg.gamma2) for k in range(D.shape[1])])
        prev_norm = float(np.sum(beta * beta))
        change = float(np.sum((new - beta) ** 2))
        beta = new
        if change == 0.0 or (prev_norm > 0 and change / prev_norm < cfg.tau):
            converged = True
            break
    if not converged:
        log.debug("no convergence within T=%d (last relative change %.3g)", cfg.T, change / max(prev_norm, 1e-300))
    bias_on = isinstance(mode, (AdaptiveEln, FixedEln)) and mode.bias_correction
    return _finish(fm, H, D, beta, t, converged, eln, bias_on, single)


def _finish(fm, H, D, beta, iterations, converged, eln, bias_on, single):
    bias = (D - H @ beta).mean(axis=0) if bias_on else np.zeros(D.shape[1])
    if single:
        beta, bias = beta[:, 0], bias[:1].reshape(())
    return TrainedModel(fm, beta, np.asarray(bias), iterations, converged, eln)


def predict(tm: TrainedModel, x) -> np.ndarray:
    return tm.predict(x)
