"""The error loss network: a weighted sum of radial basis nodes.

``l(e) = sum_j theta_j * phi_j(e)``. The loss may be negative; losses built
from Gaussian nodes are minimized where the error density is high.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kernels import Gaussian, RadialBasis, _as_finite, _out, basis_from_dict, gauss

# every implemented kind has a finite supremum
BOUNDED_KINDS = frozenset({"gaussian", "laplacian", "generalized_gaussian", "kernel_p_power", "risk_sensitive"})


@dataclass(frozen=True)
class ElnModel:
    bases: tuple[RadialBasis, ...]
    thetas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "bases", tuple(self.bases))
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        if len(self.bases) < 1:
            raise ValueError("an ELN needs at least one node")
        if len(self.bases) != len(self.thetas):
            raise ValueError("bases and thetas must have equal length")
        if not all(np.isfinite(self.thetas)):
            raise ValueError("weights must be finite")

    @classmethod
    def from_nodes(cls, nodes) -> "ElnModel":
        nodes = list(nodes)
        return cls(tuple(b for b, _ in nodes), tuple(t for _, t in nodes))

    @classmethod
    def gaussian(cls, centers, widths, thetas) -> "ElnModel":
        centers = np.broadcast_to(np.asarray(centers, float), np.shape(thetas))
        widths = np.broadcast_to(np.asarray(widths, float), np.shape(thetas))
        return cls(
            tuple(Gaussian(float(c), float(s)) for c, s in zip(centers, widths)),
            tuple(float(t) for t in thetas),
        )

    @property
    def nodes(self) -> list[tuple[RadialBasis, float]]:
        return list(zip(self.bases, self.thetas))

    def __len__(self):
        return len(self.bases)

    @property
    def all_gaussian(self) -> bool:
        return all(isinstance(b, Gaussian) for b in self.bases)

    @property
    def bounded(self) -> bool:
        return all(b.kind in BOUNDED_KINDS for b in self.bases)

    @cached_property
    def _gauss_arrays(self):
        if not self.all_gaussian:
            raise ValueError("psi requires all-Gaussian ELN")
        c = np.array([b.center for b in self.bases])
        s = np.array([b.width for b in self.bases])
        return c, s, np.array(self.thetas)

    def _gauss_matrix(self, e):
        # (..., M) matrix of G_{s_j}(e - c_j)
        c, s, _ = self._gauss_arrays
        return gauss(e[..., None] - c, s)

    def loss(self, e):
        e = _as_finite(e)
        if self.all_gaussian:
            return _out(self._gauss_matrix(e) @ self._gauss_arrays[2])
        total = np.zeros_like(e)
        for b, t in zip(self.bases, self.thetas):
            total = total + t * b._eval(e)
        return _out(total)

    def deriv(self, e):
        e = _as_finite(e)
        if self.all_gaussian:
            c, s, t = self._gauss_arrays
            u = e[..., None] - c
            return _out((-u / s**2 * gauss(u, s)) @ t)
        total = np.zeros_like(e)
        for b, t in zip(self.bases, self.thetas):
            total = total + t * b._deriv(e)
        return _out(total)

    def psi(self, e):
        """Per-sample weight ``sum_j theta_j / sigma_j**2 * G_{sigma_j}(e - c_j)``."""
        e = _as_finite(e)
        c, s, t = self._gauss_arrays
        return _out(self._gauss_matrix(e) @ (t / s**2))

    def xi_weight(self, e):
        """Center-weighted counterpart of :meth:`psi`."""
        e = _as_finite(e)
        c, s, t = self._gauss_arrays
        return _out(self._gauss_matrix(e) @ (c * t / s**2))

    def psi_xi(self, e):
        """``(psi(e), xi_weight(e))`` from one kernel evaluation."""
        e = _as_finite(e)
        c, s, t = self._gauss_arrays
        w = t / s**2
        G = self._gauss_matrix(e)
        return _out(G @ w), _out(G @ (c * w))

    def empirical_loss(self, errors) -> float:
        errors = _as_finite(errors).ravel()
        if errors.size == 0:
            raise ValueError("empirical loss needs at least one error sample")
        return float(np.mean(self.loss(errors)))

    def loss_bound(self) -> float:
        return float(sum(abs(t) * b.upper_bound() for b, t in zip(self.bases, self.thetas)))

    def __add__(self, other: "ElnModel") -> "ElnModel":
        return ElnModel(self.bases + other.bases, self.thetas + other.thetas)

    def scaled(self, factor: float) -> "ElnModel":
        return ElnModel(self.bases, tuple(factor * t for t in self.thetas))

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"kind": b.kind, "params": b.params, "theta": t} for b, t in zip(self.bases, self.thetas)
            ]
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ElnModel":
        nodes = doc["nodes"]
        return cls(
            tuple(basis_from_dict(n["kind"], n["params"]) for n in nodes),
            tuple(float(n["theta"]) for n in nodes),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ElnModel":
        return cls.from_dict(json.loads(text))


def loss(m: ElnModel, e):
    return m.loss(e)


def empirical_loss(m: ElnModel, errors) -> float:
    return m.empirical_loss(errors)


def loss_bound(m: ElnModel) -> float:
    return m.loss_bound()


def psi(m: ElnModel, e):
    return m.psi(e)


def xi_weight(m: ElnModel, e):
    return m.xi_weight(e)
