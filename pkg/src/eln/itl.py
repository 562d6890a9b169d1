"""Information theoretic learning losses written as error loss networks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import Gaussian, GeneralizedGaussian, KernelPPower, Laplacian, RiskSensitive
from .network import ElnModel


def make_mcc(sigma: float) -> ElnModel:
    return ElnModel((Gaussian(0.0, sigma),), (-1.0,))


def make_mcc_vc(sigma: float, center: float) -> ElnModel:
    return ElnModel((Gaussian(center, sigma),), (-1.0,))


def make_gmcc(alpha: float, lam: float) -> ElnModel:
    return ElnModel((GeneralizedGaussian(alpha, lam),), (-1.0,))


def make_krsl(lam: float, sigma: float) -> ElnModel:
    return ElnModel((RiskSensitive(lam, sigma),), (1.0 / lam,))


def make_kmpe(p: float, sigma: float) -> ElnModel:
    return ElnModel((KernelPPower(p, sigma),), (1.0,))


def make_mmcc(sigma1: float, sigma2: float, alpha: float, type: int = 1) -> ElnModel:
    """Mixture correntropy: ``-alpha * phi1 + (alpha - 1) * phi2``.

    Type 1 mixes two Gaussians, type 2 a Gaussian (``sigma1``) and a
    Laplacian (``sigma2``).
    """
    if type == 1:
        second = Gaussian(0.0, sigma2)
    elif type == 2:
        second = Laplacian(0.0, sigma2)
    else:
        raise ValueError("MMCC type must be 1 or 2")
    return ElnModel((Gaussian(0.0, sigma1), second), (-alpha, alpha - 1.0))


def make_mee(errors, sigma: float) -> ElnModel:
    """One node per error sample with width ``sqrt(2) * sigma`` and weight ``-1/N``.

    The empirical loss over the same sample equals the negated quadratic
    information potential ``-(1/N^2) sum_ij G_{sqrt2 sigma}(e_i - e_j)``.
    """
    errors = np.asarray(errors, dtype=float).ravel()
    n = errors.size
    if n == 0:
        raise ValueError("no error samples")
    return ElnModel.gaussian(errors, math.sqrt(2.0) * sigma, np.full(n, -1.0 / n))


@dataclass
class QuantizerState:
    codebook: list[float] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)

    def update(self, e: float, threshold: float) -> None:
        if not self.codebook:
            self.codebook.append(e)
            self.counts.append(1)
            return
        # argmin returns the first index on ties, i.e. the earliest center
        dist = np.abs(np.asarray(self.codebook) - e)
        j = int(np.argmin(dist))
        if dist[j] <= threshold:
            self.counts[j] += 1
        else:
            self.codebook.append(e)
            self.counts.append(1)


def ovq_quantize(errors, threshold: float) -> QuantizerState:
    """Online vector quantization of a scalar error sequence, in sample order."""
    if not threshold >= 0:
        raise ValueError("quantization threshold must be >= 0")
    state = QuantizerState()
    for e in np.asarray(errors, dtype=float).ravel().tolist():
        state.update(e, threshold)
    return state


def make_qmee(errors, sigma: float, threshold: float) -> ElnModel:
    errors = np.asarray(errors, dtype=float).ravel()
    q = ovq_quantize(errors, threshold)
    n = errors.size
    return ElnModel.gaussian(q.codebook, sigma, -np.asarray(q.counts, dtype=float) / n)


def make_rmee(sigma: float, M1: int, M2: int, M3: int, N: int) -> ElnModel:
    return ElnModel.gaussian([0.0, -1.0, 1.0], sigma, [-M1 / N, -M2 / N, -M3 / N])


def make_mmkcc(centers, widths, lams) -> ElnModel:
    lams = np.asarray(lams, dtype=float).ravel()
    if lams.size < 2:
        raise ValueError("MMKCC needs at least two kernels")
    return ElnModel.gaussian(centers, widths, -lams)


def combine(models, weights) -> ElnModel:
    """Weighted mixture of losses: node lists concatenated, each model's weights scaled."""
    models, weights = list(models), list(weights)
    if not models or len(models) != len(weights):
        raise ValueError("need one weight per model")
    out = models[0].scaled(weights[0])
    for m, w in zip(models[1:], weights[1:]):
        out = out + m.scaled(w)
    return out


REGISTRY = {
    "mcc": make_mcc,
    "mcc_vc": make_mcc_vc,
    "gmcc": make_gmcc,
    "krsl": make_krsl,
    "kmpe": make_kmpe,
    "mmcc": make_mmcc,
    "mee": make_mee,
    "qmee": make_qmee,
    "rmee": make_rmee,
    "mmkcc": make_mmkcc,
}
