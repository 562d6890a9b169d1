"""Scalar radial basis functions used as loss-network nodes.

Every basis is an immutable dataclass exposing ``eval``, ``deriv`` and
``upper_bound``. Inputs may be Python floats or numpy arrays; the output
has the same shape as the input.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import ClassVar

import numpy as np

SQRT_2PI = math.sqrt(2.0 * math.pi)


def gauss(e, sigma):
    """Normalized Gaussian density with zero mean and standard deviation ``sigma``."""
    e = np.asarray(e, dtype=float)
    return np.exp(-(e * e) / (2.0 * sigma * sigma)) / (SQRT_2PI * sigma)


def gauss_deriv(e, sigma):
    e = np.asarray(e, dtype=float)
    return -e / (sigma * sigma) * gauss(e, sigma)


def _as_finite(e):
    arr = np.asarray(e, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite input")
    return arr


def _out(arr):
    return float(arr) if arr.ndim == 0 else arr


def _positive(**params):
    for name, value in params.items():
        if not (math.isfinite(value) and value > 0):
            raise ValueError(f"{name} must be a finite positive number, got {value!r}")


@dataclass(frozen=True)
class RadialBasis:
    kind: ClassVar[str] = ""

    def eval(self, e):
        return _out(self._eval(_as_finite(e)))

    def deriv(self, e):
        return _out(self._deriv(_as_finite(e)))

    def upper_bound(self) -> float:
        raise NotImplementedError

    @property
    def params(self) -> dict:
        return asdict(self)

    def _eval(self, e):
        raise NotImplementedError

    def _deriv(self, e):
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(RadialBasis):
    center: float
    width: float
    kind: ClassVar[str] = "gaussian"

    def __post_init__(self):
        _positive(width=self.width)
        if not math.isfinite(self.center):
            raise ValueError("center must be finite")

    def _eval(self, e):
        return gauss(e - self.center, self.width)

    def _deriv(self, e):
        return gauss_deriv(e - self.center, self.width)

    def upper_bound(self) -> float:
        return 1.0 / (SQRT_2PI * self.width)


@dataclass(frozen=True)
class Laplacian(RadialBasis):
    center: float
    width: float
    kind: ClassVar[str] = "laplacian"

    def __post_init__(self):
        _positive(width=self.width)
        if not math.isfinite(self.center):
            raise ValueError("center must be finite")

    def _eval(self, e):
        return np.exp(-np.abs(e - self.center) / self.width) / (2.0 * self.width)

    def _deriv(self, e):
        u = e - self.center
        if np.any(u == 0):
            raise ValueError("derivative undefined at center")
        return -np.sign(u) / self.width * self._eval(e)

    def upper_bound(self) -> float:
        return 1.0 / (2.0 * self.width)


@dataclass(frozen=True)
class GeneralizedGaussian(RadialBasis):
    """``exp(-scale * |e|**shape)``, the unnormalized generalized Gaussian."""

    shape: float
    scale: float
    kind: ClassVar[str] = "generalized_gaussian"

    def __post_init__(self):
        _positive(shape=self.shape, scale=self.scale)

    def _eval(self, e):
        return np.exp(-self.scale * np.abs(e) ** self.shape)

    def _deriv(self, e):
        a = np.abs(e)
        if self.shape < 1 and np.any(a == 0):
            raise ValueError("derivative undefined at zero for shape < 1")
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(a > 0, a ** (self.shape - 1.0), 0.0 if self.shape > 1 else 1.0)
        return -self.scale * self.shape * np.sign(e) * slope * self._eval(e)

    def upper_bound(self) -> float:
        return 1.0


@dataclass(frozen=True)
class RiskSensitive(RadialBasis):
    """``exp(risk * (1 - G_width(e)))``."""

    risk: float
    width: float
    kind: ClassVar[str] = "risk_sensitive"

    def __post_init__(self):
        _positive(risk=self.risk, width=self.width)

    def _eval(self, e):
        return np.exp(self.risk * (1.0 - gauss(e, self.width)))

    def _deriv(self, e):
        return -self.risk * gauss_deriv(e, self.width) * self._eval(e)

    def upper_bound(self) -> float:
        # G >= 0, so the exponent never exceeds risk; approached as |e| -> inf
        return math.exp(self.risk)


@dataclass(frozen=True)
class KernelPPower(RadialBasis):
    """``(1 - G_width(e)) ** (power / 2)``.

    The width must exceed ``1/sqrt(2*pi)`` so that ``1 - G`` stays positive
    under the normalized Gaussian.
    """

    power: float
    width: float
    kind: ClassVar[str] = "kernel_p_power"

    def __post_init__(self):
        _positive(power=self.power, width=self.width)
        if self.width * SQRT_2PI <= 1.0:
            raise ValueError("KernelPPower width must exceed 1/sqrt(2*pi) (about 0.3989)")

    def _eval(self, e):
        return (1.0 - gauss(e, self.width)) ** (0.5 * self.power)

    def _deriv(self, e):
        base = 1.0 - gauss(e, self.width)
        return -0.5 * self.power * base ** (0.5 * self.power - 1.0) * gauss_deriv(e, self.width)

    def upper_bound(self) -> float:
        return 1.0


KINDS: dict[str, type[RadialBasis]] = {
    cls.kind: cls for cls in (Gaussian, Laplacian, GeneralizedGaussian, RiskSensitive, KernelPPower)
}


def basis_from_dict(kind: str, params: dict) -> RadialBasis:
    try:
        cls = KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown basis kind {kind!r}") from None
    return cls(**{k: float(v) for k, v in params.items()})


def basis_eval(b: RadialBasis, e):
    return b.eval(e)


def basis_deriv(b: RadialBasis, e):
    return b.deriv(e)


def basis_upper_bound(b: RadialBasis) -> float:
    return b.upper_bound()
