"""Restricted potential (barrier) function and weighted norms.

The default form is

    Upsilon(z) = z^2 / (mu^2 - z^2)

defined for 0 <= z < mu, which is zero at the origin and blows up as z
approaches the bound mu. The adaptation laws use its derivative with
respect to the *squared* weighted norm,

    Upsilon_d(z) = d Upsilon / d(z^2) = mu^2 / (mu^2 - z^2)^2,

so the chain rule gives d Upsilon / dz = 2 z Upsilon_d(z).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainExceeded, NonPDWeight, ValidationError


def weighted_norm(y, h) -> float:
    """sqrt(y^T H y) for a symmetric positive definite weight H."""
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    quad = float(y @ h @ y)
    scale = 1.0 + float(y @ y) * float(np.max(np.abs(h), initial=0.0))
    if quad < -1e-10 * scale:
        raise NonPDWeight(f"y^T H y = {quad:.3g} < 0; weight matrix is not positive definite")
    return math.sqrt(max(quad, 0.0))


def _rational_potential(z: float, mu: float) -> float:
    return z * z / (mu * mu - z * z)


def _rational_derivative(z: float, mu: float) -> float:
    den = mu * mu - z * z
    return mu * mu / (den * den)


_FORMS = {
    "rational": (_rational_potential, _rational_derivative),
}


@dataclass(frozen=True)
class BarrierFunction:
    """Restricted potential with user-defined bound mu."""

    mu: float
    form: str = "rational"

    def __post_init__(self):
        if not (self.mu > 0):
            raise ValidationError("barrier.mu_positive", f"mu must be > 0, got {self.mu}")
        if self.form not in _FORMS:
            raise ValidationError(
                "barrier.known_form", f"unknown form {self.form!r}; available: {sorted(_FORMS)}"
            )

    def _check(self, z: float) -> float:
        z = float(z)
        if z < 0:
            raise ValueError(f"barrier argument must be nonnegative, got {z}")
        if z >= self.mu:
            raise DomainExceeded(z, self.mu)
        return z

    def potential(self, z: float) -> float:
        """Upsilon(z) on [0, mu)."""
        z = self._check(z)
        return _FORMS[self.form][0](z, self.mu)

    def potential_derivative(self, z: float) -> float:
        """Upsilon_d(z) = d Upsilon / d(z^2) on [0, mu)."""
        z = self._check(z)
        return _FORMS[self.form][1](z, self.mu)
