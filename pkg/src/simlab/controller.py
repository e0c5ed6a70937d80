"""Sliding-mode control law with network compensation, plus the gain certificate.

The per-agent law is

    u_i = eta_i / (d_i + b_i) + gamma1 r_i + gamma2 sgn(r_i) - f_hat_i + c_i,

where eta_i shifts the error window one derivative up and the corrective
signal c = -(L+B)^{-1} A f_hat cancels the neighbor-estimate coupling. The
corrective term needs global quantities, so it is computed centrally and is
not locally implementable; run metadata records this.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dnn import BoundEstimates, forward
from .errors import ValidationError, ZeroRowGain
from .graph import GraphMatrices
from .sliding import ErrorState, SlidingDesign


@dataclass(frozen=True)
class ControllerGains:
    """Feedback and switching gains; boundary layer 0 means exact signum."""

    gamma1: float
    gamma2: float
    sgn_boundary_layer: float = 0.0

    def __post_init__(self):
        if not (self.gamma1 > 0) or not (self.gamma2 > 0):
            raise ValidationError("controller.gains_positive", f"gamma1/gamma2 must be > 0, got {self.gamma1}, {self.gamma2}")
        if self.sgn_boundary_layer < 0:
            raise ValidationError("controller.boundary_layer_nonneg", "boundary layer must be >= 0")


def switching_term(r: np.ndarray, boundary_layer: float) -> np.ndarray:
    """sgn(r), or the saturation r/eps clipped to [-1, 1] inside a boundary layer."""
    if boundary_layer == 0.0:
        return np.sign(r)
    return np.clip(r / boundary_layer, -1.0, 1.0)


def corrective_signal(gm: GraphMatrices, f_hat: np.ndarray) -> np.ndarray:
    """c = -(L+B)^{-1} A f_hat, the neighbor-estimate cancellation."""
    return -np.linalg.solve(gm.lb, gm.adjacency @ np.asarray(f_hat, dtype=float))


def control_from_estimates(
    errors: ErrorState,
    gm: GraphMatrices,
    f_hat: np.ndarray,
    gains: ControllerGains,
) -> np.ndarray:
    """Stacked control law given precomputed network estimates."""
    dpb = gm.d_plus_b
    if np.any(dpb == 0):
        bad = int(np.nonzero(dpb == 0)[0][0]) + 1
        raise ZeroRowGain(f"agent {bad} has d_i + b_i = 0 (no incoming information)")
    c = corrective_signal(gm, f_hat)
    return errors.eta / dpb + gains.gamma1 * errors.r + gains.gamma2 * switching_term(
        errors.r, gains.sgn_boundary_layer
    ) - f_hat + c


def control_law(
    errors: ErrorState,
    gm: GraphMatrices,
    nets,
    arch,
    gains: ControllerGains,
    design: SlidingDesign,
    x: np.ndarray,
) -> np.ndarray:
    """Stacked control input, evaluating each agent's network at its own state."""
    f_hat = np.array([forward(net, arch, x[i])[0] for i, net in enumerate(nets)])
    return control_from_estimates(errors, gm, f_hat, gains)


def control_law_local(
    errors: ErrorState,
    gm: GraphMatrices,
    f_hat: np.ndarray,
    gains: ControllerGains,
    design: SlidingDesign,
) -> np.ndarray:
    """Per-agent scalar form of the same law, kept for cross-checking the stacked form."""
    dpb = gm.d_plus_b
    lam = design.lambda_bar
    c = corrective_signal(gm, f_hat)
    sw = switching_term(errors.r, gains.sgn_boundary_layer)
    n = errors.e.shape[0]
    u = np.empty(n)
    for i in range(n):
        if dpb[i] == 0:
            raise ZeroRowGain(f"agent {i + 1} has d_i + b_i = 0 (no incoming information)")
        shifted = sum(lam[m] * errors.e[i, m + 1] for m in range(lam.size))
        u[i] = shifted / dpb[i] + gains.gamma1 * errors.r[i] + gains.gamma2 * sw[i] - f_hat[i] + c[i]
    return u


@dataclass(frozen=True)
class GainCertificate:
    """Design-time gain thresholds with the numbers that produced them."""

    gamma1_min: float
    gamma2_min: float
    inputs: dict
    gamma1: float | None = None
    gamma2: float | None = None

    @property
    def gamma1_ok(self) -> bool | None:
        if self.gamma1 is None:
            return None
        return self.gamma1 > self.gamma1_min

    @property
    def gamma2_ok(self) -> bool | None:
        if self.gamma2 is None:
            return None
        return self.gamma2 >= self.gamma2_min

    @property
    def gamma2_at_threshold(self) -> bool | None:
        if self.gamma2 is None:
            return None
        return self.gamma2 == self.gamma2_min

    @property
    def verdict(self) -> bool | None:
        if self.gamma1 is None or self.gamma2 is None:
            return None
        return bool(self.gamma1_ok and self.gamma2_ok)

    def to_dict(self) -> dict:
        return {
            "gamma1_min": self.gamma1_min,
            "gamma2_min": self.gamma2_min,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma1_ok": self.gamma1_ok,
            "gamma2_ok": self.gamma2_ok,
            "gamma2_at_threshold": self.gamma2_at_threshold,
            "verdict": self.verdict,
            "inputs": self.inputs,
        }


def gain_certificate(
    gm: GraphMatrices,
    design: SlidingDesign,
    bounds: BoundEstimates,
    k: int,
    psi_mu: float,
    gains: ControllerGains | None = None,
) -> GainCertificate:
    """Minimum gains for the stability argument to go through.

    gamma1_min depends only on the topology and surface design; gamma2_min
    additionally needs the compact-set bound estimates and the constant
    update-magnitude bound psi evaluated at mu.
    """
    sv = gm.sv_summary
    lam_norm = float(np.linalg.norm(design.lambda_bar))
    comp_norm = float(np.linalg.norm(design.companion))
    p1_max = float(np.linalg.svd(design.p1, compute_uv=False)[0])

    gamma1_min = sv.a_max / (sv.lb_max * sv.db_min) * lam_norm + (
        (sv.a_max / sv.db_min) * comp_norm * lam_norm + p1_max / sv.p_min
    ) ** 2 / (2.0 * design.alpha)
    gamma2_min = (sv.db_max / sv.lb_max) * (
        bounds.w_m * bounds.rho_hat_m + 2.0 * (k + 1) * bounds.v_m * psi_mu
    ) + bounds.w_m * bounds.rho_m + bounds.eps_m + bounds.omega_m + bounds.f_m

    inputs = {
        "sigma_max_A": sv.a_max,
        "sigma_max_LB": sv.lb_max,
        "sigma_min_DB": sv.db_min,
        "sigma_max_DB": sv.db_max,
        "sigma_max_P1": p1_max,
        "sigma_min_P": sv.p_min,
        "lambda_norm": lam_norm,
        "companion_fro_norm": comp_norm,
        "alpha": design.alpha,
        "k": int(k),
        "psi_mu": psi_mu,
        "bounds": {
            "w_m": bounds.w_m, "v_m": bounds.v_m, "rho_m": bounds.rho_m,
            "rho_hat_m": bounds.rho_hat_m, "eps_m": bounds.eps_m,
            "omega_m": bounds.omega_m, "f_m": bounds.f_m,
        },
    }
    return GainCertificate(
        gamma1_min=float(gamma1_min),
        gamma2_min=float(gamma2_min),
        inputs=inputs,
        gamma1=None if gains is None else gains.gamma1,
        gamma2=None if gains is None else gains.gamma2,
    )
