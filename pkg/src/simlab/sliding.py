"""Sliding-surface design and synchronization errors.

For order-M agents the sliding vector combines the first M-1 error columns
with the top one,

    r = sum_{m<M} lambda_m e^m + e^M,

where the polynomial s^{M-1} + lambda_{M-1} s^{M-2} + ... + lambda_1 must be
Hurwitz so errors decay once r = 0. The companion matrix of that polynomial
admits a Lyapunov solution P1 with

    Lambda^T P1 + P1 Lambda = -alpha I,

solved here exactly by Kronecker vectorization (the orders involved are
tiny, so a dense solve is both simplest and most accurate).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonPositiveRoot, NotHurwitz, SolveFailure
from .graph import GraphMatrices

HURWITZ_TOL = 0.0  # strict: every root must satisfy Re < 0
LYAP_RESIDUAL_TOL = 1e-10


def companion_matrix(lambda_bar: np.ndarray) -> np.ndarray:
    """(M-1)x(M-1) companion form: identity superdiagonal, last row -lambda."""
    lam = np.asarray(lambda_bar, dtype=float).ravel()
    n = lam.size
    top = np.zeros((n, n))
    top[:-1, 1:] = np.eye(n - 1)
    top[-1, :] = -lam
    return top


def is_hurwitz(lambda_bar) -> bool:
    """True iff every eigenvalue of the companion matrix has Re < 0."""
    eigs = np.linalg.eigvals(companion_matrix(lambda_bar))
    return bool(np.all(eigs.real < HURWITZ_TOL))


def lambdas_from_roots(betas) -> np.ndarray:
    """Coefficients of prod_k (s + beta_k) in ascending order, constant first.

    All beta_k must be strictly positive, which makes the polynomial Hurwitz
    by construction (roots at -beta_k).
    """
    betas = np.asarray(betas, dtype=float).ravel()
    if betas.size == 0:
        raise NonPositiveRoot("at least one root is required")
    if np.any(betas <= 0):
        raise NonPositiveRoot(f"all roots must be > 0, got {betas.tolist()}")
    coeffs = np.poly(-betas)  # descending, leading 1
    lam = coeffs[::-1][:-1].copy()  # ascending, drop the leading 1
    return lam


def companion_and_lyapunov(lambda_bar, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Companion matrix and the (symmetrized) solution of the Lyapunov equation."""
    lam = np.asarray(lambda_bar, dtype=float).ravel()
    if not (alpha > 0):
        raise SolveFailure(f"alpha must be > 0, got {alpha}")
    comp = companion_matrix(lam)
    eigs = np.linalg.eigvals(comp)
    if not np.all(eigs.real < HURWITZ_TOL):
        raise NotHurwitz(
            f"surface polynomial with coefficients {lam.tolist()} has eigenvalues {eigs} "
            "with nonnegative real part"
        )
    n = lam.size
    eye = np.eye(n)
    # vec(Lambda^T P + P Lambda) = (I (x) Lambda^T + Lambda^T (x) I) vec(P)
    kron = np.kron(eye, comp.T) + np.kron(comp.T, eye)
    try:
        vec_p = np.linalg.solve(kron, -alpha * eye.ravel(order="F"))
    except np.linalg.LinAlgError as exc:
        raise SolveFailure(f"Lyapunov system singular: {exc}") from exc
    p1 = vec_p.reshape((n, n), order="F")
    p1 = 0.5 * (p1 + p1.T)
    residual = np.linalg.norm(comp.T @ p1 + p1 @ comp + alpha * eye)
    if residual >= LYAP_RESIDUAL_TOL:
        raise SolveFailure(f"Lyapunov residual {residual:.3g} exceeds {LYAP_RESIDUAL_TOL:.0e}")
    if np.linalg.eigvalsh(p1)[0] <= 0:
        raise SolveFailure("Lyapunov solution is not positive definite")
    return comp, p1


@dataclass(frozen=True, eq=False)
class SlidingDesign:
    """Immutable surface design shared by controller, adaptation, and monitors."""

    order: int
    lambda_bar: np.ndarray
    companion: np.ndarray
    selector: np.ndarray
    alpha: float
    p1: np.ndarray

    @classmethod
    def from_lambda(cls, lambda_bar, alpha: float) -> "SlidingDesign":
        lam = np.asarray(lambda_bar, dtype=float).ravel()
        comp, p1 = companion_and_lyapunov(lam, alpha)
        selector = np.zeros(lam.size)
        selector[-1] = 1.0
        return cls(
            order=lam.size + 1, lambda_bar=lam, companion=comp,
            selector=selector, alpha=float(alpha), p1=p1,
        )

    @classmethod
    def from_roots(cls, betas, alpha: float) -> "SlidingDesign":
        return cls.from_lambda(lambdas_from_roots(betas), alpha)

    @property
    def lambda_sum(self) -> float:
        """sum_i lambda_i, the containment-corollary precondition quantity."""
        return float(self.lambda_bar.sum())


def sync_errors(x, x0, gm: GraphMatrices) -> np.ndarray:
    """Synchronization error columns e^m = -(L+B)(x^m - 1 x0^m), as an N x M matrix."""
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float).ravel()
    n = gm.lb.shape[0]
    if x.ndim != 2 or x.shape[0] != n:
        raise DimensionMismatch(f"states must be {n} x M, got {x.shape}")
    if x.shape[1] != x0.size:
        raise DimensionMismatch(f"leader state length {x0.size} != order {x.shape[1]}")
    return -gm.lb @ (x - x0[None, :])


def sliding_variable(errors, lambda_bar) -> tuple[np.ndarray, np.ndarray]:
    """Sliding vector r and the shifted combination eta from the error matrix.

    r = E[:, :M-1] @ lambda + e^M and eta = E[:, 1:] @ lambda.
    """
    e = np.asarray(errors, dtype=float)
    lam = np.asarray(lambda_bar, dtype=float).ravel()
    if e.ndim != 2 or e.shape[1] != lam.size + 1:
        raise DimensionMismatch(f"error matrix must be N x {lam.size + 1}, got {e.shape}")
    r = e[:, :-1] @ lam + e[:, -1]
    eta = e[:, 1:] @ lam
    return r, eta


@dataclass(frozen=True, eq=False)
class ErrorState:
    """Error matrix split into its shifted windows, with r and eta."""

    e: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    r: np.ndarray
    eta: np.ndarray

    @classmethod
    def from_errors(cls, errors, design: SlidingDesign) -> "ErrorState":
        e = np.asarray(errors, dtype=float)
        r, eta = sliding_variable(e, design.lambda_bar)
        return cls(e=e, e1=e[:, :-1], e2=e[:, 1:], r=r, eta=eta)

    def shift_residual(self, design: SlidingDesign) -> float:
        """Max-abs residual of the window identity E2 = E1 Lambda^T + r l^T."""
        rhs = self.e1 @ design.companion.T + np.outer(self.r, design.selector)
        return float(np.max(np.abs(self.e2 - rhs), initial=0.0))
