"""Directed communication topology and the pinned-Laplacian matrix stack.

Convention: adjacency entry a_ij > 0 means a directed edge from node j to
node i (information flows j -> i). The in-degree matrix is D = diag(sum_j
a_ij), the graph Laplacian L = D - A, and the pinning matrix B = diag(b)
couples pinned followers directly to the leader. When every follower is
reachable from the pinned set, L+B is nonsingular and

    q = (L+B)^{-1} 1,   P = diag(1/q_i),   Q = P(L+B) + (L+B)^T P

are well defined with P, Q symmetric positive definite.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import SingularSystem, SolveFailure, ValidationError

COND_LIMIT = 1e12
PD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DirectedTopology:
    """Adjacency matrix plus leader pinning vector for N followers."""

    adjacency: np.ndarray
    pinning: np.ndarray

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=float)
        b = np.array(self.pinning, dtype=float).ravel()
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("graph.adjacency_square", f"adjacency must be square, got {a.shape}")
        if a.shape[0] != b.size:
            raise ValidationError(
                "graph.pinning_length", f"pinning length {b.size} != follower count {a.shape[0]}"
            )
        if np.any(a < 0) or np.any(b < 0):
            raise ValidationError("graph.nonnegative_weights", "adjacency and pinning must be nonnegative")
        if np.any(np.diag(a) != 0):
            raise ValidationError("graph.no_self_loops", "adjacency diagonal must be all zeros")
        if not np.any(b > 0):
            raise ValidationError("graph.pinning", "at least one follower must be pinned (some b_i > 0)")
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "pinning", b)

    @property
    def n_followers(self) -> int:
        return self.pinning.size


@dataclass(frozen=True)
class SingularValueSummary:
    """Extreme singular values needed by the gain certificate."""

    a_max: float
    a_min: float
    lb_max: float
    lb_min: float
    db_max: float
    db_min: float
    p_min: float

    def to_dict(self) -> dict:
        return {
            "sigma_max_A": self.a_max,
            "sigma_min_A": self.a_min,
            "sigma_max_LB": self.lb_max,
            "sigma_min_LB": self.lb_min,
            "sigma_max_DB": self.db_max,
            "sigma_min_DB": self.db_min,
            "sigma_min_P": self.p_min,
        }


@dataclass(frozen=True, eq=False)
class GraphMatrices:
    """Derived matrices of a valid pinned topology."""

    in_degree: np.ndarray
    laplacian: np.ndarray
    pin_matrix: np.ndarray
    lb: np.ndarray
    q: np.ndarray
    p_matrix: np.ndarray
    q_matrix: np.ndarray
    sv_summary: SingularValueSummary

    @property
    def adjacency(self) -> np.ndarray:
        """A = D - L."""
        return self.in_degree - self.laplacian

    @property
    def p_vec(self) -> np.ndarray:
        """Diagonal of P."""
        return np.diag(self.p_matrix)

    @property
    def d_plus_b(self) -> np.ndarray:
        """Diagonal of D + B."""
        return np.diag(self.in_degree) + np.diag(self.pin_matrix)


def singular_values(matrix) -> np.ndarray:
    """Singular values of a real matrix, nonincreasing."""
    m = np.asarray(matrix, dtype=float)
    return np.linalg.svd(m, compute_uv=False)


def check_reachability(topo: DirectedTopology) -> tuple[bool, list[int]]:
    """Breadth-first search from the pinned nodes along edge direction j -> i.

    Returns (all reachable, 1-based list of unreachable followers).
    """
    a = topo.adjacency
    n = topo.n_followers
    seen = [False] * n
    queue = deque(i for i in range(n) if topo.pinning[i] > 0)
    for i in queue:
        seen[i] = True
    while queue:
        j = queue.popleft()
        # node j feeds every i with a_ij > 0
        for i in np.nonzero(a[:, j] > 0)[0]:
            if not seen[i]:
                seen[i] = True
                queue.append(int(i))
    unreachable = [i + 1 for i in range(n) if not seen[i]]
    return (not unreachable), unreachable


def build_matrices(topo: DirectedTopology) -> GraphMatrices:
    """Assemble D, L, B, L+B and the q/P/Q stack, with certificates.

    Raises SingularSystem when L+B is numerically singular (condition
    estimate beyond 1e12), which signals an unreachable follower or
    invalid pinning.
    """
    a = topo.adjacency
    n = topo.n_followers
    d = np.diag(a.sum(axis=1))
    lap = d - a
    bmat = np.diag(topo.pinning)
    lb = lap + bmat

    cond = np.linalg.cond(lb)
    if not np.isfinite(cond) or cond >= COND_LIMIT:
        raise SingularSystem(
            f"L+B condition estimate {cond:.3g} >= {COND_LIMIT:.0e}; "
            "check reachability of every follower from the pinned set"
        )
    ones = np.ones(n)
    q = np.linalg.solve(lb, ones)
    # a couple of refinement steps hold the residual near machine epsilon
    for _ in range(2):
        residual = np.max(np.abs(lb @ q - ones))
        if residual < 1e-13:
            break
        q = q + np.linalg.solve(lb, ones - lb @ q)
    residual = np.max(np.abs(lb @ q - ones))
    if residual >= 1e-12:
        raise SolveFailure(f"(L+B) q = 1 residual {residual:.3g} exceeds 1e-12")
    if np.any(q <= 0):
        raise SingularSystem(f"q = (L+B)^-1 1 has nonpositive entries {q}; invalid pinning/topology")

    p = np.diag(1.0 / q)
    s = p @ lb
    qmat = s + s.T

    db = d + bmat
    sv_a = singular_values(a)
    sv_lb = singular_values(lb)
    sv_db = singular_values(db)
    summary = SingularValueSummary(
        a_max=float(sv_a[0]), a_min=float(sv_a[-1]),
        lb_max=float(sv_lb[0]), lb_min=float(sv_lb[-1]),
        db_max=float(sv_db[0]), db_min=float(sv_db[-1]),
        p_min=float(np.min(1.0 / q)),
    )
    return GraphMatrices(
        in_degree=d, laplacian=lap, pin_matrix=bmat, lb=lb,
        q=q, p_matrix=p, q_matrix=qmat, sv_summary=summary,
    )


def min_eig_sym(matrix: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(matrix)[0])
