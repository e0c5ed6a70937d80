"""Per-agent deep network estimator with online adaptation laws.

Each agent carries a feedforward network

    f_hat = W_hat^T rho(Phi(x)),   Phi(x) = V_k^T phi(... V_1^T phi(V_0^T x))

whose outer weight vector adapts continuously while the inner weight
matrices adapt one layer at a time under a periodic switching schedule,
gated by a Frobenius-norm band. Both laws scale with the barrier
derivative, so adaptation slows as the weighted sliding norm nears its
bound and freezes entirely at the sliding surface (r = 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barrier import BarrierFunction
from .errors import BoundViolated, ValidationError

ACTIVATIONS = {
    "tanh": np.tanh,
    "sigmoid": lambda a: 1.0 / (1.0 + np.exp(-a)),
}


@dataclass(frozen=True)
class DeepNetworkArch:
    """Network shape: input M, inner feature widths L1..Lk, output width p."""

    input_dim: int
    layer_widths: tuple[int, ...]
    output_width: int
    inner_activation: str = "tanh"
    output_activation: str = "tanh"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if self.input_dim <= 0 or self.output_width <= 0 or any(w <= 0 for w in widths):
            raise ValidationError("dnn.positive_widths", "all layer widths must be positive")
        for name in (self.inner_activation, self.output_activation):
            if name not in ACTIVATIONS:
                raise ValidationError(
                    "dnn.known_activation", f"unknown activation {name!r}; available: {sorted(ACTIVATIONS)}"
                )

    @property
    def inner_layers(self) -> int:
        """k: number of activated inner layers."""
        return len(self.layer_widths)

    @property
    def all_widths(self) -> tuple[int, ...]:
        """L0..L_{k+1} including input and output feature widths."""
        return (self.input_dim, *self.layer_widths, self.output_width)

    @property
    def weight_shapes(self) -> tuple[tuple[int, int], ...]:
        """Shapes of V_0..V_k, each L_j x L_{j+1}."""
        w = self.all_widths
        return tuple((w[j], w[j + 1]) for j in range(len(w) - 1))


@dataclass(eq=False)
class AgentNetwork:
    """Mutable estimated weights for one agent."""

    w_hat: np.ndarray
    v_hat: list[np.ndarray]

    def v_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(v) for v in self.v_hat])

    def copy(self) -> "AgentNetwork":
        return AgentNetwork(self.w_hat.copy(), [v.copy() for v in self.v_hat])


def init_network(arch: DeepNetworkArch, rng: np.random.Generator, low: float, high: float) -> AgentNetwork:
    """Draw all weights uniformly from [low, high] with the supplied generator."""
    w = rng.uniform(low, high, size=arch.output_width)
    v = [rng.uniform(low, high, size=shape) for shape in arch.weight_shapes]
    return AgentNetwork(w_hat=w, v_hat=v)


def forward(net: AgentNetwork, arch: DeepNetworkArch, x) -> tuple[float, np.ndarray]:
    """Network output and the output-layer feature vector rho(Phi(x)).

    The first weight matrix multiplies the raw input; every later matrix
    multiplies the activation of the previous features; the output
    activation is applied once more before the outer weights.
    """
    phi = ACTIVATIONS[arch.inner_activation]
    a = net.v_hat[0].T @ np.asarray(x, dtype=float)
    for v in net.v_hat[1:]:
        a = v.T @ phi(a)
    rho = ACTIVATIONS[arch.output_activation](a)
    return float(net.w_hat @ rho), rho


@dataclass(frozen=True, eq=False)
class AdaptationConfig:
    """Gains, norm band, and switching schedule for the update laws."""

    k_w: np.ndarray
    k_v: tuple[np.ndarray, ...]
    v_lower: np.ndarray
    v_upper: np.ndarray
    switch_period: float = 2.0
    cyclic: bool = True

    def __post_init__(self):
        object.__setattr__(self, "k_w", np.asarray(self.k_w, dtype=float))
        object.__setattr__(self, "k_v", tuple(np.asarray(k, dtype=float) for k in self.k_v))
        n_layers = len(self.k_v)
        object.__setattr__(self, "v_lower", _per_layer(self.v_lower, n_layers))
        object.__setattr__(self, "v_upper", _per_layer(self.v_upper, n_layers))
        if self.k_w.ndim != 2 or self.k_w.shape[0] != self.k_w.shape[1]:
            raise ValidationError("dnn.kw_square", f"outer gain must be square, got {self.k_w.shape}")
        if np.any(np.abs(self.k_w - self.k_w.T) > 1e-12):
            raise ValidationError("dnn.kw_symmetric", "outer gain matrix must be symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (self.k_w + self.k_w.T))
        # constant ones-matrix gains are rank-one PSD, so require PSD + nonzero
        if eigs[0] < -1e-10 * max(1.0, abs(eigs[-1])) or eigs[-1] <= 0:
            raise ValidationError("dnn.kw_psd", "outer gain matrix must be positive semidefinite and nonzero")
        if np.any(self.v_lower < 0) or np.any(self.v_upper <= self.v_lower):
            raise ValidationError("dnn.band_order", "need 0 <= v_lower < v_upper per layer")
        if not (self.switch_period > 0):
            raise ValidationError("dnn.switch_period_positive", f"switch period must be > 0, got {self.switch_period}")

    @property
    def n_layers(self) -> int:
        return len(self.k_v)


def _per_layer(value, n_layers: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float).ravel()
    if arr.size == 1:
        return np.full(n_layers, arr[0])
    if arr.size != n_layers:
        raise ValidationError("dnn.band_per_layer", f"band needs 1 or {n_layers} values, got {arr.size}")
    return arr


@dataclass(frozen=True)
class BoundEstimates:
    """User-supplied compact-set bounds feeding the gain certificate."""

    w_m: float
    v_m: float
    rho_m: float
    rho_hat_m: float
    eps_m: float
    omega_m: float
    f_m: float

    def __post_init__(self):
        for name in ("w_m", "v_m", "rho_m", "rho_hat_m", "eps_m", "omega_m", "f_m"):
            value = getattr(self, name)
            if value is None:
                raise ValidationError("bounds.required", f"bound {name} missing")
            if not np.isfinite(value) or value < 0:
                raise ValidationError("bounds.nonnegative_finite", f"bound {name}={value} must be finite and >= 0")


def active_layer(t: float, cfg: AdaptationConfig) -> int | None:
    """Index of the layer that owns time t, or None once a one-shot sweep is over."""
    cycle = cfg.switch_period * cfg.n_layers
    if cfg.cyclic:
        tau = math.fmod(t, cycle)
        if tau < 0:
            tau += cycle
    else:
        if t >= cycle:
            return None
        tau = t
    j = int(tau // cfg.switch_period)
    return min(j, cfg.n_layers - 1)


def switch_signal(t: float, j: int, cfg: AdaptationConfig) -> int:
    """1 iff layer j owns the half-open window containing t."""
    if not 0 <= j < cfg.n_layers:
        raise ValidationError("dnn.layer_index", f"layer index {j} out of range 0..{cfg.n_layers - 1}")
    return int(active_layer(t, cfg) == j)


def outer_update(
    rho_out: np.ndarray,
    r_i: float,
    p_i: float,
    d_i_plus_b_i: float,
    bar: BarrierFunction,
    cfg: AdaptationConfig,
    barrier_arg: float | None = None,
) -> np.ndarray:
    """Continuous outer-weight derivative, proportional to the feature vector."""
    z = abs(math.sqrt(p_i) * r_i) if barrier_arg is None else barrier_arg
    ups = bar.potential_derivative(z)
    return -(cfg.k_w @ rho_out) * (ups * r_i * p_i * d_i_plus_b_i)


def inner_update(
    net: AgentNetwork,
    j: int,
    r_i: float,
    p_i: float,
    d_i_plus_b_i: float,
    t: float,
    bar: BarrierFunction,
    cfg: AdaptationConfig,
    barrier_arg: float | None = None,
) -> np.ndarray:
    """Inner-weight derivative for layer j: switched, band-gated, barrier-scaled.

    Exactly zero (not merely small) whenever the switch or the norm-band
    indicator is off, so a layer outside its window or band does not move.
    """
    shape = net.v_hat[j].shape
    if switch_signal(t, j, cfg) == 0:
        return np.zeros(shape)
    norm = np.linalg.norm(net.v_hat[j])
    if not (cfg.v_lower[j] <= norm <= cfg.v_upper[j]):
        return np.zeros(shape)
    z = abs(math.sqrt(p_i) * r_i) if barrier_arg is None else barrier_arg
    ups = bar.potential_derivative(z)
    v = cfg.k_v[j] * (math.exp(-0.5 * r_i * r_i) * math.sqrt(p_i) * r_i)
    return -v * (ups * d_i_plus_b_i)


def psi_constant(cfg: AdaptationConfig) -> float:
    """Constant bound on ||v_j||_F / |sqrt(p) r|: the largest gain Frobenius norm."""
    return max(float(np.linalg.norm(k)) for k in cfg.k_v)


@dataclass(frozen=True)
class VBoundReport:
    """Numeric verification of the update-magnitude inequality."""

    psi_per_layer: tuple[float, ...]
    psi: float
    tightest_margin: float
    worst_r: float


def check_v_bound(
    cfg: AdaptationConfig,
    bar: BarrierFunction,
    r_values=None,
    p_i: float = 1.0,
    v_scale: float = 1.0,
    psi: float | None = None,
) -> VBoundReport:
    """Verify ||v_j(r)||_F <= psi(|sqrt(p) r|) |sqrt(p) r| over a grid of r.

    psi defaults to the per-layer constant ||K_vj||_F, for which the margin
    factor is exp(-r^2/2). Raises BoundViolated with the offending r when a
    scaled update outruns the declared bound.
    """
    if r_values is None:
        top = 0.999 * bar.mu / math.sqrt(p_i)
        r_values = np.linspace(-top, top, 401)
    psi_layers = tuple(float(np.linalg.norm(k)) for k in cfg.k_v)
    worst = 0.0
    worst_r = 0.0
    for j in range(cfg.n_layers):
        psi_j = psi if psi is not None else psi_layers[j]
        for r in np.asarray(r_values, dtype=float):
            z = abs(math.sqrt(p_i) * r)
            if z == 0.0:
                continue  # both sides vanish
            lhs = psi_layers[j] * v_scale * math.exp(-0.5 * r * r) * z
            ratio = lhs / (psi_j * z)
            if ratio > worst:
                worst, worst_r = ratio, float(r)
    if worst > 1.0 + 1e-12:
        raise BoundViolated(worst_r, f"update bound violated: ratio {worst:.6g} at r={worst_r:.6g}")
    return VBoundReport(
        psi_per_layer=psi_layers,
        psi=max(psi_layers),
        tightest_margin=worst,
        worst_r=worst_r,
    )
