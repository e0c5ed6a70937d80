"""Fixed-step integration of the coupled closed loop, with runtime monitors.

One flat state vector concatenates follower states, the leader state, and
every estimated network weight, so a single explicit integrator (euler or
classic rk4) advances everything together. The control law, both update
laws, the switching schedule, and the norm-band indicator are re-evaluated
at every internal stage, signum included; no event detection is attempted.

The weighted sliding norm ||r||_P is checked at every stage evaluation and
the run aborts with BarrierBreach the moment it reaches the bound mu, so a
completed run satisfies max_t ||r||_P < mu by construction.

Two Lyapunov-style observables are sampled along the trace: the observable
part 0.5 Upsilon(||r||_P) + 0.5 tr(E1 P1 E1^T) is always available, while
the full candidate including weight-error terms exists only in synthetic
ground-truth mode, where the "unknown" dynamics are generated from known
ideal networks (so approximation error is exactly zero and weight errors
are computable).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .barrier import BarrierFunction, weighted_norm
from .controller import ControllerGains, control_from_estimates, corrective_signal, switching_term
from .dnn import (
    AdaptationConfig,
    AgentNetwork,
    BoundEstimates,
    DeepNetworkArch,
    active_layer,
    forward,
    init_network,
    inner_update,
    outer_update,
)
from .errors import (
    BarrierBreach,
    DomainExceeded,
    InitialBarrierViolation,
    NumericOverflow,
    ValidationError,
)
from .graph import DirectedTopology, GraphMatrices, build_matrices
from .plant import DisturbanceModel, FollowerModel, LeaderModel, disturbance
from .sliding import ErrorState, SlidingDesign, sync_errors

INTEGRATION_METHODS = ("euler", "rk4")


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step explicit integration settings."""

    method: str = "rk4"
    dt: float = 1e-3
    t_final: float = 20.0
    decimation: int = 10

    def __post_init__(self):
        if self.method not in INTEGRATION_METHODS:
            raise ValidationError("sim.known_method", f"method must be one of {INTEGRATION_METHODS}")
        if not (self.dt > 0):
            raise ValidationError("sim.dt_positive", f"dt must be > 0, got {self.dt}")
        if not (self.t_final > 0):
            raise ValidationError("sim.t_final_positive", f"t_final must be > 0, got {self.t_final}")
        if int(self.decimation) < 1:
            raise ValidationError("sim.decimation_minimum", f"decimation must be >= 1, got {self.decimation}")


@dataclass(eq=False)
class ScenarioConfig:
    """Complete declarative experiment; equality compares the normalized source."""

    name: str
    seed: int
    mode: str
    topology: DirectedTopology
    design: SlidingDesign
    barrier: BarrierFunction
    arch: DeepNetworkArch
    adapt: AdaptationConfig
    init_range: tuple[float, float]
    ideal_range: tuple[float, float]
    global_barrier_arg: bool
    gains: ControllerGains
    followers: list[FollowerModel]
    leader: LeaderModel
    dist_range: tuple[float, float]
    integrator: IntegratorConfig
    chatter_band: float | None = None
    declared_bounds: dict | None = None
    source: dict = field(default_factory=dict)
    ideal_networks: list[AgentNetwork] | None = None

    @property
    def n_followers(self) -> int:
        return self.topology.n_followers

    @property
    def order(self) -> int:
        return self.design.order

    def to_dict(self) -> dict:
        import copy

        return copy.deepcopy(self.source)

    def __eq__(self, other):
        if not isinstance(other, ScenarioConfig):
            return NotImplemented
        return self.source == other.source

    def default_chatter_band(self) -> float:
        """Per-component signum chattering width excluded by the decrease monitor."""
        if self.chatter_band is not None:
            return self.chatter_band
        return 10.0 * self.integrator.dt * self.gains.gamma2


@dataclass(eq=False)
class SimState:
    """One instant of the coupled system."""

    t: float
    x: np.ndarray
    x0: np.ndarray
    networks: list[AgentNetwork]
    g: np.ndarray


@dataclass(eq=False)
class TraceRecord:
    """One sampled instant of a run."""

    t: float
    x: np.ndarray
    x0: np.ndarray
    e_norms: np.ndarray
    r: np.ndarray
    r_norm_p: float
    u: np.ndarray
    w_norms: np.ndarray
    v_norms: np.ndarray  # N x (k+1)
    active_layer: int
    v_obs: float
    v_full: float | None = None


@dataclass(frozen=True)
class MonitorReport:
    """Derived solely from the trace; everything here is recomputable."""

    max_r_norm_p: float
    max_e_norm_p: list[float]
    e_norms_below_mu: bool
    barrier_ok: bool
    lyapunov_kind: str
    v_decrease_violations: int
    v_decrease_samples: int
    eq12_max_residual: float
    initial_tracking_error: float
    final_tracking_errors: list[float]
    tail_max_tracking_error: float
    v_band_violations: int
    chatter_band: float

    def to_dict(self) -> dict:
        return {
            "max_r_norm_P": self.max_r_norm_p,
            "max_e_norm_P_per_m": self.max_e_norm_p,
            "e_norms_below_mu": self.e_norms_below_mu,
            "barrier_ok": self.barrier_ok,
            "lyapunov_kind": self.lyapunov_kind,
            "v_decrease_violations": self.v_decrease_violations,
            "v_decrease_samples": self.v_decrease_samples,
            "eq12_max_residual": self.eq12_max_residual,
            "initial_tracking_error": self.initial_tracking_error,
            "final_tracking_errors": self.final_tracking_errors,
            "tail_max_tracking_error": self.tail_max_tracking_error,
            "v_band_violations": self.v_band_violations,
            "chatter_band": self.chatter_band,
        }


class StateLayout:
    """Slice map of the flat integration vector: x, x0, then per-agent weights."""

    def __init__(self, n: int, m: int, arch: DeepNetworkArch):
        self.n = n
        self.m = m
        self.p = arch.output_width
        self.w_shapes = arch.weight_shapes
        self.x_size = n * m
        self.x0_off = self.x_size
        self.agent_off = self.x0_off + m
        self.per_agent = self.p + sum(a * b for a, b in self.w_shapes)
        self.total = self.agent_off + n * self.per_agent

    def views(self, flat: np.ndarray):
        x = flat[: self.x_size].reshape(self.n, self.m)
        x0 = flat[self.x0_off : self.x0_off + self.m]
        nets = []
        off = self.agent_off
        for _ in range(self.n):
            w = flat[off : off + self.p]
            off += self.p
            vs = []
            for a, b in self.w_shapes:
                vs.append(flat[off : off + a * b].reshape(a, b))
                off += a * b
            nets.append(AgentNetwork(w_hat=w, v_hat=vs))
        return x, x0, nets

    def pack(self, x, x0, nets) -> np.ndarray:
        flat = np.empty(self.total)
        xv, x0v, netv = self.views(flat)
        xv[:] = x
        x0v[:] = x0
        for target, src in zip(netv, nets):
            target.w_hat[:] = src.w_hat
            for tv, sv in zip(target.v_hat, src.v_hat):
                tv[:] = sv
        return flat


@dataclass(eq=False)
class _Instant:
    x: np.ndarray
    x0: np.ndarray
    nets: list[AgentNetwork]
    e: np.ndarray
    r: np.ndarray
    eta: np.ndarray
    z: float
    rhos: list[np.ndarray]
    f_hat: np.ndarray
    u: np.ndarray


class RunContext:
    """Everything constant over one run, plus the derivative evaluation."""

    def __init__(self, cfg: ScenarioConfig):
        if cfg.mode == "synthetic_truth" and cfg.ideal_networks is None:
            cfg = synthetic_truth_setup(cfg)
        self.cfg = cfg
        self.gm: GraphMatrices = build_matrices(cfg.topology)
        self.layout = StateLayout(cfg.n_followers, cfg.order, cfg.arch)
        self.p_vec = self.gm.p_vec
        self.d_plus_b = self.gm.d_plus_b
        self.lb = self.gm.lb
        # corrective signal is central by design: it needs (L+B)^{-1} A
        self.lbinv_a = np.linalg.solve(self.lb, self.gm.adjacency)
        self.bar = cfg.barrier
        self.design = cfg.design
        self.adapt = cfg.adapt
        self.gains = cfg.gains
        self.arch = cfg.arch

        seq = np.random.SeedSequence(cfg.seed)
        weights_ss, dist_ss, _ideal_ss = seq.spawn(3)
        rng_w = np.random.default_rng(weights_ss)
        lo, hi = cfg.init_range
        self.networks0 = [init_network(cfg.arch, rng_w, lo, hi) for _ in range(cfg.n_followers)]
        rng_g = np.random.default_rng(dist_ss)
        glo, ghi = cfg.dist_range
        self.g = rng_g.uniform(glo, ghi, size=cfg.n_followers)
        self.dist_models = [
            DisturbanceModel(kind=f.disturbance_kind, amplitude=float(self.g[i]))
            for i, f in enumerate(cfg.followers)
        ]
        self.synthetic = cfg.mode == "synthetic_truth"
        self.ideal_networks = cfg.ideal_networks
        if self.synthetic:
            kw = cfg.adapt.k_w
            if np.linalg.cond(kw) > 1e12:
                raise ValidationError(
                    "dnn.kw_invertible_synthetic",
                    "synthetic ground-truth mode needs an invertible outer gain matrix",
                )
            self.kw_inv = np.linalg.inv(kw)
        else:
            self.kw_inv = None

    # --- dynamics pieces ---

    def follower_f(self, i: int, x_row: np.ndarray, x0: np.ndarray, t: float) -> float:
        if self.synthetic:
            return forward(self.ideal_networks[i], self.arch, x_row)[0]
        return self.cfg.followers[i].f(x_row, x0, t)

    def leader_f(self, x0: np.ndarray, t: float) -> float:
        return self.cfg.leader.f0(x0, x0, t)

    def initial_state(self) -> SimState:
        x = np.array([f.init for f in self.cfg.followers], dtype=float)
        x0 = np.array(self.cfg.leader.init, dtype=float)
        return SimState(t=0.0, x=x, x0=x0, networks=[n.copy() for n in self.networks0], g=self.g.copy())

    def initial_flat(self) -> np.ndarray:
        state = self.initial_state()
        return self.layout.pack(state.x, state.x0, state.networks)

    def to_state(self, t: float, flat: np.ndarray) -> SimState:
        x, x0, nets = self.layout.views(flat)
        return SimState(t=t, x=x.copy(), x0=x0.copy(), networks=[n.copy() for n in nets], g=self.g.copy())

    # --- evaluation ---

    def instant(self, t: float, flat: np.ndarray) -> _Instant:
        x, x0, nets = self.layout.views(flat)
        lam = self.design.lambda_bar
        e = -(self.lb @ (x - x0[None, :]))
        r = e[:, :-1] @ lam + e[:, -1]
        eta = e[:, 1:] @ lam
        z2 = float(r @ (self.p_vec * r))
        z = math.sqrt(z2) if z2 > 0.0 else 0.0
        if z >= self.bar.mu:
            raise DomainExceeded(z, self.bar.mu)
        rhos = []
        f_hat = np.empty(len(nets))
        for i, net in enumerate(nets):
            f_hat[i], rho = forward(net, self.arch, x[i])
            rhos.append(rho)
        c = -(self.lbinv_a @ f_hat)
        u = (
            eta / self.d_plus_b
            + self.gains.gamma1 * r
            + self.gains.gamma2 * switching_term(r, self.gains.sgn_boundary_layer)
            - f_hat
            + c
        )
        return _Instant(x=x, x0=x0, nets=nets, e=e, r=r, eta=eta, z=z, rhos=rhos, f_hat=f_hat, u=u)

    def derivative(self, t: float, flat: np.ndarray) -> np.ndarray:
        inst = self.instant(t, flat)
        dflat = np.zeros(self.layout.total)
        dx, dx0, dnets = self.layout.views(dflat)
        dx[:, :-1] = inst.x[:, 1:]
        for i in range(self.layout.n):
            w_i = disturbance(self.dist_models[i], t)
            dx[i, -1] = self.follower_f(i, inst.x[i], inst.x0, t) + inst.u[i] + w_i
        dx0[:-1] = inst.x0[1:]
        dx0[-1] = self.leader_f(inst.x0, t)

        act = active_layer(t, self.adapt)
        barg = inst.z if self.cfg.global_barrier_arg else None
        for i in range(self.layout.n):
            dnets[i].w_hat[:] = outer_update(
                inst.rhos[i], float(inst.r[i]), float(self.p_vec[i]), float(self.d_plus_b[i]),
                self.bar, self.adapt, barrier_arg=barg,
            )
            if act is not None:
                dnets[i].v_hat[act][:] = inner_update(
                    inst.nets[i], act, float(inst.r[i]), float(self.p_vec[i]), float(self.d_plus_b[i]),
                    t, self.bar, self.adapt, barrier_arg=barg,
                )
        return dflat

    def advance(self, t: float, flat: np.ndarray) -> np.ndarray:
        dt = self.cfg.integrator.dt
        if self.cfg.integrator.method == "euler":
            return flat + dt * self.derivative(t, flat)
        k1 = self.derivative(t, flat)
        k2 = self.derivative(t + 0.5 * dt, flat + (0.5 * dt) * k1)
        k3 = self.derivative(t + 0.5 * dt, flat + (0.5 * dt) * k2)
        k4 = self.derivative(t + dt, flat + dt * k3)
        return flat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def lyapunov_observable(self, inst: _Instant) -> float:
        e1 = inst.e[:, :-1]
        quad = float(np.einsum("ij,jk,ik->", e1, self.design.p1, e1))
        return 0.5 * self.bar.potential(inst.z) + 0.5 * quad

    def lyapunov_full(self, inst: _Instant) -> float:
        v = self.lyapunov_observable(inst)
        for i, net in enumerate(inst.nets):
            w_err = self.ideal_networks[i].w_hat - net.w_hat
            v += 0.5 * float(w_err @ self.kw_inv @ w_err)
            for v_id, v_est in zip(self.ideal_networks[i].v_hat, net.v_hat):
                diff = v_id - v_est
                v += 0.5 * float(np.sum(diff * diff))
        return v

    def record(self, t: float, flat: np.ndarray) -> TraceRecord:
        inst = self.instant(t, flat)
        e_norms = np.array([weighted_norm(inst.e[:, m], self.gm.p_matrix) for m in range(self.layout.m)])
        act = active_layer(t, self.adapt)
        v_obs = self.lyapunov_observable(inst)
        v_full = self.lyapunov_full(inst) if self.synthetic else None
        return TraceRecord(
            t=t,
            x=inst.x.copy(),
            x0=inst.x0.copy(),
            e_norms=e_norms,
            r=inst.r.copy(),
            r_norm_p=inst.z,
            u=inst.u.copy(),
            w_norms=np.array([float(np.linalg.norm(n.w_hat)) for n in inst.nets]),
            v_norms=np.array([n.v_norms() for n in inst.nets]),
            active_layer=-1 if act is None else act,
            v_obs=v_obs,
            v_full=v_full,
        )


def synthetic_truth_setup(cfg: ScenarioConfig) -> ScenarioConfig:
    """Generate known ideal networks and make them the true dynamics.

    Each follower's nonlinearity becomes the exact output of a seeded ideal
    network, so the approximation error is identically zero and weight
    errors (hence the full Lyapunov candidate) are computable.
    """
    if cfg.mode != "synthetic_truth":
        raise ValidationError("sim.synthetic_mode", "synthetic setup requires mode=synthetic_truth")
    seq = np.random.SeedSequence(cfg.seed)
    _, _, ideal_ss = seq.spawn(3)
    rng = np.random.default_rng(ideal_ss)
    lo, hi = cfg.ideal_range
    nets = [init_network(cfg.arch, rng, lo, hi) for _ in range(cfg.n_followers)]
    return replace(cfg, ideal_networks=nets)


def synthetic_bounds(cfg: ScenarioConfig) -> BoundEstimates:
    """Compact-set bounds computed from the known ideal networks.

    Norms are taken over the stacked (block-diagonal) forms. The leader
    bound f_m cannot be derived from an expression automatically and must
    be declared in the scenario's bounds section; omega_m defaults to the
    worst-case drawn amplitude magnitude.
    """
    if cfg.ideal_networks is None:
        cfg = synthetic_truth_setup(cfg)
    nets = cfg.ideal_networks
    w_m = math.sqrt(sum(float(n.w_hat @ n.w_hat) for n in nets))
    n_layers = len(cfg.arch.weight_shapes)
    v_stacked = [
        math.sqrt(sum(float(np.sum(n.v_hat[j] ** 2)) for n in nets)) for j in range(n_layers)
    ]
    v_m = max(max(v_stacked), float(np.max(cfg.adapt.v_upper)))
    rho_m = math.sqrt(cfg.n_followers * cfg.arch.output_width)
    declared = cfg.declared_bounds or {}
    if "f_m" not in declared:
        raise ValidationError("bounds.required", "synthetic certificate needs a declared f_m bound")
    omega_m = declared.get("omega_m")
    if omega_m is None:
        kinds_active = any(f.disturbance_kind != "none" for f in cfg.followers)
        omega_m = math.sqrt(cfg.n_followers) * max(abs(b) for b in cfg.dist_range) if kinds_active else 0.0
    return BoundEstimates(
        w_m=w_m, v_m=v_m, rho_m=rho_m, rho_hat_m=rho_m,
        eps_m=0.0, omega_m=float(omega_m), f_m=float(declared["f_m"]),
    )


def step(state: SimState, ctx: RunContext) -> SimState:
    """Advance one fixed step from an explicit SimState (convenience wrapper)."""
    flat = ctx.layout.pack(state.x, state.x0, state.networks)
    try:
        nxt = ctx.advance(state.t, flat)
    except DomainExceeded as exc:
        raise BarrierBreach(state.t, exc.z, exc.mu) from exc
    if not np.all(np.isfinite(nxt)):
        raise NumericOverflow(f"non-finite state after step from t={state.t:.6g}")
    return ctx.to_state(state.t + ctx.cfg.integrator.dt, nxt)


def run(cfg: ScenarioConfig) -> tuple[list[TraceRecord], MonitorReport]:
    """Integrate the scenario to t_final; deterministic given the seed.

    Raises InitialBarrierViolation when ||r(0)||_P >= mu, and BarrierBreach
    (carrying the partial trace) when the bound is reached mid-run.
    """
    ctx = RunContext(cfg)
    flat = ctx.initial_flat()
    try:
        first = ctx.record(0.0, flat)
    except DomainExceeded as exc:
        raise InitialBarrierViolation(
            f"||r(0)||_P = {exc.z:.6g} >= mu = {exc.mu:.6g}; refusing to start"
        ) from exc
    trace = [first]

    integ = cfg.integrator
    n_steps = int(round(integ.t_final / integ.dt))
    for idx in range(n_steps):
        t = idx * integ.dt
        try:
            flat = ctx.advance(t, flat)
        except DomainExceeded as exc:
            raise BarrierBreach(t, exc.z, exc.mu, trace=trace) from exc
        if not np.all(np.isfinite(flat)):
            raise NumericOverflow(f"non-finite state after step to t={t + integ.dt:.6g}")
        done = idx + 1 == n_steps
        if (idx + 1) % integ.decimation == 0 or done:
            t_next = (idx + 1) * integ.dt
            try:
                trace.append(ctx.record(t_next, flat))
            except DomainExceeded as exc:
                raise BarrierBreach(t_next, exc.z, exc.mu, trace=trace) from exc

    report = monitor(
        trace,
        ctx.design,
        ctx.gm,
        ctx.bar,
        chatter_band=cfg.default_chatter_band(),
        use_full=ctx.synthetic,
        v_upper=ctx.adapt.v_upper,
    )
    return trace, report


V_DECREASE_BASE_TOL = 1e-6
V_BAND_SLACK = 1e-3


def monitor(
    trace: list[TraceRecord],
    design: SlidingDesign,
    gm: GraphMatrices,
    bar: BarrierFunction,
    chatter_band: float = 0.0,
    use_full: bool = False,
    v_upper=None,
) -> MonitorReport:
    """Recompute every certificate the trace supports.

    The Lyapunov-decrease counter skips sample pairs where any sliding
    component sits inside the chattering band at either endpoint, since a
    fixed-step signum necessarily oscillates there.
    """
    if not trace:
        raise ValidationError("sim.nonempty_trace", "monitor requires at least one sample")
    m_order = trace[0].x0.size

    max_r = 0.0
    max_e = np.zeros(m_order)
    eq12_max = 0.0
    below_mu = True
    for rec in trace:
        max_r = max(max_r, rec.r_norm_p)
        e = sync_errors(rec.x, rec.x0, gm)
        state = ErrorState.from_errors(e, design)
        eq12_max = max(eq12_max, state.shift_residual(design))
        for m in range(m_order):
            norm_m = weighted_norm(e[:, m], gm.p_matrix)
            max_e[m] = max(max_e[m], norm_m)
            if norm_m >= bar.mu:
                below_mu = False

    series = [rec.v_full if use_full else rec.v_obs for rec in trace]
    violations = 0
    samples = 0
    for prev, cur, v_prev, v_cur in zip(trace, trace[1:], series, series[1:]):
        chattering = bool(
            np.any(np.abs(prev.r) < chatter_band) or np.any(np.abs(cur.r) < chatter_band)
        )
        if chattering:
            continue
        samples += 1
        if v_cur - v_prev > V_DECREASE_BASE_TOL * (1.0 + abs(v_cur)):
            violations += 1

    band_violations = 0
    if v_upper is not None:
        limit = np.asarray(v_upper, dtype=float) * (1.0 + V_BAND_SLACK)
        for rec in trace:
            band_violations += int(np.sum(rec.v_norms > limit[None, :]))

    t_end = trace[-1].t
    tail_start = 0.9 * t_end
    initial_err = float(np.max(np.abs(trace[0].x[:, 0] - trace[0].x0[0])))
    final_errs = np.abs(trace[-1].x[:, 0] - trace[-1].x0[0])
    tail_max = 0.0
    for rec in trace:
        if rec.t >= tail_start:
            tail_max = max(tail_max, float(np.max(np.abs(rec.x[:, 0] - rec.x0[0]))))

    return MonitorReport(
        max_r_norm_p=float(max_r),
        max_e_norm_p=[float(v) for v in max_e],
        e_norms_below_mu=below_mu,
        barrier_ok=bool(max_r < bar.mu),
        lyapunov_kind="full" if use_full else "observable",
        v_decrease_violations=violations,
        v_decrease_samples=samples,
        eq12_max_residual=float(eq12_max),
        initial_tracking_error=initial_err,
        final_tracking_errors=[float(v) for v in final_errs],
        tail_max_tracking_error=float(tail_max),
        v_band_violations=band_violations,
        chatter_band=float(chatter_band),
    )
