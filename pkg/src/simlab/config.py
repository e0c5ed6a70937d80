"""Scenario-file loading and validation.

Scenario files are YAML with a fixed tree layout (see README for the full
grammar). Gain matrices accept the shorthand strings ``"c * ones(a, b)"``
and ``"c * eye(n)"`` in place of explicit nested lists. Every cross-module
invariant the simulator relies on is checked here at load time, except the
initial barrier condition, which depends on the state and is checked when a
run starts.
"""
from __future__ import annotations

import copy
import importlib.resources
import re
from pathlib import Path

import numpy as np
import yaml

from .barrier import BarrierFunction
from .controller import ControllerGains
from .dnn import ACTIVATIONS, AdaptationConfig, BoundEstimates, DeepNetworkArch
from .errors import ParseError, ValidationError
from .graph import DirectedTopology, check_reachability
from .plant import DISTURBANCE_KINDS, FollowerModel, LeaderModel, parse_dynamics
from .sim import IntegratorConfig, ScenarioConfig
from .sliding import SlidingDesign

_SHORTHAND_RE = re.compile(
    r"\s*([-+0-9.eE]+)\s*\*\s*(ones|eye)\s*\(\s*(\d+)\s*(?:,\s*(\d+)\s*)?\)\s*\Z"
)


def bundled_scenario(name: str) -> Path:
    """Path of a scenario file shipped inside the package."""
    resource = importlib.resources.files("simlab") / "scenarios" / name
    return Path(str(resource))


def _matrix_value(value, shape: tuple[int, int], where: str) -> np.ndarray:
    """Accept nested lists, a bare scalar, or the ones/eye shorthand."""
    if isinstance(value, str):
        m = _SHORTHAND_RE.match(value)
        if m is None:
            raise ValidationError(f"{where}.matrix_shorthand", f"cannot parse matrix shorthand {value!r}")
        scale = float(m.group(1))
        kind = m.group(2)
        rows = int(m.group(3))
        cols = int(m.group(4)) if m.group(4) is not None else rows
        if kind == "eye":
            if rows != cols:
                raise ValidationError(f"{where}.matrix_shorthand", "eye(n) takes a single size")
            mat = scale * np.eye(rows)
        else:
            mat = scale * np.ones((rows, cols))
    elif isinstance(value, (int, float)):
        mat = float(value) * np.ones(shape)
    else:
        mat = np.array(value, dtype=float)
    if mat.shape != shape:
        raise ValidationError(f"{where}.matrix_shape", f"expected shape {shape}, got {mat.shape}")
    return mat


def _require(section: dict, key: str, where: str):
    if key not in section or section[key] is None:
        raise ValidationError(f"{where}.required", f"missing required field {where}.{key}")
    return section[key]


def _as_section(raw: dict, key: str) -> dict:
    value = raw.get(key)
    if value is None:
        raise ValidationError(f"{key}.required", f"missing required section {key!r}")
    if not isinstance(value, dict):
        raise ValidationError(f"{key}.section", f"section {key!r} must be a mapping")
    return value


def _pair(value, where: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}.pair", f"{where} must be a [low, high] pair") from exc
    if lo > hi:
        raise ValidationError(f"{where}.pair_order", f"{where} must satisfy low <= high")
    return lo, hi


def load_config(path) -> ScenarioConfig:
    """Load, normalize, and fully validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ParseError(
            f"invalid YAML in {path}: {exc.problem}",
            line=None if mark is None else mark.line + 1,
            column=None if mark is None else mark.column + 1,
        ) from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"scenario file {path} must contain a mapping at top level")
    return load_config_dict(raw, name_hint=path.stem)


def load_config_dict(raw: dict, name_hint: str = "scenario") -> ScenarioConfig:
    """Build a validated ScenarioConfig from a parsed mapping."""
    known = {
        "name", "seed", "mode", "topology", "sliding", "barrier", "dnn",
        "controller", "agents", "leader", "disturbance", "integrator",
        "monitor", "bounds",
    }
    unknown = set(raw) - known
    if unknown:
        raise ValidationError("config.known_fields", f"unknown top-level fields: {sorted(unknown)}")

    name = str(raw.get("name", name_hint))
    if "seed" not in raw:
        raise ValidationError("config.seed_required", "scenarios must declare an integer seed")
    seed = int(raw["seed"])
    if seed < 0:
        raise ValidationError("config.seed_nonnegative", f"seed must be >= 0, got {seed}")
    mode = str(raw.get("mode", "standard"))
    if mode not in ("standard", "synthetic_truth"):
        raise ValidationError("config.known_mode", f"mode must be standard or synthetic_truth, got {mode!r}")

    # --- topology ---
    topo_raw = _as_section(raw, "topology")
    topology = DirectedTopology(
        adjacency=np.array(_require(topo_raw, "adjacency", "topology"), dtype=float),
        pinning=np.array(_require(topo_raw, "pinning", "topology"), dtype=float),
    )
    reachable, missing = check_reachability(topology)
    if not reachable:
        raise ValidationError(
            "graph.reachability",
            f"followers {missing} are not reachable from the pinned set",
        )
    n = topology.n_followers

    # --- sliding design ---
    sliding_raw = _as_section(raw, "sliding")
    has_lambda = "lambda" in sliding_raw and sliding_raw["lambda"] is not None
    has_roots = "roots" in sliding_raw and sliding_raw["roots"] is not None
    if has_lambda == has_roots:
        raise ValidationError(
            "sliding.lambda_xor_roots", "give exactly one of sliding.lambda or sliding.roots"
        )
    alpha = float(sliding_raw.get("alpha", 1.0))
    if not alpha > 0:
        raise ValidationError("sliding.alpha_positive", f"alpha must be > 0, got {alpha}")
    from .errors import NonPositiveRoot, NotHurwitz

    try:
        if has_roots:
            design = SlidingDesign.from_roots(np.array(sliding_raw["roots"], dtype=float), alpha)
        else:
            design = SlidingDesign.from_lambda(np.array(sliding_raw["lambda"], dtype=float), alpha)
    except (NotHurwitz, NonPositiveRoot) as exc:
        raise ValidationError("sliding.hurwitz", str(exc)) from exc
    order = design.order

    # --- barrier ---
    barrier_raw = _as_section(raw, "barrier")
    bar = BarrierFunction(mu=float(_require(barrier_raw, "mu", "barrier")), form=str(barrier_raw.get("form", "rational")))

    # --- network architecture + adaptation ---
    dnn_raw = _as_section(raw, "dnn")
    widths = [int(w) for w in _require(dnn_raw, "widths", "dnn")]
    if len(widths) < 1:
        raise ValidationError("dnn.positive_widths", "dnn.widths must list at least the output width")
    arch = DeepNetworkArch(
        input_dim=order,
        layer_widths=tuple(widths[:-1]),
        output_width=widths[-1],
        inner_activation=str(dnn_raw.get("inner_activation", "tanh")),
        output_activation=str(dnn_raw.get("output_activation", "tanh")),
    )
    shapes = arch.weight_shapes
    p = arch.output_width
    k_w = _matrix_value(_require(dnn_raw, "k_w", "dnn"), (p, p), "dnn.k_w")
    k_v_raw = _require(dnn_raw, "k_v", "dnn")
    if not isinstance(k_v_raw, list) or len(k_v_raw) != len(shapes):
        raise ValidationError(
            "dnn.kv_per_layer", f"dnn.k_v must list {len(shapes)} gain matrices (one per weight matrix)"
        )
    k_v = tuple(_matrix_value(v, shapes[j], f"dnn.k_v[{j}]") for j, v in enumerate(k_v_raw))
    adapt = AdaptationConfig(
        k_w=k_w,
        k_v=k_v,
        v_lower=np.asarray(dnn_raw.get("v_lower", 0.0), dtype=float),
        v_upper=np.asarray(_require(dnn_raw, "v_upper", "dnn"), dtype=float),
        switch_period=float(dnn_raw.get("switch_period", 2.0)),
        cyclic=bool(dnn_raw.get("cyclic", True)),
    )
    init_range = _pair(dnn_raw.get("init_range", [-10.5, 10.5]), "dnn.init_range")
    ideal_range = _pair(dnn_raw.get("ideal_range", [-1.0, 1.0]), "dnn.ideal_range")
    global_barrier_arg = bool(dnn_raw.get("global_barrier_arg", False))

    # --- controller ---
    ctrl_raw = _as_section(raw, "controller")
    gains = ControllerGains(
        gamma1=float(_require(ctrl_raw, "gamma1", "controller")),
        gamma2=float(_require(ctrl_raw, "gamma2", "controller")),
        sgn_boundary_layer=float(ctrl_raw.get("boundary_layer", 0.0)),
    )

    # --- plant models ---
    agents_raw = raw.get("agents")
    if not isinstance(agents_raw, list) or len(agents_raw) != n:
        raise ValidationError(
            "plant.agent_count", f"agents must list exactly {n} entries (one per follower)"
        )
    followers = []
    for i, entry in enumerate(agents_raw):
        if not isinstance(entry, dict):
            raise ValidationError("plant.agent_entry", f"agents[{i}] must be a mapping")
        init = np.array(_require(entry, "init", f"agents[{i}]"), dtype=float)
        if init.size != order:
            raise ValidationError(
                "plant.init_length", f"agents[{i}].init needs {order} values, got {init.size}"
            )
        kind = str(entry.get("disturbance", "none"))
        if kind not in DISTURBANCE_KINDS:
            raise ValidationError(
                "plant.known_disturbance", f"agents[{i}].disturbance {kind!r} not in {DISTURBANCE_KINDS}"
            )
        f_src = entry.get("f")
        if f_src is None:
            if mode != "synthetic_truth":
                raise ValidationError(
                    "plant.f_required", f"agents[{i}].f is required outside synthetic_truth mode"
                )
            f_expr = None
        else:
            f_expr = parse_dynamics(str(f_src), order)
        followers.append(FollowerModel(f=f_expr, init=init, disturbance_kind=kind))

    leader_raw = _as_section(raw, "leader")
    leader_init = np.array(_require(leader_raw, "init", "leader"), dtype=float)
    if leader_init.size != order:
        raise ValidationError("plant.leader_init_length", f"leader.init needs {order} values")
    leader = LeaderModel(
        order=order,
        f0=parse_dynamics(str(_require(leader_raw, "f0", "leader")), order),
        init=leader_init,
    )

    dist_raw = raw.get("disturbance") or {}
    dist_range = _pair(dist_raw.get("range", [0.0, 0.0]), "disturbance.range")

    integ_raw = raw.get("integrator") or {}
    integrator = IntegratorConfig(
        method=str(integ_raw.get("method", "rk4")),
        dt=float(integ_raw.get("dt", 1e-3)),
        t_final=float(integ_raw.get("t_final", 20.0)),
        decimation=int(integ_raw.get("decimation", 10)),
    )

    monitor_raw = raw.get("monitor") or {}
    chatter_band = monitor_raw.get("chatter_band")
    chatter_band = None if chatter_band is None else float(chatter_band)

    bounds_raw = raw.get("bounds")
    if bounds_raw is not None and not isinstance(bounds_raw, dict):
        raise ValidationError("bounds.section", "bounds must be a mapping of named estimates")

    source = _normalize(
        name=name, seed=seed, mode=mode, topology=topology, sliding_raw=sliding_raw,
        alpha=alpha, bar=bar, widths=widths, arch=arch, adapt=adapt,
        init_range=init_range, ideal_range=ideal_range, global_barrier_arg=global_barrier_arg,
        gains=gains, followers=followers, leader=leader, dist_range=dist_range,
        integrator=integrator, chatter_band=chatter_band, bounds=bounds_raw,
    )
    return ScenarioConfig(
        name=name, seed=seed, mode=mode, topology=topology, design=design, barrier=bar,
        arch=arch, adapt=adapt, init_range=init_range, ideal_range=ideal_range,
        global_barrier_arg=global_barrier_arg, gains=gains, followers=followers,
        leader=leader, dist_range=dist_range, integrator=integrator,
        chatter_band=chatter_band, declared_bounds=bounds_raw, source=source,
    )


def _normalize(**kw) -> dict:
    """Materialize the fully-defaulted primitive form used for echo and equality."""
    topology: DirectedTopology = kw["topology"]
    adapt: AdaptationConfig = kw["adapt"]
    followers = kw["followers"]
    leader: LeaderModel = kw["leader"]
    gains: ControllerGains = kw["gains"]
    integrator: IntegratorConfig = kw["integrator"]
    out = {
        "name": kw["name"],
        "seed": kw["seed"],
        "mode": kw["mode"],
        "topology": {
            "adjacency": topology.adjacency.tolist(),
            "pinning": topology.pinning.tolist(),
        },
        "sliding": (
            {"roots": [float(v) for v in kw["sliding_raw"]["roots"]], "alpha": kw["alpha"]}
            if kw["sliding_raw"].get("roots") is not None
            else {"lambda": [float(v) for v in kw["sliding_raw"]["lambda"]], "alpha": kw["alpha"]}
        ),
        "barrier": {"mu": kw["bar"].mu, "form": kw["bar"].form},
        "dnn": {
            "widths": list(kw["widths"]),
            "inner_activation": kw["arch"].inner_activation,
            "output_activation": kw["arch"].output_activation,
            "k_w": adapt.k_w.tolist(),
            "k_v": [v.tolist() for v in adapt.k_v],
            "v_lower": adapt.v_lower.tolist(),
            "v_upper": adapt.v_upper.tolist(),
            "switch_period": adapt.switch_period,
            "cyclic": adapt.cyclic,
            "init_range": list(kw["init_range"]),
            "ideal_range": list(kw["ideal_range"]),
            "global_barrier_arg": kw["global_barrier_arg"],
        },
        "controller": {
            "gamma1": gains.gamma1,
            "gamma2": gains.gamma2,
            "boundary_layer": gains.sgn_boundary_layer,
        },
        "agents": [
            {
                "f": None if f.f is None else f.f.source,
                "init": f.init.tolist(),
                "disturbance": f.disturbance_kind,
            }
            for f in followers
        ],
        "leader": {"f0": leader.f0.source, "init": leader.init.tolist()},
        "disturbance": {"range": list(kw["dist_range"])},
        "integrator": {
            "method": integrator.method,
            "dt": integrator.dt,
            "t_final": integrator.t_final,
            "decimation": integrator.decimation,
        },
        "monitor": {"chatter_band": kw["chatter_band"]},
    }
    if kw["bounds"] is not None:
        out["bounds"] = copy.deepcopy(kw["bounds"])
    return out


def load_bounds(path) -> BoundEstimates:
    """Read a bound-estimates file (YAML mapping of the seven named values)."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read bounds file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in bounds file {path}: {exc}") from exc
    return bounds_from_dict(raw)


def bounds_from_dict(raw) -> BoundEstimates:
    from .errors import MissingBound

    if not isinstance(raw, dict):
        raise MissingBound("bounds must be a mapping of named estimates")
    names = ("w_m", "v_m", "rho_m", "rho_hat_m", "eps_m", "omega_m", "f_m")
    missing = [n for n in names if n not in raw or raw[n] is None]
    if missing:
        raise MissingBound(f"missing bound estimates: {missing}")
    return BoundEstimates(**{n: float(raw[n]) for n in names})
