"""Command-line entry point.

Exit codes: 0 success, 2 validation/parse failure, 3 barrier breach
(including a refused initial condition), 4 gain-certificate failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import config as config_mod
from . import output as output_mod
from .controller import gain_certificate
from .dnn import check_v_bound, psi_constant
from .errors import (
    BarrierBreach,
    ConfigError,
    InitialBarrierViolation,
    NotHurwitz,
    SimlabError,
)
from .graph import build_matrices
from .sim import RunContext, run
from .sliding import SlidingDesign, is_hurwitz

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BARRIER = 3
EXIT_CERTIFICATE = 4

# known sweep axes -> dotted config path
SWEEP_AXES = {
    "gamma1": ("controller", "gamma1"),
    "gamma2": ("controller", "gamma2"),
    "seed": ("seed",),
    "dt": ("integrator", "dt"),
    "t_final": ("integrator", "t_final"),
    "mu": ("barrier", "mu"),
    "alpha": ("sliding", "alpha"),
}


def _default_out_root() -> Path:
    return Path(os.environ.get("SIMLAB_OUT", "."))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a scenario and emit outputs")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--out", type=Path, default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--format", default="csv,json", help="comma list from csv,json,svg")

    p_check = sub.add_parser("check", help="report the sliding-surface design health")
    p_check.add_argument("config", type=Path)

    p_gains = sub.add_parser("check-gains", help="evaluate the gain certificate")
    p_gains.add_argument("config", type=Path)
    p_gains.add_argument("--bounds", type=Path, required=True, help="YAML file of bound estimates")

    p_info = sub.add_parser("graph-info", help="print the topology matrix summary as JSON")
    p_info.add_argument("config", type=Path)

    p_sweep = sub.add_parser("sweep", help="run a scenario across one parameter axis")
    p_sweep.add_argument("config", type=Path)
    p_sweep.add_argument("--axis", required=True, help="e.g. gamma1=100,300,500")
    p_sweep.add_argument("--out", type=Path, default=None)
    p_sweep.add_argument("--format", default="csv,json")
    p_sweep.add_argument("--jobs", type=int, default=None)

    p_plot = sub.add_parser("plot", help="rebuild SVG panels from a trace CSV")
    p_plot.add_argument("trace", type=Path)
    p_plot.add_argument("--out", type=Path, default=None)
    p_plot.add_argument("--mu", type=float, default=None, help="draw the barrier bound line")

    return parser


def _load_with_seed(path: Path, seed: int | None):
    cfg = config_mod.load_config(path)
    if seed is not None:
        raw = cfg.to_dict()
        raw["seed"] = int(seed)
        cfg = config_mod.load_config_dict(raw, name_hint=cfg.name)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_with_seed(args.config, args.seed)
    formats = tuple(part.strip() for part in args.format.split(",") if part.strip())
    outdir = args.out if args.out is not None else _default_out_root() / cfg.name
    ctx = RunContext(cfg)
    try:
        trace, report = run(cfg)
    except InitialBarrierViolation as exc:
        output_mod.emit_outputs([], None, outdir, formats, cfg=cfg, g=ctx.g,
                                abort={"reason": "initial_barrier_violation", "detail": str(exc)})
        print(str(exc), file=sys.stderr)
        return EXIT_BARRIER
    except BarrierBreach as exc:
        output_mod.emit_outputs(exc.trace, None, outdir, formats, cfg=cfg, g=ctx.g,
                                abort={"reason": "barrier_breach", "t": exc.t,
                                       "r_norm_P": exc.norm, "mu": exc.mu})
        print(str(exc), file=sys.stderr)
        return EXIT_BARRIER
    paths = output_mod.emit_outputs(trace, report, outdir, formats, cfg=cfg, g=ctx.g)
    print(json.dumps({"outputs": [str(p) for p in paths], "report": report.to_dict()}, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_check(args) -> int:
    try:
        raw = yaml.safe_load(Path(args.config).read_text())
    except (OSError, yaml.YAMLError) as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    sliding_raw = (raw or {}).get("sliding") or {}
    alpha = float(sliding_raw.get("alpha", 1.0))
    if sliding_raw.get("roots") is not None:
        from .sliding import lambdas_from_roots

        lam = lambdas_from_roots(np.array(sliding_raw["roots"], dtype=float))
    else:
        lam = np.array(sliding_raw.get("lambda", []), dtype=float)
    result = {
        "lambda": lam.tolist(),
        "alpha": alpha,
        "hurwitz": bool(lam.size) and is_hurwitz(lam),
        "lambda_sum": float(lam.sum()),
        "containment_precondition_ok": float(lam.sum()) > 1.0,
        "p1": None,
    }
    if result["hurwitz"]:
        design = SlidingDesign.from_lambda(lam, alpha)
        result["p1"] = design.p1.tolist()
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK if result["hurwitz"] else EXIT_VALIDATION


def _cmd_check_gains(args) -> int:
    cfg = config_mod.load_config(args.config)
    bounds = config_mod.load_bounds(args.bounds)
    gm = build_matrices(cfg.topology)
    vb = check_v_bound(cfg.adapt, cfg.barrier)
    cert = gain_certificate(
        gm, cfg.design, bounds, k=cfg.arch.inner_layers, psi_mu=vb.psi, gains=cfg.gains
    )
    print(json.dumps(cert.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK if cert.verdict else EXIT_CERTIFICATE


def _cmd_graph_info(args) -> int:
    cfg = config_mod.load_config(args.config)
    gm = build_matrices(cfg.topology)
    p_eigs = np.linalg.eigvalsh(gm.p_matrix)
    q_eigs = np.linalg.eigvalsh(gm.q_matrix)
    info = {
        "n_followers": cfg.n_followers,
        "q": gm.q.tolist(),
        "p_eigenvalues": {"min": float(p_eigs[0]), "max": float(p_eigs[-1])},
        "q_eigenvalues": {"min": float(q_eigs[0]), "max": float(q_eigs[-1])},
        "singular_values": gm.sv_summary.to_dict(),
    }
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


def _parse_axis(axis: str):
    if "=" not in axis:
        raise ConfigError(f"axis must look like name=v1,v2,... got {axis!r}")
    name, _, values = axis.partition("=")
    name = name.strip()
    if name not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {name!r}; choices: {sorted(SWEEP_AXES)}")
    parts = [v.strip() for v in values.split(",") if v.strip()]
    if not parts:
        raise ConfigError("sweep axis needs at least one value")
    cast = int if name == "seed" else float
    return name, [cast(v) for v in parts]


def _cmd_sweep(args) -> int:
    base = config_mod.load_config(args.config)
    name, values = _parse_axis(args.axis)
    formats = tuple(part.strip() for part in args.format.split(",") if part.strip())
    outdir = args.out if args.out is not None else _default_out_root() / f"{base.name}_sweep"
    path_keys = SWEEP_AXES[name]

    configs = []
    for value in values:
        raw = base.to_dict()
        node = raw
        for key in path_keys[:-1]:
            node = node[key]
        node[path_keys[-1]] = value
        configs.append((value, config_mod.load_config_dict(raw, name_hint=base.name)))

    def one(item):
        value, cfg = item
        sub = outdir / f"{name}={value:g}" if isinstance(value, float) else outdir / f"{name}={value}"
        ctx = RunContext(cfg)
        try:
            trace, report = run(cfg)
        except BarrierBreach as exc:
            output_mod.emit_outputs(exc.trace, None, sub, formats, cfg=cfg, g=ctx.g,
                                    abort={"reason": "barrier_breach", "t": exc.t,
                                           "r_norm_P": exc.norm, "mu": exc.mu})
            return {"value": value, "status": "barrier_breach", "out": str(sub)}
        except InitialBarrierViolation as exc:
            output_mod.emit_outputs([], None, sub, formats, cfg=cfg, g=ctx.g,
                                    abort={"reason": "initial_barrier_violation", "detail": str(exc)})
            return {"value": value, "status": "initial_barrier_violation", "out": str(sub)}
        output_mod.emit_outputs(trace, report, sub, formats, cfg=cfg, g=ctx.g)
        return {"value": value, "status": "ok", "out": str(sub),
                "max_r_norm_P": report.max_r_norm_p}

    jobs = args.jobs or min(len(configs), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(one, configs))
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "sweep.json").write_text(json.dumps({"axis": name, "runs": results}, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"axis": name, "runs": results}, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_plot(args) -> int:
    outdir = args.out if args.out is not None else _default_out_root() / "panels"
    paths = output_mod.plot_from_csv(args.trace, outdir, mu=args.mu)
    print(json.dumps({"outputs": [str(p) for p in paths]}, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "check": _cmd_check,
        "check-gains": _cmd_check_gains,
        "graph-info": _cmd_graph_info,
        "sweep": _cmd_sweep,
        "plot": _cmd_plot,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except (BarrierBreach, InitialBarrierViolation) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_BARRIER
    except NotHurwitz as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except SimlabError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
