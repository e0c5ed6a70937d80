"""Trace serialization (CSV), run summaries (JSON), and SVG plot panels."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import IoError, ParseError
from .sim import MonitorReport, ScenarioConfig, TraceRecord


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def trace_columns(n: int, m: int, n_layers: int, with_full: bool) -> list[str]:
    cols = ["t"]
    cols += [f"x_{i + 1}_{mm + 1}" for i in range(n) for mm in range(m)]
    cols += [f"x0_{mm + 1}" for mm in range(m)]
    cols += [f"e_norm_{mm + 1}" for mm in range(m)]
    cols += [f"r_{i + 1}" for i in range(n)]
    cols += ["r_norm_P"]
    cols += [f"u_{i + 1}" for i in range(n)]
    cols += [f"W_norm_{i + 1}" for i in range(n)]
    cols += [f"V_norm_{i + 1}_{j}" for i in range(n) for j in range(n_layers)]
    cols += ["active_layer", "V_obs"]
    if with_full:
        cols.append("V_full")
    return cols


def write_trace_csv(trace: list[TraceRecord], path, g=None) -> Path:
    """Write the decimated trace; one header row names every column.

    A leading comment line records the drawn disturbance amplitudes so the
    file is self-describing; readers should skip lines starting with '#'.
    """
    path = Path(path)
    lines = []
    if g is not None:
        amp = ", ".join(_fmt(float(v)) for v in np.asarray(g).ravel())
        lines.append(f"# disturbance_amplitudes: [{amp}]")
    if trace:
        first = trace[0]
        n, m = first.x.shape
        n_layers = first.v_norms.shape[1]
        with_full = first.v_full is not None
    else:
        n = m = n_layers = 0
        with_full = False
    lines.append(",".join(trace_columns(n, m, n_layers, with_full)))
    for rec in trace:
        row = [rec.t]
        row += list(rec.x.ravel())
        row += list(rec.x0)
        row += list(rec.e_norms)
        row += list(rec.r)
        row.append(rec.r_norm_p)
        row += list(rec.u)
        row += list(rec.w_norms)
        row += list(rec.v_norms.ravel())
        fields = [_fmt(float(v)) for v in row]
        fields.append(str(rec.active_layer))
        fields.append(_fmt(rec.v_obs))
        if rec.v_full is not None:
            fields.append(_fmt(rec.v_full))
        lines.append(",".join(fields))
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write trace CSV {path}: {exc}") from exc
    return path


def write_summary_json(
    report: MonitorReport | None,
    cfg: ScenarioConfig,
    path,
    g=None,
    abort: dict | None = None,
) -> Path:
    path = Path(path)
    payload = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "disturbance_amplitudes": None if g is None else [float(v) for v in np.asarray(g).ravel()],
        "report": None if report is None else report.to_dict(),
        "abort": abort,
        "notes": {
            "corrective_signal": "computed centrally; needs the global (L+B)^{-1} A term, "
            "not locally implementable",
        },
    }
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write summary JSON {path}: {exc}") from exc
    return path


# --- plotting ----------------------------------------------------------------

_STATE_PANEL_TITLES = {1: "positions", 2: "velocities", 3: "accelerations"}


def _panel_title(m_index: int) -> str:
    return _STATE_PANEL_TITLES.get(m_index, f"state x^{m_index}")


def write_svg_panels(
    trace: list[TraceRecord], outdir, mu: float | None = None
) -> list[Path]:
    """State/sliding/weight-norm panels, one SVG each."""
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    if not trace:
        return []
    t = np.array([rec.t for rec in trace])
    n, m = trace[0].x.shape
    n_layers = trace[0].v_norms.shape[1]
    x = np.array([rec.x for rec in trace])         # T x N x M
    x0 = np.array([rec.x0 for rec in trace])       # T x M
    r_norm = np.array([rec.r_norm_p for rec in trace])
    w_norms = np.array([rec.w_norms for rec in trace])
    v_norms = np.array([rec.v_norms for rec in trace])  # T x N x layers

    paths = []

    def save(fig, name):
        target = outdir / name
        try:
            fig.savefig(target, format="svg")
        except OSError as exc:
            raise IoError(f"cannot write plot {target}: {exc}") from exc
        plt.close(fig)
        paths.append(target)

    for mm in range(m):
        fig, ax = plt.subplots(figsize=(7, 4))
        for i in range(n):
            ax.plot(t, x[:, i, mm], label=f"follower {i + 1}")
        ax.plot(t, x0[:, mm], "k--", label="leader")
        ax.set_xlabel("t")
        ax.set_ylabel(f"x^{mm + 1}")
        ax.set_title(_panel_title(mm + 1))
        ax.legend(loc="best", fontsize=8)
        save(fig, f"x{mm + 1}.svg")

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t, r_norm, label="||r||_P")
    if mu is not None:
        ax.axhline(mu, color="r", linestyle="--", label="mu")
    ax.set_xlabel("t")
    ax.set_ylabel("||r||_P")
    ax.set_title("weighted sliding norm")
    ax.legend(loc="best", fontsize=8)
    save(fig, "sliding_norm.svg")

    fig, ax = plt.subplots(figsize=(7, 4))
    for i in range(n):
        ax.plot(t, w_norms[:, i], label=f"||W_{i + 1}||")
    ax.set_xlabel("t")
    ax.set_ylabel("outer weight norm")
    ax.set_title("outer-layer weight norms")
    ax.legend(loc="best", fontsize=8)
    save(fig, "outer_weight_norms.svg")

    fig, ax = plt.subplots(figsize=(7, 4))
    for j in range(n_layers):
        ax.plot(t, v_norms[:, 0, j], label=f"||V_1,{j}||_F")
    ax.set_xlabel("t")
    ax.set_ylabel("inner weight norm (follower 1)")
    ax.set_title("inner-layer weight norms")
    ax.legend(loc="best", fontsize=8)
    save(fig, "inner_weight_norms.svg")

    return paths


def emit_outputs(
    trace: list[TraceRecord],
    report: MonitorReport | None,
    outdir,
    formats=("csv", "json"),
    cfg: ScenarioConfig | None = None,
    g=None,
    abort: dict | None = None,
) -> list[Path]:
    """Write CSV + JSON (always) and SVG panels when requested."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {outdir}: {exc}") from exc
    produced = [write_trace_csv(trace, outdir / "trace.csv", g=g)]
    if cfg is not None:
        produced.append(write_summary_json(report, cfg, outdir / "summary.json", g=g, abort=abort))
    if "svg" in formats:
        mu = cfg.barrier.mu if cfg is not None else None
        produced.extend(write_svg_panels(trace, outdir, mu=mu))
    return produced


# --- reading traces back (plot subcommand) -----------------------------------

def read_trace_csv(path) -> dict[str, np.ndarray]:
    """Columns of a trace CSV keyed by header name; comment lines skipped."""
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    except OSError as exc:
        raise ParseError(f"cannot read trace CSV {path}: {exc}") from exc
    if not lines:
        raise ParseError(f"trace CSV {path} is empty")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    if any(len(row) != len(header) for row in rows):
        raise ParseError(f"trace CSV {path} has ragged rows")
    data = np.array([[float(v) for v in row] for row in rows]) if rows else np.zeros((0, len(header)))
    return {name: data[:, idx] for idx, name in enumerate(header)}


def plot_from_csv(path, outdir, mu: float | None = None) -> list[Path]:
    """Rebuild the SVG panels from a previously written trace CSV."""
    cols = read_trace_csv(path)
    names = list(cols)
    n = sum(1 for name in names if name.startswith("r_") and name != "r_norm_P")
    m = sum(1 for name in names if name.startswith("x0_"))
    n_layers = sum(1 for name in names if name.startswith("V_norm_1_"))
    n_rows = cols["t"].size
    trace = []
    for idx in range(n_rows):
        x = np.array([[cols[f"x_{i + 1}_{mm + 1}"][idx] for mm in range(m)] for i in range(n)])
        x0 = np.array([cols[f"x0_{mm + 1}"][idx] for mm in range(m)])
        rec = TraceRecord(
            t=float(cols["t"][idx]),
            x=x,
            x0=x0,
            e_norms=np.array([cols[f"e_norm_{mm + 1}"][idx] for mm in range(m)]),
            r=np.array([cols[f"r_{i + 1}"][idx] for i in range(n)]),
            r_norm_p=float(cols["r_norm_P"][idx]),
            u=np.array([cols[f"u_{i + 1}"][idx] for i in range(n)]),
            w_norms=np.array([cols[f"W_norm_{i + 1}"][idx] for i in range(n)]),
            v_norms=np.array(
                [[cols[f"V_norm_{i + 1}_{j}"][idx] for j in range(n_layers)] for i in range(n)]
            ),
            active_layer=int(cols["active_layer"][idx]),
            v_obs=float(cols["V_obs"][idx]),
            v_full=float(cols["V_full"][idx]) if "V_full" in cols else None,
        )
        trace.append(rec)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return write_svg_panels(trace, outdir, mu=mu)
