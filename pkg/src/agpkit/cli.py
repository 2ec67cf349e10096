"""Command line driver: ``agpkit run | validate | plot``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from agpkit import __version__
from agpkit.config import ConfigError, ExperimentConfig, default_workers, load, validate
from agpkit.experiments import REGISTRY, evaluate_point

log = logging.getLogger("agpkit")

CSV_SCHEMA_VERSION = 1


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([format_value(r.get(c, "")) for c in columns])
    return buf.getvalue()


def compute_rows(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """Evaluate every sweep point; output order follows the point list."""
    exp = REGISTRY[cfg.experiment]
    points = exp.points(cfg)
    tasks = [(cfg.experiment, pt) for pt in points]
    workers = cfg.workers if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(evaluate_point, tasks))
    else:
        chunks = [evaluate_point(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    return exp.finalize(cfg, rows)


def run(cfg: ExperimentConfig, out: Path | None = None, workers: int | None = None) -> Path:
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    exp = REGISTRY[cfg.experiment]
    rows = compute_rows(cfg, workers)
    text = render_csv(exp.columns, rows)
    csv_path = out / f"{cfg.experiment}.csv"
    csv_path.write_text(text)
    manifest = {
        "agpkit_version": __version__,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "config_source": cfg.source,
        "resolved": dict(cfg.resolved(), out=str(out), workers=workers or cfg.workers),
        "columns": list(exp.columns),
        "rows": len(rows),
        "csv_sha256": hashlib.sha256(text.encode()).hexdigest(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    if cfg.svg:
        plot(csv_path, cfg.experiment)
    return csv_path


def plot(csv_path: Path, experiment: str) -> Path:
    """Convenience SVG of a result CSV; the CSV remains the contract."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed salt keeps generated element ids, and so the file, reproducible
    matplotlib.rcParams["svg.hashsalt"] = "agpkit"

    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    specs = {
        "fig2a": ("d", "infidelity", ("h_z_case", "method"), True, False),
        "fig2b": ("omega_over_delta", "infidelity", ("d",), True, False),
        "fig3b": ("tau", "infidelity", ("method", "d"), True, True),
        "custom": ("tau", "infidelity", ("method", "d"), True, False),
        "sm-poly": ("d", "sup_error", (), True, False),
        "sm-laplace": ("d", "rescaled", ("delta",), False, False),
        "sm-schedules": ("omega", "fourier_magnitude", ("schedule",), True, True),
    }
    if experiment not in specs:
        raise ConfigError(f"no plot spec for {experiment!r}")
    xk, yk, group, logy, logx = specs[experiment]
    fig, ax = plt.subplots(figsize=(5, 3.6))
    keys = sorted({tuple(r[g] for g in group) for r in rows})
    for key in keys:
        sel = [r for r in rows if tuple(r[g] for g in group) == key]
        xs = [float(r[xk]) for r in sel]
        ys = [float(r[yk]) for r in sel]
        ax.plot(xs, ys, marker="o", ms=3, label=" ".join(key) or None)
    if logy:
        ax.set_yscale("log")
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xk)
    ax.set_ylabel(yk)
    if group:
        ax.legend(fontsize=7)
    fig.tight_layout()
    svg = Path(csv_path).with_suffix(".svg")
    fig.savefig(svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return svg


def _error_record(out: Path, exc: BaseException) -> None:
    out.mkdir(parents=True, exist_ok=True)
    rec = {"error": type(exc).__name__, "message": str(exc), "traceback": traceback.format_exc()}
    (out / "error.json").write_text(json.dumps(rec, indent=2) + "\n")
    print(json.dumps({"error": rec["error"], "message": rec["message"]}), file=sys.stderr)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="agpkit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--workers", type=int, default=None, help="worker processes (default: config, then $AGPKIT_WORKERS)")
    p_run.add_argument("--out", default=None, help="output directory")
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")
    p_plot = sub.add_parser("plot", help="render an SVG from a result CSV")
    p_plot.add_argument("csv")
    p_plot.add_argument("--spec", required=True, help="experiment name the CSV came from")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "plot":
        try:
            print(plot(Path(args.csv), args.spec))
        except (OSError, ConfigError, KeyError, ValueError) as exc:
            print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
            return 1
        return 0

    try:
        cfg = load(args.config)
    except (OSError, ConfigError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2

    diags = validate(cfg)
    if args.command == "validate":
        for d in diags:
            print(d)
        if not diags:
            print("ok")
        return 1 if any(d.level == "error" for d in diags) else 0

    for d in diags:
        log.warning(str(d))
    if any(d.level == "error" for d in diags):
        print(json.dumps({"error": "ConfigError", "diagnostics": [str(d) for d in diags]}), file=sys.stderr)
        return 2
    out = Path(args.out or cfg.out)
    workers = args.workers if args.workers is not None else cfg.workers or default_workers()
    try:
        path = run(cfg, out, workers)
    except Exception as exc:  # any module failure becomes an error record
        _error_record(out, exc)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
