"""Experiment configuration: TOML parsing, defaults and validation."""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from agpkit.spinchain import GOLDEN_RATIO

EXPERIMENTS = ("fig2a", "fig2b", "fig3b", "sm-poly", "sm-laplace", "sm-schedules", "custom")
WORKERS_ENV = "AGPKIT_WORKERS"

_EVEN = list(range(2, 15, 2))

# Per-experiment defaults. Every key ends up in the run manifest.
DEFAULTS: dict[str, dict[str, Any]] = {
    "fig2a": {
        "model": {"L": 6, "J": -1.0},
        "cases": ["nonintegrable", "integrable"],
        "methods": ["universal", "variational"],
        "d": _EVEN,
        "omega_max": "big-omega",
        "scan_points": 16,
        "grid_points": 101,
        "tolerance": 1e-10,
    },
    "fig2b": {
        "model": {"J": -1.0},
        "L": [4, 5, 6, 7, 8, 9],
        "d": [14],
        "omega_max": "big-omega",
        "grid_points": 101,
        "tolerance": 1e-10,
    },
    "fig3b": {
        "model": {"L": 6, "J": -1.0},
        "methods": ["bare", "variational", "universal-opt"],
        "d": [1, 2, 4],
        "tau": [0.1, 0.3, 1.0, 3.0, 10.0],
        "schedule": "sin2",
        "scan_points": 10,
        "grid_points": 101,
        "tolerance": 1e-10,
    },
    "sm-poly": {"delta": 0.1, "omega_max": 1.0, "d": list(range(1, 26)), "grid_points": 2000},
    "sm-laplace": {"gamma": 1.0, "delta": [0.02, 0.05, 0.1, 0.2], "d_max": 250, "fit_d_min": 20},
    "sm-schedules": {
        "schedules": ["linear", "sin2", "conv:1", "conv:2", "conv:3", "conv:4"],
        "tau": 1.0,
        "omega": {"start": 1.0, "stop": 1000.0, "num": 61, "spacing": "log"},
    },
    "custom": {
        "model": {"L": 4, "J": -1.0},
        "methods": ["universal"],
        "d": [2, 4],
        "tau": [0.0],
        "schedule": "sin2",
        "omega_max": "big-omega",
        "scan_points": 10,
        "grid_points": 101,
        "tolerance": 1e-10,
    },
}

MODEL_DEFAULTS = {"J": -1.0, "h_z": "golden", "h_x_start": None, "h_x_end": None, "sector": "full"}
METHODS = {"universal", "universal-opt", "omega-scan", "variational", "exact", "bare"}


class ConfigError(ValueError):
    pass


@dataclass
class Diagnostic:
    level: str  # "error" | "warning"
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.message}"


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict[str, Any]
    out: str = "agpkit-out"
    workers: int = 1
    svg: bool = False
    source: str | None = None
    notes: list[str] = field(default_factory=list)

    def resolved(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment,
            "out": self.out,
            "workers": self.workers,
            "svg": self.svg,
            "params": self.params,
        }


def _expand_range(value, key: str):
    # accept a list or {start, stop, step} / {start, stop, num, spacing}
    if isinstance(value, list):
        return value
    if isinstance(value, dict):
        if "step" in value:
            start, stop, step = value["start"], value["stop"], value["step"]
            out, cur = [], start
            while (step > 0 and cur <= stop) or (step < 0 and cur >= stop):
                out.append(cur)
                cur += step
            return out
        if "num" in value:
            import numpy as np

            space = np.geomspace if value.get("spacing", "linear") == "log" else np.linspace
            return [float(v) for v in space(value["start"], value["stop"], int(value["num"]))]
        raise ConfigError(f"range for {key!r} needs 'step' or 'num'")
    return [value]


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from exc


def resolve_model(model: dict[str, Any], case: str | None = None) -> dict[str, Any]:
    """Fill model defaults; ``case`` overrides h_z and sector for the integrable and nonintegrable pair."""
    out = dict(MODEL_DEFAULTS)
    out.update(model)
    J = float(out["J"])
    if case == "integrable":
        out["h_z"], out["sector"] = 0.0, "positive-parity"
    elif case == "nonintegrable":
        out["h_z"], out["sector"] = "golden", "full"
    if out["h_z"] == "golden":
        out["h_z"] = abs(J) / GOLDEN_RATIO
    out["h_z"] = float(out["h_z"])
    out["h_x_start"] = 0.5 * abs(J) if out["h_x_start"] is None else float(out["h_x_start"])
    out["h_x_end"] = 2.5 * abs(J) if out["h_x_end"] is None else float(out["h_x_end"])
    out["J"] = J
    return out


def from_dict(raw: dict[str, Any], source: str | None = None) -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    exp = raw.pop("experiment", None)
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; expected one of {', '.join(EXPERIMENTS)}")
    output = raw.pop("output", {})
    workers = raw.pop("workers", None)
    params = copy.deepcopy(DEFAULTS[exp])
    for key, value in raw.items():
        if key == "model" and isinstance(value, dict):
            params.setdefault("model", {}).update(value)
        else:
            params[key] = value
    scalar = {"sm-poly": ("delta",), "sm-schedules": ("tau",)}.get(exp, ())
    for key in ("d", "tau", "L", "delta", "omega"):
        if key in params and key not in scalar:
            params[key] = _expand_range(params[key], key)
    if "model" in params:
        params["model"] = resolve_model(params["model"])
    return ExperimentConfig(
        experiment=exp,
        params=params,
        out=str(output.get("dir", "agpkit-out")),
        workers=int(workers) if workers is not None else default_workers(),
        svg=bool(output.get("svg", False)),
        source=source,
    )


def load(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(raw, source=str(path))


def validate(cfg: ExperimentConfig) -> list[Diagnostic]:
    """Report unsatisfiable or suspicious settings without raising."""
    diags: list[Diagnostic] = []
    p = cfg.params
    err = lambda m: diags.append(Diagnostic("error", m))  # noqa: E731
    warn = lambda m: diags.append(Diagnostic("warning", m))  # noqa: E731

    if cfg.workers < 1:
        err("workers must be >= 1")
    if "d" in p:
        if not p["d"]:
            err("empty d range")
        elif any(int(d) != d or d < 1 for d in p["d"]):
            err("every d must be a positive integer")
    if "methods" in p:
        bad = set(p["methods"]) - METHODS
        if bad:
            err(f"unknown methods {sorted(bad)}")
        if not p["methods"]:
            err("empty method list")
    model = p.get("model")
    if model is not None:
        if model["sector"] not in ("full", "positive-parity"):
            err(f"unknown sector {model['sector']!r}")
        if model["sector"] == "positive-parity" and model["h_z"] != 0:
            err("positive-parity sector requires h_z = 0 (the longitudinal field breaks spin-flip parity)")
        if model["J"] == 0:
            err("J must be nonzero")
        Ls = p.get("L", [model.get("L")])
        if any(L is None or L < 1 for L in Ls):
            err("chain length L must be a positive integer")
        elif max(Ls) > 12:
            warn(f"L = {max(Ls)} is beyond dense diagonalization reach at desk scale")
    if "tau" in p and cfg.experiment != "sm-schedules":
        if not p["tau"]:
            err("empty tau list")
        if any(t < 0 for t in p["tau"]):
            err("tau must be >= 0 (0 selects the sudden limit)")
    if "schedule" in p:
        from agpkit.schedules import Schedule

        try:
            Schedule.parse(p["schedule"], 1.0)
        except ValueError as exc:
            err(str(exc))
    om = p.get("omega_max")
    if cfg.experiment in ("fig2a", "fig2b", "custom") and om is not None:
        if isinstance(om, (int, float)) or isinstance(om, list):
            diags.extend(_check_fixed_omega(cfg, om))
        elif om not in ("big-omega", "scan"):
            err(f"omega_max policy must be 'big-omega', 'scan' or numbers, got {om!r}")
    if cfg.experiment == "sm-poly":
        if not 0 < p["delta"] < p["omega_max"]:
            err("sm-poly needs 0 < delta < omega_max")
    if cfg.experiment == "sm-laplace":
        if p["gamma"] <= 0:
            err("gamma must be positive")
        if any(dl <= 0 for dl in p["delta"]):
            err("every delta must be positive")
        if p["d_max"] < 1:
            err("d_max must be >= 1")
    if cfg.experiment == "sm-schedules":
        from agpkit.schedules import Schedule

        for s in p["schedules"]:
            try:
                Schedule.parse(s, 1.0)
            except ValueError as exc:
                err(str(exc))
    return diags


def _check_fixed_omega(cfg: ExperimentConfig, om) -> list[Diagnostic]:
    # fixed cutoffs are compared against the spectrum they will be used with
    from agpkit.spinchain import ChainModel, IsingParams, spectrum_profile

    values = om if isinstance(om, list) else [om]
    model = cfg.params["model"]
    out = []
    try:
        params = IsingParams(
            L=int(model["L"]), J=model["J"], h_z=model["h_z"], h_x_start=model["h_x_start"], h_x_end=model["h_x_end"]
        )
        prof = spectrum_profile(ChainModel(params, model["sector"]), int(cfg.params.get("grid_points", 101)))
    except Exception as exc:  # report rather than raise
        return [Diagnostic("error", f"cannot build the model to check omega_max: {exc}")]
    lo, hi = prof.delta_coupled, prof.omega_coupled
    for w in values:
        if w <= lo:
            out.append(Diagnostic("error", f"omega_max={w} <= delta={lo:.6g}: empty approximation interval"))
        elif w > hi:
            out.append(Diagnostic("warning", f"omega_max={w} > Omega={hi:.6g}; it will be clipped to Omega"))
    return out
