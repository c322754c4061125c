"""Execute a :class:`~lgdecay.config.RunConfig` and render its output file.

With ``normalize = true`` every time the user supplies is read in units of
the effective lifetime tau, and time columns are written in those units
(the grid of requested values is echoed unchanged, never divided back).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import Prepared, RunConfig, prepare_model
from .correlators import joint_table, k3
from .decay_models import fit_exponential_regime
from .export import csv_text, json_text
from .mc_oracle import McOntology, estimate_k3, run_trials
from .scanner import scan_grid, scan_line

__all__ = ["RunOutput", "execute"]


@dataclass
class RunOutput:
    text: str
    format: str
    notes: list[str] = field(default_factory=list)


def _start(lo, hi, n):
    # first point one step above the lower bound, which is excluded
    return lo + (hi - lo) / n


def _survival(cfg, prep):
    p = cfg.params
    t = np.linspace(0.0, p["t_max"], p["samples"])
    values = np.asarray(prep.model.survival(t * prep.tau))
    rows = list(zip(t, values))
    return ["t", "p"], rows, {"t": t.tolist(), "p": values.tolist()}, None, []


def _k3(cfg, prep):
    p = cfg.params
    tau = prep.tau
    res = k3(prep.model, p["t1"] * tau, p["t2"] * tau, p["t3"] * tau, p["ontology"])
    cols = ["t1", "t2", "t3", "c12", "c23", "c13", "k3"]
    row = [p["t1"], p["t2"], p["t3"], res.c12, res.c23, res.c13, res.k3]
    return cols, [row], dict(zip(cols, row)), None, []


def _scan_line(cfg, prep):
    p = cfg.params
    t2_min = p["t2_min"] if p["t2_min"] is not None else _start(p["t1"], p["t2_max"], p["n_points"])
    tau = prep.tau
    line = scan_line(prep.model, p["t1"] * tau, p["ratio"], (t2_min * tau, p["t2_max"] * tau), p["n_points"])
    t2 = np.linspace(t2_min, p["t2_max"], p["n_points"])
    i_max, i_min = int(np.argmax(line.k3)), int(np.argmin(line.k3))
    extremes = {"max": {"t2": float(t2[i_max]), "value": float(line.k3[i_max])},
                "min": {"t2": float(t2[i_min]), "value": float(line.k3[i_min])}}
    return ["t2", "k3"], list(zip(t2, line.k3)), {"t2": t2.tolist(), "k3": line.k3.tolist()}, extremes, []


def _scan_grid(cfg, prep):
    p = cfg.params
    tau = prep.tau
    t2_min = p["t2_min"] if p["t2_min"] is not None else _start(p["t1"], p["t2_max"], p["n_t2"])
    t3_min = p["t3_min"] if p["t3_min"] is not None else t2_min
    t2 = np.linspace(t2_min, p["t2_max"], p["n_t2"])
    t3 = np.linspace(t3_min, p["t3_max"], p["n_t3"])
    grid = scan_grid(prep.model, p["t1"] * tau, t2 * tau, t3 * tau, workers=cfg.workers)
    rows = [(t2[i], t3[j], grid.values[i, j]) for i in range(len(t2)) for j in range(len(t3))
            if not np.isnan(grid.values[i, j])]

    def point(pt):
        if pt is None:
            return None
        i = int(np.searchsorted(grid.t2_axis, pt[0]))
        j = int(np.searchsorted(grid.t3_axis, pt[1]))
        return {"t2": float(t2[i]), "t3": float(t3[j]), "value": pt[2]}

    extremes = {"max": point(grid.max_point), "min": point(grid.min_point)}
    results = {"t1": p["t1"], "t2_axis": t2.tolist(), "t3_axis": t3.tolist(), "k3m1": grid.values.tolist(),
               "n_defined": int(grid.defined.sum())}
    return ["t2", "t3", "k3m1"], rows, results, extremes, grid.errors


def _mc(cfg, prep):
    p = cfg.params
    tau = prep.tau
    times = [t * tau for t in p["times"]]
    ontology = McOntology.parse(p["ontology"])
    analytic_rule = "classical" if ontology is McOntology.REALIST else "quantum"
    if p["estimate"] == "k3":
        est = estimate_k3(prep.model, *times, ontology, p["n_trials"], p["seed"], protocol=p["protocol"],
                          workers=cfg.workers)
        analytic = k3(prep.model, *times, analytic_rule).k3
        results = {"k3": est.as_dict(), "analytic": analytic}
    else:
        freqs = run_trials(prep.model, times, ontology, p["n_trials"], p["seed"], workers=cfg.workers)
        results = {"frequencies": {k: v.as_dict() for k, v in freqs.items()}}
        if len(times) == 2:
            tab = joint_table(prep.model, times[0], times[1], analytic_rule)
            results["analytic"] = {"UU": tab.uu, "UD": tab.ud, "DU": tab.du, "DD": tab.dd}
    return None, None, results, None, []


def _fit(cfg, prep):
    p = cfg.params
    window = (p["window"][0] * prep.tau, p["window"][1] * prep.tau)
    fit = fit_exponential_regime(prep.model, window=window, samples=p["samples"])
    results = {"Z": fit.Z, "gamma": fit.gamma * prep.tau, "lifetime": fit.lifetime / prep.tau,
               "classification": fit.classification, "residual": fit.residual, "window": list(p["window"]),
               "time_unit": prep.tau}
    return None, None, results, None, []


_HANDLERS = {"survival": _survival, "k3": _k3, "scan-line": _scan_line, "scan-grid": _scan_grid, "mc": _mc, "fit": _fit}


def execute(cfg: RunConfig) -> RunOutput:
    """Run ``cfg`` and return the rendered file contents.

    Library errors propagate; :mod:`lgdecay.cli` maps them to exit codes.
    """
    started = time.perf_counter()
    prep: Prepared = prepare_model(cfg)
    columns, rows, results, extremes, errors = _HANDLERS[cfg.command](cfg, prep)
    elapsed = time.perf_counter() - started if cfg.record_timing else None
    echo = cfg.to_dict(include_runtime=False)
    if cfg.normalize:
        results = {"time_unit": prep.tau, **results} if isinstance(results, dict) and "time_unit" not in results else results
    if cfg.format == "csv":
        text = csv_text(echo, columns, rows, timing=elapsed, time_unit=prep.tau if cfg.normalize else None)
    else:
        text = json_text(echo, results, extremes=extremes, errors=errors, timing=elapsed)
    return RunOutput(text=text, format=cfg.format, notes=prep.notes + errors)
