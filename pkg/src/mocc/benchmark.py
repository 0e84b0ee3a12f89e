"""Double-integrator benchmark: synthesis, simulation and report emission.

Builds the reference scenario (double integrator, sinusoidal reference,
three disturbance cases), synthesizes the four tracking controllers
(fused composite, optimal tracking, robust tracking, disturbance-observer
compensation), and reproduces the cost/robustness comparison table with
deterministic CSV and JSON-style reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import __version__ as _version
from .analysis import hinf_norm, w_channel_model
from .baselines import (HinfTrackingDesign, LqtController, dobc_synthesize,
                        hinf_tracking_synthesize, lqt_controller)
from .lti import ControllerRealization, PlantModel, StateSpaceModel
from .riccati import hinf_central, hinf_gamma_min, lqt_synthesize
from .signals import SignalChannel, SignalSpec, Sinusoid
from .sim import finite_horizon_cost, simulate, trace_to_csv
from .youla import CompositeController, assemble_composite, build_q_shared

__all__ = [
    "double_integrator_plant",
    "benchmark_reference",
    "benchmark_disturbances",
    "DEFAULT_OBSERVER_GAIN",
    "DEFAULT_GAMMA",
    "default_dobc_settings",
    "build_mocc",
    "CellResult",
    "PerformanceReport",
    "run_benchmark",
    "emit_report",
    "report_csv",
    "report_structured",
]

DEFAULT_OBSERVER_GAIN = ((-100.0,), (-1000.0,))
DEFAULT_GAMMA = 0.4108

# Relative / absolute reproduction bands attached to every emitted cell.
COST_TOLERANCE_REL = 0.05
HINF_TOLERANCE_ABS = 1e-3
INDICATIVE_TOLERANCE_REL = 0.15


def double_integrator_plant() -> PlantModel:
    """Two-state benchmark plant with mixed disturbance injection."""
    return PlantModel(
        A=[[0.0, 1.0], [0.0, 0.0]],
        B1=[[1.0], [10.0]],
        B2=[[0.0], [1.0]],
        C1=[[1.0], [0.0]],
        C2=[[1.0, 0.0]],
        D12=[[0.0], [0.03]],
        D21=[[0.01]],
    )


def benchmark_reference() -> SignalSpec:
    return SignalSpec.sine(1.0, np.pi)


def benchmark_disturbances() -> dict:
    """The four disturbance cases keyed w0, w1, w2, w3."""
    w0 = SignalSpec.zero(1)
    w1 = SignalSpec.sine(1.0, 1.5 * np.pi)
    w2 = SignalSpec.single_channel(1.0, [Sinusoid(1.0, 4 * np.pi),
                                         Sinusoid(1.0, 0.2 * np.pi)])
    # w3 = W(r) + w2 with the slowly unstable scalar filter W' = 0.01 W + r
    w_filter = StateSpaceModel([[0.01]], [[1.0]], [[1.0]], [[0.0]])
    w3 = w2.with_dependency(w_filter)
    return {"w0": w0, "w1": w1, "w2": w2, "w3": w3}


def default_dobc_settings() -> dict:
    """Estimator settings assuming the single-sinusoid disturbance model."""
    return {
        "A_w": [[0.0, 1.0], [-2.25 * np.pi**2, 0.0]],
        "C_w": [[1.0, 0.0]],
        "L_w": [[-200.0], [-1000.0]],
    }


def build_mocc(plant: PlantModel, L=DEFAULT_OBSERVER_GAIN,
               gamma: float = DEFAULT_GAMMA,
               alpha: float = 1.0) -> CompositeController:
    """Fused tracking composite: optimal tracking law plus robust fusion.

    The nominal law is the optimal tracking controller (shared observer,
    bounded anticausal feedforward); the robust one is the central design
    at ``gamma``; the fusion operator comes from the shared-observer
    construction.
    """
    lqt = lqt_synthesize(plant)
    h = hinf_central(plant, gamma)
    K = ControllerRealization(h.A_inf, h.B_inf, h.C_inf,
                              np.zeros((plant.m2, plant.p2)))
    Q = build_q_shared(plant, lqt.F, K, L)
    return assemble_composite(plant, Q, L, mode="shared", tracking=True,
                              alpha=alpha, F=lqt.F, feedforward=lqt)


def _build_controller(kind: str, plant: PlantModel, L, gamma: float,
                      alpha: float, dobc_settings: dict | None):
    if kind == "mocc":
        return build_mocc(plant, L, gamma, alpha)
    if kind == "lqt":
        return lqt_controller(plant, L)
    if kind == "hinf":
        return hinf_tracking_synthesize(plant, gamma)
    if kind == "dobc":
        st = dict(default_dobc_settings() if dobc_settings is None
                  else dobc_settings)
        L_x = st.get("L_x", L)
        return dobc_synthesize(plant, st["A_w"], st["C_w"], L_x, st["L_w"])
    raise ValueError(f"unknown controller kind {kind!r}")


@dataclass(frozen=True)
class CellResult:
    controller: str
    disturbance: str
    cost: float
    error: str | None = None


@dataclass(frozen=True)
class PerformanceReport:
    """Costs per controller and disturbance plus the robustness column."""

    controllers: tuple
    disturbances: tuple
    cells: tuple                 # of CellResult
    hinf_norms: dict
    h: float
    T: float
    gamma: float
    version: str = _version
    errors: tuple = field(default_factory=tuple)

    def cost(self, controller: str, disturbance: str) -> float:
        for c in self.cells:
            if c.controller == controller and c.disturbance == disturbance:
                return c.cost
        raise KeyError((controller, disturbance))

    @property
    def complete(self) -> bool:
        return all(c.error is None for c in self.cells) and not self.errors


def run_benchmark(config=None, *, out_dir=None) -> PerformanceReport:
    """Synthesize, simulate and score every controller/disturbance cell.

    ``config`` is a :class:`~mocc.config.ScenarioConfig`; the default runs
    the bundled double-integrator scenario.  Cell failures are recorded
    with a diagnostic and do not abort the remaining cells.  Traces go to
    ``out_dir`` when given.
    """
    from .config import ScenarioConfig
    if config is None:
        config = ScenarioConfig.double_integrator_default()
    plant = config.plant
    L = config.observer_gain
    gamma = config.resolve_gamma()
    r = config.reference
    cells = []
    norms = {}
    errors = []
    for kind in config.controllers:
        try:
            ctrl = _build_controller(kind, plant, L, gamma, config.alpha,
                                     config.dobc_settings)
        except Exception as exc:
            errors.append(f"{kind}: synthesis failed: {exc}")
            for dist_name in config.disturbances:
                cells.append(CellResult(kind, dist_name, float("nan"),
                                        error=str(exc)))
            norms[kind] = float("nan")
            continue
        for dist_name, w in config.disturbances.items():
            try:
                trace = simulate(plant, ctrl, r, w, h=config.h, T=config.T)
                rep = finite_horizon_cost(trace, measured=False)
                cells.append(CellResult(kind, dist_name, rep.J))
                if out_dir is not None:
                    trace_to_csv(trace, f"{out_dir}/trace_{kind}_{dist_name}.csv")
            except Exception as exc:
                cells.append(CellResult(kind, dist_name, float("nan"),
                                        error=str(exc)))
        try:
            norms[kind] = hinf_norm(w_channel_model(plant, ctrl), tol=1e-8)
        except Exception as exc:
            norms[kind] = float("nan")
            errors.append(f"{kind}: norm computation failed: {exc}")
    return PerformanceReport(
        controllers=tuple(config.controllers),
        disturbances=tuple(config.disturbances),
        cells=tuple(cells), hinf_norms=norms,
        h=config.h, T=config.T, gamma=gamma, errors=tuple(errors))


_LABELS = {"mocc": "MOCC", "hinf": "Hinf", "lqt": "LQT", "dobc": "DOBC"}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def report_csv(report: PerformanceReport) -> str:
    """Cost table mirroring the benchmark layout, one row per case."""
    cols = [_LABELS.get(c, c) for c in report.controllers]
    lines = ["case," + ",".join(cols)]
    for dist in report.disturbances:
        row = [dist]
        for c in report.controllers:
            row.append(_fmt(report.cost(c, dist)))
        lines.append(",".join(row))
    lines.append("hinf_norm," + ",".join(
        _fmt(report.hinf_norms[c]) for c in report.controllers))
    return "\n".join(lines) + "\n"


def report_structured(report: PerformanceReport) -> str:
    """Machine-parseable report with tolerances attached to every cell."""
    cells = []
    for c in report.cells:
        tol = INDICATIVE_TOLERANCE_REL if c.controller == "hinf" \
            else COST_TOLERANCE_REL
        cells.append({
            "controller": c.controller,
            "disturbance": c.disturbance,
            "cost": c.cost,
            "tolerance_relative": tol,
            "indicative": c.controller == "hinf",
            "error": c.error,
        })
    doc = {
        "metadata": {
            "step": report.h,
            "horizon": report.T,
            "gamma": report.gamma,
            "version": report.version,
        },
        "cells": cells,
        "hinf_norms": {
            c: {"value": report.hinf_norms[c],
                "tolerance_absolute": HINF_TOLERANCE_ABS}
            for c in report.controllers
        },
        "errors": list(report.errors),
    }
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def emit_report(report: PerformanceReport, out_dir: str) -> list:
    """Write the CSV and structured forms; returns the written paths."""
    import os
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    p_csv = os.path.join(out_dir, "report.csv")
    with open(p_csv, "w") as fh:
        fh.write(report_csv(report))
    paths.append(p_csv)
    p_json = os.path.join(out_dir, "report.json")
    with open(p_json, "w") as fh:
        fh.write(report_structured(report))
    paths.append(p_json)
    return paths
