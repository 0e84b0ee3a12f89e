"""Command-line front end for synthesis, verification and benchmarking.

Every subcommand reads one scenario file plus optional flag overrides.
Outputs are deterministic: identical inputs produce byte-identical files.
Exit code 0 means every requested computation completed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace as _dc_replace

import numpy as np

from .analysis import (decompose_lemma1, hinf_norm, power_norm_response,
                       r_channel_model, w_channel_model)
from .benchmark import (_build_controller, build_mocc, emit_report,
                        run_benchmark)
from .config import ConfigError, ScenarioConfig, load_config
from .lti import ControllerRealization, FrequencyGrid, sorted_eigenvalues
from .riccati import hinf_central, hinf_gamma_min, lqt_synthesize
from .sim import finite_horizon_cost, simulate, trace_to_csv
from .tuning import EsState, alpha_stability_sweep, tune_alpha
from .youla import verify_transfer_equality

__all__ = ["main"]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if getattr(args, "h", None) is not None:
        changes["h"] = float(args.h)
    if getattr(args, "T", None) is not None:
        changes["T"] = float(args.T)
    if getattr(args, "alpha", None) is not None:
        changes["alpha"] = float(args.alpha)
    if getattr(args, "gamma", None) is not None:
        changes["gamma"] = (args.gamma if args.gamma == "min"
                            else float(args.gamma))
    return _dc_replace(cfg, **changes) if changes else cfg


def _out_dir(args) -> str:
    out = getattr(args, "out", None) or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_synthesize(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    plant = cfg.plant
    lqt = lqt_synthesize(plant)
    gamma = cfg.resolve_gamma()
    h = hinf_central(plant, gamma)
    doc = {
        "lqt": {
            "F": lqt.F.tolist(),
            "Pi": lqt.Pi.tolist(),
            "S_ff": lqt.S_ff.tolist(),
        },
        "hinf": {
            "gamma": gamma,
            "gamma_requested": cfg.gamma,
            "P1": h.P1.tolist(),
            "P2": h.P2.tolist(),
            "A_inf": h.A_inf.tolist(),
            "B_inf": h.B_inf.tolist(),
            "C_inf": h.C_inf.tolist(),
        },
        "observer": {
            "L": cfg.observer_gain.tolist(),
            "eigenvalues": [[ev.real, ev.imag] for ev in sorted_eigenvalues(
                plant.A + cfg.observer_gain @ plant.C2)],
        },
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    out = _out_dir(args)
    path = os.path.join(out, "synthesis.json")
    with open(path, "w") as fh:
        fh.write(text)
    print(f"F = {lqt.F.tolist()}")
    print(f"gamma = {_fmt(gamma)}")
    print(f"wrote {path}")
    return 0


def cmd_verify_q(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    plant = cfg.plant
    gamma = cfg.resolve_gamma()
    comp = build_mocc(plant, cfg.observer_gain, gamma, alpha=1.0)
    hdes = hinf_central(plant, gamma)
    K = ControllerRealization(hdes.A_inf, hdes.B_inf, hdes.C_inf,
                              np.zeros((plant.m2, plant.p2)))
    grid = FrequencyGrid.log_spaced(1e-3, 1e3, 50)
    rep = verify_transfer_equality(comp, K, grid)
    print(f"max transfer deviation: {rep.max_deviation:.3e} "
          f"(worst omega {rep.worst_omega:.6g} rad/s)")
    if rep.skipped:
        print(f"skipped grid points (pole hits): {list(rep.skipped)}")
    ok = rep.max_deviation <= 1e-8
    print("PASS" if ok else "FAIL", "- fused composite matches the robust "
          "controller" if ok else "- deviation above 1e-8")
    return 0 if ok else 1


def cmd_analyze(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    plant = cfg.plant
    gamma = cfg.resolve_gamma()
    doc = {"gamma": gamma, "controllers": {}}
    for kind in cfg.controllers:
        ctrl = _build_controller(kind, plant, cfg.observer_gain, gamma,
                                 cfg.alpha, cfg.dobc_settings)
        entry = {}
        if cfg.analysis_hinf_norms:
            entry["hinf_norm_w_to_z"] = hinf_norm(
                w_channel_model(plant, ctrl), tol=1e-8)
        if cfg.analysis_power_norms:
            rmodel = r_channel_model(plant, ctrl)
            entry["reference_response_power"] = \
                power_norm_response(rmodel, cfg.reference)**2
        doc["controllers"][kind] = entry
        line = ", ".join(f"{k}={_fmt(v)}" for k, v in entry.items())
        print(f"{kind}: {line}")
    out = _out_dir(args)
    path = os.path.join(out, "analysis.json")
    with open(path, "w") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    plant = cfg.plant
    gamma = cfg.resolve_gamma()
    ctrl = _build_controller(args.controller, plant, cfg.observer_gain,
                             gamma, cfg.alpha, cfg.dobc_settings)
    if args.disturbance not in cfg.disturbances:
        print(f"error: unknown disturbance {args.disturbance!r}; "
              f"choose from {sorted(cfg.disturbances)}", file=sys.stderr)
        return 2
    w = cfg.disturbances[args.disturbance]
    trace = simulate(plant, ctrl, cfg.reference, w, h=cfg.h, T=cfg.T)
    cost_true = finite_horizon_cost(trace, measured=False)
    cost_meas = finite_horizon_cost(trace, measured=True)
    out = _out_dir(args)
    path = os.path.join(out, f"trace_{args.controller}_{args.disturbance}.csv")
    trace_to_csv(trace, path)
    print(f"cost (true z)     = {_fmt(cost_true.J)}")
    print(f"cost (measured z) = {_fmt(cost_meas.J)}")
    print(f"wrote {path}")
    return 0


def cmd_benchmark(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = _out_dir(args)
    report = run_benchmark(cfg, out_dir=out)
    paths = emit_report(report, out)
    for dist in report.disturbances:
        row = "  ".join(f"{c}={_fmt(report.cost(c, dist))}"
                        for c in report.controllers)
        print(f"{dist}: {row}")
    print("hinf:", "  ".join(f"{c}={_fmt(report.hinf_norms[c])}"
                             for c in report.controllers))
    for p in paths:
        print(f"wrote {p}")
    if not report.complete:
        for e in report.errors:
            print(f"error: {e}", file=sys.stderr)
        for c in report.cells:
            if c.error:
                print(f"error in cell ({c.controller}, {c.disturbance}): "
                      f"{c.error}", file=sys.stderr)
        return 1
    return 0


def cmd_tune_alpha(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    plant = cfg.plant
    gamma = cfg.resolve_gamma()
    comp = build_mocc(plant, cfg.observer_gain, gamma, alpha=cfg.alpha)
    if args.disturbance not in cfg.disturbances:
        print(f"error: unknown disturbance {args.disturbance!r}", file=sys.stderr)
        return 2
    w = cfg.disturbances[args.disturbance]
    es = EsState(alpha_hat=cfg.es.initial_alpha, amplitude=cfg.es.amplitude,
                 probe_frequency=cfg.es.probe_frequency, gain=cfg.es.gain,
                 filter_pole=cfg.es.filter_pole)
    iters = args.iterations if args.iterations is not None else cfg.es.iterations
    trace = tune_alpha(plant, comp, cfg.reference, w, es, iters,
                       h=cfg.h, T=cfg.T)
    out = _out_dir(args)
    path = os.path.join(out, "tune_alpha.csv")
    trace.to_csv(path)
    if len(trace):
        print(f"final alpha estimate: {_fmt(trace.alpha_hat[-1])}")
        print(f"trailing-mean alpha:  {_fmt(trace.trailing_mean())}")
        print(f"last measured cost:   {_fmt(trace.J[-1])}")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mocc",
        description="Two-controller complementary tracking: synthesis, "
                    "fusion verification, analysis, simulation, benchmark "
                    "and gain-factor tuning.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_alpha=True):
        p.add_argument("config", help="scenario file (JSON grammar)")
        p.add_argument("--h", type=float, help="integration step override")
        p.add_argument("--T", type=float, help="horizon override")
        if needs_alpha:
            p.add_argument("--alpha", type=float, help="gain factor override")
        p.add_argument("--gamma", help="attenuation level override "
                                       "(number or 'min')")
        p.add_argument("--out", help="output directory (default '.')")

    p = sub.add_parser("synthesize", help="run both syntheses, report gains")
    common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify-q", help="check the fused transfer identity")
    common(p)
    p.set_defaults(func=cmd_verify_q)

    p = sub.add_parser("analyze", help="closed-loop norms and response powers")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="one closed-loop run, trace to CSV")
    common(p)
    p.add_argument("--controller", default="mocc",
                   choices=["mocc", "lqt", "hinf", "dobc"])
    p.add_argument("--disturbance", default="w0")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="full controller/disturbance table")
    common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("tune-alpha", help="extremum-seeking gain tuning")
    common(p)
    p.add_argument("--disturbance", default="w1")
    p.add_argument("--iterations", type=int)
    p.set_defaults(func=cmd_tune_alpha)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
