"""Scenario configuration: a validated JSON dialect with nested sections.

A config file fully determines a benchmark scenario: plant matrices,
observer gain and attenuation level, controller selection, reference and
disturbance signals, simulation grid, and tuner settings.  Unknown keys
are rejected so typos fail loudly; every validation error names the
offending key path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .lti import PlantModel, StateSpaceModel
from .riccati import hinf_gamma_min
from .signals import SignalChannel, SignalSpec, Sinusoid

__all__ = ["ScenarioConfig", "load_config", "ConfigError"]

CONTROLLER_KINDS = ("mocc", "lqt", "hinf", "dobc")


class ConfigError(ValueError):
    pass


def _require(cond, path, msg):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _check_keys(d, allowed, path):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")


def _matrix(d, key, path):
    _require(key in d, path, f"missing required key '{key}'")
    try:
        return np.atleast_2d(np.asarray(d[key], dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.{key}: not a numeric matrix ({exc})")


def _signal(d, path) -> SignalSpec:
    _check_keys(d, {"channels", "dependency"}, path)
    _require("channels" in d, path, "missing required key 'channels'")
    channels = []
    for i, ch in enumerate(d["channels"]):
        cpath = f"{path}.channels[{i}]"
        _check_keys(ch, {"offset", "sinusoids"}, cpath)
        sins = []
        for j, s in enumerate(ch.get("sinusoids", [])):
            spath = f"{cpath}.sinusoids[{j}]"
            _check_keys(s, {"amplitude", "omega", "phase"}, spath)
            _require("amplitude" in s and "omega" in s, spath,
                     "needs 'amplitude' and 'omega'")
            try:
                sins.append(Sinusoid(float(s["amplitude"]), float(s["omega"]),
                                     float(s.get("phase", 0.0))))
            except ValueError as exc:
                raise ConfigError(f"{spath}: {exc}")
        try:
            channels.append(SignalChannel(float(ch.get("offset", 0.0)),
                                          tuple(sins)))
        except ValueError as exc:
            raise ConfigError(f"{cpath}: {exc}")
    dep = None
    if "dependency" in d and d["dependency"] is not None:
        dpath = f"{path}.dependency"
        dd = d["dependency"]
        _check_keys(dd, {"A", "B", "C", "D"}, dpath)
        try:
            dep = StateSpaceModel(_matrix(dd, "A", dpath), _matrix(dd, "B", dpath),
                                  _matrix(dd, "C", dpath), _matrix(dd, "D", dpath))
        except ValueError as exc:
            raise ConfigError(f"{dpath}: {exc}")
    try:
        return SignalSpec(tuple(channels), dependency=dep)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")


@dataclass(frozen=True)
class EsSettings:
    amplitude: float = 0.1
    probe_frequency: float = 1.8
    gain: float = 80.0
    filter_pole: float = 0.5
    iterations: int = 100
    initial_alpha: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario: plant, gains, signals, grid and toggles."""

    plant: PlantModel
    observer_gain: np.ndarray
    gamma: float | str
    gamma_tol: float
    alpha: float
    controllers: tuple
    reference: SignalSpec
    disturbances: dict
    h: float
    T: float
    analysis_hinf_norms: bool
    analysis_power_norms: bool
    dobc_settings: dict | None
    es: EsSettings

    def resolve_gamma(self) -> float:
        if self.gamma == "min":
            return hinf_gamma_min(self.plant, tol=self.gamma_tol)
        return float(self.gamma)

    @staticmethod
    def double_integrator_default() -> "ScenarioConfig":
        from .benchmark import (DEFAULT_GAMMA, DEFAULT_OBSERVER_GAIN,
                                benchmark_disturbances, benchmark_reference,
                                default_dobc_settings, double_integrator_plant)
        return ScenarioConfig(
            plant=double_integrator_plant(),
            observer_gain=np.asarray(DEFAULT_OBSERVER_GAIN, dtype=float),
            gamma=DEFAULT_GAMMA, gamma_tol=1e-4, alpha=1.0,
            controllers=CONTROLLER_KINDS,
            reference=benchmark_reference(),
            disturbances=benchmark_disturbances(),
            h=1e-3, T=100.0,
            analysis_hinf_norms=True, analysis_power_norms=True,
            dobc_settings=default_dobc_settings(),
            es=EsSettings(),
        )


_TOP_KEYS = {"plant", "design", "controllers", "reference", "disturbances",
             "simulation", "analysis", "dobc", "es"}


def parse_config(doc: dict, path: str = "config") -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    _check_keys(doc, _TOP_KEYS, path)

    _require("plant" in doc, path, "missing required section 'plant'")
    pd = doc["plant"]
    _check_keys(pd, {"A", "B1", "B2", "C1", "C2", "D12", "D21"}, "plant")
    try:
        plant = PlantModel(
            A=_matrix(pd, "A", "plant"), B1=_matrix(pd, "B1", "plant"),
            B2=_matrix(pd, "B2", "plant"), C1=_matrix(pd, "C1", "plant"),
            C2=_matrix(pd, "C2", "plant"), D12=_matrix(pd, "D12", "plant"),
            D21=_matrix(pd, "D21", "plant"))
    except ValueError as exc:
        raise ConfigError(f"plant: {exc}")

    _require("design" in doc, path, "missing required section 'design'")
    dd = doc["design"]
    _check_keys(dd, {"observer_gain", "gamma", "gamma_tol", "alpha"}, "design")
    L = _matrix(dd, "observer_gain", "design")
    _require(L.shape == (plant.n, plant.p2), "design.observer_gain",
             f"shape {L.shape} != ({plant.n}, {plant.p2})")
    gamma = dd.get("gamma", "min")
    if gamma != "min":
        try:
            gamma = float(gamma)
        except (TypeError, ValueError):
            raise ConfigError("design.gamma: must be a number or 'min'")
        _require(gamma > 0, "design.gamma", "must be positive")
    gamma_tol = float(dd.get("gamma_tol", 1e-4))
    _require(gamma_tol > 0, "design.gamma_tol", "must be positive")
    alpha = float(dd.get("alpha", 1.0))

    controllers = tuple(doc.get("controllers", list(CONTROLLER_KINDS)))
    for c in controllers:
        _require(c in CONTROLLER_KINDS, "controllers",
                 f"unknown controller kind {c!r}")

    _require("reference" in doc, path, "missing required section 'reference'")
    reference = _signal(doc["reference"], "reference")
    _require(reference.dim == plant.p2, "reference",
             f"dimension {reference.dim} != p2 = {plant.p2}")
    _require(reference.dependency is None, "reference",
             "the reference cannot depend on itself")

    _require("disturbances" in doc, path,
             "missing required section 'disturbances'")
    dists = {}
    for name, sd in doc["disturbances"].items():
        sig = _signal(sd, f"disturbances.{name}")
        _require(sig.dim == plant.m1, f"disturbances.{name}",
                 f"dimension {sig.dim} != m1 = {plant.m1}")
        dists[name] = sig

    sim = doc.get("simulation", {})
    _check_keys(sim, {"h", "T"}, "simulation")
    h = float(sim.get("h", 1e-3))
    T = float(sim.get("T", 100.0))
    _require(h > 0, "simulation.h", "must be positive")
    _require(T > 0, "simulation.T", "must be positive")
    _require(T > h, "simulation.T", "must exceed the step")

    an = doc.get("analysis", {})
    _check_keys(an, {"hinf_norms", "power_norms"}, "analysis")

    dobc = doc.get("dobc")
    if dobc is not None:
        _check_keys(dobc, {"A_w", "C_w", "L_x", "L_w"}, "dobc")
        parsed = {
            "A_w": _matrix(dobc, "A_w", "dobc"),
            "C_w": _matrix(dobc, "C_w", "dobc"),
            "L_w": _matrix(dobc, "L_w", "dobc"),
        }
        if "L_x" in dobc:
            parsed["L_x"] = _matrix(dobc, "L_x", "dobc")
        dobc = parsed

    es_d = doc.get("es", {})
    _check_keys(es_d, {"amplitude", "probe_frequency", "gain", "filter_pole",
                       "iterations", "initial_alpha"}, "es")
    es = EsSettings(
        amplitude=float(es_d.get("amplitude", 0.1)),
        probe_frequency=float(es_d.get("probe_frequency", 1.8)),
        gain=float(es_d.get("gain", 80.0)),
        filter_pole=float(es_d.get("filter_pole", 0.5)),
        iterations=int(es_d.get("iterations", 100)),
        initial_alpha=float(es_d.get("initial_alpha", 1.0)),
    )
    _require(es.amplitude > 0, "es.amplitude", "must be positive")
    _require(0 < es.filter_pole < 1, "es.filter_pole", "must lie in (0, 1)")
    _require(es.iterations >= 0, "es.iterations", "must be nonnegative")

    return ScenarioConfig(
        plant=plant, observer_gain=L, gamma=gamma, gamma_tol=gamma_tol,
        alpha=alpha, controllers=controllers, reference=reference,
        disturbances=dists, h=h, T=T,
        analysis_hinf_norms=bool(an.get("hinf_norms", True)),
        analysis_power_norms=bool(an.get("power_norms", False)),
        dobc_settings=dobc, es=es)


def load_config(path: str) -> ScenarioConfig:
    """Parse and validate a scenario file (JSON grammar, .cfg extension)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error: {exc}")
    return parse_config(doc)
