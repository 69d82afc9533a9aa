"""Experiment configuration loaded from TOML.

Sections map one-to-one onto the typed configs::

    [battery]    plant constants (liters, mol/L, V, K)
    [truth]      crossover law of the simulated plant and its initial state
    [observer]   integrator-chain order, lambda gains, varrho, x_hat0, dt
    [synthesis]  LMI weights and flow-rate polytope
    [experiment] horizon, steps, sampling, noise, seed, constant inputs
    [bounds]     norm bounds and rho/mu/r/sigma for the ultimate-bound report

Every section is optional.  Unknown sections or keys are errors, so a typo
in a physical constant can never be silently ignored.
"""
from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ..augmentation import AugmentedState, BoundSet, CrossoverModelConfig
from ..battery import (BatteryParams, BatteryState, LinearCrossover, NoCrossover,
                       ParametricCrossover, PhysicalConstants, PlantInputs)
from ..errors import ConfigError, DomainError
from ..observer import default_x_hat0
from ..synthesis import SynthesisConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class EuubSettings:
    bounds: BoundSet
    rho: float = 0.5
    mu: float = 0.5
    r: float = 1.0
    sigma: float = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    battery: BatteryParams = field(default_factory=BatteryParams)
    crossover_truth: object = field(default_factory=LinearCrossover)
    z0: BatteryState = field(default_factory=lambda: BatteryState(1.0, 1.0))
    observer: CrossoverModelConfig = field(default_factory=CrossoverModelConfig)
    x_hat0: AugmentedState = None
    observer_dt: float = 0.01
    synthesis: SynthesisConfig = None
    horizon: float = 1600.0
    sim_dt: float = 0.01
    sample_period: float = 1.0
    noise_mv: float = 0.0
    seed: int = 0
    inputs: PlantInputs = field(default_factory=PlantInputs)
    euub: EuubSettings = None

    def __post_init__(self):
        if self.x_hat0 is None:
            object.__setattr__(self, "x_hat0", default_x_hat0(self.observer))
        if self.synthesis is None:
            object.__setattr__(self, "synthesis",
                               SynthesisConfig(cfg=self.observer, params=self.battery))
        if self.euub is None:
            object.__setattr__(self, "euub",
                               EuubSettings(BoundSet.for_config(self.observer)))
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigError(f"experiment.horizon must be positive, got {self.horizon!r}")
        if not self.sim_dt > 0:
            raise ConfigError("experiment.sim_dt must be positive")
        if not self.sample_period >= self.sim_dt:
            raise ConfigError("experiment.sample_period must be at least sim_dt")
        ratio = self.sample_period / self.sim_dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError("experiment.sample_period must be a multiple of sim_dt")
        if not self.noise_mv >= 0:
            raise ConfigError("experiment.noise_mv must be non-negative")
        if not self.observer_dt > 0:
            raise ConfigError("observer.dt must be positive")
        if len(self.x_hat0.as_array()) != self.observer.dim:
            raise ConfigError(
                f"observer.x_hat0 needs {self.observer.dim} entries (2 + order_l)")


_SECTIONS = {
    "battery": {"v_res", "v_cell", "c0", "epsilon", "e0_cell", "r_ohm", "faraday",
                "gas_constant", "temperature"},
    "truth": {"crossover", "k_mt", "z0", "lam", "omega0"},
    "observer": {"order_l", "lam", "varrho", "x_hat0", "dt"},
    "synthesis": {"beta", "kappa_z", "q_min", "q_max", "feas_margin", "box_radius",
                  "feas_tol", "gap_tol", "max_iter"},
    "experiment": {"horizon", "sim_dt", "sample_period", "noise_mv", "seed", "current",
                   "flow_rate"},
    "bounds": {f.name for f in dataclasses.fields(BoundSet)} | {"rho", "mu", "r", "sigma"},
}


def _check_keys(doc: dict):
    for sec, body in doc.items():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{sec}] must be a table")
        for key in body:
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")


def _pick(body: dict, names, sec: str) -> dict:
    out = {}
    for k in names:
        if k in body:
            v = body[k]
            if isinstance(v, bool) or not isinstance(v, (int, float, list)):
                raise ConfigError(f"{sec}.{k} must be numeric")
            out[k] = v
    return out


def _build(cls, kwargs, sec):
    try:
        return cls(**kwargs)
    except (ConfigError, DomainError) as exc:
        raise ConfigError(f"[{sec}] {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"[{sec}] {exc}") from None


def from_dict(doc: dict) -> ExperimentConfig:
    _check_keys(doc)
    b = doc.get("battery", {})
    consts = _build(PhysicalConstants,
                    _pick(b, ("faraday", "gas_constant", "temperature"), "battery"), "battery")
    battery = _build(BatteryParams, dict(
        _pick(b, ("v_res", "v_cell", "c0", "epsilon", "e0_cell", "r_ohm"), "battery"),
        constants=consts), "battery")

    o = doc.get("observer", {})
    okw = _pick(o, ("order_l", "lam", "varrho"), "observer")
    if "lam" in okw:
        okw["lam"] = tuple(okw["lam"])
    observer = _build(CrossoverModelConfig, okw, "observer")
    x_hat0 = None
    if "x_hat0" in o:
        try:
            x_hat0 = AugmentedState.from_array([float(v) for v in o["x_hat0"]])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"observer.x_hat0: {exc}") from None

    t = doc.get("truth", {})
    kind = t.get("crossover", "linear")
    if kind == "none":
        truth = NoCrossover()
    elif kind == "linear":
        truth = _build(LinearCrossover, _pick(t, ("k_mt",), "truth"), "truth")
    elif kind == "parametric":
        tkw = _pick(t, ("lam", "omega0"), "truth")
        truth = _build(ParametricCrossover, {k: tuple(v) for k, v in tkw.items()}, "truth")
    else:
        raise ConfigError(f"truth.crossover must be none, linear or parametric, got {kind!r}")
    if "k_mt" in t and kind != "linear":
        raise ConfigError("truth.k_mt only applies to the linear crossover law")
    z0 = BatteryState(1.0, 1.0)
    if "z0" in t:
        try:
            z0 = BatteryState(*[float(v) for v in t["z0"]])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"truth.z0: {exc}") from None

    e = doc.get("experiment", {})
    ekw = _pick(e, ("horizon", "sim_dt", "sample_period", "noise_mv", "seed"), "experiment")
    if "seed" in ekw and int(ekw["seed"]) != ekw["seed"]:
        raise ConfigError("experiment.seed must be an integer")
    inputs = _build(PlantInputs, _pick(e, ("current", "flow_rate"), "experiment"),
                    "experiment")

    s = _pick(doc.get("synthesis", {}), _SECTIONS["synthesis"], "synthesis")
    synthesis = _build(SynthesisConfig, dict(s, cfg=observer, params=battery), "synthesis")

    bd = doc.get("bounds", {})
    extras = _pick(bd, ("rho", "mu", "r", "sigma"), "bounds")
    bkw = _pick(bd, [f.name for f in dataclasses.fields(BoundSet)], "bounds")
    bounds = _build(BoundSet.for_config, {"cfg": observer, **bkw}, "bounds")
    euub = EuubSettings(bounds, **extras)

    kwargs = dict(battery=battery, crossover_truth=truth, z0=z0, observer=observer,
                  x_hat0=x_hat0, synthesis=synthesis, inputs=inputs, euub=euub, **ekw)
    if "dt" in o:
        kwargs["observer_dt"] = o["dt"]
    return ExperimentConfig(**kwargs)


def loads(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    return from_dict(doc)


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return loads(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
