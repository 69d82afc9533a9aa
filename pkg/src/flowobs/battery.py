"""Isothermal lumped-parameter model of one DRFB half-cell plus reservoir.

Units throughout: time in minutes, volumes in liters, flow in L/min,
crossover flux in mol/min, current in amperes (positive = discharge).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import kernels
from .errors import DomainError, IntegrationError

SECONDS_PER_MINUTE = 60.0
SOC_CLAMP = 1e-6


@dataclass(frozen=True)
class PhysicalConstants:
    faraday: float = 96485.33212  # C/mol
    gas_constant: float = 8.314462618  # J/(mol K)
    temperature: float = 275.0  # K

    def __post_init__(self):
        for name in ("faraday", "gas_constant", "temperature"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be finite and positive, got {v!r}")

    @property
    def nernst_slope(self) -> float:
        """The 2RT/F prefactor of the logistic voltage term (V)."""
        return 2.0 * self.gas_constant * self.temperature / self.faraday

    @property
    def faraday_per_minute(self) -> float:
        """Faraday constant in A*min/mol, so that I / F gives mol/min."""
        return self.faraday / SECONDS_PER_MINUTE


@dataclass(frozen=True)
class BatteryParams:
    """Plant parameters; defaults are the laboratory cell values."""

    v_res: float = 17.6e-3
    v_cell: float = 0.6985e-3
    c0: float = 0.1
    epsilon: float = 0.87
    e0_cell: float = 2.2
    r_ohm: float = 0.0
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        for name in ("v_res", "v_cell", "c0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be finite and positive, got {v!r}")
        if not (0.0 < self.epsilon <= 1.0):
            raise DomainError(f"epsilon must lie in (0, 1], got {self.epsilon!r}")
        if not (math.isfinite(self.r_ohm) and self.r_ohm >= 0):
            raise DomainError(f"r_ohm must be non-negative, got {self.r_ohm!r}")
        if not math.isfinite(self.e0_cell):
            raise DomainError("e0_cell must be finite")

    def mixing_rate(self, flow_rate: float) -> float:
        """Inverse residence time Q / (eps * V_cell) of the half-cell, 1/min."""
        return flow_rate / (self.epsilon * self.v_cell)

    @property
    def e_vec(self) -> np.ndarray:
        """Crossover input vector [-1/(c0 Vres), -1/(eps c0 Vcell)]."""
        return np.array([-1.0 / (self.c0 * self.v_res),
                         -1.0 / (self.epsilon * self.c0 * self.v_cell)])

    @property
    def b_vec(self) -> np.ndarray:
        """Current input vector, per ampere, in 1/min."""
        f = self.constants.faraday_per_minute
        return np.array([-1.0 / (self.c0 * self.v_res * f),
                         -1.0 / (self.epsilon * self.c0 * self.v_cell * f)])


@dataclass(frozen=True)
class BatteryState:
    soc: float
    soc_cell: float

    def __post_init__(self):
        for name in ("soc", "soc_cell"):
            v = getattr(self, name)
            if not (-1e-9 <= v <= 1.0 + 1e-9):
                raise DomainError(f"{name} must lie in [0, 1], got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.soc, self.soc_cell])


@dataclass(frozen=True)
class PlantInputs:
    current: float = 0.0
    flow_rate: float = 9.0e-3

    def __post_init__(self):
        if not (math.isfinite(self.flow_rate) and self.flow_rate > 0):
            raise DomainError(f"flow_rate must be positive, got {self.flow_rate!r}")
        if not math.isfinite(self.current):
            raise DomainError("current must be finite")


# -- ground-truth crossover laws ------------------------------------------

@dataclass(frozen=True)
class NoCrossover:
    """Ideal separator: no crossover flux."""


@dataclass(frozen=True)
class LinearCrossover:
    """Mass-transfer law Q_x = k_mt * c0 * SOC_cell."""

    k_mt: float = 5.6142e-8


@dataclass(frozen=True)
class ParametricCrossover:
    """Crossover generated exactly by the observer's own parametric family.

    ``Q_x = psi(SOC_cell) * theta(t)`` where ``theta`` is the first state of a
    pure integrator chain ``d omega/dt = Lambda omega`` started at ``omega0``.
    """

    lam: tuple = (0.5, 0.025)
    omega0: tuple = (5.6142e-9, 0.0, 0.0)

    def __post_init__(self):
        if len(self.omega0) != len(self.lam) + 1:
            raise DomainError("omega0 must have len(lam) + 1 entries")


CrossoverLaw = Union[NoCrossover, LinearCrossover, ParametricCrossover,
                     Callable[[np.ndarray], float]]


@dataclass(frozen=True)
class Trajectory:
    """Sampled plant run.  ``omega`` is empty unless the truth is parametric."""

    time: np.ndarray
    soc: np.ndarray
    soc_cell: np.ndarray
    crossover_flux: np.ndarray
    v_out: np.ndarray
    current: np.ndarray
    flow_rate: np.ndarray
    clamped: np.ndarray
    omega: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __len__(self):
        return len(self.time)

    def state(self, i: int) -> BatteryState:
        return BatteryState(float(self.soc[i]), float(self.soc_cell[i]))


# -- operations -------------------------------------------------------------

def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DomainError(f"non-finite input: {v!r}")


def state_derivative(z: BatteryState, u: PlantInputs, qx: float,
                     p: BatteryParams) -> np.ndarray:
    """Time derivative [dSOC/dt, dSOC_cell/dt] in 1/min."""
    _check_finite(z.soc, z.soc_cell, qx, u.current)
    a = p.mixing_rate(u.flow_rate)
    e = p.e_vec
    b = p.b_vec
    return np.array([
        e[0] * qx + b[0] * u.current,
        a * (z.soc - z.soc_cell) + e[1] * qx + b[1] * u.current,
    ])


def linear_crossover_flux(soc_cell: float, k_mt: float, c0: float) -> float:
    return k_mt * c0 * soc_cell


def clamp_soc(soc_cell):
    """Clamp into [SOC_CLAMP, 1 - SOC_CLAMP]; returns (value, was_clamped)."""
    s = np.clip(soc_cell, SOC_CLAMP, 1.0 - SOC_CLAMP)
    return s, np.not_equal(s, soc_cell)


def nernst_voltage(soc_cell, current, p: BatteryParams, *, full_output=False):
    """Terminal voltage from the Nernst relation plus an ohmic term.

    Works elementwise on arrays.  With ``full_output`` a ``(voltage, clamped)``
    pair is returned, ``clamped`` flagging inputs that hit the singular ends.
    """
    s, clamped = clamp_soc(np.asarray(soc_cell, dtype=float))
    v = p.e0_cell + p.constants.nernst_slope * np.log(s / (1.0 - s)) \
        + p.r_ohm * np.asarray(current, dtype=float)
    if np.ndim(v) == 0:
        v, clamped = float(v), bool(clamped)
    return (v, clamped) if full_output else v


def invert_nernst(v_out, current, p: BatteryParams):
    """SOC_cell consistent with a voltage reading; saturates at the clamp."""
    v = np.asarray(v_out, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DomainError("voltage must be finite")
    arg = (v - p.e0_cell - p.r_ohm * np.asarray(current, dtype=float)) \
        / p.constants.nernst_slope
    # logistic written to avoid overflow for large |arg|
    s = np.where(arg >= 0, 1.0 / (1.0 + np.exp(-np.abs(arg))),
                 np.exp(-np.abs(arg)) / (1.0 + np.exp(-np.abs(arg))))
    s = np.clip(s, SOC_CLAMP, 1.0 - SOC_CLAMP)
    return float(s) if s.ndim == 0 else s


def _time_grid(horizon: float, dt: float) -> np.ndarray:
    if not (dt > 0 and horizon >= dt):
        raise DomainError(f"need dt > 0 and horizon >= dt (dt={dt}, horizon={horizon})")
    n = int(math.ceil(horizon / dt - 1e-9))
    t = np.arange(n + 1, dtype=float) * dt
    t[-1] = horizon
    return t


def _stage_inputs(inputs, t):
    """Current and flow at grid points and step midpoints, interleaved."""
    stage_t = np.empty(2 * len(t) - 1)
    stage_t[0::2] = t
    stage_t[1::2] = 0.5 * (t[:-1] + t[1:])
    if isinstance(inputs, PlantInputs):
        return (np.full(len(stage_t), inputs.current),
                np.full(len(stage_t), inputs.flow_rate))
    vals = [inputs(tt) for tt in stage_t]
    return (np.array([u.current for u in vals], dtype=float),
            np.array([u.flow_rate for u in vals], dtype=float))


def simulate(p: BatteryParams, z0: BatteryState, inputs, crossover: CrossoverLaw,
             horizon: float, dt: float = 0.01) -> Trajectory:
    """Integrate the plant with fixed-step RK4 from ``z0`` over ``horizon`` minutes.

    Parameters
    ----------
    inputs : PlantInputs or callable
        Constant inputs, or ``t -> PlantInputs``.
    crossover : crossover law
        ``NoCrossover``, ``LinearCrossover``, ``ParametricCrossover`` (all run
        in the compiled kernel) or any callable ``state_vector -> flux``.

    States are clamped to [0, 1] after every step.
    """
    t = _time_grid(horizon, dt)
    cur, flow = _stage_inputs(inputs, t)
    if np.any(flow <= 0):
        raise DomainError("flow rate must stay positive")
    c = p.constants
    lam = ()
    x0 = [z0.soc, z0.soc_cell]
    if isinstance(crossover, NoCrossover):
        kind, k_mt = kernels.KIND_NONE, 0.0
    elif isinstance(crossover, LinearCrossover):
        kind, k_mt = kernels.KIND_LINEAR, crossover.k_mt
    elif isinstance(crossover, ParametricCrossover):
        kind, k_mt = kernels.KIND_PARAMETRIC, 0.0
        lam = tuple(crossover.lam)
        x0 += list(crossover.omega0)
    elif callable(crossover):
        return _simulate_callable(p, t, cur, flow, np.array(x0), crossover)
    else:
        raise DomainError(f"unsupported crossover law {crossover!r}")
    states, flux, fail = kernels.plant_rk4(
        t, cur, flow, np.array(x0, dtype=float), kind, k_mt, p.c0, p.v_res, p.v_cell,
        p.epsilon, c.faraday_per_minute, np.array(lam, dtype=float))
    if fail >= 0:
        raise IntegrationError(f"non-finite plant state after t={t[fail]:g} min",
                               time=float(t[fail]))
    return _trajectory(p, t, states, flux, cur[0::2], flow[0::2])


def _simulate_callable(p, t, cur, flow, x, law):
    states = np.zeros((len(t), 2))
    flux = np.zeros(len(t))

    def f(xv, i):
        qx = law(xv)
        u = PlantInputs(cur[i], flow[i])
        a = p.mixing_rate(u.flow_rate)
        e, b = p.e_vec, p.b_vec
        return np.array([e[0] * qx + b[0] * u.current,
                         a * (xv[0] - xv[1]) + e[1] * qx + b[1] * u.current])

    states[0] = x
    flux[0] = law(x)
    for k in range(len(t) - 1):
        h = t[k + 1] - t[k]
        k1 = f(x, 2 * k)
        k2 = f(x + 0.5 * h * k1, 2 * k + 1)
        k3 = f(x + 0.5 * h * k2, 2 * k + 1)
        k4 = f(x + h * k3, 2 * k + 2)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"non-finite plant state after t={t[k]:g} min",
                                   time=float(t[k]))
        x = np.clip(x, 0.0, 1.0)
        states[k + 1] = x
        flux[k + 1] = law(x)
    return _trajectory(p, t, states, flux, cur[0::2], flow[0::2])


def _trajectory(p, t, states, flux, cur, flow):
    v, clamped = nernst_voltage(states[:, 1], cur, p, full_output=True)
    return Trajectory(time=t, soc=states[:, 0].copy(), soc_cell=states[:, 1].copy(),
                      crossover_flux=flux, v_out=np.atleast_1d(v), current=cur,
                      flow_rate=flow, clamped=np.atleast_1d(clamped),
                      omega=states[:, 2:].copy())
