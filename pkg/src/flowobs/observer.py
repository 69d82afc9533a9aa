"""Augmented state/parameter observer driven by sampled voltage measurements.

The observer integrates

    dx_hat/dt = A_e(psi(z2_hat), Q) x_hat + B_e I + H_t (y - z2_hat),
    H_t = T^-1(psi(z2_hat)) P^-1 Z,

with the measured voltage inverted to SOC_cell before forming the
innovation.  Measurements, current and flow are held constant between
samples; the gain is re-evaluated at every RK4 stage.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .augmentation import (AugmentedState, CrossoverModelConfig, build_augmented,
                           build_transform, psi)
from .battery import BatteryParams, PlantInputs, Trajectory, invert_nernst
from .errors import (AlignmentError, ConfigError, DimensionMismatchError, DomainError,
                     IngestionError, IntegrationError)

log = logging.getLogger(__name__)

NOMINAL_X_HAT0 = (0.87, 0.85)


def default_x_hat0(cfg: CrossoverModelConfig) -> AugmentedState:
    """Initial estimate [0.87, 0.85, 0, ..., 0]."""
    return AugmentedState.from_array(list(NOMINAL_X_HAT0) + [0.0] * cfg.order_l)


@dataclass(frozen=True)
class ObserverConfig:
    gain_factor: np.ndarray
    params: BatteryParams = field(default_factory=BatteryParams)
    cfg: CrossoverModelConfig = field(default_factory=CrossoverModelConfig)
    x_hat0: Optional[AugmentedState] = None
    dt: float = 0.01
    # flows outside this interval are flagged in the trace (not fatal)
    q_range: Optional[tuple] = None

    def __post_init__(self):
        g = np.asarray(self.gain_factor, dtype=float).reshape(-1)
        object.__setattr__(self, "gain_factor", g)
        if g.shape != (self.cfg.dim,):
            raise DimensionMismatchError(
                f"gain_factor has {g.size} entries, model dimension is {self.cfg.dim}")
        if not np.all(np.isfinite(g)):
            raise ConfigError("gain_factor must be finite")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if self.x_hat0 is None:
            object.__setattr__(self, "x_hat0", default_x_hat0(self.cfg))
        elif len(self.x_hat0.as_array()) != self.cfg.dim:
            raise DimensionMismatchError("x_hat0 dimension does not match the model")

    def gain_at(self, x_hat) -> np.ndarray:
        """H_t at the current estimate."""
        t = build_transform(psi(float(x_hat[1])), self.cfg)
        return t.inverse_diag * self.gain_factor


@dataclass(frozen=True)
class MeasurementSample:
    time: float
    v_out: float
    current: float = 0.0
    flow_rate: float = 9.0e-3

    def __post_init__(self):
        for name in ("time", "v_out", "current", "flow_rate"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"measurement {name} must be finite")
        if self.flow_rate <= 0:
            raise DomainError(f"flow rate must be positive, got {self.flow_rate!r}")


@dataclass(frozen=True)
class ObserverTrace:
    time: np.ndarray
    x_hat: np.ndarray
    y_meas: np.ndarray
    y_hat: np.ndarray
    innovation: np.ndarray
    gain: np.ndarray
    crossover: np.ndarray
    warnings: tuple = ()

    def __len__(self):
        return len(self.time)

    @property
    def soc(self) -> np.ndarray:
        return self.x_hat[:, 0]

    @property
    def soc_cell(self) -> np.ndarray:
        return self.x_hat[:, 1]

    @property
    def omega(self) -> np.ndarray:
        return self.x_hat[:, 2:]

    def gamma_t_estimate(self) -> float:
        """max |d(psi)/dt / psi| over the run, by backward differences.

        Diagnostic for the rate bound on the gain transformation; the
        observer never uses it.
        """
        return estimate_gamma_t(self.time, self.soc_cell)


def estimate_gamma_t(time, soc_cell_hat) -> float:
    s = np.clip(np.asarray(soc_cell_hat, dtype=float), 0.0, 1.0)
    ps = 0.5 * (1.0 + s)
    if len(ps) < 2:
        return 0.0
    rate = np.diff(ps) / np.diff(np.asarray(time, dtype=float)) / ps[1:]
    return float(np.max(np.abs(rate)))


def _as_vector(x) -> np.ndarray:
    if isinstance(x, AugmentedState):
        return x.as_array()
    return np.asarray(x, dtype=float).reshape(-1)


def observer_derivative(x_hat, y_meas: float, u: PlantInputs,
                        oc: ObserverConfig) -> np.ndarray:
    """Right-hand side of the observer, assembled from the model matrices."""
    x = _as_vector(x_hat)
    if x.shape != (oc.cfg.dim,):
        raise DimensionMismatchError("state dimension does not match the model")
    if not (np.all(np.isfinite(x)) and math.isfinite(y_meas)):
        raise DomainError("observer inputs must be finite")
    mats = build_augmented(psi(x[1]), u.flow_rate, oc.params, oc.cfg)
    return mats.a_e @ x + mats.b_e * u.current + oc.gain_at(x) * (y_meas - x[1])


def _kernel_args(oc: ObserverConfig):
    p = oc.params
    return (p.c0, p.v_res, p.v_cell, p.epsilon, p.constants.faraday_per_minute,
            np.array(oc.cfg.lam, dtype=float), oc.cfg.varrho, oc.gain_factor)


def step(x_hat, sample: MeasurementSample, next_sample: MeasurementSample,
         oc: ObserverConfig) -> np.ndarray:
    """Advance the estimate from ``sample.time`` to ``next_sample.time``."""
    if not next_sample.time >= sample.time:
        raise IngestionError("next sample must not precede the current one")
    x = _as_vector(x_hat)
    y = invert_nernst(sample.v_out, sample.current, oc.params)
    states, fail = kernels.observer_rk4(
        np.array([sample.time, next_sample.time], dtype=float), np.array([y], dtype=float),
        np.array([sample.current], dtype=float), np.array([sample.flow_rate], dtype=float),
        x, oc.dt, *_kernel_args(oc))
    if fail >= 0:
        raise IntegrationError(f"observer diverged after t={sample.time:g} min",
                               time=sample.time)
    return states[1].copy()


def _check_stream(stream: Sequence[MeasurementSample]):
    if len(stream) < 2:
        raise IngestionError(f"need at least 2 samples, got {len(stream)}")
    for i in range(1, len(stream)):
        if not stream[i].time > stream[i - 1].time:
            raise IngestionError(
                f"sample {i} at t={stream[i].time!r} does not follow t={stream[i - 1].time!r}")


def run(oc: ObserverConfig, stream: Sequence[MeasurementSample]) -> ObserverTrace:
    """Run the observer over an ordered measurement stream."""
    stream = list(stream)
    _check_stream(stream)
    ts = np.array([s.time for s in stream], dtype=float)
    vs = np.array([s.v_out for s in stream], dtype=float)
    curs = np.array([s.current for s in stream], dtype=float)
    flows = np.array([s.flow_rate for s in stream], dtype=float)
    warnings = []
    if oc.q_range is not None:
        lo, hi = oc.q_range
        bad = np.flatnonzero((flows < lo) | (flows > hi))
        if bad.size:
            msg = (f"{bad.size} samples have flow outside [{lo:g}, {hi:g}] L/min "
                   f"(first at index {bad[0]})")
            log.warning(msg)
            warnings.append(msg)
    ys = np.atleast_1d(invert_nernst(vs, curs, oc.params))
    states, fail = kernels.observer_rk4(ts, ys, curs, flows, oc.x_hat0.as_array(), oc.dt,
                                        *_kernel_args(oc))
    if fail >= 0:
        raise IntegrationError(f"observer diverged after t={ts[fail]:g} min",
                               time=float(ts[fail]))
    s = np.clip(states[:, 1], 0.0, 1.0)
    psis = 0.5 * (1.0 + s)
    gains = np.empty_like(states)
    gains[:, :2] = oc.gain_factor[:2]
    gains[:, 2:] = np.outer(oc.cfg.varrho / psis, oc.gain_factor[2:])
    return ObserverTrace(time=ts, x_hat=states, y_meas=ys, y_hat=states[:, 1].copy(),
                         innovation=ys - states[:, 1], gain=gains,
                         crossover=psis * states[:, 2], warnings=tuple(warnings))


def samples_from_trajectory(truth: Trajectory, period: float,
                            noise: Optional[np.ndarray] = None):
    """Pick measurement samples from a dense plant run every ``period`` minutes.

    ``noise`` (volts, one entry per sample) is added to the voltage.
    """
    if not period > 0:
        raise ConfigError("sample period must be positive")
    dt = truth.time[1] - truth.time[0]
    stride = int(round(period / dt))
    if stride < 1 or abs(stride * dt - period) > 1e-9 * max(1.0, period):
        raise ConfigError(f"sample period {period} is not a multiple of the step {dt}")
    idx = np.arange(0, len(truth.time), stride)
    v = truth.v_out[idx].copy()
    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != v.shape:
            raise DimensionMismatchError(f"need {v.size} noise values, got {noise.size}")
        v = v + noise
    return [MeasurementSample(float(truth.time[i]), float(vv), float(truth.current[i]),
                              float(truth.flow_rate[i])) for i, vv in zip(idx, v)]


# -- error diagnostics ---------------------------------------------------------------

@dataclass(frozen=True)
class ErrorReport:
    time: np.ndarray
    z_error: np.ndarray
    z_error_norm: np.ndarray
    flux_error: np.ndarray
    theta_error: Optional[np.ndarray]
    sup_norm: float
    terminal_norm: float
    initial_norm: float
    fitted_rate: float
    fit_window: tuple
    predicted_rate: Optional[float] = None

    @property
    def rate_ratio(self) -> Optional[float]:
        if self.predicted_rate is None or self.predicted_rate == 0:
            return None
        return self.fitted_rate / self.predicted_rate


def fit_decay_rate(t, e, floor: float = 0.0) -> float:
    """Least-squares rate ``r`` in ``|e(t)| ~ C exp(-r t)``.

    Points with ``|e| <= floor`` are discarded.
    """
    t = np.asarray(t, dtype=float)
    e = np.abs(np.asarray(e, dtype=float))
    keep = e > max(floor, 0.0)
    if np.count_nonzero(keep) < 2:
        return 0.0
    slope = np.polyfit(t[keep], np.log(e[keep]), 1)[0]
    return float(-slope)


def error_metrics(truth: Trajectory, trace: ObserverTrace, window=None,
                  predicted_rate: Optional[float] = None) -> ErrorReport:
    """Estimation error of ``trace`` against the plant run ``truth``.

    Truth is linearly interpolated onto the trace times that fall inside its
    time range.  The decay rate is fitted to ``||z_err||`` over ``window``
    (default: the whole overlap).
    """
    lo, hi = truth.time[0], truth.time[-1]
    inside = (trace.time >= lo - 1e-12) & (trace.time <= hi + 1e-12)
    if np.count_nonzero(inside) == 0:
        raise AlignmentError(
            f"trace [{trace.time[0]:g}, {trace.time[-1]:g}] and truth [{lo:g}, {hi:g}] "
            "do not overlap")
    t = trace.time[inside]
    soc = np.interp(t, truth.time, truth.soc)
    soc_cell = np.interp(t, truth.time, truth.soc_cell)
    flux = np.interp(t, truth.time, truth.crossover_flux)
    z_err = np.column_stack([soc, soc_cell]) - trace.x_hat[inside, :2]
    norm = np.linalg.norm(z_err, axis=1)
    theta_err = None
    if truth.omega.size and truth.omega.shape[1] == trace.omega.shape[1]:
        om = np.column_stack([np.interp(t, truth.time, truth.omega[:, j])
                              for j in range(truth.omega.shape[1])])
        theta_err = om - trace.omega[inside]
    if window is None:
        window = (float(t[0]), float(t[-1]))
    sel = (t >= window[0]) & (t <= window[1])
    rate = fit_decay_rate(t[sel], norm[sel], floor=1e-300)
    return ErrorReport(time=t, z_error=z_err, z_error_norm=norm,
                       flux_error=flux - trace.crossover[inside], theta_error=theta_err,
                       sup_norm=float(norm.max()), terminal_norm=float(norm[-1]),
                       initial_norm=float(norm[0]), fitted_rate=rate,
                       fit_window=tuple(window), predicted_rate=predicted_rate)
