"""Parametric crossover model and the augmented state-space matrices.

The crossover flux is written as ``psi(s) * theta`` with ``theta`` the first
state of a pure integrator chain.  Appending the chain to the battery states
gives an (l+2)-dimensional linear-parameter-varying model.  A diagonal
similarity removes the ``psi`` dependence, leaving a matrix affine in the
flow rate alone, which is then embedded in a two-vertex polytope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .battery import BatteryParams, BatteryState
from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class CrossoverModelConfig:
    order_l: int = 3
    lam: tuple = (0.5, 0.025)
    varrho: float = 1e-4

    def __post_init__(self):
        if int(self.order_l) != self.order_l or self.order_l < 1:
            raise ConfigError(f"order_l must be an integer >= 1, got {self.order_l!r}")
        object.__setattr__(self, "lam", tuple(float(v) for v in self.lam))
        if len(self.lam) != self.order_l - 1:
            raise ConfigError(
                f"lambda needs order_l - 1 = {self.order_l - 1} entries, got {len(self.lam)}")
        if any(not (v > 0 and math.isfinite(v)) for v in self.lam):
            raise ConfigError("every lambda gain must be positive")
        if not (self.varrho > 0 and math.isfinite(self.varrho)):
            raise ConfigError(f"varrho must be positive, got {self.varrho!r}")

    @property
    def dim(self) -> int:
        return self.order_l + 2


@dataclass(frozen=True)
class AugmentedState:
    z: BatteryState
    omega: tuple

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.z.soc, self.z.soc_cell], self.omega])

    @classmethod
    def from_array(cls, x) -> "AugmentedState":
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise DomainError("augmented state must be finite")
        # estimates may leave [0, 1]; bypass BatteryState's range check
        z = object.__new__(BatteryState)
        object.__setattr__(z, "soc", float(x[0]))
        object.__setattr__(z, "soc_cell", float(x[1]))
        return cls(z, tuple(float(v) for v in x[2:]))

    @property
    def theta(self) -> float:
        return self.omega[0]


@dataclass(frozen=True)
class AugmentedMatrices:
    a_e: np.ndarray
    b_e: np.ndarray
    c_e: np.ndarray
    e_e: np.ndarray


@dataclass(frozen=True)
class TransformT:
    psi_val: float
    varrho: float
    diag: np.ndarray

    @property
    def inverse_diag(self) -> np.ndarray:
        return 1.0 / self.diag

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)

    def inverse_matrix(self) -> np.ndarray:
        return np.diag(self.inverse_diag)


@dataclass(frozen=True)
class BoundSet:
    """Norm bounds behind the ultimate-bound diagnostics.

    Defaults follow from the implemented ``psi`` and SOC range; the
    remaining bounds default to zero and are meant to be supplied by the user.
    """

    gamma_z: float = math.sqrt(2.0)
    gamma_theta: float = 0.0
    gamma_omega: float = 0.0
    eps_bar: float = 0.0
    gamma_psi: float = 1.0
    gamma_psi_tilde: float = 0.5
    gamma_s_tilde: float = 1.0
    gamma_T: float = 0.0
    tau_m: float = 1.0
    tau_M: float = 1.0

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"bound {name} must be finite and non-negative")
        if self.tau_m > self.tau_M:
            raise ConfigError("tau_m must not exceed tau_M")

    @classmethod
    def for_config(cls, cfg: CrossoverModelConfig, **overrides) -> "BoundSet":
        """Bounds with tau_m, tau_M matched to ``psi`` in [0.5, 1] and ``cfg.varrho``."""
        taus = {"tau_m": min(1.0, 0.5 / cfg.varrho), "tau_M": max(1.0, 1.0 / cfg.varrho)}
        taus.update(overrides)
        return cls(**taus)


def build_lambda_matrix(cfg: CrossoverModelConfig) -> np.ndarray:
    lam = np.zeros((cfg.order_l, cfg.order_l))
    for i, v in enumerate(cfg.lam):
        lam[i, i + 1] = v
    return lam


def psi(s_hat: float) -> float:
    """Crossover shape function 0.5 (1 + s), argument clamped to [0, 1]."""
    return 0.5 * (1.0 + min(max(s_hat, 0.0), 1.0))


def _check_flow(q):
    if not (q > 0 and math.isfinite(q)):
        raise DomainError(f"flow rate must be positive, got {q!r}")


def _assemble(top_right: np.ndarray, q: float, p: BatteryParams,
              cfg: CrossoverModelConfig) -> np.ndarray:
    n = cfg.dim
    a = np.zeros((n, n))
    rate = p.mixing_rate(q)
    a[1, 0] = rate
    a[1, 1] = -rate
    a[0:2, 2] = top_right
    a[2:, 2:] = build_lambda_matrix(cfg)
    return a


def build_augmented(psi_val: float, q: float, p: BatteryParams,
                    cfg: CrossoverModelConfig) -> AugmentedMatrices:
    """Matrices (A_e, B_e, C_e, E_e) of the augmented model at a given psi and flow."""
    if not (psi_val > 0 and math.isfinite(psi_val)):
        raise DomainError(f"psi_val must be positive, got {psi_val!r}")
    _check_flow(q)
    n = cfg.dim
    a_e = _assemble(p.e_vec * psi_val, q, p, cfg)
    b_e = np.zeros(n)
    b_e[:2] = p.b_vec
    e_e = np.zeros(n)
    e_e[:2] = p.e_vec
    c_e = np.zeros(n)
    c_e[1] = 1.0
    return AugmentedMatrices(a_e=a_e, b_e=b_e, c_e=c_e, e_e=e_e)


def build_transform(psi_val: float, cfg: CrossoverModelConfig) -> TransformT:
    if psi_val == 0 or not math.isfinite(psi_val):
        raise DomainError("transformation is singular for psi_val = 0")
    d = np.ones(cfg.dim)
    d[2:] = psi_val / cfg.varrho
    return TransformT(psi_val=psi_val, varrho=cfg.varrho, diag=d)


def build_script_a(q: float, p: BatteryParams, cfg: CrossoverModelConfig) -> np.ndarray:
    """The psi-free matrix T A_e T^-1, affine in the flow rate."""
    _check_flow(q)
    return _assemble(cfg.varrho * p.e_vec, q, p, cfg)


def polytope_vertices(q_min: float, q_max: float, p: BatteryParams,
                      cfg: CrossoverModelConfig):
    if not (0 < q_min < q_max):
        raise ConfigError(f"need 0 < q_min < q_max, got q_min={q_min!r}, q_max={q_max!r}")
    return build_script_a(q_min, p, cfg), build_script_a(q_max, p, cfg)


def polytope_weight(q: float, q_min: float, q_max: float) -> float:
    """Weight on the q_min vertex that reproduces the matrix at flow ``q``."""
    return (q_max - q) / (q_max - q_min)


def crossover_estimate(psi_val: float, theta: float) -> float:
    return psi_val * theta


def delta_bar(bounds: BoundSet, sigma: float, gamma_e: float) -> float:
    """Bound on the uncertainty the feedback gain cannot compensate."""
    if not (0.0 <= sigma <= 1.0):
        raise DomainError(f"sigma must lie in [0, 1], got {sigma!r}")
    b = bounds
    return b.tau_M * gamma_e * (
        b.gamma_psi_tilde * b.gamma_s_tilde * b.gamma_z * max(b.gamma_z, b.gamma_omega)
        * (1.0 - sigma) + b.eps_bar)
