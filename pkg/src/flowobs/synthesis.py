"""Polytopic LMI synthesis of the observer gain.

Decision variables are P = P^T > 0, W = W^T > 0, the gain vector Z and the
scalars alpha_bar, gamma_Z.  For each flow-rate vertex A_i the program
requires

    [ -A_i^T P - P A_i + C^T Z^T + Z C - beta*Ibar - W    P            ]
    [  P                                                 alpha_bar*I  ]  >= 0

together with ``||Z|| <= gamma_Z`` and minimizes ``alpha_bar + kappa_Z gamma_Z``.
The observer then uses ``H_t = T^-1(t) P^-1 Z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import sdp
from .augmentation import (BoundSet, CrossoverModelConfig, TransformT, build_script_a,
                           delta_bar, polytope_vertices)
from .battery import BatteryParams
from .errors import (ConfigError, DimensionMismatchError, NumericalError, SynthesisError,
                     VerificationError)
from .textio import dump_records, load_records

DEFINITE_FLOOR = 1e-9
BLOCK_TOLERANCE = 1e-6
RESULT_FORMAT = "flowobs-gain-v1"


@dataclass(frozen=True)
class SynthesisConfig:
    beta: float = 1e-4
    kappa_z: float = 0.01
    q_min: float = 0.25 * 9.0e-3
    q_max: float = 2.0 * 9.0e-3
    feas_margin: float = 0.0
    cfg: CrossoverModelConfig = field(default_factory=CrossoverModelConfig)
    params: BatteryParams = field(default_factory=BatteryParams)
    # bounding box on trace(P), trace(W), alpha_bar, gamma_Z; keeps the
    # barrier problem bounded when kappa_Z = 0
    box_radius: float = 1e6
    feas_tol: float = 1e-7
    gap_tol: float = 1e-6
    max_iter: int = 200

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ConfigError(f"beta must be positive, got {self.beta!r}")
        if not (self.kappa_z >= 0 and math.isfinite(self.kappa_z)):
            raise ConfigError(f"kappa_z must be non-negative, got {self.kappa_z!r}")
        if not (0 < self.q_min < self.q_max):
            raise ConfigError(f"need 0 < q_min < q_max, got {self.q_min!r}, {self.q_max!r}")
        if not (self.feas_margin >= 0):
            raise ConfigError("feas_margin must be non-negative")
        if not (self.box_radius > 0):
            raise ConfigError("box_radius must be positive")

    @property
    def dim(self) -> int:
        return self.cfg.dim

    def vertices(self):
        return polytope_vertices(self.q_min, self.q_max, self.params, self.cfg)


@dataclass(frozen=True)
class SynthesisResult:
    p_mat: np.ndarray
    z_vec: np.ndarray
    w_mat: np.ndarray
    alpha_bar: float
    gamma_z_norm: float
    gain_factor: np.ndarray
    vertex_margins: np.ndarray
    beta: float
    gamma_e: float
    varrho: float
    q_min: float
    q_max: float
    objective: float = float("nan")
    iterations: int = 0

    @property
    def dim(self) -> int:
        return self.p_mat.shape[0]


@dataclass
class CertificateReport:
    q_values: np.ndarray
    block_margins: np.ndarray
    spectral_abscissa: np.ndarray
    eigenvalues: list
    lambda_min_p: float
    lambda_min_w: float
    symmetric: bool
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        lines = [f"lambda_min(P) = {self.lambda_min_p:.6e}",
                 f"lambda_min(W) = {self.lambda_min_w:.6e}",
                 "Q [L/min]        block margin     max Re(eig) closed loop"]
        for q, m, a in zip(self.q_values, self.block_margins, self.spectral_abscissa):
            lines.append(f"{q:.6e}   {m: .6e}   {a: .6e}")
        lines.append("status: " + ("PASS" if self.passed else "FAIL: " + "; ".join(self.failures)))
        return "\n".join(lines)


@dataclass(frozen=True)
class EuubReport:
    c_m: float
    c_M: float
    c_W: float
    c_bar: float
    rho: float
    mu: float
    delta_bar: float
    delta_cap: float
    r_delta: float
    r_xtilde: float
    decay_rate: float
    kappa_p: float
    kappa_t: float
    gamma: float
    admissible: bool
    valid: bool

    def summary(self) -> str:
        flag = "valid" if self.valid else "INVALID (c_bar <= 0: gamma_T too large for rho)"
        return "\n".join([
            f"c_m = {self.c_m:.6e}  c_M = {self.c_M:.6e}  c_W = {self.c_W:.6e}",
            f"c_bar = {self.c_bar:.6e}  ({flag})",
            f"delta_bar = {self.delta_bar:.6e}  Delta = {self.delta_cap:.6e}",
            f"r_delta = {self.r_delta:.6e}  r_xtilde = {self.r_xtilde:.6e}",
            f"decay rate = {self.decay_rate:.6e} 1/min",
            f"gamma = {self.gamma:.6e}  beta/alpha_bar >= gamma^2: {self.admissible}",
        ])


# -- variable layout -------------------------------------------------------------

def sym_basis(n: int) -> np.ndarray:
    """Upper-triangular basis of symmetric n x n matrices, shape (n(n+1)/2, n, n)."""
    mats = []
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1.0
            mats.append(e)
    return np.array(mats)


@dataclass(frozen=True)
class VariableLayout:
    """Index map from (P, W, Z, alpha_bar, gamma_Z) onto the flat SDP vector."""

    n: int

    @property
    def n_sym(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def p_slice(self) -> slice:
        return slice(0, self.n_sym)

    @property
    def w_slice(self) -> slice:
        return slice(self.n_sym, 2 * self.n_sym)

    @property
    def z_slice(self) -> slice:
        return slice(2 * self.n_sym, 2 * self.n_sym + self.n)

    @property
    def alpha_index(self) -> int:
        return 2 * self.n_sym + self.n

    @property
    def gamma_index(self) -> int:
        return 2 * self.n_sym + self.n + 1

    @property
    def size(self) -> int:
        return 2 * self.n_sym + self.n + 2

    def unpack(self, y):
        basis = sym_basis(self.n)
        p = np.tensordot(y[self.p_slice], basis, axes=1)
        w = np.tensordot(y[self.w_slice], basis, axes=1)
        return p, w, np.array(y[self.z_slice]), float(y[self.alpha_index]), \
            float(y[self.gamma_index])


def _ibar(n: int) -> np.ndarray:
    ib = np.zeros((n, n))
    ib[0, 0] = ib[1, 1] = 1.0
    return ib


def _c_e(n: int) -> np.ndarray:
    c = np.zeros(n)
    c[1] = 1.0
    return c


# -- block assembly ----------------------------------------------------------------

def assemble_vertex_block(script_a, c_e, layout: VariableLayout, beta: float,
                          shift: float = 0.0) -> sdp.LmiBlock:
    """Affine 2n x 2n vertex constraint in the flat decision vector."""
    n = layout.n
    script_a = np.asarray(script_a, dtype=float)
    c_e = np.asarray(c_e, dtype=float).reshape(-1)
    if script_a.shape != (n, n) or c_e.shape != (n,):
        raise DimensionMismatchError(
            f"vertex block expects {n}x{n} matrix and length-{n} output row")
    size = 2 * n
    f0 = np.zeros((size, size))
    f0[:n, :n] = -beta * _ibar(n)
    f0 -= shift * np.eye(size)
    coeffs = np.zeros((layout.size, size, size))
    for k, e in enumerate(sym_basis(n)):
        kp = layout.p_slice.start + k
        coeffs[kp, :n, :n] = -script_a.T @ e - e @ script_a
        coeffs[kp, :n, n:] = e
        coeffs[kp, n:, :n] = e
        coeffs[layout.w_slice.start + k, :n, :n] = -e
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = 1.0
        coeffs[layout.z_slice.start + i, :n, :n] = np.outer(c_e, ei) + np.outer(ei, c_e)
    coeffs[layout.alpha_index, n:, n:] = np.eye(n)
    return sdp.LmiBlock(f0, coeffs)


def vertex_block_value(script_a, c_e, p, z, w, beta, alpha_bar) -> np.ndarray:
    """The vertex constraint evaluated at concrete (P, Z, W, alpha_bar)."""
    n = p.shape[0]
    c_e = np.asarray(c_e, dtype=float).reshape(-1)
    top = (-script_a.T @ p - p @ script_a + np.outer(c_e, z) + np.outer(z, c_e)
           - beta * _ibar(n) - w)
    return np.block([[top, p], [p, alpha_bar * np.eye(n)]])


def _znorm_block(layout: VariableLayout) -> sdp.LmiBlock:
    n = layout.n
    coeffs = np.zeros((layout.size, n + 1, n + 1))
    for i in range(n):
        coeffs[layout.z_slice.start + i, i, n] = 1.0
        coeffs[layout.z_slice.start + i, n, i] = 1.0
    coeffs[layout.gamma_index] = np.eye(n + 1)
    return sdp.LmiBlock(np.zeros((n + 1, n + 1)), coeffs)


def _floor_block(layout: VariableLayout, which: slice) -> sdp.LmiBlock:
    n = layout.n
    coeffs = np.zeros((layout.size, n, n))
    coeffs[which] = sym_basis(n)
    return sdp.LmiBlock(-DEFINITE_FLOOR * np.eye(n), coeffs)


def _box_block(layout: VariableLayout, radius: float) -> sdp.LmiBlock:
    coeffs = np.zeros((layout.size, 4, 4))
    traces = np.array([np.trace(e) for e in sym_basis(layout.n)])
    coeffs[layout.p_slice, 0, 0] = -traces
    coeffs[layout.w_slice, 1, 1] = -traces
    coeffs[layout.alpha_index, 2, 2] = -1.0
    coeffs[layout.gamma_index, 3, 3] = -1.0
    return sdp.LmiBlock(radius * np.eye(4), coeffs)


def build_problem(config: SynthesisConfig):
    """Translate the polytopic program into an :class:`sdp.SdpProblem`."""
    n = config.dim
    layout = VariableLayout(n)
    c_e = _c_e(n)
    blocks = [assemble_vertex_block(a, c_e, layout, config.beta, config.feas_margin)
              for a in config.vertices()]
    blocks += [_znorm_block(layout), _floor_block(layout, layout.p_slice),
               _floor_block(layout, layout.w_slice), _box_block(layout, config.box_radius)]
    c = np.zeros(layout.size)
    c[layout.alpha_index] = 1.0
    c[layout.gamma_index] = config.kappa_z
    return sdp.SdpProblem(c, tuple(blocks)), layout


def synthesize(config: SynthesisConfig) -> SynthesisResult:
    """Solve the polytopic LMI program and return a certified gain."""
    problem, layout = build_problem(config)
    sol = sdp.solve(problem, feas_tol=config.feas_tol, gap_tol=config.gap_tol,
                    max_iter=config.max_iter)
    if sol.status == sdp.INFEASIBLE:
        raise SynthesisError(f"LMI program infeasible: {sol.message}", solution=sol)
    if sol.status != sdp.OPTIMAL:
        raise NumericalError(f"SDP solver ended with status {sol.status}: {sol.message}",
                             trace=sol.stage_objectives)
    p, w, z, alpha_bar, gamma_z = layout.unpack(sol.y)
    c_e = _c_e(layout.n)
    margins = np.array([sdp.min_eig(vertex_block_value(a, c_e, p, z, w, config.beta,
                                                       alpha_bar))
                        for a in config.vertices()])
    return SynthesisResult(
        p_mat=p, z_vec=z, w_mat=w, alpha_bar=alpha_bar, gamma_z_norm=gamma_z,
        gain_factor=np.linalg.solve(p, z), vertex_margins=margins, beta=config.beta,
        gamma_e=float(np.linalg.norm(config.params.e_vec)), varrho=config.cfg.varrho,
        q_min=config.q_min, q_max=config.q_max, objective=sol.objective_value,
        iterations=sol.iterations)


# -- certificates -------------------------------------------------------------------

def closed_loop_matrix(result: SynthesisResult, script_a) -> np.ndarray:
    return script_a - np.outer(result.gain_factor, _c_e(result.dim))


def verify_solution(result: SynthesisResult, config: SynthesisConfig,
                    n_samples: int = 11, stability_margin: float = 1e-8,
                    raise_on_failure: bool = True) -> CertificateReport:
    """Re-check a synthesized gain over ``n_samples`` flows spanning [q_min, q_max].

    Checks the vertex constraint (interpolated along the flow segment), the
    closed-loop spectrum of ``A(Q) - P^-1 Z C_e``, and positivity of P and W,
    using eigenvalue routines that never see the solver's internal state.
    """
    n = config.dim
    if result.dim != n:
        raise DimensionMismatchError(
            f"gain has dimension {result.dim}, configuration implies {n}")
    failures = []
    p, w, z = result.p_mat, result.w_mat, result.z_vec
    scale = max(1.0, float(np.max(np.abs(p))))
    symmetric = bool(np.max(np.abs(p - p.T)) <= 1e-12 * scale
                     and np.max(np.abs(w - w.T)) <= 1e-12 * max(1.0, np.max(np.abs(w))))
    if not symmetric:
        failures.append("P or W is not symmetric")
    ps, ws = 0.5 * (p + p.T), 0.5 * (w + w.T)
    lam_p, lam_w = sdp.min_eig(ps), sdp.min_eig(ws)
    if lam_p <= 0:
        failures.append(f"P not positive definite (lambda_min={lam_p:.3e})")
    if lam_w <= 0:
        failures.append(f"W not positive definite (lambda_min={lam_w:.3e})")
    gain = np.linalg.solve(ps, z)
    qs = np.linspace(config.q_min, config.q_max, max(n_samples, 2))
    c_e = _c_e(n)
    margins, abscissa, eigs = [], [], []
    for q in qs:
        a = build_script_a(q, config.params, config.cfg)
        margin = sdp.min_eig(vertex_block_value(a, c_e, ps, z, ws, config.beta,
                                                result.alpha_bar))
        ev = np.linalg.eigvals(a - np.outer(gain, c_e))
        margins.append(margin)
        abscissa.append(float(np.max(ev.real)))
        eigs.append(ev)
        if margin < config.feas_margin - BLOCK_TOLERANCE:
            failures.append(f"vertex block margin {margin:.3e} at Q={q:.6e}")
        if abscissa[-1] > -stability_margin:
            failures.append(f"closed loop not stable at Q={q:.6e} "
                            f"(max Re = {abscissa[-1]:.3e})")
    report = CertificateReport(q_values=qs, block_margins=np.array(margins),
                               spectral_abscissa=np.array(abscissa), eigenvalues=eigs,
                               lambda_min_p=lam_p, lambda_min_w=lam_w,
                               symmetric=symmetric, failures=failures)
    if failures and raise_on_failure:
        raise VerificationError("gain verification failed: " + "; ".join(failures),
                                report=report)
    return report


def gain_at(result: SynthesisResult, t_transform: TransformT) -> np.ndarray:
    return t_transform.inverse_diag * result.gain_factor


def euub_report(result: SynthesisResult, bounds: BoundSet, rho: float = 0.5,
                mu: float = 0.5, r: float = 1.0, sigma: float = 0.5) -> EuubReport:
    """Ultimate-bound diagnostics for a synthesized gain."""
    if not (0 < rho <= 1 and 0 < mu <= 1):
        raise ConfigError("rho and mu must lie in (0, 1]")
    w_p = sdp.sym_eig(result.p_mat)[0]
    c_m, c_M = float(w_p[0]), float(w_p[-1])
    c_W = sdp.min_eig(result.w_mat)
    c_bar = c_W - 2.0 * rho * bounds.gamma_T * c_M
    dbar = delta_bar(bounds, sigma, result.gamma_e)
    cap = dbar + (1.0 - rho) * bounds.gamma_T * r
    # an indefinite P carries no Lyapunov bound at all
    valid = c_bar > 0 and c_m > 0
    if valid:
        r_delta = 2.0 * c_M * cap / (mu * c_bar)
        r_x = math.sqrt(c_M / c_m) * (c_M / bounds.tau_m) * (2.0 / (mu * c_bar)) * cap
    else:
        r_delta = r_x = math.inf
    decay = (1.0 - mu) * c_bar / (2.0 * c_M)
    gamma = sigma * result.gamma_e * bounds.gamma_theta * bounds.gamma_psi_tilde \
        * bounds.gamma_s_tilde
    return EuubReport(c_m=c_m, c_M=c_M, c_W=c_W, c_bar=c_bar, rho=rho, mu=mu,
                      delta_bar=dbar, delta_cap=cap, r_delta=r_delta, r_xtilde=r_x,
                      decay_rate=decay, kappa_p=c_M / c_m if c_m > 0 else math.inf,
                      kappa_t=bounds.tau_M / bounds.tau_m, gamma=gamma,
                      admissible=result.beta / result.alpha_bar >= gamma ** 2,
                      valid=valid)


# -- persistence --------------------------------------------------------------------

_SCALARS = ("alpha_bar", "gamma_z_norm", "beta", "gamma_e", "varrho", "q_min", "q_max",
            "objective")
_ARRAYS = ("p_mat", "z_vec", "w_mat", "gain_factor", "vertex_margins")


def dumps_result(result: SynthesisResult) -> str:
    records = [("dim", result.dim)]
    records += [(k, getattr(result, k)) for k in _SCALARS]
    records += [(k, getattr(result, k)) for k in _ARRAYS]
    return dump_records(records, header=RESULT_FORMAT)


def loads_result(text: str) -> SynthesisResult:
    if not text.startswith(f"# {RESULT_FORMAT}"):
        raise ConfigError(f"not a {RESULT_FORMAT} file")
    rec = load_records(text)
    missing = [k for k in ("dim",) + _SCALARS + _ARRAYS if k not in rec]
    if missing:
        raise ConfigError(f"gain file lacks records: {', '.join(missing)}")
    n = int(rec["dim"])
    for k in ("p_mat", "w_mat"):
        if rec[k].shape != (n, n):
            raise DimensionMismatchError(f"{k} has shape {rec[k].shape}, header says {n}")
    for k in ("z_vec", "gain_factor"):
        if rec[k].shape != (n,):
            raise DimensionMismatchError(f"{k} has length {len(rec[k])}, header says {n}")
    return SynthesisResult(**{k: float(rec[k]) for k in _SCALARS},
                           **{k: rec[k] for k in _ARRAYS})


def save_result(result: SynthesisResult, path) -> Path:
    path = Path(path)
    path.write_text(dumps_result(result))
    return path


def load_result(path) -> SynthesisResult:
    return loads_result(Path(path).read_text())
