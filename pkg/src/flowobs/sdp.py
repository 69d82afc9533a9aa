"""Dense solver for small semidefinite programs in LMI form.

Problems are stated as

    minimize    c^T y
    subject to  F0_k + sum_i y_i F_ik  >= 0   for every block k

and solved by a two-phase log-barrier method: phase 1 finds a strictly
feasible point by maximizing a uniform eigenvalue margin ``t``, phase 2
follows the central path with damped Newton steps while the barrier
weight grows tenfold per stage.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, NumericalError
from .textio import dump_records, load_records

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"
NUMERICAL = "numerical"

ARMIJO = 0.01
SHRINK = 0.5
MU_FACTOR = 10.0
CENTER_TOL = 1e-9
UNBOUNDED_NORM = 1e12
PHASE1_RADIUS = 1e8
RESIDUAL_TOL = 1e-9
RIDGE0 = 1e-12


# -- symmetric eigen-decomposition -------------------------------------------

def sym_eig(m):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    Uses cyclic Jacobi rotations until the off-diagonal Frobenius mass drops
    below ``1e-14 * ||m||_F``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    scale = max(1.0, float(np.linalg.norm(m)))
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-10 * scale:
        raise DomainError("matrix is not symmetric")
    w, v, sweeps = kernels.jacobi_eigh(np.ascontiguousarray(0.5 * (m + m.T)))
    if sweeps < 0:
        raise NumericalError("Jacobi iteration did not converge")
    return w, v


def min_eig(m) -> float:
    return float(sym_eig(m)[0][0])


# -- problem data ----------------------------------------------------------------

@dataclass(frozen=True)
class LmiBlock:
    """One constraint ``f0 + sum_i y_i coeffs[i] >= 0``."""

    f0: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        f0 = np.asarray(self.f0, dtype=float)
        coeffs = np.asarray(self.coeffs, dtype=float)
        if f0.ndim != 2 or f0.shape[0] != f0.shape[1]:
            raise DomainError("f0 must be square")
        if coeffs.ndim != 3 or coeffs.shape[1:] != f0.shape:
            raise DomainError("coeffs must have shape (num_vars, m, m)")
        for mat in (f0, *coeffs):
            if np.max(np.abs(mat - mat.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(mat))):
                raise DomainError("LMI block matrices must be symmetric")
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def size(self) -> int:
        return self.f0.shape[0]

    def evaluate(self, y) -> np.ndarray:
        return self.f0 + np.tensordot(y, self.coeffs, axes=1)


@dataclass(frozen=True)
class SdpProblem:
    objective: np.ndarray
    blocks: tuple

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise DomainError("an SDP needs at least one block")
        for b in self.blocks:
            if b.coeffs.shape[0] != c.shape[0]:
                raise DomainError("block variable count does not match the objective")

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def total_size(self) -> int:
        return sum(b.size for b in self.blocks)

    def block_values(self, y):
        return [b.evaluate(y) for b in self.blocks]


@dataclass
class SdpSolution:
    y: np.ndarray
    status: str
    objective_value: float
    min_eig_per_block: np.ndarray
    iterations: int
    duality_gap_estimate: float
    phase1_margin: float = float("nan")
    stage_objectives: list = field(default_factory=list)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


# -- barrier machinery -----------------------------------------------------------

class _NotInterior(Exception):
    pass


def _logdet(blocks, y):
    total = 0.0
    for b in blocks:
        try:
            chol = np.linalg.cholesky(b.evaluate(y))
        except np.linalg.LinAlgError:
            raise _NotInterior from None
        total += 2.0 * float(np.sum(np.log(np.diag(chol))))
    if not math.isfinite(total):
        raise _NotInterior
    return total


def _derivatives(blocks, y):
    """log det sum, gradient and Hessian of the barrier -sum log det F_k(y)."""
    n = y.shape[0]
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    total = 0.0
    for b in blocks:
        chol = np.linalg.cholesky(b.evaluate(y))
        total += 2.0 * float(np.sum(np.log(np.diag(chol))))
        linv = np.linalg.inv(chol)
        g = linv @ b.coeffs @ linv.T
        flat = g.reshape(n, -1)
        grad -= np.trace(g, axis1=1, axis2=2)
        hess += flat @ flat.T
    return total, grad, hess


def _newton_direction(hess, grad):
    """Solve the Jacobi-scaled Newton system.

    A numerically singular Hessian whose range misses the gradient (the
    barrier is flat along some direction) would otherwise yield a tiny
    slope and a false "centered" verdict; a growing ridge keeps the
    direction pointing downhill along the flat subspace.
    """
    d = np.sqrt(np.diag(hess))
    d[d == 0] = 1.0
    hs = hess / np.outer(d, d)
    gs = -grad / d
    gnorm = np.linalg.norm(gs)
    eye = np.eye(len(gs))
    ridge = 0.0
    for _ in range(10):
        try:
            chol = np.linalg.cholesky(hs + ridge * eye)
        except np.linalg.LinAlgError:
            pass
        else:
            z = np.linalg.solve(chol.T, np.linalg.solve(chol, gs))
            if ridge > 0 or np.linalg.norm(hs @ z - gs) <= RESIDUAL_TOL * gnorm:
                return z / d
        ridge = RIDGE0 if ridge == 0 else ridge * 100.0
    return np.linalg.lstsq(hs, gs, rcond=None)[0] / d


def _center(c, mu, blocks, y, budget, stop=None):
    """Damped Newton on ``mu c^T y - sum log det F_k(y)``.

    Returns ``(y, newton_steps, reason)``; reason is ``"centered"``,
    ``"stopped"`` (``stop(y)`` fired), ``"budget"`` or ``"stalled"``.
    """
    steps = 0
    while True:
        if stop is not None and stop(y):
            return y, steps, "stopped"
        if steps >= budget:
            return y, steps, "budget"
        logdet, gb, hess = _derivatives(blocks, y)
        grad = mu * c + gb
        dy = _newton_direction(hess, grad)
        slope = float(grad @ dy)
        if -slope <= 2.0 * CENTER_TOL:
            return y, steps, "centered"
        slack = 1e-12 * (1.0 + abs(logdet))
        s = 1.0
        while True:
            y_new = y + s * dy
            try:
                logdet_new = _logdet(blocks, y_new)
            except _NotInterior:
                s *= SHRINK
            else:
                change = mu * s * float(c @ dy) - (logdet_new - logdet)
                if change <= ARMIJO * s * slope + slack:
                    break
                s *= SHRINK
            if s < 1e-14:
                # decrement already at the rounding floor: treat as centered
                if -slope < 1e-6:
                    return y, steps, "centered"
                return y, steps, "stalled"
        y = y_new
        steps += 1
        if np.linalg.norm(y) > UNBOUNDED_NORM:
            return y, steps, "stalled"


def _phase1(problem, feas_tol, gap_tol, budget):
    """Find y with every block >= feas_tol * I.  Returns (y, margin, steps, found)."""
    n = problem.num_vars
    y0 = np.zeros(n)
    margin0 = min(min_eig(f) for f in problem.block_values(y0))
    if margin0 >= feas_tol:
        return y0, margin0, 0, True
    lifted = []
    for b in problem.blocks:
        eye = -np.eye(b.size)[None, :, :]
        lifted.append(LmiBlock(b.f0, np.concatenate([b.coeffs, eye], axis=0)))
    # ||y|| <= R keeps the lifted problem bounded when some combination of
    # variables shifts every block like the identity
    ball = np.zeros((n + 1, n + 1, n + 1))
    for i in range(n):
        ball[i, 0, i + 1] = ball[i, i + 1, 0] = 1.0
    lifted.append(LmiBlock(PHASE1_RADIUS * np.eye(n + 1), ball))
    c = np.zeros(n + 1)
    c[-1] = -1.0
    v = np.concatenate([y0, [margin0 - 1.0]])
    m_total = problem.total_size + n + 1
    mu = 1.0
    steps = 0

    def reached(v):
        return v[-1] >= feas_tol

    while True:
        v, k, reason = _center(c, mu, lifted, v, budget - steps, stop=reached)
        steps += k
        if reason == "stopped":
            return v[:-1], float(v[-1]), steps, True
        if reason in ("budget", "stalled"):
            return v[:-1], float(v[-1]), steps, None
        # central point: optimum margin is at most t + m/mu
        if v[-1] + m_total / mu < feas_tol or m_total / mu <= gap_tol:
            return v[:-1], float(v[-1]), steps, False
        mu *= MU_FACTOR


def solve(problem: SdpProblem, feas_tol: float = 1e-7, gap_tol: float = 1e-6,
          max_iter: int = 200, mu0: float = 1.0) -> SdpSolution:
    """Minimize ``c^T y`` over the LMI-feasible set.

    ``max_iter`` caps the total number of Newton steps across both phases.
    The status is ``infeasible`` when phase 1 certifies that no point has all
    block eigenvalues above ``feas_tol``; ``max_iter`` and ``numerical`` flag
    an exhausted budget or a stalled line search.
    """
    c = problem.objective
    y, margin, steps, found = _phase1(problem, feas_tol, gap_tol, max_iter)
    log.debug("phase 1: margin=%.3e after %d Newton steps", margin, steps)

    def result(status, y, gap, stages, message=""):
        eigs = np.array([min_eig(f) for f in problem.block_values(y)])
        return SdpSolution(y=y, status=status, objective_value=float(c @ y),
                           min_eig_per_block=eigs, iterations=steps,
                           duality_gap_estimate=gap, phase1_margin=margin,
                           stage_objectives=stages, message=message)

    if found is False:
        return result(INFEASIBLE, y, math.inf, [],
                      f"phase 1 optimum margin {margin:.3e} below {feas_tol:g}")
    if found is None:
        status = MAX_ITER if steps >= max_iter else NUMERICAL
        return result(status, y, math.inf, [], "phase 1 did not reach a feasible point")

    m_total = problem.total_size
    mu = mu0
    stages = []
    while True:
        y, k, reason = _center(c, mu, problem.blocks, y, max_iter - steps)
        steps += k
        gap = m_total / mu
        if reason == "budget":
            return result(MAX_ITER, y, gap, stages, "Newton step budget exhausted")
        if reason == "stalled":
            msg = ("iterates diverging, objective may be unbounded"
                   if np.linalg.norm(y) > UNBOUNDED_NORM else "line search stalled")
            return result(NUMERICAL, y, gap, stages, msg)
        stages.append(float(c @ y))
        log.debug("stage mu=%.1e objective=%.9e steps=%d", mu, stages[-1], steps)
        if gap <= gap_tol:
            sol = result(OPTIMAL, y, gap, stages)
            if np.any(sol.min_eig_per_block < -feas_tol):
                sol.status = NUMERICAL
                sol.message = "final point violates a block beyond feas_tol"
            return sol
        mu *= MU_FACTOR


# -- text dump / load -----------------------------------------------------------

def dump_problem(problem: SdpProblem) -> str:
    records = [("num_blocks", len(problem.blocks)), ("objective", problem.objective)]
    for k, b in enumerate(problem.blocks):
        records.append((f"block{k}.f0", b.f0))
        records.extend((f"block{k}.f{i + 1}", fi) for i, fi in enumerate(b.coeffs))
    return dump_records(records, header="flowobs SDP problem: min c'y s.t. F0 + sum y_i Fi >= 0")


def load_problem(text: str) -> SdpProblem:
    rec = load_records(text)
    c = rec["objective"]
    blocks = []
    for k in range(int(rec["num_blocks"])):
        f0 = rec[f"block{k}.f0"]
        coeffs = np.array([rec[f"block{k}.f{i + 1}"] for i in range(len(c))])
        blocks.append(LmiBlock(f0, coeffs.reshape(len(c), *f0.shape)))
    return SdpProblem(c, tuple(blocks))
