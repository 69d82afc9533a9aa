"""Small LMI problems with brute-force grid oracles.

Each case is ``(name, c, blocks, box)`` where ``blocks`` are
``(F0, [F1, ...])`` tuples and ``box`` bounds the grid search for each
variable.  The oracle evaluates block eigenvalues on a 1e-3 grid,
independently of the solver.
"""
import numpy as np

from flowobs.sdp import LmiBlock, SdpProblem

STEP = 1e-3


def _b(f0, *fs):
    return np.array(f0, dtype=float), [np.array(f, dtype=float) for f in fs]


def _diag(*vals):
    return np.diag(vals)


CASES = [
    ("two-by-two lower bound", [1.0],
     [_b([[0, 1], [1, 0]], np.eye(2))], [(-2, 2)]),
    ("off-diagonal minimum", [1.0],
     [_b(np.eye(2), [[0, 1], [1, 0]])], [(-2, 2)]),
    ("off-diagonal maximum", [-1.0],
     [_b(np.eye(2), [[0, 1], [1, 0]])], [(-2, 2)]),
    ("two blocks, tighter wins", [1.0],
     [_b(_diag(-0.5, 2), _diag(1, -1)), _b([[0, 0.3], [0.3, 1]], [[1, 0], [0, 0]])],
     [(-1, 3)]),
    ("tridiagonal shift", [1.0],
     [_b([[0, 1, 0], [1, 0, 1], [0, 1, 0]], np.eye(3))], [(0, 3)]),
    ("separable diagonal", [1.0, 1.0],
     [_b(_diag(-1, -2), _diag(1, 0), _diag(0, 1))], [(0.5, 2.5), (1.5, 3.5)]),
    ("hyperbolic constraint", [1.0, 1.0],
     [_b([[0, 1], [1, 0]], [[1, 0], [0, 0]], [[0, 0], [0, 1]]),
      _b(_diag(3, 3), _diag(-1, 0), _diag(0, -1))], [(0, 3), (0, 3)]),
    ("unit disc", [-1.0, -1.0],
     [_b(np.eye(3), [[0, 1, 0], [1, 0, 0], [0, 0, 0]], [[0, 0, 1], [0, 0, 0], [1, 0, 0]])],
     [(-1.1, 1.1), (-1.1, 1.1)]),
    ("parabola epigraph", [1.0, 0.0],
     [_b([[0, 0], [0, 1]], [[1, 0], [0, 0]], [[0, 1], [1, 0]]),
      _b(_diag(-0.5, 2), _diag(0, 0), _diag(1, -1))], [(0, 4.5), (0.4, 2.1)]),
    ("coupled hyperbola", [2.0, 1.0],
     [_b([[0, 0.5], [0.5, 0]], [[1, 0], [0, 1]], [[1, 0], [0, 0]]),
      _b(_diag(0, 2, 2), _diag(0, -1, 0), _diag(1, 0, -1))], [(0, 2.1), (-0.1, 2.1)]),
    ("ellipse-like", [1.0, -1.0],
     [_b([[2, 0], [0, 1]], [[-1, 0], [0, 1]], [[0, 1], [1, 0]])], [(-1.1, 2.1), (-1.6, 1.6)]),
    ("shifted disc, weighted", [1.0, 2.0],
     [_b([[1, -0.5, -0.2], [-0.5, 1, 0], [-0.2, 0, 1]],
         [[0, 1, 0], [1, 0, 0], [0, 0, 0]], [[0, 0, 1], [0, 0, 0], [1, 0, 0]])],
     [(-0.6, 1.6), (-0.9, 1.3)]),
]


def problem(case) -> SdpProblem:
    _, c, blocks, _ = case
    lmis = tuple(LmiBlock(f0, np.array(fs)) for f0, fs in blocks)
    return SdpProblem(np.array(c, dtype=float), lmis)


def _block_min_eig(mats):
    """Smallest eigenvalue of a stack of symmetric matrices."""
    if mats.shape[-1] == 1:
        return mats[..., 0, 0]
    if mats.shape[-1] == 2:
        a, b, d = mats[..., 0, 0], mats[..., 0, 1], mats[..., 1, 1]
        return 0.5 * (a + d) - np.sqrt(0.25 * (a - d) ** 2 + b * b)
    return np.linalg.eigvalsh(mats)[..., 0]


def grid_optimum(case, tol: float = 0.0) -> float:
    """Best objective over grid points whose blocks all have min eigenvalue >= -tol."""
    _, c, blocks, box = case
    axes = [np.arange(lo, hi + STEP / 2, STEP) for lo, hi in box]
    best = np.inf
    if len(axes) == 1:
        rows = [(axes[0][:, None],)]
    else:
        g1 = axes[0]
        rows = [(g1[i:i + 200, None, None], axes[1][None, :, None])
                for i in range(0, len(g1), 200)]
    for row in rows:
        feas = None
        for f0, fs in blocks:
            m = f0 + sum(y[..., None] * f for y, f in zip(row, fs))
            ok = _block_min_eig(m) >= -tol
            feas = ok if feas is None else feas & ok
        obj = sum(ci * y[..., 0] for ci, y in zip(c, row))
        obj = np.broadcast_to(obj, feas.shape)
        if feas.any():
            best = min(best, float(obj[feas].min()))
    return best
