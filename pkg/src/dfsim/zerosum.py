"""Small zero-sum matrix games.

The column player mixes over candidate forecasts, the row player picks
an outcome; we want min over column mixtures of the max row payoff.
Matrices here are tiny (at most the number of outcomes squared), so a
dense LP is plenty.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionMismatch, NumericalFailure

MAX_SIZE = 64  # sanity cap on either dimension
CERT_TOL = 1e-9


def _as_matrix(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatch(f"payoff matrix must be 2-d, got shape {A.shape}")
    R, C = A.shape
    if not (1 <= R <= MAX_SIZE and 1 <= C <= MAX_SIZE):
        raise DimensionMismatch(f"matrix shape {A.shape} outside [1, {MAX_SIZE}]^2")
    if not np.all(np.isfinite(A)):
        raise NumericalFailure("payoff matrix has non-finite entries")
    return A


def game_value(A):
    """Value and optimal column mixture of min_lambda max_row (A @ lambda).

    Returns (lambda, value).  When a pure column is optimal (up to
    1e-12) it is preferred over a mixed optimum, so degenerate games
    yield point masses.
    """
    A = _as_matrix(A)
    R, C = A.shape

    col_maxes = A.max(axis=0)
    pure_j = int(np.argmin(col_maxes))
    pure_val = float(col_maxes[pure_j])

    if C == 1:
        return np.array([1.0]), pure_val

    if C == 2 and R == 2:
        lam, val = _value_2x2(A)
    else:
        lam, val = _value_lp(A)

    if pure_val <= val + 1e-12:
        lam = np.zeros(C)
        lam[pure_j] = 1.0
        return lam, pure_val
    return lam, val


def _value_2x2(A):
    """Analytic 2x2 solution: check both pure columns and the crossing."""
    (a, b), (c, d) = A
    best_lam, best_val = None, np.inf
    cands = [0.0, 1.0]
    denom = (a - b) - (c - d)
    if denom != 0.0:
        t = (d - b) / denom  # weight on column 0 equalizing the rows
        if 0.0 < t < 1.0:
            cands.append(t)
    for t in cands:
        val = max(a * t + b * (1 - t), c * t + d * (1 - t))
        if val < best_val:
            best_val, best_lam = val, t
    return np.array([best_lam, 1.0 - best_lam]), float(best_val)


def _value_lp(A):
    """LP: minimize v subject to A lambda <= v, lambda a mixture."""
    R, C = A.shape
    # variables: (lambda_1..lambda_C, v)
    cost = np.zeros(C + 1)
    cost[-1] = 1.0
    A_ub = np.hstack([A, -np.ones((R, 1))])
    b_ub = np.zeros(R)
    A_eq = np.zeros((1, C + 1))
    A_eq[0, :C] = 1.0
    bounds = [(0, None)] * C + [(None, None)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=bounds, method="highs")
    if not res.success:
        raise NumericalFailure(f"LP solver failed: {res.message}")
    lam = np.clip(res.x[:C], 0.0, None)
    lam /= lam.sum()
    # report the value actually achieved by the returned mixture
    return lam, float((A @ lam).max())


def game_values_2x2_batch(stack):
    """Vectorized values of a (N, 2, 2) stack of games (no mixtures).

    Used for bulk cell screening; only the values are needed there.
    """
    stack = np.asarray(stack, dtype=float)
    a, b = stack[:, 0, 0], stack[:, 0, 1]
    c, d = stack[:, 1, 0], stack[:, 1, 1]
    v0 = np.maximum(b, d)          # pure column 1
    v1 = np.maximum(a, c)          # pure column 0
    best = np.minimum(v0, v1)
    denom = (a - b) - (c - d)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom != 0.0, (d - b) / np.where(denom == 0.0, 1.0, denom), -1.0)
    interior = (t > 0.0) & (t < 1.0)
    mix = a * t + b * (1 - t)      # rows equalized at the crossing
    return np.where(interior, np.minimum(best, mix), best)


def best_response_row(A, lam):
    """Argmax row against a column mixture; ties go to the lowest index."""
    A = _as_matrix(A)
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (A.shape[1],):
        raise DimensionMismatch(f"mixture shape {lam.shape} vs {A.shape[1]} columns")
    payoffs = A @ lam
    row = int(np.argmax(payoffs))
    return row, float(payoffs[row])
