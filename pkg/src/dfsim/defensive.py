"""Forecaster strategies for defensive forecasting.

Three constructions live here:

* a fixed-point solver for the continuous game — given a valid,
  continuous capital process S(omega, p), find p* with
  max_omega S(omega, p*) <= tol;
* the smearing construction for the randomized game — a finitely
  supported forecast P concentrated on one triangulation cell, with
  max_omega sum_p P(p) S(omega, p) <= delta, plus the matching side bet;
* the set-aside combinator turning an unbounded-capital strategy into a
  stream of banked reserves.

The nonconstructive fixed-point argument is replaced by per-cell
zero-sum game values on the piecewise-linear interpolant, then a direct
check of the true S at the candidate, with geometric mesh refinement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeCapital,
    RefinementExhausted,
    SideBetInvalid,
    ValidityViolation,
)
from .simplex import Triangulation, cached_subdivision, locate_cell, tv_distance
from .zerosum import game_value, game_values_2x2_batch

VALIDITY_TOL = 1e-9
WEIGHT_FLOOR = 1e-12


@dataclass
class ScepticMove:
    """One round's capital process S(omega, p).

    evaluate takes an outcome index and a probability vector and returns
    the capital gain.  The declared bound must satisfy |S| <= bound.
    evaluate_many, when provided, maps an (N, M) array of points to an
    (N, M) array of values and is used for bulk vertex evaluation.
    """

    num_outcomes: int
    evaluate: Callable[[int, np.ndarray], float]
    bound: float
    continuity_class: str = "continuous_in_p"  # or "arbitrary"
    evaluate_many: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def values_at(self, points):
        """S at each point for every outcome, shape (N, M)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.num_outcomes:
            raise DimensionMismatch(
                f"points have {points.shape[1]} coordinates, expected {self.num_outcomes}")
        if self.evaluate_many is not None:
            return np.asarray(self.evaluate_many(points), dtype=float)
        out = np.empty((points.shape[0], self.num_outcomes))
        for i, p in enumerate(points):
            for w in range(self.num_outcomes):
                out[i, w] = self.evaluate(w, p)
        return out


@dataclass
class RandomizedForecast:
    """Finitely supported forecast concentrated on one cell."""

    points: np.ndarray   # (m, M) support points
    weights: np.ndarray  # (m,) positive, summing to 1
    mesh_k: int
    cell: int

    @property
    def support_size(self):
        return self.points.shape[0]

    def diameter(self):
        m = self.support_size
        return max((tv_distance(self.points[i], self.points[j])
                    for i in range(m) for j in range(i + 1, m)), default=0.0)

    def draw(self, rng):
        """Sample one support point; returns (index, point)."""
        i = int(rng.choice(self.support_size, p=self.weights))
        return i, self.points[i]


@dataclass
class SideBet:
    """Bet values on the support of the round's forecast."""

    points: np.ndarray
    values: np.ndarray

    def value_at(self, index):
        return float(self.values[index])


@dataclass
class ValidityReport:
    violations: list = field(default_factory=list)        # (probe idx, sum S p)
    bound_violations: list = field(default_factory=list)  # (probe idx, omega, value)

    @property
    def ok(self):
        return not self.violations and not self.bound_violations


def audit_validity(S: ScepticMove, probes) -> ValidityReport:
    """Check sum_omega S(omega,p) p_omega <= 0 and |S| <= bound at probes."""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    vals = S.values_at(probes)
    return _audit(S, probes, vals)


def _audit(S, probes, vals):
    report = ValidityReport()
    # the slack scales with the move's magnitude: a sceptic staking
    # millions accumulates rounding at the ulp of its own values, and an
    # absolute cutoff would forfeit honestly-valid moves
    slack = VALIDITY_TOL * max(1.0, S.bound)
    sums = (vals * probes).sum(axis=1)
    for i in np.nonzero(sums > slack)[0]:
        report.violations.append((int(i), float(sums[i])))
    bad = np.abs(vals) > S.bound + slack
    for i, w in zip(*np.nonzero(bad)):
        report.bound_violations.append((int(i), int(w), float(vals[i, w])))
    return report


# ---------------------------------------------------------------------------
# cell search on the piecewise-linear interpolant
# ---------------------------------------------------------------------------


def _best_cell(Svals, T: Triangulation, target, lp_budget=256):
    """Cheapest cell of the interpolated game.

    Svals is (V, M): S at every vertex for every outcome.  Returns
    (cell index, barycentric mixture, game value, lp calls).  Stops
    early once a cell at or below target is found; otherwise returns the
    best cell seen within the LP budget.
    """
    cells = T.cells
    M = T.dim

    # pure-vertex shortcut: a vertex whose worst outcome already clears
    # the target wins with a point mass
    vmax = Svals.max(axis=1)
    v_best = int(np.argmin(vmax))
    if vmax[v_best] <= target:
        cid = int(T.cells_of_vertex(v_best)[0])
        lam = np.zeros(M)
        lam[int(np.nonzero(cells[cid] == v_best)[0][0])] = 1.0
        return cid, lam, float(vmax[v_best]), 0

    cell_vals = Svals[cells]                 # (C, M verts, M outcomes)
    ub = vmax[cells].min(axis=1)             # value of best pure column
    lb = cell_vals.min(axis=1).max(axis=1)   # max-min lower bound

    if M == 2:
        vals = game_values_2x2_batch(np.swapaxes(cell_vals, 1, 2))
        cid = int(np.argmin(vals))
        lam, val = game_value(cell_vals[cid].T)
        return cid, lam, val, 1

    order = np.argsort(lb, kind="stable")
    best = (None, None, np.inf)
    lp_calls = 0
    for cid in order:
        if lb[cid] >= best[2] or lp_calls >= lp_budget:
            break
        if ub[cid] <= target:
            lam, val = game_value(cell_vals[cid].T)
            lp_calls += 1
            return int(cid), lam, val, lp_calls
        lam, val = game_value(cell_vals[cid].T)
        lp_calls += 1
        if val < best[2]:
            best = (int(cid), lam, val)
        if val <= target:
            break
    return best[0], best[1], best[2], lp_calls


def _mesh_schedule(k0, kmax):
    k = max(int(k0), 1)
    while k <= kmax:
        yield k
        k *= 2


def solve_best_effort(S: ScepticMove, tol, k0=2, kmax=8192, lp_budget=256):
    """Like solve_continuous but never raises on a miss.

    Returns (p, certified_max, success, k_used).  On failure the best
    candidate seen across all meshes is returned with success=False, so
    a caller can keep playing honestly with a worse-than-requested
    guarantee.
    """
    if tol <= 0:
        raise DimensionMismatch(f"tol must be positive, got {tol}")
    M = S.num_outcomes
    best = (None, np.inf)
    k = k0
    for k in _mesh_schedule(k0, kmax):
        T = cached_subdivision(M, k)
        Svals = S.values_at(T.vertices)
        report = _audit(S, T.vertices, Svals)
        if not report.ok:
            raise ValidityViolation(
                f"sceptic move invalid on mesh k={k}: {report.violations[:3]}"
                f"{report.bound_violations[:3]}")
        cid, lam, val, _ = _best_cell(Svals, T, target=tol / 2, lp_budget=lp_budget)
        if cid is None:
            continue
        p_star = lam @ T.vertices[T.cells[cid]]
        p_star = np.clip(p_star, 0.0, None)
        p_star /= p_star.sum()
        certified = float(S.values_at(p_star[None, :])[0].max())
        if certified < best[1]:
            best = (p_star, certified)
        if certified <= tol:
            p_star.flags.writeable = False
            return p_star, certified, True, k
    return best[0], best[1], False, k


def solve_continuous(S: ScepticMove, tol, k0=2, kmax=8192, lp_budget=256):
    """Point p* with max_omega S(omega, p*) <= tol, plus the certified max.

    Works by refining an edgewise mesh, solving per-cell zero-sum games
    on the interpolant, and verifying the candidate against the true S.
    Raises RefinementExhausted when no mesh up to kmax certifies —
    usually a sign the move is discontinuous, invalid, or tol is below
    the achievable resolution.
    """
    p_star, certified, ok, _ = solve_best_effort(S, tol, k0=k0, kmax=kmax,
                                                 lp_budget=lp_budget)
    if not ok:
        raise RefinementExhausted(
            kmax, f"no point with max_omega S <= {tol:g} found up to k={kmax}"
                  + (f" (best certified {certified:g})" if p_star is not None else ""))
    return p_star, certified


def smear(S: ScepticMove, T: Triangulation):
    """Piecewise-linear interpolant of S on the mesh.

    Returns a callable s_star(omega, p) = sum_v lambda_v(p) S(omega, v)
    over the vertices of the cell containing p; it agrees with S at the
    mesh vertices and is continuous in p.
    """
    cache = {}

    def s_star(omega, p):
        cid, lam = locate_cell(T, np.asarray(p, dtype=float))
        verts = T.cells[cid]
        total = 0.0
        for v, weight in zip(verts, lam):
            if weight == 0.0:
                continue
            key = (int(v), omega)
            if key not in cache:
                cache[key] = S.evaluate(omega, T.vertices[v])
            total += weight * cache[key]
        return total

    return s_star


def check_smearing_validity(S: ScepticMove, T: Triangulation, delta) -> bool:
    """Sufficient condition that the smeared move loses at most delta.

    True iff S(., v) dotted with u stays below delta for every vertex v
    and every u adjacent to v (sharing a cell).  The expression is
    linear in u, so checking star extreme points certifies the bound for
    all points near v.  Conservative: a False here does not preclude a
    cell with game value <= delta.
    """
    if delta <= 0:
        raise DimensionMismatch(f"delta must be positive, got {delta}")
    Svals = S.values_at(T.vertices)
    cells = T.cells
    chunk = max(1, 2_000_000 // (T.dim * T.dim))
    for start in range(0, cells.shape[0], chunk):
        blk = cells[start:start + chunk]
        G = Svals[blk]          # (c, i, omega): S at vertex i of each cell
        P = T.vertices[blk]     # (c, j, omega): coordinates of vertex j
        dots = np.einsum("cio,cjo->cij", G, P)
        if dots.max() >= delta:
            return False
    return True


def build_randomized_forecast(S: ScepticMove, n, eps, eps_n, kmax=8192,
                              k0=1, lp_budget=256):
    """Finitely supported forecast satisfying the round's loss bound.

    With delta = eps * 2**-n, refines the mesh until some cell's
    zero-sum game value is at most delta and the surviving support
    (weights above 1e-12) has TV-diameter at most eps_n.  The winning
    cell's barycentric mixture is the forecast; by construction
    max_omega sum_p P(p) S(omega, p) <= delta and the support has at
    most M points.

    Raises ValidityViolation when the move fails its audit on the mesh
    vertices (the adversary forfeits) and RefinementExhausted when no
    mesh up to kmax certifies.
    """
    if eps <= 0 or eps_n <= 0:
        raise DimensionMismatch("eps and eps_n must be positive")
    M = S.num_outcomes
    delta = eps * 2.0 ** (-n)
    diagnostics = {"delta": delta, "eps_n": eps_n, "tried_k": [], "lp_calls": 0}
    for k in _mesh_schedule(k0, kmax):
        T = cached_subdivision(M, k)
        Svals = S.values_at(T.vertices)
        report = _audit(S, T.vertices, Svals)
        if not report.ok:
            raise ValidityViolation(
                f"sceptic move invalid on mesh k={k}: {report.violations[:3]}"
                f"{report.bound_violations[:3]}")
        diagnostics["tried_k"].append(k)
        cid, lam, val, lp_calls = _best_cell(Svals, T, target=delta,
                                             lp_budget=lp_budget)
        diagnostics["lp_calls"] += lp_calls
        if cid is None or val > delta:
            continue
        verts = T.cells[cid]
        keep = lam > WEIGHT_FLOOR
        points = T.vertices[verts[keep]].copy()
        weights = lam[keep] / lam[keep].sum()
        forecast = RandomizedForecast(points=points, weights=weights,
                                      mesh_k=k, cell=int(cid))
        diam = forecast.diameter()
        if diam > eps_n:
            continue
        eq3 = float((weights @ Svals[verts[keep]]).max())
        if eq3 > delta + VALIDITY_TOL:
            continue
        diagnostics.update({
            "k": k, "cell": int(cid), "game_value": val,
            "support_size": forecast.support_size,
            "support_diameter": diam,
            "worst_expected_gain": eq3,
            "smearing_check": check_smearing_validity(S, T, delta)
            if T.num_vertices <= 20_000 else None,
        })
        return forecast, diagnostics
    raise RefinementExhausted(
        kmax, f"no cell with game value <= {delta:g} and support diameter "
              f"<= {eps_n:g} up to k={kmax}")


def side_bet(S: ScepticMove, omega_n, P: RandomizedForecast, eps, n) -> SideBet:
    """The forecaster's bet f(p) = (S(omega_n, p) - eps 2^-n) / (1 + eps).

    Its expectation under P is nonpositive whenever the forecast meets
    its loss bound, which the constructor verifies.
    """
    shift = eps * 2.0 ** (-n)
    svals = S.values_at(P.points)[:, omega_n]
    values = (svals - shift) / (1.0 + eps)
    expectation = float(P.weights @ values)
    if expectation > VALIDITY_TOL:
        raise SideBetInvalid(
            f"bet expectation {expectation:g} > 0; forecast does not meet "
            f"its round-{n} loss bound")
    return SideBet(points=P.points, values=values)


def set_aside_transform(capital_deltas):
    """Bank reserves from an unbounded-capital strategy.

    capital_deltas are the per-round gains of the underlying strategy at
    its own (unit initial) scale.  Working capital W starts at 1 and
    reserve R at 0; whenever W exceeds 2, one unit moves to R and the
    underlying strategy is rescaled to continue from W - 1.  Yields
    (W, R) after each round.  W + R never decreases when R grows, and R
    diverges whenever the underlying capital is unbounded.
    """
    W, R = 1.0, 0
    underlying = 1.0
    scale = 1.0
    for d in capital_deltas:
        underlying += d
        if underlying < -VALIDITY_TOL:
            raise NegativeCapital(
                f"underlying capital fell to {underlying:g}")
        W += scale * d
        while W > 2.0:
            R += 1
            scale *= (W - 1.0) / W
            W -= 1.0
        yield W, R
