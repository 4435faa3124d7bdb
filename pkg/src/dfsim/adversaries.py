"""Adversary strategies: sceptics, reality, and the random number generator.

Sceptic strategies consume a HistoryView (what the protocol exposes:
round number, outcome count, current capital, and the realized
(forecast, outcome) pairs) and emit a ScepticMove for the round.  All
strategies here are valid by construction — their moves are centered so
the expected gain under the forecast is exactly zero — and declare
honest sup-bounds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .defensive import ScepticMove
from .errors import DimensionMismatch, ScriptExhausted, UnsupportedDimension

COEF_CAP = 1e3  # sanity cap on linear coefficients


@dataclass
class HistoryView:
    """What a strategy is allowed to see before choosing its move."""

    round: int                  # 1-based index of the round being played
    num_outcomes: int
    capital: float
    pairs: list                 # [(forecast p_i, outcome omega_i), ...]


class SkepticStrategy:
    name = "skeptic"

    def next_move(self, view: HistoryView) -> ScepticMove:
        raise NotImplementedError


class _LinearSceptic(SkepticStrategy):
    """Stationary test S(omega, p) = c . (e_omega - p)."""

    def __init__(self, c):
        c = np.asarray(c, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise DimensionMismatch(f"coefficient vector shape {c.shape}")
        if np.abs(c).max() > COEF_CAP:
            raise DimensionMismatch(f"|c| above cap {COEF_CAP}")
        self.c = c
        self.name = "linear"

    def next_move(self, view):
        c = self.c
        if view.num_outcomes != c.size:
            raise DimensionMismatch(
                f"linear sceptic built for M={c.size}, game has M={view.num_outcomes}")

        def evaluate(omega, p):
            return float(c[omega] - c @ p)

        def evaluate_many(points):
            return c[None, :] - (points @ c)[:, None]

        return ScepticMove(num_outcomes=c.size, evaluate=evaluate,
                           bound=2.0 * float(np.abs(c).max()),
                           continuity_class="continuous_in_p",
                           evaluate_many=evaluate_many, name=self.name)


def linear_sceptic(c) -> SkepticStrategy:
    return _LinearSceptic(c)


class _K29KernelSceptic(SkepticStrategy):
    """Gaussian-kernel calibration test.

    S_n(omega, p) = eta * cap_scale * sum_{i<n}
        exp(-|p - p_i|^2 / 2 sigma^2) * (e_omega - p) . (e_{omega_i} - p_i)

    Validity is exact: the expectation of (e_omega - p) under p is 0.
    cap_scale shrinks the stake each round so the worst-case loss never
    exceeds current capital.
    """

    def __init__(self, eta, sigma):
        if eta <= 0 or sigma <= 0:
            raise DimensionMismatch("eta and sigma must be positive")
        self.eta = eta
        self.sigma = sigma
        self.name = "k29"
        # per-grid incremental sums: content digest -> [rounds folded in,
        # (N, M) array]; the engine re-evaluates the same mesh vertex grids
        # every round, so folding in only new history items saves a factor
        # of the round count
        self._grid_sums = {}

    def _raw_increment(self, points, p_i, omega_i):
        d = -p_i.copy()
        d[omega_i] += 1.0
        w = np.exp(-((points - p_i) ** 2).sum(axis=1) / (2.0 * self.sigma ** 2))
        q = points @ d
        return w[:, None] * (d[None, :] - q[:, None])

    def _raw_at(self, points, pairs):
        key = hashlib.sha1(points.tobytes()).hexdigest()
        entry = self._grid_sums.get(key)
        if entry is None or entry[0] > len(pairs):
            entry = [0, np.zeros((points.shape[0], points.shape[1]))]
            self._grid_sums[key] = entry
        done, acc = entry
        for i in range(done, len(pairs)):
            p_i, omega_i = pairs[i]
            acc += self._raw_increment(points, np.asarray(p_i, float), omega_i)
        entry[0] = len(pairs)
        return acc

    def next_move(self, view):
        M = view.num_outcomes
        pairs = list(view.pairs)
        n = len(pairs)
        raw_bound = 2.0 * self.eta * n              # |(e-p).(e'-p')| <= 2
        cap_scale = 1.0 if raw_bound <= view.capital or raw_bound == 0.0 \
            else view.capital / raw_bound
        scale = self.eta * cap_scale

        def evaluate(omega, p):
            p = np.asarray(p, dtype=float)
            total = 0.0
            for p_i, omega_i in pairs:
                d = -np.asarray(p_i, float)
                d[omega_i] += 1.0
                w = np.exp(-((p - p_i) ** 2).sum() / (2.0 * self.sigma ** 2))
                total += w * (d[omega] - p @ d)
            return scale * total

        def evaluate_many(points):
            if n == 0:
                return np.zeros((points.shape[0], M))
            return scale * self._raw_at(points, pairs)

        return ScepticMove(num_outcomes=M, evaluate=evaluate,
                           bound=scale * 2.0 * n,
                           continuity_class="continuous_in_p",
                           evaluate_many=evaluate_many, name=self.name)


def k29_kernel_sceptic(eta, sigma) -> SkepticStrategy:
    return _K29KernelSceptic(eta, sigma)


class _BinCalibrationSceptic(SkepticStrategy):
    """Hard-binned calibration test, deliberately discontinuous in p.

    Binary outcomes only.  Splits [0, 1] into equal bins over the
    forecast p_1, accumulates the miscalibration sum(omega_i - p_{i,1})
    per bin, and stakes stake_fraction of current capital on the sign.
    """

    def __init__(self, bins, stake_fraction):
        if bins < 2:
            raise DimensionMismatch(f"need >= 2 bins, got {bins}")
        if not 0.0 < stake_fraction < 1.0:
            raise DimensionMismatch(f"stake_fraction {stake_fraction} not in (0,1)")
        self.bins = bins
        self.stake_fraction = stake_fraction
        self.name = "binning"

    def _bin_of(self, p1):
        return np.minimum((np.asarray(p1) * self.bins).astype(int), self.bins - 1)

    def next_move(self, view):
        if view.num_outcomes != 2:
            raise UnsupportedDimension(
                f"binning sceptic is binary-only, game has M={view.num_outcomes}")
        acc = np.zeros(self.bins)
        for p_i, omega_i in view.pairs:
            acc[self._bin_of(p_i[1])] += omega_i - p_i[1]
        stakes = self.stake_fraction * view.capital * np.sign(acc)

        def evaluate(omega, p):
            return float(stakes[self._bin_of(p[1])] * ((omega == 1) - p[1]))

        def evaluate_many(points):
            s = stakes[self._bin_of(points[:, 1])]
            out = np.empty((points.shape[0], 2))
            out[:, 1] = s * (1.0 - points[:, 1])
            out[:, 0] = s * (0.0 - points[:, 1])
            return out

        return ScepticMove(num_outcomes=2, evaluate=evaluate,
                           bound=self.stake_fraction * view.capital,
                           continuity_class="arbitrary",
                           evaluate_many=evaluate_many, name=self.name)


def bin_calibration_sceptic(bins, stake_fraction) -> SkepticStrategy:
    return _BinCalibrationSceptic(bins, stake_fraction)


class _RandomValidSceptic(SkepticStrategy):
    """Fuzzing sceptic: S = h(omega, p) - sum_nu h(nu, p) p_nu.

    h mixes an affine part with a gentle cosine ripple, so the move is
    smooth with small curvature and stays solvable on coarse meshes.
    """

    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)
        self.name = f"random[{seed}]"
        self._params = None

    def _setup(self, M):
        r = self.rng
        self._params = dict(
            a=r.uniform(-0.5, 0.5, size=M),
            b=r.uniform(-0.5, 0.5, size=(M, M)),
            gamma=r.uniform(0.0, 0.3, size=M),
            w=r.uniform(-1.0, 1.0, size=(M, M)),
            phi=r.uniform(0.0, 2 * np.pi, size=M),
        )

    def _h(self, points):
        q = self._params
        # (N, M): h(nu, p) for each point and outcome nu
        return (q["a"][None, :] + points @ q["b"].T
                + q["gamma"][None, :] * np.cos(points @ q["w"].T + q["phi"][None, :]))

    def next_move(self, view):
        M = view.num_outcomes
        if self._params is None or self._params["a"].size != M:
            self._setup(M)
        q = self._params
        sup_h = float((np.abs(q["a"]) + np.abs(q["b"]).max(axis=1) + q["gamma"]).max())

        def evaluate_many(points):
            h = self._h(points)
            center = (h * points).sum(axis=1)
            return h - center[:, None]

        def evaluate(omega, p):
            return float(evaluate_many(np.asarray(p, float)[None, :])[0, omega])

        return ScepticMove(num_outcomes=M, evaluate=evaluate, bound=2.0 * sup_h,
                           continuity_class="continuous_in_p",
                           evaluate_many=evaluate_many, name=self.name)


def random_valid_sceptic(seed) -> SkepticStrategy:
    return _RandomValidSceptic(seed)


# ---------------------------------------------------------------------------
# Reality
# ---------------------------------------------------------------------------


class RealityStrategy:
    """Picks the outcome after seeing the round's move and forecast."""

    def __init__(self, kind, dist=None, seed=None, script=None):
        if kind not in ("iid", "adversarial_argmax", "scripted"):
            raise DimensionMismatch(f"unknown reality kind {kind!r}")
        self.kind = kind
        if kind == "iid":
            self.dist = np.asarray(dist, dtype=float)
            self.rng = np.random.default_rng(seed)
        elif kind == "scripted":
            self.script = list(script)
            self._pos = 0

    def next_outcome(self, S: ScepticMove, forecast):
        """forecast is the announced object: a point for the continuous
        game, a RandomizedForecast for the randomized game."""
        if self.kind == "scripted":
            if self._pos >= len(self.script):
                raise ScriptExhausted(f"script of length {len(self.script)} exhausted")
            omega = int(self.script[self._pos])
            self._pos += 1
            return omega
        if self.kind == "iid":
            return int(self.rng.choice(self.dist.size, p=self.dist))
        # adversarial: maximize the sceptic's (expected) gain
        if hasattr(forecast, "weights"):
            vals = forecast.weights @ S.values_at(forecast.points)
        else:
            vals = S.values_at(np.asarray(forecast, float)[None, :])[0]
        return int(np.argmax(vals))


def reality_strategy(kind, dist=None, seed=None, script=None) -> RealityStrategy:
    return RealityStrategy(kind, dist=dist, seed=seed, script=script)


# ---------------------------------------------------------------------------
# Random number generator
# ---------------------------------------------------------------------------


@dataclass
class RngPolicy:
    """Draws the realized forecast from the announced support.

    faithful: sample per the forecast weights with a seeded generator.
    adversarial: pick the support point maximizing the sceptic's realized
    gain S(omega, p), ties to the lowest index.
    """

    mode: str
    seed: Optional[int] = None
    _rng: object = field(default=None, repr=False)

    @classmethod
    def faithful(cls, seed):
        return cls(mode="faithful", seed=seed,
                   _rng=np.random.default_rng(seed))

    @classmethod
    def adversarial(cls):
        return cls(mode="adversarial")

    def draw(self, forecast, S: ScepticMove, omega):
        if self.mode == "faithful":
            return int(self._rng.choice(forecast.support_size, p=forecast.weights))
        vals = S.values_at(forecast.points)[:, omega]
        return int(np.argmax(vals))
