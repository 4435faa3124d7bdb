"""Game state machines and the run orchestrator.

Two protocols are enforced here.  In the continuous game the order is
sceptic move -> forecast point -> outcome, and capital updates as
K += S(omega, p).  In the randomized game it is sceptic move ->
randomized forecast -> outcome -> side bet -> drawn forecast, with
K += S(omega, p_drawn) and F += f(p_drawn).  Constraint violations are
recorded as forfeits attributable to exactly one player; run_game never
crashes on a misbehaving strategy.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .adversaries import HistoryView
from .defensive import (
    VALIDITY_TOL,
    RandomizedForecast,
    ScepticMove,
    SideBet,
    _audit,
    build_randomized_forecast,
    side_bet,
    solve_best_effort,
)
from .errors import (
    DfsimError,
    DimensionMismatch,
    IndexOutOfRange,
    ProtocolOrderViolation,
    RefinementExhausted,
    SideBetInvalid,
    ValidityViolation,
)
from .transcript import RoundRecord, SCHEMA, Transcript, eps_n_at

DEFAULT_EPS_N = {"kind": "geometric", "a": 0.05, "r": 0.5, "floor": 1e-4}
CONTINUOUS_TOL_FLOOR = 1e-8


@dataclass
class GameConfig:
    game: str                    # "continuous" | "randomized"
    M: int
    eps: float = 0.1             # randomized-game hedge parameter
    eps_c: float = 0.01          # continuous-game cumulative slack budget
    eps_n_schedule: dict = field(default_factory=lambda: dict(DEFAULT_EPS_N))
    k0: int = 1
    kmax: int = 8192
    seed: object = None
    sceptic: str = ""
    reality: str = ""
    rng: str = ""
    forecaster: str = "defensive"

    def __post_init__(self):
        if self.game not in ("continuous", "randomized"):
            raise DimensionMismatch(f"unknown game {self.game!r}")
        if self.M < 2:
            raise DimensionMismatch(f"M must be >= 2, got {self.M}")
        if self.eps <= 0 or self.eps_c <= 0:
            raise DimensionMismatch("eps and eps_c must be positive")


@dataclass
class Verdict:
    horizon: int
    sup_K: float
    final_F: float
    invariant_held: bool
    forfeits: list


@dataclass
class ContinuousGameState:
    n: int = 0
    K: float = 1.0
    enforce_nonneg: bool = False
    rounds: list = field(default_factory=list)
    forfeits: list = field(default_factory=list)
    pairs: list = field(default_factory=list)  # (played p, omega)

    def _forfeit(self, player, reason):
        self.forfeits.append({"round": self.n + 1, "player": player,
                              "reason": reason})


@dataclass
class RandomizedGameState:
    n: int = 0
    K: float = 1.0
    F: float = 1.0
    enforce_nonneg: bool = True
    rounds: list = field(default_factory=list)
    forfeits: list = field(default_factory=list)
    pairs: list = field(default_factory=list)  # (drawn p, omega)

    _forfeit = ContinuousGameState._forfeit


def step_continuous(state: ContinuousGameState, S: ScepticMove, p, omega):
    """Play one continuous round: audit S at p, then K += S(omega, p)."""
    if state.forfeits:
        raise ProtocolOrderViolation("game already ended by forfeit")
    p = np.asarray(p, dtype=float)
    if not 0 <= omega < S.num_outcomes:
        raise IndexOutOfRange(f"omega {omega} not in [0, {S.num_outcomes})")
    vals = S.values_at(p[None, :])
    report = _audit(S, p[None, :], vals)
    if not report.ok:
        state._forfeit("sceptic", f"invalid move at played forecast: "
                                  f"{report.violations or report.bound_violations}")
        return state
    gain = float(vals[0, omega])
    state.n += 1
    state.K += gain
    state.rounds.append(RoundRecord(
        n=state.n, support=[p.tolist()], weights=[1.0], omega=int(omega),
        drawn=0, f=[0.0], payoff=vals.T.tolist(), K=state.K, F=1.0))
    state.pairs.append((p, int(omega)))
    if state.enforce_nonneg and state.K < -VALIDITY_TOL:
        state._forfeit("sceptic", f"capital fell to {state.K:g}")
    return state


def step_randomized(state: RandomizedGameState, S: ScepticMove,
                    P: RandomizedForecast, omega, f: SideBet, drawn):
    """Play one randomized round.

    Stores S(omega, p) for every outcome and every support point so the
    transcript can be verified with no strategy code.  Raises
    SideBetInvalid (after recording the forfeit) when the bet has
    positive mean under P.
    """
    if state.forfeits:
        raise ProtocolOrderViolation("game already ended by forfeit")
    m = P.support_size
    if not 0 <= drawn < m:
        raise IndexOutOfRange(f"drawn index {drawn} not in [0, {m})")
    if not 0 <= omega < S.num_outcomes:
        raise IndexOutOfRange(f"omega {omega} not in [0, {S.num_outcomes})")

    vals = S.values_at(P.points)            # (m, M)
    report = _audit(S, P.points, vals)
    if not report.ok:
        state._forfeit("sceptic", f"invalid move on forecast support: "
                                  f"{report.violations or report.bound_violations}")
        return state
    mean_bet = float(P.weights @ f.values)
    if mean_bet > VALIDITY_TOL:
        state._forfeit("forecaster", f"side bet mean {mean_bet:g} > 0")
        raise SideBetInvalid(f"side bet mean {mean_bet:g} > 0")

    state.n += 1
    state.K += float(vals[drawn, omega])
    state.F += float(f.values[drawn])
    state.rounds.append(RoundRecord(
        n=state.n, support=P.points.tolist(), weights=P.weights.tolist(),
        omega=int(omega), drawn=int(drawn), f=f.values.tolist(),
        payoff=vals.T.tolist(), K=state.K, F=state.F))
    state.pairs.append((P.points[drawn], int(omega)))
    if state.enforce_nonneg:
        if state.K < -VALIDITY_TOL:
            state._forfeit("sceptic", f"capital K fell to {state.K:g}")
        elif state.F < -VALIDITY_TOL:
            state._forfeit("forecaster", f"capital F fell to {state.F:g}")
    return state


class DefensiveForecaster:
    """The synthesized forecaster for either game.

    Continuous: neutralizes each move to within a per-round tolerance
    eps_c * 2^-n / 2 (floored at 1e-8 — below that float noise dominates),
    so the capital never exceeds 1 + eps_c over any horizon.  Randomized:
    plays the cell-supported forecast and the matching side bet.
    """

    name = "defensive"

    def __init__(self, config: GameConfig):
        self.config = config
        self.last_certified = None
        self._warm_k = None

    def _tol(self, n):
        return max(self.config.eps_c * 2.0 ** (-n) / 2.0, CONTINUOUS_TOL_FLOOR)

    def announce(self, S: ScepticMove, n):
        cfg = self.config
        if cfg.game == "continuous":
            k0 = max(cfg.k0, 2)
            if self._warm_k is not None:
                # successive rounds need similar resolution; skip the climb
                k0 = min(max(k0, self._warm_k // 2), cfg.kmax)
            p, certified, ok, k_used = solve_best_effort(
                S, self._tol(n), k0=k0, kmax=cfg.kmax)
            if ok:
                self._warm_k = k_used
            if p is None:
                raise RefinementExhausted(cfg.kmax, "no candidate found")
            self.last_certified = certified
            return p
        k0 = cfg.k0
        if self._warm_k is not None:
            # late rounds keep needing the same fine mesh (the support
            # diameter budget bottoms out); skip the climb from scratch
            k0 = min(max(k0, self._warm_k // 2), cfg.kmax)
        forecast, diag = build_randomized_forecast(
            S, n, cfg.eps, eps_n_at(cfg.eps_n_schedule, n),
            kmax=cfg.kmax, k0=k0)
        self._warm_k = forecast.mesh_k
        self.last_certified = diag["worst_expected_gain"]
        return forecast

    def bet(self, S: ScepticMove, omega, P: RandomizedForecast, n):
        return side_bet(S, omega, P, self.config.eps, n)


def _verdict(config, state, N):
    Ks = [r.K for r in state.rounds]
    sup_K = max(Ks, default=1.0)
    sup_K = max(sup_K, 1.0)
    if config.game == "randomized":
        held = all(r.K <= (1.0 + config.eps) * r.F + VALIDITY_TOL
                   for r in state.rounds)
        final_F = state.F
    else:
        held = all(K <= 1.0 + config.eps_c + VALIDITY_TOL for K in Ks)
        final_F = 1.0
    return Verdict(horizon=N, sup_K=sup_K, final_F=final_F,
                   invariant_held=held, forfeits=list(state.forfeits))


def _header(config, N):
    return {
        "schema": SCHEMA,
        "version": __version__,
        "game": config.game,
        "M": config.M,
        "N": N,
        "eps": config.eps,
        "eps_c": config.eps_c,
        "eps_n_schedule": config.eps_n_schedule,
        "k0": config.k0,
        "kmax": config.kmax,
        "seed": config.seed,
        "sceptic": config.sceptic,
        "reality": config.reality,
        "rng": config.rng,
        "forecaster": config.forecaster,
    }


def run_game(config: GameConfig, sceptic, forecaster, reality,
             rng_policy, N) -> Transcript:
    """Play up to N rounds; strategy failures end the game as forfeits.

    Returns a complete Transcript with the verdict attached.
    """
    if N < 0:
        raise DimensionMismatch(f"N must be >= 0, got {N}")
    randomized = config.game == "randomized"
    state = RandomizedGameState() if randomized else ContinuousGameState()

    for n in range(1, N + 1):
        view = HistoryView(round=n, num_outcomes=config.M,
                           capital=state.K, pairs=list(state.pairs))
        try:
            S = sceptic.next_move(view)
        except Exception as exc:
            state._forfeit("sceptic", f"move failed: {exc}")
            break
        try:
            announced = forecaster.announce(S, n)
        except ValidityViolation as exc:
            state._forfeit("sceptic", str(exc))
            break
        except Exception as exc:
            state._forfeit("forecaster", f"forecast failed: {exc}")
            break
        try:
            omega = reality.next_outcome(S, announced)
        except Exception as exc:
            state._forfeit("reality", f"outcome failed: {exc}")
            break
        if randomized:
            try:
                bet = forecaster.bet(S, omega, announced, n)
            except Exception as exc:
                state._forfeit("forecaster", f"side bet failed: {exc}")
                break
            try:
                drawn = rng_policy.draw(announced, S, omega)
            except Exception as exc:
                state._forfeit("rng", f"draw failed: {exc}")
                break
            try:
                step_randomized(state, S, announced, omega, bet, drawn)
            except SideBetInvalid:
                break  # forfeit already recorded
            except DfsimError as exc:
                state._forfeit("forecaster", str(exc))
                break
        else:
            step_continuous(state, S, announced, omega)
        if state.forfeits:
            break

    return Transcript(header=_header(config, N), rounds=list(state.rounds),
                      verdict=_verdict(config, state, N))
