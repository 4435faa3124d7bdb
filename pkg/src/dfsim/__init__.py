"""dfsim: defensive forecasting games on finite outcome spaces.

A simulator and strategy library for the forecasting game in which a
sceptic bets against announced probabilities: simplex triangulations,
zero-sum game solving, the defensive forecaster for both the continuous
and the randomized protocol, adversary strategies, verifiable JSONL
transcripts, and a CLI.
"""

__version__ = "0.1.0"

from .errors import DfsimError
from .simplex import (
    Triangulation,
    edgewise_subdivision,
    euclidean_distance,
    locate_cell,
    make_prob_vector,
    star_vertices,
    tv_distance,
)
from .zerosum import best_response_row, game_value
from .defensive import (
    RandomizedForecast,
    ScepticMove,
    SideBet,
    audit_validity,
    build_randomized_forecast,
    check_smearing_validity,
    set_aside_transform,
    side_bet,
    smear,
    solve_continuous,
)
from .adversaries import (
    RngPolicy,
    bin_calibration_sceptic,
    k29_kernel_sceptic,
    linear_sceptic,
    random_valid_sceptic,
    reality_strategy,
)
from .protocol import (
    ContinuousGameState,
    DefensiveForecaster,
    GameConfig,
    RandomizedGameState,
    Verdict,
    run_game,
    step_continuous,
    step_randomized,
)
from .transcript import Transcript, read, verify, write
