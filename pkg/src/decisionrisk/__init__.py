"""Expected-welfare and maximum-regret evaluation of statistical decision rules.

Finite decision criteria (`core`), a deterministic seeded Monte Carlo
engine with an exact small-sample oracle (`engine`), and three problem
families built on them: prediction with missing data (`predict`),
treatment choice with observational data (`treat`), and two-arm trial
choice (`trial`). `benchmarks` reproduces the bundled reference tables
and `cli` exposes everything on the command line.
"""

from . import benchmarks, cli, core, engine, predict, treat, trial
from .core import (
    DecisionProblem,
    InputError,
    Prior,
    RiskProfile,
    choose_bayes,
    choose_maximin,
    choose_mmr,
    rank_rules,
    regret_of_action,
    weakly_dominated,
)
from .engine import (
    DecisionRule,
    EngineError,
    ReplicationPlan,
    RiskEstimate,
    StateGrid,
    derive_stream,
    estimate_risk,
    exact_risk_small,
    max_regret_over_grid,
)

__version__ = "0.1.0"

__all__ = [
    "DecisionProblem",
    "DecisionRule",
    "EngineError",
    "InputError",
    "Prior",
    "ReplicationPlan",
    "RiskEstimate",
    "RiskProfile",
    "StateGrid",
    "benchmarks",
    "choose_bayes",
    "choose_maximin",
    "choose_mmr",
    "cli",
    "core",
    "derive_stream",
    "engine",
    "estimate_risk",
    "exact_risk_small",
    "max_regret_over_grid",
    "predict",
    "rank_rules",
    "regret_of_action",
    "treat",
    "trial",
    "weakly_dominated",
]
