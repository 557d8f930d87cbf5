"""Prediction of a bounded binary outcome under square loss with missing data.

States specify the outcome distribution among observed units (q1), among
missing units (q0, never sampled), and the observability rate p_obs. A
predictor sees N observability indicators and the outcomes of the
observed units only; its regret in a state is its mean squared error as
an estimate of the population mean q1*p_obs + q0*(1 - p_obs).

Panel A places no restriction on (q1, q0); panel B keeps their
difference inside [-1/2, 1/2].
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import InputError
from .engine import (
    CellResult,
    DecisionRule,
    ProblemAdapter,
    RiskEstimate,
    register_exact_evaluator,
    state_block_stream,
)

PANEL_BAND = 0.5
_BAND_TOL = 1e-12


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise InputError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class PredictionState:
    """Bernoulli parameters (observed, missing) plus observability rate."""

    q1: float
    q0: float
    p_obs: float

    def __post_init__(self) -> None:
        for name in ("q1", "q0", "p_obs"):
            object.__setattr__(self, name, _check_unit(name, getattr(self, name)))

    @property
    def mean(self) -> float:
        """Population mean outcome implied by the state."""
        return self.q1 * self.p_obs + self.q0 * (1.0 - self.p_obs)

    def in_panel_b(self) -> bool:
        return abs(self.q1 - self.q0) <= PANEL_BAND + _BAND_TOL


@dataclass(frozen=True)
class PredictionSample:
    """N observability indicators and the outcomes of the observed units."""

    delta: tuple[int, ...]
    y_obs: tuple[int, ...]

    def __post_init__(self) -> None:
        delta = tuple(int(d) for d in self.delta)
        y_obs = tuple(int(y) for y in self.y_obs)
        if any(d not in (0, 1) for d in delta) or any(y not in (0, 1) for y in y_obs):
            raise InputError("prediction samples are binary")
        if len(y_obs) != sum(delta):
            raise InputError("y_obs length must equal the number of observed units")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "y_obs", y_obs)

    @property
    def n(self) -> int:
        return len(self.delta)

    @property
    def k(self) -> int:
        return len(self.y_obs)


@dataclass(frozen=True)
class PredictionSummary:
    """Sufficient statistics of a prediction sample.

    mu_resp falls back to 1/2 when no outcomes were observed, so every
    predictor built on the summary is total.
    """

    n: int
    k: int
    mu_resp: float
    p_hat: float

    def __post_init__(self) -> None:
        if not 0 <= self.k <= self.n:
            raise InputError("need 0 <= K <= N")
        _check_unit("mu_resp", self.mu_resp)
        _check_unit("p_hat", self.p_hat)

    @classmethod
    def from_counts(cls, n: int, k: int, successes: int) -> "PredictionSummary":
        mu = successes / k if k > 0 else 0.5
        return cls(n, k, mu, k / n)


def summarize(sample: PredictionSample) -> PredictionSummary:
    return PredictionSummary.from_counts(sample.n, sample.k, sum(sample.y_obs))


def simulate_prediction_sample(
    state: PredictionState, n: int, rng: np.random.Generator
) -> PredictionSample:
    """Draw N observability indicators, then outcomes for the observed units.

    q0 is never sampled: missing outcomes stay unobserved.
    """
    if n < 1:
        raise InputError("sample size must be >= 1")
    delta = rng.random(n) < state.p_obs
    k = int(delta.sum())
    y = rng.random(k) < state.q1
    return PredictionSample(tuple(int(d) for d in delta), tuple(int(v) for v in y))


def identification_interval(mean_resp: float, p_obs: float) -> tuple[float, float]:
    """Feasible range of the population mean given the observed-mean and rate."""
    mean_resp = _check_unit("mean_resp", mean_resp)
    p_obs = _check_unit("p_obs", p_obs)
    lo = mean_resp * p_obs
    return lo, lo + (1.0 - p_obs)


def predict_midpoint_known_p(mu_resp: float, p_obs: float) -> float:
    """Midpoint of the identification interval, observability rate known."""
    lo, hi = identification_interval(mu_resp, p_obs)
    return 0.5 * (lo + hi)


def midpoint_max_regret_known_p(p_obs: float, k: int) -> float:
    """Closed-form maximum MSE of the known-rate midpoint predictor.

    Worst-case variance (at q1 = 1/2) plus worst-case squared bias
    (at q0 in {0, 1}): (p_obs**2 / k + (1 - p_obs)**2) / 4.
    """
    p_obs = _check_unit("p_obs", p_obs)
    if k < 1:
        raise InputError("k must be >= 1")
    return 0.25 * (p_obs * p_obs / k + (1.0 - p_obs) ** 2)


def predict_hodges_lehmann(mu_n: float, n: int) -> float:
    """Shrink the sample mean toward 1/2 by the constant-risk weighting.

    Designed for fully observed samples; the resulting MSE is
    1 / (4 * (sqrt(N) + 1)**2) at every outcome distribution on [0, 1].
    """
    mu_n = _check_unit("mu_n", mu_n)
    if n < 1:
        raise InputError("sample size must be >= 1")
    root = math.sqrt(n)
    return (mu_n * root + 0.5) / (root + 1.0)


def predict_midpoint(summary: PredictionSummary) -> float:
    """Midpoint predictor with the observability rate estimated by K/N."""
    return summary.mu_resp * summary.p_hat + 0.5 * (1.0 - summary.p_hat)


def predict_sample_average(summary: PredictionSummary) -> float:
    """Average observed outcome (treats data as missing at random)."""
    return summary.mu_resp


def hodges_lehmann_constant_mse(n: int) -> float:
    return 0.25 / (math.sqrt(n) + 1.0) ** 2


def _vector_mu(k: np.ndarray, s: np.ndarray) -> np.ndarray:
    mu = np.full(k.shape, 0.5)
    np.divide(s, k, out=mu, where=k > 0)
    return mu


def _vector_midpoint(k: np.ndarray, s: np.ndarray, n: int) -> np.ndarray:
    p_hat = k / n
    return _vector_mu(k, s) * p_hat + 0.5 * (1.0 - p_hat)


def _vector_sample_average(k: np.ndarray, s: np.ndarray, n: int) -> np.ndarray:
    return _vector_mu(k, s)


def _vector_hodges_lehmann(k: np.ndarray, s: np.ndarray, n: int) -> np.ndarray:
    root = math.sqrt(n)
    return (_vector_mu(k, s) * root + 0.5) / (root + 1.0)


def _mc_midpoint(sample: PredictionSample, rng=None) -> float:
    return predict_midpoint(summarize(sample))


def _mc_sample_average(sample: PredictionSample, rng=None) -> float:
    return predict_sample_average(summarize(sample))


def _point_hodges_lehmann(summary: PredictionSummary) -> float:
    return predict_hodges_lehmann(summary.mu_resp, summary.n)


def _mc_hodges_lehmann(sample: PredictionSample, rng=None) -> float:
    return _point_hodges_lehmann(summarize(sample))


PREDICT_RULES: dict[str, DecisionRule] = {
    "midpoint": DecisionRule(
        "midpoint", _mc_midpoint, predict_midpoint, _vector_midpoint
    ),
    "sample_average": DecisionRule(
        "sample_average", _mc_sample_average, predict_sample_average,
        _vector_sample_average,
    ),
    "hodges_lehmann": DecisionRule(
        "hodges_lehmann", _mc_hodges_lehmann, _point_hodges_lehmann,
        _vector_hodges_lehmann,
    ),
}


def get_rule(rule_id: str) -> DecisionRule:
    try:
        return PREDICT_RULES[rule_id]
    except KeyError:
        raise InputError(f"unknown prediction rule {rule_id!r}") from None


def _welfare(prediction: float, state: PredictionState) -> float:
    err = prediction - state.mean
    return -err * err


def _optimum(state: PredictionState) -> float:
    return 0.0


def _make_state(point: Sequence[float]) -> PredictionState:
    return PredictionState(*point)


def prediction_adapter() -> ProblemAdapter:
    """Adapter for the generic engine sweeps: welfare is negative square loss."""
    return ProblemAdapter(_make_state, simulate_prediction_sample, _welfare, _optimum)


def _exact_prediction_risk(rule: DecisionRule, state: PredictionState, n: int) -> RiskEstimate:
    """Exact MSE by enumerating (K, successes) with binomial weights."""
    mu = state.mean
    p, q1 = state.p_obs, state.q1
    mse = 0.0
    for k in range(n + 1):
        pk = math.comb(n, k) * p**k * (1.0 - p) ** (n - k)
        if pk == 0.0:
            continue
        for s in range(k + 1):
            ps = math.comb(k, s) * q1**s * (1.0 - q1) ** (k - s)
            if ps == 0.0:
                continue
            pred = rule.exact_stat(PredictionSummary.from_counts(n, k, s))
            mse += pk * ps * (pred - mu) ** 2
    return RiskEstimate(-mse, mse, 0.0, 0)


register_exact_evaluator(PredictionState, _exact_prediction_risk)


def default_outcome_grid(density: int = 100) -> tuple[float, ...]:
    """Interior uniform grid i/(density+1) used by the benchmark tables.

    The worst cases of the benchmark predictors sit strictly inside the
    unit interval once sampling error is involved, and reference values
    were computed on an interior grid; endpoint grids are available via
    engine.uniform_grid for analyses that need the polar states.
    """
    if density < 2:
        raise InputError("grid density must be >= 2")
    return tuple(float(v) for v in np.arange(1, density + 1) / (density + 1))


def feasible_q0(
    q_grid: Sequence[float], q1: float, panel: str, corners: bool
) -> tuple[float, ...]:
    """Grid values of q0 admitted for a given q1, optionally extremes only.

    The estimated MSE is a convex quadratic in the population mean, which
    is monotone in q0, so the maximum over the admitted set is always
    attained at one of the two extreme values; `corners` skips the
    interior points without changing the result.
    """
    if panel == "a":
        feasible = tuple(q_grid)
    elif panel == "b":
        feasible = tuple(
            q0 for q0 in q_grid if abs(q1 - q0) <= PANEL_BAND + _BAND_TOL
        )
    else:
        raise InputError(f"unknown panel {panel!r}")
    if not feasible:
        raise InputError(f"no feasible q0 on the grid for q1={q1!r}")
    if corners:
        lo, hi = feasible[0], feasible[-1]
        return (lo,) if lo == hi else (lo, hi)
    return feasible


def _mse_from_moments(mu, m1, m2):
    return m2 - 2.0 * mu * m1 + mu * mu


def _sq_error_stderr(mu, m1, m2, m3, m4, t):
    """Stderr of the mean squared error from raw prediction moments."""
    mse = _mse_from_moments(mu, m1, m2)
    fourth = m4 - 4.0 * mu * m3 + 6.0 * mu * mu * m2 - 4.0 * mu**3 * m1 + mu**4
    var = max(0.0, fourth - mse * mse)
    if t > 1:
        var *= t / (t - 1)
    return math.sqrt(var / t)


def _mse_cell(args) -> CellResult:
    (rule_id, panel, n, p_obs, replicates, seed, q_grid, corners, base) = args
    rule = PREDICT_RULES[rule_id]
    best_val, best_arg, best_se = -1.0, (), 0.0
    for j, q1 in enumerate(q_grid):
        rng = state_block_stream(seed, base + j)
        k = rng.binomial(n, p_obs, replicates)
        s = rng.binomial(k, q1)
        preds = rule.vector(k, s, n)
        sq = preds * preds
        m1 = float(preds.mean())
        m2 = float(sq.mean())
        m3 = float((sq * preds).mean())
        m4 = float((sq * sq).mean())
        for q0 in feasible_q0(q_grid, q1, panel, corners):
            mu = q1 * p_obs + q0 * (1.0 - p_obs)
            mse = _mse_from_moments(mu, m1, m2)
            if mse > best_val:
                best_val = mse
                best_arg = (q1, q0)
                best_se = _sq_error_stderr(mu, m1, m2, m3, m4, replicates)
    return CellResult(best_val, best_arg, best_se)


def max_mse_table(
    rule_id: str,
    panel: str,
    n_list: Sequence[int],
    p_list: Sequence[float],
    plan_replicates: int = 5000,
    master_seed: int = 20191203,
    q_grid: Sequence[float] | None = None,
    counterfactual: str = "corners",
    workers: int = 1,
) -> list[list[CellResult]]:
    """Maximum estimated MSE per (N, observability rate) cell.

    Each realized state (one q1 value) is simulated once per cell from
    its own derived stream; the maximization over the unsampled q0 reuses
    those draws, either at the extreme feasible values
    (`counterfactual="corners"`, exact by convexity) or over the full
    feasible grid (`"full"`, brute force). Results are identical.
    """
    if panel not in ("a", "b"):
        raise InputError(f"unknown panel {panel!r}")
    if counterfactual not in ("corners", "full"):
        raise InputError(f"unknown counterfactual mode {counterfactual!r}")
    get_rule(rule_id)
    grid = tuple(q_grid) if q_grid is not None else default_outcome_grid()
    corners = counterfactual == "corners"
    cells = [(n, p) for n in n_list for p in p_list]
    tasks = [
        (rule_id, panel, n, p, plan_replicates, master_seed, grid, corners, i * len(grid))
        for i, (n, p) in enumerate(cells)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_mse_cell, tasks, chunksize=1))
    else:
        flat = [_mse_cell(t) for t in tasks]
    ncol = len(p_list)
    return [flat[r * ncol : (r + 1) * ncol] for r in range(len(n_list))]


def known_p_max_mse_mc(
    p_obs: float,
    k: int,
    replicates: int = 5000,
    master_seed: int = 20191203,
    q_grid: Sequence[float] | None = None,
) -> CellResult:
    """Monte Carlo check of the known-rate midpoint formula.

    Fixed-K sampling: K outcomes are drawn in every replicate, matching
    the design the closed form assumes. The grid defaults to 101 points
    including both endpoints so the maximizing states q1 = 1/2 and
    q0 in {0, 1} are exactly representable.
    """
    p_obs = _check_unit("p_obs", p_obs)
    if k < 1:
        raise InputError("k must be >= 1")
    if q_grid is not None:
        grid = tuple(q_grid)
    else:
        grid = tuple(float(v) for v in np.linspace(0.0, 1.0, 101))
    best_val, best_arg, best_se = -1.0, (), 0.0
    for j, q1 in enumerate(grid):
        rng = state_block_stream(master_seed, j)
        s = rng.binomial(k, q1, replicates)
        preds = (s / k) * p_obs + 0.5 * (1.0 - p_obs)
        sq = preds * preds
        m1, m2 = float(preds.mean()), float(sq.mean())
        m3, m4 = float((sq * preds).mean()), float((sq * sq).mean())
        for q0 in (grid[0], grid[-1]):
            mu = q1 * p_obs + q0 * (1.0 - p_obs)
            mse = _mse_from_moments(mu, m1, m2)
            if mse > best_val:
                best_val = mse
                best_arg = (q1, q0)
                best_se = _sq_error_stderr(mu, m1, m2, m3, m4, replicates)
    return CellResult(best_val, best_arg, best_se)
