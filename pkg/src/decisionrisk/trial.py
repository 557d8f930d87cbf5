"""Choice between two treatments with ideal two-arm trial data.

A state is a pair of success probabilities (p_a, p_b); the trial draws
independent success counts for each arm. Regret of a rule in a state is
the probability of picking the inferior arm times the welfare gap
|p_b - p_a|, and expected welfare is max(p_a, p_b) minus regret.

Two rules are compared across the unit-square state grid: the
empirical-success rule, and an inference-based rule that switches to the
innovation b only when a one-sided pooled two-proportion z-test rejects
the hypothesis that b is no better than standard care a.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from itertools import product
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .core import InputError
from .engine import (
    DecisionRule,
    ProblemAdapter,
    RiskEstimate,
    register_exact_evaluator,
    state_block_stream,
    uniform_grid,
)


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise InputError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class TrialState:
    """Success probabilities of standard care (a) and the innovation (b)."""

    p_a: float
    p_b: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_a", _check_unit("p_a", self.p_a))
        object.__setattr__(self, "p_b", _check_unit("p_b", self.p_b))

    @property
    def gap(self) -> float:
        return abs(self.p_b - self.p_a)


@dataclass(frozen=True)
class TrialSample:
    """Per-arm sizes and success counts."""

    n_a: int
    n_b: int
    k_a: int
    k_b: int

    def __post_init__(self) -> None:
        if self.n_a < 1 or self.n_b < 1:
            raise InputError("arm sizes must be >= 1")
        if not (0 <= self.k_a <= self.n_a and 0 <= self.k_b <= self.n_b):
            raise InputError("success counts must lie within arm sizes")


def simulate_trial_sample(
    state: TrialState, n_a: int, n_b: int, rng: np.random.Generator
) -> TrialSample:
    """Binomial success counts, arm a drawn first."""
    if n_a < 1 or n_b < 1:
        raise InputError("arm sizes must be >= 1")
    k_a = int(rng.binomial(n_a, state.p_a))
    k_b = int(rng.binomial(n_b, state.p_b))
    return TrialSample(n_a, n_b, k_a, k_b)


def rule_es_trial(sample: TrialSample, tie: str = "a") -> str:
    """Pick the arm with the higher observed success rate."""
    if tie not in ("a", "b"):
        raise InputError(f"tie policy must be 'a' or 'b', got {tie!r}")
    diff = sample.k_b * sample.n_a - sample.k_a * sample.n_b
    if diff > 0:
        return "b"
    if diff < 0:
        return "a"
    return tie


def critical_value(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha!r}")
    return NormalDist().inv_cdf(1.0 - alpha)


def pooled_z_statistic(sample: TrialSample) -> float | None:
    """One-sided pooled two-proportion z statistic, None when undefined."""
    total = sample.k_a + sample.k_b
    n_total = sample.n_a + sample.n_b
    if total == 0 or total == n_total:
        return None
    pooled = total / n_total
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / sample.n_a + 1.0 / sample.n_b))
    return (sample.k_b / sample.n_b - sample.k_a / sample.n_a) / se


def rule_np_test(sample: TrialSample, alpha: float = 0.05) -> str:
    """Choose b only when the test rejects "b is no better than a".

    Standard care keeps its privileged status: an undefined statistic
    (pooled rate 0 or 1) or any non-rejection returns a.
    """
    crit = critical_value(alpha)
    z = pooled_z_statistic(sample)
    return "b" if z is not None and z > crit else "a"


def regret_from_error_prob(state: TrialState, prob_choose_b: float) -> float:
    """Regret implied by a rule's probability of choosing b in a state.

    The error probability weighting the welfare gap is prob_choose_b
    when a is better and 1 - prob_choose_b when b is better; expected
    welfare is max(p_a, p_b) minus the returned regret.
    """
    prob_choose_b = _check_unit("prob_choose_b", prob_choose_b)
    if state.p_a > state.p_b:
        return prob_choose_b * (state.p_a - state.p_b)
    if state.p_b > state.p_a:
        return (1.0 - prob_choose_b) * (state.p_b - state.p_a)
    return 0.0


def _mc_es(sample, rng=None, *, tie="a"):
    return rule_es_trial(sample, tie)


def _exact_es(sample, *, tie="a"):
    return 1.0 if rule_es_trial(sample, tie) == "b" else 0.0


def _mc_np(sample, rng=None, *, alpha=0.05):
    return rule_np_test(sample, alpha)


def _exact_np(sample, *, alpha=0.05):
    return 1.0 if rule_np_test(sample, alpha) == "b" else 0.0


def _vector_es(k_a, k_b, n_a, n_b, *, tie="a"):
    diff = k_b * n_a - k_a * n_b
    tie_z = 1.0 if tie == "b" else 0.0
    return np.where(diff > 0, 1.0, np.where(diff < 0, 0.0, tie_z))


def _vector_np(k_a, k_b, n_a, n_b, *, alpha=0.05):
    crit = critical_value(alpha)
    total = k_a + k_b
    n_total = n_a + n_b
    valid = (total > 0) & (total < n_total)
    pooled = total / n_total
    var = pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b)
    z = np.zeros(np.shape(total), dtype=float)
    np.divide(
        k_b / n_b - k_a / n_a,
        np.sqrt(var, where=valid, out=np.ones_like(var)),
        out=z,
        where=valid,
    )
    return (valid & (z > crit)).astype(float)


def get_rule(rule_id: str, tie: str = "a", alpha: float = 0.05) -> DecisionRule:
    """Built-in trial rules with their policies bound."""
    if rule_id == "es":
        return DecisionRule(
            "es",
            partial(_mc_es, tie=tie),
            partial(_exact_es, tie=tie),
            partial(_vector_es, tie=tie),
        )
    if rule_id == "np":
        critical_value(alpha)
        return DecisionRule(
            "np",
            partial(_mc_np, alpha=alpha),
            partial(_exact_np, alpha=alpha),
            partial(_vector_np, alpha=alpha),
        )
    raise InputError(f"unknown trial rule {rule_id!r}")


TRIAL_RULE_IDS = ("es", "np")


def _welfare(decision, state: TrialState) -> float:
    if decision == "a":
        return state.p_a
    if decision == "b":
        return state.p_b
    raise InputError(f"trial decisions must be 'a' or 'b', got {decision!r}")


def _optimum(state: TrialState) -> float:
    return max(state.p_a, state.p_b)


def _make_state(point: Sequence[float]) -> TrialState:
    return TrialState(*point)


def _simulate_balanced(state: TrialState, n: int, rng: np.random.Generator) -> TrialSample:
    return simulate_trial_sample(state, n, n, rng)


def trial_adapter() -> ProblemAdapter:
    """Adapter for the generic sweeps; plan.n is the per-arm size."""
    return ProblemAdapter(_make_state, _simulate_balanced, _welfare, _optimum)


def _binom_pmf(n: int, p: float) -> np.ndarray:
    k = np.arange(n + 1)
    return np.array(
        [math.comb(n, int(i)) * p**int(i) * (1.0 - p) ** int(n - i) for i in k]
    )


def exact_choice_prob_b(
    rule: DecisionRule, state: TrialState, n_a: int, n_b: int
) -> float:
    """P(rule picks b) by enumerating all success-count pairs."""
    pa = _binom_pmf(n_a, state.p_a)
    pb = _binom_pmf(n_b, state.p_b)
    prob = 0.0
    for k_a in range(n_a + 1):
        if pa[k_a] == 0.0:
            continue
        for k_b in range(n_b + 1):
            w = pa[k_a] * pb[k_b]
            if w == 0.0:
                continue
            prob += w * rule.exact_stat(TrialSample(n_a, n_b, k_a, k_b))
    return prob


def _exact_trial_risk(rule: DecisionRule, state: TrialState, n: int) -> RiskEstimate:
    if 2 * n > 12:
        raise InputError(f"exact trial enumeration needs 2n <= 12, got n={n}")
    prob_b = exact_choice_prob_b(rule, state, n, n)
    regret = regret_from_error_prob(state, prob_b)
    return RiskEstimate(max(state.p_a, state.p_b) - regret, regret, 0.0, 0)


register_exact_evaluator(TrialState, _exact_trial_risk)


@dataclass(frozen=True)
class TrialComparison:
    """Per-state regret of the two rules over the outcome grid."""

    n_per_arm: int
    alpha: float
    exact: bool
    rows: tuple[tuple[float, float, float, float], ...]  # p_a, p_b, es, np

    def _max(self, col: int) -> tuple[float, tuple[float, float]]:
        best, arg = -1.0, (0.0, 0.0)
        for row in self.rows:
            if row[col] > best:
                best, arg = row[col], (row[0], row[1])
        return best, arg

    @property
    def max_regret_es(self) -> float:
        return self._max(2)[0]

    @property
    def max_regret_np(self) -> float:
        return self._max(3)[0]

    @property
    def argmax_es(self) -> tuple[float, float]:
        return self._max(2)[1]

    @property
    def argmax_np(self) -> tuple[float, float]:
        return self._max(3)[1]

    def to_csv(self, path: str, decimals: int = 4) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["p_a", "p_b", "regret_es", "regret_np"])
            for p_a, p_b, r_es, r_np in self.rows:
                writer.writerow(
                    [f"{p_a:g}", f"{p_b:g}", f"{r_es:.{decimals}f}", f"{r_np:.{decimals}f}"]
                )
            writer.writerow(
                ["max", "", f"{self.max_regret_es:.{decimals}f}",
                 f"{self.max_regret_np:.{decimals}f}"]
            )


def _compare_chunk(args) -> list[tuple[float, float, float, float]]:
    (n, alpha, tie, replicates, seed, exact, states) = args
    es = get_rule("es", tie=tie)
    np_rule = get_rule("np", alpha=alpha)
    rows = []
    for index, (p_a, p_b) in states:
        state = TrialState(p_a, p_b)
        if exact:
            prob_es = exact_choice_prob_b(es, state, n, n)
            prob_np = exact_choice_prob_b(np_rule, state, n, n)
        else:
            rng = state_block_stream(seed, index)
            k_a = rng.binomial(n, p_a, replicates)
            k_b = rng.binomial(n, p_b, replicates)
            prob_es = float(es.vector(k_a, k_b, n, n).mean())
            prob_np = float(np_rule.vector(k_a, k_b, n, n).mean())
        rows.append(
            (p_a, p_b, regret_from_error_prob(state, prob_es),
             regret_from_error_prob(state, prob_np))
        )
    return rows


def compare_max_regret(
    n_per_arm: int,
    alpha: float = 0.05,
    density: int = 101,
    replicates: int = 5000,
    master_seed: int = 20191203,
    tie: str = "a",
    workers: int = 1,
) -> TrialComparison:
    """Sweep the (p_a, p_b) grid and compare worst-case regret.

    Balanced arms; both rules are scored on shared per-state draws. When
    the total sample is small enough (2n <= 12) the per-state choice
    probabilities are enumerated exactly instead of simulated.
    """
    if n_per_arm < 1:
        raise InputError("n_per_arm must be >= 1")
    critical_value(alpha)
    grid = uniform_grid(density, endpoints=True)
    exact = 2 * n_per_arm <= 12
    states = list(enumerate(product(grid, grid)))
    if workers > 1:
        chunk = math.ceil(len(states) / (workers * 4))
        chunks = [states[i : i + chunk] for i in range(0, len(states), chunk)]
        tasks = [
            (n_per_arm, alpha, tie, replicates, master_seed, exact, part)
            for part in chunks
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_compare_chunk, tasks))
        rows = [row for part in parts for row in part]
    else:
        rows = _compare_chunk(
            (n_per_arm, alpha, tie, replicates, master_seed, exact, states)
        )
    return TrialComparison(n_per_arm, alpha, exact, tuple(rows))
