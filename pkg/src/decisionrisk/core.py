"""Finite decision problems and the classical choice criteria.

A decision problem here is a small welfare table: a handful of actions
scored against an ordered list of states of nature. Everything in this
module is exact arithmetic; Monte Carlo uncertainty enters only through
the risk profiles produced by the simulation engine, which are ranked
with the same criteria.

Criteria implemented: subjective-average welfare (Bayes), maximin, and
minimax regret, each over the raw welfare table or over per-state
expected-welfare profiles of data-consuming rules.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence


class InputError(ValueError):
    """Invalid user input: unknown labels, malformed tables, bad ranges."""


SIG_DIGITS = 12


def round_sig(x: float, digits: int = SIG_DIGITS) -> float:
    """Round to a fixed number of significant digits.

    Score comparisons and tie detection go through this so that ties are
    stable across platforms instead of hinging on last-bit noise.
    """
    return float(f"{x:.{digits}g}")


def _argbest(
    labels: Sequence[str], scores: Sequence[float], maximize: bool = True
) -> tuple[str, float, tuple[str, ...]]:
    """Best label by rounded score; first label in declared order wins ties."""
    rounded = [round_sig(s) for s in scores]
    best = max(rounded) if maximize else min(rounded)
    ties = tuple(lab for lab, s in zip(labels, rounded) if s == best)
    return ties[0], best, ties


def _check_labels(kind: str, labels: Sequence[str]) -> tuple[str, ...]:
    labels = tuple(labels)
    if not labels:
        raise InputError(f"{kind} list must be non-empty")
    if len(set(labels)) != len(labels):
        raise InputError(f"duplicate {kind} labels: {labels}")
    return labels


@dataclass(frozen=True)
class DecisionProblem:
    """Welfare table w(action, state) over finite action and state sets."""

    actions: tuple[str, ...]
    states: tuple[str, ...]
    welfare: tuple[tuple[float, ...], ...]  # welfare[action][state]

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", _check_labels("action", self.actions))
        object.__setattr__(self, "states", _check_labels("state", self.states))
        rows = tuple(tuple(float(v) for v in row) for row in self.welfare)
        if len(rows) != len(self.actions):
            raise InputError("welfare table must have one row per action")
        for act, row in zip(self.actions, rows):
            if len(row) != len(self.states):
                raise InputError(f"welfare row for {act!r} must cover every state")
            for v in row:
                if not math.isfinite(v):
                    raise InputError(f"non-finite welfare for action {act!r}")
        object.__setattr__(self, "welfare", rows)

    @classmethod
    def from_dict(
        cls,
        actions: Sequence[str],
        states: Sequence[str],
        table: dict[tuple[str, str], float],
    ) -> "DecisionProblem":
        try:
            rows = tuple(
                tuple(table[(a, s)] for s in states) for a in actions
            )
        except KeyError as missing:
            raise InputError(f"welfare table missing entry {missing.args[0]}") from None
        return cls(tuple(actions), tuple(states), rows)

    def action_index(self, action: str) -> int:
        try:
            return self.actions.index(action)
        except ValueError:
            raise InputError(f"unknown action {action!r}") from None

    def state_index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise InputError(f"unknown state {state!r}") from None

    def w(self, action: str, state: str) -> float:
        return self.welfare[self.action_index(action)][self.state_index(state)]

    def state_optimum(self, state: str) -> float:
        """Best attainable welfare in the given state."""
        j = self.state_index(state)
        return max(row[j] for row in self.welfare)

    def _state_subset(self, subset: Sequence[str] | None) -> tuple[int, ...]:
        if subset is None:
            return tuple(range(len(self.states)))
        idx = tuple(self.state_index(s) for s in subset)
        if not idx:
            raise InputError("state subset must be non-empty")
        return idx


@dataclass(frozen=True)
class Prior:
    """Subjective distribution over states, in state order."""

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        w = tuple(float(v) for v in self.weights)
        if not w:
            raise InputError("prior must have at least one weight")
        if any(v < 0 or not math.isfinite(v) for v in w):
            raise InputError("prior weights must be finite and non-negative")
        if abs(sum(w) - 1.0) > 1e-12:
            raise InputError(f"prior weights must sum to 1, got {sum(w)!r}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "Prior":
        return cls((1.0 / n,) * n)


@dataclass(frozen=True)
class RiskProfile:
    """Per-state performance of one rule: (expected welfare, regret, MC stderr)."""

    rule_id: str
    per_state: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(float(v) for v in r) for r in self.per_state)
        for ew, regret, se in rows:
            if regret < 0:
                raise InputError(f"negative regret {regret!r} in profile {self.rule_id!r}")
            if se < 0:
                raise InputError(f"negative mc_stderr {se!r} in profile {self.rule_id!r}")
        object.__setattr__(self, "per_state", rows)

    @property
    def expected_welfare(self) -> tuple[float, ...]:
        return tuple(r[0] for r in self.per_state)

    @property
    def regret(self) -> tuple[float, ...]:
        return tuple(r[1] for r in self.per_state)


def regret_of_action(problem: DecisionProblem, action: str, state: str) -> float:
    """Welfare lost by `action` relative to the best action in `state`."""
    return problem.state_optimum(state) - problem.w(action, state)


def _dominates(better: Sequence[float], worse: Sequence[float]) -> bool:
    ge = all(round_sig(b) >= round_sig(w) for b, w in zip(better, worse))
    gt = any(round_sig(b) > round_sig(w) for b, w in zip(better, worse))
    return ge and gt


def weakly_dominated(
    target: str, problem_or_profiles: DecisionProblem | Sequence[RiskProfile]
) -> bool:
    """True iff some other action/rule is weakly better in every state.

    Accepts either a welfare table (compares welfare rows) or a sequence
    of risk profiles (compares per-state expected welfare).
    """
    if isinstance(problem_or_profiles, DecisionProblem):
        problem = problem_or_profiles
        i = problem.action_index(target)
        rows = problem.welfare
    else:
        profiles = list(problem_or_profiles)
        ids = [p.rule_id for p in profiles]
        if target not in ids:
            raise InputError(f"unknown rule {target!r}")
        i = ids.index(target)
        rows = [p.expected_welfare for p in profiles]
        if len({len(r) for r in rows}) > 1:
            raise InputError("risk profiles must cover the same state list")
    if len(rows) < 2:
        raise InputError("dominance needs at least two actions or rules")
    return any(_dominates(row, rows[i]) for k, row in enumerate(rows) if k != i)


def undominated(problem: DecisionProblem) -> tuple[str, ...]:
    """Actions that no other action weakly dominates."""
    return tuple(a for a in problem.actions if not weakly_dominated(a, problem))


def bayes_scores(
    problem: DecisionProblem, prior: Prior, subset: Sequence[str] | None = None
) -> tuple[float, ...]:
    idx = problem._state_subset(subset)
    if len(prior.weights) != len(idx):
        raise InputError(
            f"prior length {len(prior.weights)} does not match {len(idx)} states"
        )
    return tuple(
        sum(pw * row[j] for pw, j in zip(prior.weights, idx))
        for row in problem.welfare
    )


def choose_bayes(
    problem: DecisionProblem, prior: Prior, subset: Sequence[str] | None = None
) -> str:
    """Action maximizing subjective average welfare; ties to first in order."""
    winner, _, _ = _argbest(problem.actions, bayes_scores(problem, prior, subset))
    return winner


def maximin_scores(
    problem: DecisionProblem, subset: Sequence[str] | None = None
) -> tuple[float, ...]:
    idx = problem._state_subset(subset)
    return tuple(min(row[j] for j in idx) for row in problem.welfare)


def choose_maximin(problem: DecisionProblem, subset: Sequence[str] | None = None) -> str:
    """Action maximizing worst-case welfare; ties to first in order."""
    winner, _, _ = _argbest(problem.actions, maximin_scores(problem, subset))
    return winner


def mmr_scores(
    problem: DecisionProblem, subset: Sequence[str] | None = None
) -> tuple[float, ...]:
    """Maximum regret of each action over the (sub)set of states."""
    idx = problem._state_subset(subset)
    optima = [max(row[j] for row in problem.welfare) for j in idx]
    return tuple(
        max(opt - row[j] for opt, j in zip(optima, idx)) for row in problem.welfare
    )


def choose_mmr(
    problem: DecisionProblem, subset: Sequence[str] | None = None
) -> tuple[str, float]:
    """Minimax-regret action and its maximum regret; ties to first in order."""
    winner, value, _ = _argbest(
        problem.actions, mmr_scores(problem, subset), maximize=False
    )
    return winner, value


@dataclass(frozen=True)
class RankResult:
    winner: str
    value: float
    ties: tuple[str, ...]


def rank_rules(
    profiles: Sequence[RiskProfile],
    criterion: str,
    prior: Prior | None = None,
    optimum_per_state: Sequence[float] | None = None,
) -> RankResult:
    """Rank data-consuming rules by their per-state expected-welfare profiles.

    `bayes` maximizes prior-weighted expected welfare, `maximin` the
    worst-state expected welfare, and `mmr` minimizes the worst-state
    regret, where regret is recomputed as optimum minus expected welfare
    from `optimum_per_state`.
    """
    profiles = list(profiles)
    if not profiles:
        raise InputError("need at least one risk profile")
    n_states = len(profiles[0].per_state)
    if any(len(p.per_state) != n_states for p in profiles):
        raise InputError("risk profiles must cover the same state list")
    ids = [p.rule_id for p in profiles]

    if criterion == "bayes":
        if prior is None:
            raise InputError("bayes ranking requires a prior")
        if len(prior.weights) != n_states:
            raise InputError("prior length does not match profile states")
        scores = [
            sum(pw * ew for pw, ew in zip(prior.weights, p.expected_welfare))
            for p in profiles
        ]
        winner, value, ties = _argbest(ids, scores)
    elif criterion == "maximin":
        scores = [min(p.expected_welfare) for p in profiles]
        winner, value, ties = _argbest(ids, scores)
    elif criterion == "mmr":
        if optimum_per_state is None:
            raise InputError("mmr ranking requires optimum_per_state")
        if len(optimum_per_state) != n_states:
            raise InputError("optimum_per_state length does not match profiles")
        scores = [
            max(opt - ew for opt, ew in zip(optimum_per_state, p.expected_welfare))
            for p in profiles
        ]
        winner, value, ties = _argbest(ids, scores, maximize=False)
    else:
        raise InputError(f"unknown criterion {criterion!r}")
    return RankResult(winner, value, ties)


def load_welfare_csv(path: str) -> DecisionProblem:
    """Read a welfare table: header row of state labels, first column actions."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one action row")
    states = tuple(cell.strip() for cell in rows[0][1:])
    actions = []
    table = []
    for row in rows[1:]:
        actions.append(row[0].strip())
        if len(row) - 1 != len(states):
            raise InputError(f"{path}: row {row[0]!r} has wrong cell count")
        try:
            table.append(tuple(float(cell) for cell in row[1:]))
        except ValueError as exc:
            raise InputError(f"{path}: non-numeric welfare cell ({exc})") from None
    return DecisionProblem(tuple(actions), states, tuple(table))


def save_welfare_csv(problem: DecisionProblem, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["action", *problem.states])
        for action, row in zip(problem.actions, problem.welfare):
            writer.writerow([action, *[repr(v) for v in row]])
