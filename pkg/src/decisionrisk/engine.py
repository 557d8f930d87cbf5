"""Seeded Monte Carlo risk estimation, exact small-sample oracle, grid search.

Stream layout
-------------
All randomness flows from counter-based Philox streams, so any cell of a
run can be regenerated in isolation and neither evaluation order nor
worker count can perturb results. With a 64-bit master seed as the key,
the 256-bit counter (little-endian words) is laid out as

    replicate stream:  (0, replicate_index, state_index, 0)
    state block:       (0, 0,               state_index, 1)

Lane 0 backs :func:`derive_stream`, one stream per (state, replicate),
consumed by the generic per-replicate estimator. Lane 1 backs
:func:`state_block_stream`, one stream per state, consumed by the
vectorized grid sweeps which draw whole replicate blocks at once. Both
are pure functions of (master_seed, indices); streams cannot collide for
fewer than 2**64 draws each.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterator, Sequence

import numpy as np

from .core import InputError, RiskProfile

_LANE_REPLICATE = 0
_LANE_BLOCK = 1
_U64 = 2**64

DEFAULT_SEED = 20191203
DEFAULT_REPLICATES = 5000


class EngineError(RuntimeError):
    """A simulation replicate or numerical step failed."""


@dataclass(frozen=True)
class ReplicationPlan:
    """Replicate count, master seed, and per-draw sample size."""

    n: int
    replicates: int = DEFAULT_REPLICATES
    master_seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise InputError("replicates must be >= 1")
        if self.n < 1:
            raise InputError("sample size n must be >= 1")
        if not 0 <= self.master_seed < _U64:
            raise InputError("master_seed must fit in 64 bits")


@dataclass(frozen=True)
class RiskEstimate:
    """Per-state risk of one rule: expected welfare, regret, MC stderr."""

    expected_welfare: float
    regret: float
    mc_stderr: float
    replicates_used: int

    def __post_init__(self) -> None:
        if self.regret < 0 or self.mc_stderr < 0:
            raise InputError("regret and mc_stderr must be non-negative")


@dataclass(frozen=True)
class DecisionRule:
    """Named map from a simulated sample to an action or allocation.

    `mc` is the per-replicate form (sample, rng) -> decision; randomized
    rules draw their auxiliary uniform from `rng` after the sample draws.
    `exact_stat` maps a sample to the rule's decision statistic (choice
    probability of the second action, allocation fraction, or point
    prediction) and is what the exact enumeration oracle integrates.
    `vector` is an optional family-specific batch evaluator used by the
    vectorized table sweeps.
    """

    rule_id: str
    mc: Callable
    exact_stat: Callable | None = None
    vector: Callable | None = None

    def __call__(self, sample, rng=None):
        return self.mc(sample, rng)


@dataclass(frozen=True)
class ProblemAdapter:
    """Bundle of callbacks that make a problem family sweepable.

    `make_state` turns a grid point into a state object, `simulate` draws
    one sample of size n, `welfare` scores a decision in a state, and
    `optimum` gives the best attainable welfare there.
    """

    make_state: Callable[[tuple[float, ...]], object]
    simulate: Callable
    welfare: Callable
    optimum: Callable


def _philox(master_seed: int, counter: Sequence[int]) -> np.random.Generator:
    ctr = np.array(counter, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=np.uint64(master_seed), counter=ctr))


def derive_stream(
    master_seed: int, state_index: int, replicate_index: int
) -> np.random.Generator:
    """Independent random stream for one (state, replicate) cell.

    Pure function of the three inputs: re-deriving with the same indices
    reproduces the stream bit for bit regardless of what else has run.
    """
    if not 0 <= master_seed < _U64:
        raise InputError("master_seed must fit in 64 bits")
    if not 0 <= state_index < _U64 or not 0 <= replicate_index < _U64:
        raise InputError("stream indices must be non-negative 64-bit integers")
    return _philox(master_seed, (0, replicate_index, state_index, _LANE_REPLICATE))


def state_block_stream(master_seed: int, state_index: int) -> np.random.Generator:
    """Stream for a whole per-state replicate block (vectorized sweeps)."""
    if not 0 <= master_seed < _U64:
        raise InputError("master_seed must fit in 64 bits")
    if not 0 <= state_index < _U64:
        raise InputError("state_index must be a non-negative 64-bit integer")
    return _philox(master_seed, (0, 0, state_index, _LANE_BLOCK))


@dataclass(frozen=True)
class StateGrid:
    """Discretized state space: named parameters, per-parameter grids.

    Enumeration is row-major over the parameter order. An optional
    constraint predicate filters points (e.g. a band linking observed and
    missing outcome distributions); stream indices always refer to the
    unconstrained enumeration so that constrained and unconstrained runs
    share per-state draws.
    """

    names: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]
    constraint: Callable[..., bool] | None = None

    def __post_init__(self) -> None:
        if not self.names or len(self.names) != len(self.values):
            raise InputError("grid needs one value list per parameter name")
        vals = []
        for name, grid in zip(self.names, self.values):
            grid = tuple(float(v) for v in grid)
            if not grid:
                raise InputError(f"empty grid for parameter {name!r}")
            if any(not (0.0 <= v <= 1.0) for v in grid):
                raise InputError(f"grid values for {name!r} must lie in [0, 1]")
            vals.append(grid)
        object.__setattr__(self, "values", tuple(vals))

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.values)

    def points(self) -> Iterator[tuple[float, ...]]:
        """All grid points in row-major order, ignoring the constraint."""
        return product(*self.values)

    def admitted(self) -> list[tuple[int, tuple[float, ...]]]:
        """(full enumeration index, point) pairs passing the constraint."""
        if self.constraint is None:
            pts = list(enumerate(self.points()))
        else:
            pts = [
                (i, pt) for i, pt in enumerate(self.points()) if self.constraint(*pt)
            ]
        if not pts:
            raise InputError("state grid is empty after applying the constraint")
        return pts


def uniform_grid(density: int, endpoints: bool = True) -> tuple[float, ...]:
    """`density` evenly spaced values in [0, 1].

    With endpoints, linspace(0, 1, density); without, the interior points
    i/(density+1), which matches maximizations whose suprema sit strictly
    inside the unit interval.
    """
    if density < 2:
        raise InputError("grid density must be >= 2")
    if endpoints:
        return tuple(float(v) for v in np.linspace(0.0, 1.0, density))
    return tuple(float(v) for v in np.arange(1, density + 1) / (density + 1))


def estimate_risk(
    rule: Callable,
    state,
    plan: ReplicationPlan,
    simulator: Callable,
    welfare_fn: Callable,
    optimum_fn: Callable,
    state_index: int = 0,
) -> RiskEstimate:
    """Monte Carlo risk of a rule in one state.

    Averages welfare_fn over `plan.replicates` simulated decisions, one
    derived stream per replicate. Rules must be total: any failure aborts
    with the offending replicate index.
    """
    t_total = plan.replicates
    welfare = np.empty(t_total)
    for t in range(t_total):
        rng = derive_stream(plan.master_seed, state_index, t)
        try:
            sample = simulator(state, plan.n, rng)
            decision = rule(sample, rng)
            welfare[t] = welfare_fn(decision, state)
        except InputError:
            raise
        except Exception as exc:
            raise EngineError(f"replicate {t} failed for rule/simulator: {exc}") from exc
    return _estimate_from_welfare(welfare, optimum_fn(state))


def _estimate_from_welfare(welfare: np.ndarray, optimum: float) -> RiskEstimate:
    t_total = len(welfare)
    ew = float(welfare.mean())
    gap = optimum - ew
    if gap < -1e-9:
        raise EngineError(f"expected welfare {ew} exceeds optimum {optimum}")
    stderr = float(welfare.std(ddof=1) / math.sqrt(t_total)) if t_total > 1 else 0.0
    return RiskEstimate(ew, max(0.0, gap), stderr, t_total)


# Exact-oracle registry; problem-family modules register an evaluator for
# their state type at import time.
_EXACT_EVALUATORS: dict[type, Callable] = {}

EXACT_MAX_N = 12


def register_exact_evaluator(state_type: type, evaluator: Callable) -> None:
    _EXACT_EVALUATORS[state_type] = evaluator


def exact_risk_small(rule: Callable, state, n: int) -> RiskEstimate:
    """Exact risk by enumerating the finite sample space (n <= 12).

    Sums expected welfare over all outcome configurations weighted by
    their state probabilities; mc_stderr is 0. The rule must expose an
    `exact_stat` decision statistic and must depend on the sample only
    through its sufficient counts (all built-in rules do).
    """
    if n < 1:
        raise InputError("sample size must be >= 1")
    if n > EXACT_MAX_N:
        raise InputError(
            f"exact enumeration refused for n={n} > {EXACT_MAX_N}; use estimate_risk"
        )
    evaluator = _EXACT_EVALUATORS.get(type(state))
    if evaluator is None:
        raise InputError(f"no exact evaluator registered for {type(state).__name__}")
    stat = getattr(rule, "exact_stat", None)
    if stat is None:
        raise InputError("exact_risk_small needs a DecisionRule with exact_stat")
    return evaluator(rule, state, n)


@dataclass(frozen=True)
class CellResult:
    """Worst case over a state grid for one benchmark-table cell."""

    value: float
    argmax: tuple[float, ...]
    mc_stderr: float


@dataclass(frozen=True)
class GridSweepResult:
    """Per-state risk table over an admitted grid, in enumeration order."""

    names: tuple[str, ...]
    rows: tuple[tuple[tuple[float, ...], RiskEstimate], ...]

    @property
    def max_regret(self) -> float:
        return max(est.regret for _, est in self.rows)

    @property
    def argmax_state(self) -> tuple[float, ...]:
        best = self.max_regret
        for pt, est in self.rows:
            if est.regret == best:
                return pt
        raise EngineError("empty sweep result")  # pragma: no cover

    def to_csv(self, path: str, decimals: int | None = None) -> None:
        fmt = (lambda v: f"{v:.{decimals}f}") if decimals is not None else repr
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([*self.names, "expected_welfare", "regret", "mc_stderr"])
            for pt, est in self.rows:
                writer.writerow(
                    [*[repr(v) for v in pt], fmt(est.expected_welfare), fmt(est.regret), fmt(est.mc_stderr)]
                )


def _sweep_one(args) -> tuple[tuple[float, ...], RiskEstimate]:
    rule, plan, adapter, full_index, point = args
    state = adapter.make_state(point)
    est = estimate_risk(
        rule, state, plan, adapter.simulate, adapter.welfare, adapter.optimum,
        state_index=full_index,
    )
    return point, est


def max_regret_over_grid(
    rule: Callable,
    grid: StateGrid,
    plan: ReplicationPlan,
    adapter: ProblemAdapter,
    workers: int = 1,
) -> GridSweepResult:
    """Evaluate estimate_risk at every admitted grid state.

    Returns the full per-state table; the maximum and its argmax state
    (first in enumeration order on ties) are properties of the result.
    This is the brute-force path: the table builders in the problem
    modules use vectorized per-state blocks instead.
    """
    tasks = [(rule, plan, adapter, idx, pt) for idx, pt in grid.admitted()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, tasks, chunksize=1))
    else:
        rows = [_sweep_one(task) for task in tasks]
    return GridSweepResult(grid.names, tuple(rows))


def build_risk_profile(
    rule_id: str, estimates: Sequence[RiskEstimate]
) -> RiskProfile:
    """Collect per-state estimates into a rankable risk profile."""
    return RiskProfile(
        rule_id,
        tuple((e.expected_welfare, e.regret, e.mc_stderr) for e in estimates),
    )


def sample_variance_moments(m1: float, m2: float, t: int) -> float:
    """Unbiased sample variance from first two raw moments of t draws."""
    if t < 2:
        return 0.0
    return max(0.0, (m2 - m1 * m1) * t / (t - 1))
