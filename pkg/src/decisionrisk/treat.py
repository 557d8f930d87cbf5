"""Treatment choice between two options with observational outcome data.

Each population member receives exactly one of two treatments, so the
outcome of the treatment not received is counterfactual and never
observed. A state specifies five Bernoulli parameters: realized-outcome
means e_a1 and e_b1, counterfactual means e_a0 and e_b0, and the share p
receiving treatment b. The implied mean outcomes are

    E[y(a)] = e_a1 * (1 - p) + e_a0 * p
    E[y(b)] = e_b1 * p + e_b0 * (1 - p)

and the regret of a rule in a state is the best of those two means minus
the rule's expected achieved welfare. Panel A admits all parameter
combinations; panel B bounds |e_t1 - e_t0| by 1/2 for each treatment.

With the realized-outcome distribution known, the minimax-regret
fractional allocation to b is z_mmr = e_b1 * p + (1 - e_a1) * (1 - p);
the sample analog z_N drives the rules evaluated here.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from itertools import product
from typing import Sequence

import numpy as np

from .core import InputError
from .engine import (
    CellResult,
    DecisionRule,
    ProblemAdapter,
    RiskEstimate,
    register_exact_evaluator,
    sample_variance_moments,
    state_block_stream,
)

PANEL_BAND = 0.5
_BAND_TOL = 1e-12

TREATMENTS = ("a", "b")


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise InputError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class TreatmentState:
    """Realized and counterfactual outcome means plus the b-share p."""

    e_a1: float
    e_a0: float
    e_b1: float
    e_b0: float
    p: float

    def __post_init__(self) -> None:
        for name in ("e_a1", "e_a0", "e_b1", "e_b0", "p"):
            object.__setattr__(self, name, _check_unit(name, getattr(self, name)))

    @property
    def mean_a(self) -> float:
        return self.e_a1 * (1.0 - self.p) + self.e_a0 * self.p

    @property
    def mean_b(self) -> float:
        return self.e_b1 * self.p + self.e_b0 * (1.0 - self.p)

    def in_panel_b(self) -> bool:
        return (
            abs(self.e_a1 - self.e_a0) <= PANEL_BAND + _BAND_TOL
            and abs(self.e_b1 - self.e_b0) <= PANEL_BAND + _BAND_TOL
        )


@dataclass(frozen=True)
class ObservationalSample:
    """Realized (treatment, outcome) pairs for N sampled units."""

    treatments: tuple[str, ...]
    outcomes: tuple[int, ...]

    def __post_init__(self) -> None:
        treatments = tuple(self.treatments)
        outcomes = tuple(int(y) for y in self.outcomes)
        if len(treatments) != len(outcomes) or not treatments:
            raise InputError("need one outcome per treated unit")
        if any(t not in TREATMENTS for t in treatments):
            raise InputError("treatments must be 'a' or 'b'")
        if any(y not in (0, 1) for y in outcomes):
            raise InputError("outcomes must be binary")
        object.__setattr__(self, "treatments", treatments)
        object.__setattr__(self, "outcomes", outcomes)

    @classmethod
    def from_counts(cls, n: int, k_b: int, s_b: int, s_a: int) -> "ObservationalSample":
        """Canonical sample with the given sufficient counts."""
        k_a = n - k_b
        if not (0 <= k_b <= n and 0 <= s_b <= k_b and 0 <= s_a <= k_a):
            raise InputError("inconsistent counts")
        treatments = ("b",) * k_b + ("a",) * k_a
        outcomes = (1,) * s_b + (0,) * (k_b - s_b) + (1,) * s_a + (0,) * (k_a - s_a)
        return cls(treatments, outcomes)

    @property
    def n(self) -> int:
        return len(self.treatments)

    @property
    def k_b(self) -> int:
        return sum(1 for t in self.treatments if t == "b")

    @property
    def s_b(self) -> int:
        return sum(y for t, y in zip(self.treatments, self.outcomes) if t == "b")

    @property
    def s_a(self) -> int:
        return sum(y for t, y in zip(self.treatments, self.outcomes) if t == "a")

    @property
    def p_n(self) -> float:
        return self.k_b / self.n

    def arm_mean(self, treatment: str, fallback: float = 0.5) -> float:
        """Average outcome in one arm; `fallback` when the arm is empty."""
        if treatment not in TREATMENTS:
            raise InputError(f"unknown treatment {treatment!r}")
        count = self.k_b if treatment == "b" else self.n - self.k_b
        if count == 0:
            return fallback
        total = self.s_b if treatment == "b" else self.s_a
        return total / count


def simulate_observational_sample(
    state: TreatmentState, n: int, rng: np.random.Generator
) -> ObservationalSample:
    """Draw N treatment indicators, then outcomes for each arm.

    Counterfactual parameters are never sampled; empty arms are allowed,
    so the rules must be total.
    """
    if n < 1:
        raise InputError("sample size must be >= 1")
    is_b = rng.random(n) < state.p
    k_b = int(is_b.sum())
    y_b = rng.random(k_b) < state.e_b1
    y_a = rng.random(n - k_b) < state.e_a1
    outcomes = np.empty(n, dtype=int)
    outcomes[is_b] = y_b
    outcomes[~is_b] = y_a
    treatments = tuple("b" if flag else "a" for flag in is_b)
    return ObservationalSample(treatments, tuple(int(v) for v in outcomes))


def z_mmr(e_a1: float, e_b1: float, p: float) -> float:
    """Minimax-regret fractional allocation to treatment b."""
    e_a1 = _check_unit("e_a1", e_a1)
    e_b1 = _check_unit("e_b1", e_b1)
    p = _check_unit("p", p)
    return e_b1 * p + (1.0 - e_a1) * (1.0 - p)


def fractional_max_regret(z: float, e_a1: float, e_b1: float, p: float) -> float:
    """Maximum regret of allocating fraction z to b, over the four
    counterfactual corners (e_a0, e_b0) in {0, 1}^2."""
    z = _check_unit("z", z)
    e_a1 = _check_unit("e_a1", e_a1)
    e_b1 = _check_unit("e_b1", e_b1)
    p = _check_unit("p", p)
    worst = 0.0
    for e_a0, e_b0 in product((0.0, 1.0), repeat=2):
        mean_a = e_a1 * (1.0 - p) + e_a0 * p
        mean_b = e_b1 * p + e_b0 * (1.0 - p)
        regret = max(mean_a, mean_b) - (z * mean_b + (1.0 - z) * mean_a)
        worst = max(worst, regret)
    return worst


def singleton_mmr_choice(e_a1: float, e_b1: float, p: float) -> tuple[str, float, float]:
    """Deterministic one-treatment choice minimizing maximum regret.

    Maximum regret of committing to a is z_mmr, of committing to b is
    1 - z_mmr; ties at exactly 1/2 go to a.
    """
    z = z_mmr(e_a1, e_b1, p)
    choice = "b" if z > 0.5 else "a"
    return choice, z, 1.0 - z


def rule_es_known(e_a1: float, e_b1: float, tie: str = "a") -> str:
    """Empirical-success choice when realized-outcome means are known."""
    e_a1 = _check_unit("e_a1", e_a1)
    e_b1 = _check_unit("e_b1", e_b1)
    if tie not in TREATMENTS:
        raise InputError(f"tie policy must be 'a' or 'b', got {tie!r}")
    if e_b1 > e_a1:
        return "b"
    if e_a1 > e_b1:
        return "a"
    return tie


def rule_z_n(sample: ObservationalSample) -> float:
    """Sample analog of the minimax-regret allocation (empty arms use the
    1/2 fallback mean, which cancels against the zero arm share)."""
    p_n = sample.p_n
    return sample.arm_mean("b") * p_n + (1.0 - sample.arm_mean("a")) * (1.0 - p_n)


def _z_n_threshold(sample: ObservationalSample) -> int:
    """Sign of z_N - 1/2 computed in integers (exact tie detection)."""
    m = 2 * (sample.s_b - sample.s_a + sample.n - sample.k_b)
    return (m > sample.n) - (m < sample.n)


def rule_ammr(sample: ObservationalSample, tie: str = "a") -> str:
    """Choose b iff z_N exceeds 1/2; configurable default at an exact tie."""
    if tie not in TREATMENTS:
        raise InputError(f"tie policy must be 'a' or 'b', got {tie!r}")
    sign = _z_n_threshold(sample)
    if sign > 0:
        return "b"
    if sign < 0:
        return "a"
    return tie


def rule_z_nu(sample: ObservationalSample, rng: np.random.Generator) -> str:
    """Randomized singleton version of z_N: b with probability z_N."""
    u = rng.random()
    return "b" if u <= rule_z_n(sample) else "a"


def rule_es_observational(
    sample: ObservationalSample, tie: str = "a", empty_arm: str = "half"
) -> str:
    """Empirical-success choice from an observational sample.

    `empty_arm` fixes the behavior when an arm has no units: "half"
    scores the empty arm as 1/2 and compares as usual; "default" falls
    back to the tie policy whenever either arm is empty. Mean comparisons
    are done in integer cross-products, so ties are exact.
    """
    if tie not in TREATMENTS:
        raise InputError(f"tie policy must be 'a' or 'b', got {tie!r}")
    if empty_arm not in ("half", "default"):
        raise InputError(f"empty_arm must be 'half' or 'default', got {empty_arm!r}")
    k_b = sample.k_b
    k_a = sample.n - k_b
    if empty_arm == "default" and (k_b == 0 or k_a == 0):
        return tie
    num_b, den_b = (sample.s_b, k_b) if k_b else (1, 2)
    num_a, den_a = (sample.s_a, k_a) if k_a else (1, 2)
    diff = num_b * den_a - num_a * den_b
    if diff > 0:
        return "b"
    if diff < 0:
        return "a"
    return tie


# --- per-replicate and vectorized forms wired into DecisionRule objects ----
# All of these live at module level (bound with functools.partial) so rule
# objects stay picklable for multiprocess sweeps. The shared vector
# signature is (k_b, s_b, s_a, n, u); deterministic rules ignore u.

def _vector_z_n(k_b, s_b, s_a, n, u=None):
    k_a = n - k_b
    p_n = k_b / n
    mean_b = np.full(k_b.shape, 0.5)
    np.divide(s_b, k_b, out=mean_b, where=k_b > 0)
    mean_a = np.full(k_b.shape, 0.5)
    np.divide(s_a, k_a, out=mean_a, where=k_a > 0)
    return mean_b * p_n + (1.0 - mean_a) * (1.0 - p_n)


def _vector_ammr(k_b, s_b, s_a, n, u=None, *, tie="a"):
    m = 2 * (s_b - s_a + n - k_b)
    z = (m > n).astype(float)
    if tie == "b":
        z[m == n] = 1.0
    return z


def _vector_es(k_b, s_b, s_a, n, u=None, *, tie="a", empty_arm="half"):
    k_a = n - k_b
    num_b = np.where(k_b > 0, s_b, 1)
    den_b = np.where(k_b > 0, k_b, 2)
    num_a = np.where(k_a > 0, s_a, 1)
    den_a = np.where(k_a > 0, k_a, 2)
    diff = num_b * den_a - num_a * den_b
    tie_z = 1.0 if tie == "b" else 0.0
    z = np.where(diff > 0, 1.0, np.where(diff < 0, 0.0, tie_z))
    if empty_arm == "default":
        z = np.where((k_b == 0) | (k_a == 0), tie_z, z)
    return z


def _vector_z_nu(k_b, s_b, s_a, n, u):
    return (u <= _vector_z_n(k_b, s_b, s_a, n)).astype(float)


def _mc_z_n(sample, rng=None):
    return rule_z_n(sample)


def _mc_z_nu(sample, rng):
    return rule_z_nu(sample, rng)


def _mc_ammr(sample, rng=None, *, tie="a"):
    return rule_ammr(sample, tie)


def _exact_ammr(sample, *, tie="a"):
    return 1.0 if rule_ammr(sample, tie) == "b" else 0.0


def _mc_es(sample, rng=None, *, tie="a", empty_arm="half"):
    return rule_es_observational(sample, tie, empty_arm)


def _exact_es(sample, *, tie="a", empty_arm="half"):
    return 1.0 if rule_es_observational(sample, tie, empty_arm) == "b" else 0.0


def get_rule(rule_id: str, tie: str = "a", empty_arm: str = "half") -> DecisionRule:
    """Built-in treatment rules with their tie and empty-arm policies bound."""
    if tie not in TREATMENTS:
        raise InputError(f"tie policy must be 'a' or 'b', got {tie!r}")
    if empty_arm not in ("half", "default"):
        raise InputError(f"empty_arm must be 'half' or 'default', got {empty_arm!r}")
    if rule_id == "z_n":
        return DecisionRule("z_n", _mc_z_n, rule_z_n, _vector_z_n)
    if rule_id == "z_nu":
        # the exact choice probability equals the allocation z_N itself
        return DecisionRule("z_nu", _mc_z_nu, rule_z_n, _vector_z_nu)
    if rule_id == "ammr":
        return DecisionRule(
            "ammr",
            partial(_mc_ammr, tie=tie),
            partial(_exact_ammr, tie=tie),
            partial(_vector_ammr, tie=tie),
        )
    if rule_id == "es":
        return DecisionRule(
            "es",
            partial(_mc_es, tie=tie, empty_arm=empty_arm),
            partial(_exact_es, tie=tie, empty_arm=empty_arm),
            partial(_vector_es, tie=tie, empty_arm=empty_arm),
        )
    raise InputError(f"unknown treatment rule {rule_id!r}")


TREAT_RULE_IDS = ("ammr", "es", "z_n", "z_nu")
_NEEDS_UNIFORM = {"z_nu"}


def allocation_of(decision) -> float:
    """Fraction assigned to b implied by a decision ('a'/'b' or a fraction)."""
    if decision == "a":
        return 0.0
    if decision == "b":
        return 1.0
    z = float(decision)
    if not 0.0 <= z <= 1.0:
        raise InputError(f"allocation must lie in [0, 1], got {decision!r}")
    return z


def _welfare(decision, state: TreatmentState) -> float:
    z = allocation_of(decision)
    return z * state.mean_b + (1.0 - z) * state.mean_a


def _optimum(state: TreatmentState) -> float:
    return max(state.mean_a, state.mean_b)


def _make_state(point: Sequence[float]) -> TreatmentState:
    return TreatmentState(*point)


def treatment_adapter() -> ProblemAdapter:
    return ProblemAdapter(_make_state, simulate_observational_sample, _welfare, _optimum)


def _exact_treatment_risk(rule: DecisionRule, state: TreatmentState, n: int) -> RiskEstimate:
    """Exact risk by enumerating sufficient counts with binomial weights."""
    mean_a, mean_b = state.mean_a, state.mean_b
    p, e_b1, e_a1 = state.p, state.e_b1, state.e_a1
    ew = 0.0
    for k_b in range(n + 1):
        k_a = n - k_b
        w_k = math.comb(n, k_b) * p**k_b * (1.0 - p) ** k_a
        if w_k == 0.0:
            continue
        for s_b in range(k_b + 1):
            w_b = math.comb(k_b, s_b) * e_b1**s_b * (1.0 - e_b1) ** (k_b - s_b)
            if w_b == 0.0:
                continue
            for s_a in range(k_a + 1):
                w_a = math.comb(k_a, s_a) * e_a1**s_a * (1.0 - e_a1) ** (k_a - s_a)
                if w_a == 0.0:
                    continue
                z = rule.exact_stat(ObservationalSample.from_counts(n, k_b, s_b, s_a))
                ew += w_k * w_b * w_a * (z * mean_b + (1.0 - z) * mean_a)
    best = max(mean_a, mean_b)
    return RiskEstimate(ew, max(0.0, best - ew), 0.0, 0)


register_exact_evaluator(TreatmentState, _exact_treatment_risk)


def default_outcome_grid(density: int = 25) -> tuple[float, ...]:
    """Evenly spaced grid over [0, 1] including both endpoints.

    The worst cases of the singleton rules sit at polar outcome means, so
    the endpoints must be representable; with the default 25 values the
    midpoint 1/2 and the panel-B band edges are grid points as well.
    """
    if density < 2:
        raise InputError("grid density must be >= 2")
    return tuple(float(v) for v in np.linspace(0.0, 1.0, density))


def feasible_counterfactual(
    grid: Sequence[float], e_t1: float, panel: str, corners: bool
) -> tuple[float, ...]:
    """Admitted counterfactual-mean grid values for one arm.

    Estimated regret is convex in each counterfactual mean (a linear
    achieved-welfare term against a max of two linear optima), so its
    maximum over the admitted values is attained at an extreme; `corners`
    drops the interior points without changing the result.
    """
    if panel == "a":
        feasible = tuple(grid)
    elif panel == "b":
        feasible = tuple(
            v for v in grid if abs(e_t1 - v) <= PANEL_BAND + _BAND_TOL
        )
    else:
        raise InputError(f"unknown panel {panel!r}")
    if not feasible:
        raise InputError(f"no feasible counterfactual value on the grid for {e_t1!r}")
    if corners:
        lo, hi = feasible[0], feasible[-1]
        return (lo,) if lo == hi else (lo, hi)
    return feasible


def _regret_cell(args) -> CellResult:
    (rule_id, tie, empty_arm, panel, n, p, replicates, seed, grid, corners_mode, base) = args
    rule = get_rule(rule_id, tie=tie, empty_arm=empty_arm)
    needs_u = rule_id in _NEEDS_UNIFORM
    best_val, best_arg, best_se = -1.0, (), 0.0
    for j, (e_a1, e_b1) in enumerate(product(grid, grid)):
        rng = state_block_stream(seed, base + j)
        k_b = rng.binomial(n, p, replicates)
        s_b = rng.binomial(k_b, e_b1)
        s_a = rng.binomial(n - k_b, e_a1)
        u = rng.random(replicates) if needs_u else None
        z = rule.vector(k_b, s_b, s_a, n, u)
        w1 = float(z.mean())
        w2 = float((z * z).mean())
        z_var = sample_variance_moments(w1, w2, replicates)
        for c_a in feasible_counterfactual(grid, e_a1, panel, corners_mode):
            mean_a = e_a1 * (1.0 - p) + c_a * p
            for c_b in feasible_counterfactual(grid, e_b1, panel, corners_mode):
                mean_b = e_b1 * p + c_b * (1.0 - p)
                regret = max(mean_a, mean_b) - (w1 * mean_b + (1.0 - w1) * mean_a)
                if regret > best_val:
                    best_val = regret
                    best_arg = (e_a1, c_a, e_b1, c_b)
                    best_se = abs(mean_b - mean_a) * math.sqrt(z_var / replicates)
    return CellResult(best_val, best_arg, best_se)


def max_regret_table(
    rule_id: str,
    panel: str,
    n_list: Sequence[int],
    p_list: Sequence[float],
    plan_replicates: int = 5000,
    master_seed: int = 20191203,
    grid: Sequence[float] | None = None,
    counterfactual: str = "corners",
    tie: str = "a",
    es_empty_arm: str = "default",
    workers: int = 1,
) -> list[list[CellResult]]:
    """Maximum estimated regret per (N, p) cell over the outcome grid.

    Realized states (e_a1, e_b1) are simulated once per cell from their
    own derived streams; the maximization over the never-sampled
    counterfactual means reuses those draws at the extreme feasible
    values ("corners", exact by convexity) or over the whole feasible
    grid ("full"). The empirical-success rule defaults to the
    tie-default fallback at empty arms here, which is what pins its
    worst case at the polar states; pass es_empty_arm="half" for the
    averaged fallback.
    """
    if panel not in ("a", "b"):
        raise InputError(f"unknown panel {panel!r}")
    if counterfactual not in ("corners", "full"):
        raise InputError(f"unknown counterfactual mode {counterfactual!r}")
    if rule_id not in TREAT_RULE_IDS:
        raise InputError(f"unknown treatment rule {rule_id!r}")
    g = tuple(grid) if grid is not None else default_outcome_grid()
    corners_mode = counterfactual == "corners"
    cells = [(n, p) for n in n_list for p in p_list]
    r_states = len(g) * len(g)
    tasks = [
        (rule_id, tie, es_empty_arm, panel, n, p, plan_replicates, master_seed,
         g, corners_mode, i * r_states)
        for i, (n, p) in enumerate(cells)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_regret_cell, tasks, chunksize=1))
    else:
        flat = [_regret_cell(t) for t in tasks]
    ncol = len(p_list)
    return [flat[r * ncol : (r + 1) * ncol] for r in range(len(n_list))]


def z_n_mean_mc(
    e_a1: float,
    e_b1: float,
    p: float,
    n: int,
    replicates: int = 100_000,
    master_seed: int = 20191203,
    state_index: int = 0,
) -> tuple[float, float]:
    """Monte Carlo mean of z_N and its standard error (unbiasedness checks)."""
    rng = state_block_stream(master_seed, state_index)
    k_b = rng.binomial(n, p, replicates)
    s_b = rng.binomial(k_b, e_b1)
    s_a = rng.binomial(n - k_b, e_a1)
    z = _vector_z_n(k_b, s_b, s_a, n)
    se = float(z.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    return float(z.mean()), se


SENTENCING_CONFINED_SUCCESS = 0.23
SENTENCING_RELEASED_SUCCESS = 0.41
SENTENCING_RELEASED_SHARE = 0.89


@dataclass(frozen=True)
class SentencingReport:
    """Worked example: confinement (a) versus no confinement (b).

    Observed two-year success rates for juvenile offenders: 0.23 among
    the 11% sentenced to confinement, 0.41 among the 89% not confined,
    with counterfactual outcomes treated as wholly unknown.
    """

    e_a1: float
    e_b1: float
    p: float
    z_mmr: float
    max_regret_a: float
    max_regret_b: float
    mmr_choice: str
    es_choice: str
    fractional_max_regret: float
    note: str

    def lines(self) -> list[str]:
        return [
            "Sentencing example: a = confinement, b = no confinement",
            f"  observed success rates: e_a1 = {self.e_a1}, e_b1 = {self.e_b1}; "
            f"share treated b: p = {self.p}",
            f"  z_mmr (minimax-regret allocation to b) = {self.z_mmr:.4f}",
            f"  max regret of committing to a = {self.max_regret_a:.4f}",
            f"  max regret of committing to b = {self.max_regret_b:.4f}",
            f"  minimax-regret singleton choice: {self.mmr_choice}",
            f"  fractional allocation z_mmr has max regret = "
            f"{self.fractional_max_regret:.4f}",
            f"  empirical-success choice: {self.es_choice}",
            f"  note: {self.note}",
        ]


def sentencing_example() -> SentencingReport:
    """Evaluate the sentencing illustration with exact arithmetic."""
    e_a1 = SENTENCING_CONFINED_SUCCESS
    e_b1 = SENTENCING_RELEASED_SUCCESS
    p = SENTENCING_RELEASED_SHARE
    choice, regret_a, regret_b = singleton_mmr_choice(e_a1, e_b1, p)
    z = z_mmr(e_a1, e_b1, p)
    es_choice = rule_es_known(e_a1, e_b1)
    note = (
        "the empirical-success comparison of observed rates (0.41 > 0.23) "
        "selects b, the treatment with the larger maximum regret; accounts "
        "of this example that apply empirical success have also described "
        "the outcome as choice of a, so the tie to the minimax-regret "
        "ranking is surfaced rather than resolved silently"
    )
    return SentencingReport(
        e_a1=e_a1,
        e_b1=e_b1,
        p=p,
        z_mmr=z,
        max_regret_a=regret_a,
        max_regret_b=regret_b,
        mmr_choice=choice,
        es_choice=es_choice,
        fractional_max_regret=fractional_max_regret(z, e_a1, e_b1, p),
        note=note,
    )
