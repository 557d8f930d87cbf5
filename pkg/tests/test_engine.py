import numpy as np
import pytest

from decisionrisk import engine, treat, trial
from decisionrisk.core import InputError
from decisionrisk.engine import (
    ReplicationPlan,
    RiskEstimate,
    StateGrid,
    derive_stream,
    estimate_risk,
    exact_risk_small,
    max_regret_over_grid,
    state_block_stream,
    uniform_grid,
)


def test_derive_stream_deterministic():
    a = derive_stream(20191203, 3, 17).integers(0, 2**63, 8)
    b = derive_stream(20191203, 3, 17).integers(0, 2**63, 8)
    assert np.array_equal(a, b)


def test_derive_stream_distinct():
    base = derive_stream(20191203, 0, 0).integers(0, 2**64, dtype=np.uint64)
    next_rep = derive_stream(20191203, 0, 1).integers(0, 2**64, dtype=np.uint64)
    next_state = derive_stream(20191203, 1, 0).integers(0, 2**64, dtype=np.uint64)
    assert base != next_rep
    assert base != next_state
    # the vectorized lane is separate from every per-replicate lane
    block = state_block_stream(20191203, 0).integers(0, 2**64, dtype=np.uint64)
    assert block != base


def test_stream_index_validation():
    with pytest.raises(InputError):
        derive_stream(-1, 0, 0)
    with pytest.raises(InputError):
        derive_stream(0, -1, 0)
    with pytest.raises(InputError):
        state_block_stream(0, 2**64)


def test_plan_validation():
    with pytest.raises(InputError):
        ReplicationPlan(n=0)
    with pytest.raises(InputError):
        ReplicationPlan(n=5, replicates=0)
    with pytest.raises(InputError):
        ReplicationPlan(n=5, master_seed=2**64)
    assert ReplicationPlan(n=5).replicates == 5000


def _constant_a(sample, rng=None):
    return "a"


def test_estimate_risk_constant_rule():
    plan = ReplicationPlan(n=3, replicates=400)
    adapter = trial.trial_adapter()
    state = trial.TrialState(0.7, 0.4)
    est = estimate_risk(
        _constant_a, state, plan, adapter.simulate, adapter.welfare, adapter.optimum
    )
    assert est.expected_welfare == pytest.approx(0.7, abs=1e-12)
    assert est.regret == pytest.approx(0.0, abs=1e-12)
    assert est.mc_stderr == 0.0
    assert est.replicates_used == 400

    state = trial.TrialState(0.4, 0.7)
    est = estimate_risk(
        _constant_a, state, plan, adapter.simulate, adapter.welfare, adapter.optimum
    )
    assert est.regret == pytest.approx(0.3, abs=1e-12)


def test_estimate_risk_matches_enumeration():
    # one unit per arm, tie to a: P(choose b) = 0.4 * 0.4, regret = 0.16 * 0.2
    plan = ReplicationPlan(n=1, replicates=5000)
    adapter = trial.trial_adapter()
    state = trial.TrialState(0.6, 0.4)
    rule = trial.get_rule("es")
    est = estimate_risk(
        rule, state, plan, adapter.simulate, adapter.welfare, adapter.optimum
    )
    assert abs(est.regret - 0.032) <= 3 * est.mc_stderr


def _broken_rule(sample, rng=None):
    raise ValueError("boom")


def test_estimate_risk_aborts_with_replicate_index():
    plan = ReplicationPlan(n=1, replicates=10)
    adapter = trial.trial_adapter()
    with pytest.raises(engine.EngineError, match="replicate 0"):
        estimate_risk(
            _broken_rule, trial.TrialState(0.5, 0.5), plan,
            adapter.simulate, adapter.welfare, adapter.optimum,
        )


def test_exact_risk_small_trivial_cases():
    rule = trial.get_rule("es")
    est = exact_risk_small(rule, trial.TrialState(1.0, 0.0), 1)
    assert est.regret == 0.0
    assert est.mc_stderr == 0.0
    # zero welfare gap: regret is zero for any rule
    est = exact_risk_small(rule, trial.TrialState(0.3, 0.3), 5)
    assert est.regret == 0.0
    est = exact_risk_small(rule, trial.TrialState(0.6, 0.4), 1)
    assert est.regret == pytest.approx(0.032, abs=1e-12)


def test_exact_risk_small_refusals():
    rule = treat.get_rule("ammr")
    with pytest.raises(InputError):
        exact_risk_small(rule, treat.TreatmentState(0.5, 0.5, 0.5, 0.5, 0.5), 13)
    with pytest.raises(InputError):
        exact_risk_small(rule, treat.TreatmentState(0.5, 0.5, 0.5, 0.5, 0.5), 0)
    with pytest.raises(InputError):
        exact_risk_small(_constant_a, trial.TrialState(0.5, 0.5), 2)
    with pytest.raises(InputError):
        exact_risk_small(rule, "not a state", 2)


def test_state_grid_enumeration_and_constraint():
    grid = StateGrid(("x", "y"), ((0.0, 0.5, 1.0), (0.0, 1.0)))
    assert grid.size == 6
    pts = list(grid.points())
    assert pts[0] == (0.0, 0.0) and pts[1] == (0.0, 1.0)  # row-major
    admitted = grid.admitted()
    assert len(admitted) == 6 and admitted[2][0] == 2

    def band(x, y):
        return abs(x - y) <= 0.5

    constrained = StateGrid(("x", "y"), ((0.0, 0.5, 1.0), (0.0, 1.0)), band)
    kept = constrained.admitted()
    # full-enumeration indices are preserved for stream sharing
    assert [i for i, _ in kept] == [0, 2, 3, 5]

    def impossible(x, y):
        return False

    with pytest.raises(InputError):
        StateGrid(("x", "y"), ((0.0,), (0.0,)), impossible).admitted()
    with pytest.raises(InputError):
        StateGrid(("x",), ((0.0, 1.5),))


def test_uniform_grid():
    pts = uniform_grid(5)
    assert pts == (0.0, 0.25, 0.5, 0.75, 1.0)
    interior = uniform_grid(4, endpoints=False)
    assert interior == (0.2, 0.4, 0.6, 0.8)
    with pytest.raises(InputError):
        uniform_grid(1)


def test_grid_sweep_and_monotonicity(tmp_path):
    plan = ReplicationPlan(n=2, replicates=300)
    adapter = trial.trial_adapter()
    rule = trial.get_rule("es")
    sup = StateGrid(("p_a", "p_b"), ((0.2, 0.5, 0.8), (0.2, 0.5, 0.8)))
    sweep = max_regret_over_grid(rule, sup, plan, adapter)
    assert len(sweep.rows) == 9

    # subgrid maxima cannot exceed the supergrid maximum (shared estimates)
    table = {pt: est.regret for pt, est in sweep.rows}
    for sub in [((0.2, 0.5), (0.2, 0.5)), ((0.5,), (0.2, 0.5, 0.8))]:
        sub_pts = [(a, b) for a in sub[0] for b in sub[1]]
        assert max(table[pt] for pt in sub_pts) <= sweep.max_regret

    path = tmp_path / "sweep.csv"
    sweep.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "p_a,p_b,expected_welfare,regret,mc_stderr"


def test_constraint_monotonicity_shares_streams():
    # same base grid, constrained run keeps full-enumeration stream indices,
    # so its per-state estimates match the unconstrained run exactly
    plan = ReplicationPlan(n=2, replicates=200)
    adapter = trial.trial_adapter()
    rule = trial.get_rule("es")
    values = ((0.2, 0.5, 0.8), (0.2, 0.5, 0.8))

    def near(p_a, p_b):
        return abs(p_a - p_b) <= 0.35

    full = max_regret_over_grid(rule, StateGrid(("p_a", "p_b"), values), plan, adapter)
    part = max_regret_over_grid(
        rule, StateGrid(("p_a", "p_b"), values, near), plan, adapter
    )
    full_map = dict(full.rows)
    for pt, est in part.rows:
        assert est == full_map[pt]
    assert part.max_regret <= full.max_regret


def test_single_state_grid():
    plan = ReplicationPlan(n=1, replicates=500)
    adapter = trial.trial_adapter()
    rule = trial.get_rule("es")
    grid = StateGrid(("p_a", "p_b"), ((0.6,), (0.4,)))
    sweep = max_regret_over_grid(rule, grid, plan, adapter)
    assert sweep.max_regret == sweep.rows[0][1].regret
    assert sweep.argmax_state == (0.6, 0.4)


def test_sweep_worker_determinism():
    plan = ReplicationPlan(n=2, replicates=100)
    adapter = trial.trial_adapter()
    rule = trial.get_rule("es")
    grid = StateGrid(("p_a", "p_b"), ((0.3, 0.7), (0.3, 0.7)))
    one = max_regret_over_grid(rule, grid, plan, adapter, workers=1)
    two = max_regret_over_grid(rule, grid, plan, adapter, workers=2)
    assert one == two


def test_mc_stderr_scaling():
    adapter = trial.trial_adapter()
    rule = trial.get_rule("es")
    state = trial.TrialState(0.55, 0.45)
    ratios = []
    for seed in (1, 2, 3):
        small = estimate_risk(
            rule, state, ReplicationPlan(n=4, replicates=500, master_seed=seed),
            adapter.simulate, adapter.welfare, adapter.optimum,
        )
        big = estimate_risk(
            rule, state, ReplicationPlan(n=4, replicates=2000, master_seed=seed),
            adapter.simulate, adapter.welfare, adapter.optimum,
        )
        ratios.append(small.mc_stderr / big.mc_stderr)
    mean_ratio = sum(ratios) / len(ratios)
    assert 2.0 * 0.8 <= mean_ratio <= 2.0 * 1.2


def test_risk_estimate_validation():
    with pytest.raises(InputError):
        RiskEstimate(0.5, -0.1, 0.0, 10)
    with pytest.raises(InputError):
        RiskEstimate(0.5, 0.1, -0.1, 10)


def test_estimate_regret_identity():
    # regret recomputed as optimum minus expected welfare from the same draws
    plan = ReplicationPlan(n=3, replicates=800)
    adapter = trial.trial_adapter()
    rule = trial.get_rule("np")
    state = trial.TrialState(0.2, 0.9)
    est = estimate_risk(
        rule, state, plan, adapter.simulate, adapter.welfare, adapter.optimum,
        state_index=5,
    )
    assert est.expected_welfare + est.regret == pytest.approx(0.9, abs=1e-12)
