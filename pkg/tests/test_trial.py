import itertools
import math

import pytest

from decisionrisk import engine, trial
from decisionrisk.core import InputError
from decisionrisk.engine import exact_risk_small
from decisionrisk.trial import (
    TrialSample,
    TrialState,
    compare_max_regret,
    critical_value,
    exact_choice_prob_b,
    pooled_z_statistic,
    regret_from_error_prob,
    rule_es_trial,
    rule_np_test,
    simulate_trial_sample,
)


def test_simulate_degenerate():
    rng = engine.derive_stream(1, 0, 0)
    s = simulate_trial_sample(TrialState(1.0, 0.0), 10, 10, rng)
    assert (s.k_a, s.k_b) == (10, 0)


def test_simulate_deterministic():
    state = TrialState(0.4, 0.6)
    draw = lambda: simulate_trial_sample(state, 8, 12, engine.derive_stream(3, 1, 2))
    assert draw() == draw()


def test_sample_validation():
    with pytest.raises(InputError):
        TrialSample(0, 5, 0, 1)
    with pytest.raises(InputError):
        TrialSample(5, 5, 6, 0)


def test_rule_es_trial():
    assert rule_es_trial(TrialSample(10, 10, 3, 7)) == "b"
    assert rule_es_trial(TrialSample(10, 10, 5, 4)) == "a"
    assert rule_es_trial(TrialSample(10, 10, 4, 4)) == "a"
    assert rule_es_trial(TrialSample(10, 10, 4, 4), tie="b") == "b"
    # unbalanced arms compare rates, not counts
    assert rule_es_trial(TrialSample(4, 8, 2, 5)) == "b"


def test_rule_np_test():
    # empirical difference <= 0 can never reject the one-sided null
    assert rule_np_test(TrialSample(50, 50, 30, 25)) == "a"
    assert rule_np_test(TrialSample(50, 50, 25, 25)) == "a"
    assert rule_np_test(TrialSample(50, 50, 25, 40), 0.05) == "b"
    z = pooled_z_statistic(TrialSample(50, 50, 25, 40))
    assert z == pytest.approx(3.1449, abs=1e-3)
    # undefined statistic (pooled rate 0 or 1) keeps standard care
    assert pooled_z_statistic(TrialSample(5, 5, 0, 0)) is None
    assert rule_np_test(TrialSample(5, 5, 0, 0)) == "a"
    assert rule_np_test(TrialSample(5, 5, 5, 5)) == "a"
    with pytest.raises(InputError):
        rule_np_test(TrialSample(5, 5, 1, 4), alpha=1.5)


def test_np_monotone_in_alpha():
    # shrinking the rejection region never flips a decision from a to b
    n = 6
    for k_a, k_b in itertools.product(range(n + 1), repeat=2):
        sample = TrialSample(n, n, k_a, k_b)
        strict = rule_np_test(sample, 0.01)
        loose = rule_np_test(sample, 0.10)
        if strict == "b":
            assert loose == "b"


def test_regret_from_error_prob():
    assert regret_from_error_prob(TrialState(0.5, 0.5), 0.7) == 0.0
    assert regret_from_error_prob(TrialState(0.7, 0.4), 0.25) == pytest.approx(0.075)
    assert regret_from_error_prob(TrialState(0.4, 0.7), 1.0) == 0.0
    with pytest.raises(InputError):
        regret_from_error_prob(TrialState(0.5, 0.5), 1.2)


def test_expected_welfare_identity_exact():
    # expected welfare plus regret recovers the per-state optimum exactly
    for rid in trial.TRIAL_RULE_IDS:
        rule = trial.get_rule(rid)
        for p_a, p_b in itertools.product((0.0, 0.3, 0.8), repeat=2):
            est = exact_risk_small(rule, TrialState(p_a, p_b), 4)
            assert est.expected_welfare + est.regret == pytest.approx(
                max(p_a, p_b), abs=1e-12
            )


def test_type_i_error_control():
    # on the null boundary the test rule picks b at most alpha of the time
    rule = trial.get_rule("np", alpha=0.05)
    adapter = trial.trial_adapter()
    plan = engine.ReplicationPlan(n=25, replicates=4000)
    for i, p in enumerate((0.2, 0.5, 0.8)):
        state = TrialState(p, p)
        rng = engine.state_block_stream(99, i)
        k_a = rng.binomial(25, p, 4000)
        k_b = rng.binomial(25, p, 4000)
        prob_b = float(rule.vector(k_a, k_b, 25, 25).mean())
        se = math.sqrt(prob_b * (1 - prob_b) / 4000) or 1e-3
        assert prob_b <= 0.05 + 3 * se


def test_es_symmetric_np_not():
    # reflecting the state swaps the arms; empirical success mirrors
    # exactly (with mirrored ties) while the null-privileged test does not
    state = TrialState(0.3, 0.62)
    mirror = TrialState(0.62, 0.3)
    n = 5
    es_a = exact_risk_small(trial.get_rule("es", tie="a"), state, n)
    es_b = exact_risk_small(trial.get_rule("es", tie="b"), mirror, n)
    assert es_a.regret == pytest.approx(es_b.regret, abs=1e-12)

    np_rule = trial.get_rule("np")
    direct = exact_risk_small(np_rule, state, n)
    reflected = exact_risk_small(np_rule, mirror, n)
    assert abs(direct.regret - reflected.regret) > 1e-6


def test_exact_choice_prob_hand_case():
    # one unit per arm, ties to a: P(choose b) = P(k_a=0) * P(k_b=1)
    rule = trial.get_rule("es")
    prob = exact_choice_prob_b(rule, TrialState(0.6, 0.4), 1, 1)
    assert prob == pytest.approx(0.4 * 0.4, abs=1e-12)


def test_compare_uses_exact_for_small_samples():
    result = compare_max_regret(3, density=5, replicates=100)
    assert result.exact
    # all-polar grid rows are deterministic: check two of them
    rows = {(r[0], r[1]): (r[2], r[3]) for r in result.rows}
    assert rows[(0.0, 0.0)] == (0.0, 0.0)
    assert rows[(1.0, 0.0)] == (0.0, 0.0)


def test_compare_monte_carlo_and_claim_spot():
    result = compare_max_regret(25, density=21, replicates=1500)
    assert not result.exact
    assert result.max_regret_es < result.max_regret_np
    assert 0.0 < result.max_regret_es < 0.1
    assert result.max_regret_np > 0.05


def test_compare_worker_determinism():
    one = compare_max_regret(3, density=5, replicates=200, workers=1)
    two = compare_max_regret(3, density=5, replicates=200, workers=2)
    assert one == two


def test_compare_csv(tmp_path):
    result = compare_max_regret(2, density=3, replicates=100)
    path = tmp_path / "cmp.csv"
    result.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "p_a,p_b,regret_es,regret_np"
    assert lines[-1].startswith("max,")
    assert len(lines) == 2 + 9


def test_compare_validation():
    with pytest.raises(InputError):
        compare_max_regret(0)
    with pytest.raises(InputError):
        compare_max_regret(5, alpha=0.0)
    with pytest.raises(InputError):
        critical_value(1.0)
