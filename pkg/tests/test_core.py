import numpy as np
import pytest

from decisionrisk.core import (
    DecisionProblem,
    InputError,
    Prior,
    RiskProfile,
    bayes_scores,
    choose_bayes,
    choose_maximin,
    choose_mmr,
    load_welfare_csv,
    mmr_scores,
    rank_rules,
    regret_of_action,
    round_sig,
    save_welfare_csv,
    undominated,
    weakly_dominated,
)


def two_action_problem():
    return DecisionProblem(("a", "b"), ("s1", "s2"), ((1.0, 0.0), (0.0, 1.0)))


def three_action_problem():
    return DecisionProblem(
        ("a", "b", "c"), ("s1", "s2"), ((1.0, 0.0), (0.0, 1.0), (0.6, 0.6))
    )


def test_regret_of_action():
    p = two_action_problem()
    assert regret_of_action(p, "a", "s1") == 0.0
    assert regret_of_action(p, "a", "s2") == 1.0
    p3 = three_action_problem()
    assert regret_of_action(p3, "c", "s1") == pytest.approx(0.4, abs=1e-15)


def test_regret_nonnegative_and_zero_iff_optimal():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n_act, n_st = rng.integers(1, 5, 2)
        table = rng.random((n_act, n_st))
        actions = tuple(f"a{i}" for i in range(n_act))
        states = tuple(f"s{j}" for j in range(n_st))
        p = DecisionProblem(actions, states, tuple(map(tuple, table)))
        for a in actions:
            for s in states:
                r = regret_of_action(p, a, s)
                assert r >= 0
                assert (r == 0) == (p.w(a, s) == p.state_optimum(s))


def test_unknown_labels_rejected():
    p = two_action_problem()
    with pytest.raises(InputError):
        regret_of_action(p, "z", "s1")
    with pytest.raises(InputError):
        regret_of_action(p, "a", "nope")


def test_problem_validation():
    with pytest.raises(InputError):
        DecisionProblem(("a", "a"), ("s",), ((1.0,), (2.0,)))
    with pytest.raises(InputError):
        DecisionProblem(("a",), ("s", "t"), ((1.0,),))
    with pytest.raises(InputError):
        DecisionProblem(("a",), ("s",), ((float("nan"),),))
    with pytest.raises(InputError):
        DecisionProblem.from_dict(("a",), ("s", "t"), {("a", "s"): 1.0})


def test_weakly_dominated():
    p = DecisionProblem(("a", "b"), ("s1", "s2"), ((1.0, 1.0), (1.0, 0.0)))
    assert weakly_dominated("b", p)
    assert not weakly_dominated("a", p)
    assert not weakly_dominated("a", two_action_problem())
    assert not weakly_dominated("c", three_action_problem())
    assert undominated(three_action_problem()) == ("a", "b", "c")


def test_weakly_dominated_profiles():
    prof_a = RiskProfile("A", ((0.9, 0.1, 0.0), (0.8, 0.2, 0.0)))
    prof_b = RiskProfile("B", ((0.5, 0.5, 0.0), (0.5, 0.5, 0.0)))
    assert weakly_dominated("B", [prof_a, prof_b])
    assert not weakly_dominated("A", [prof_a, prof_b])
    with pytest.raises(InputError):
        weakly_dominated("C", [prof_a, prof_b])


def test_choose_bayes():
    p3 = three_action_problem()
    assert choose_bayes(p3, Prior((0.9, 0.1))) == "a"
    assert bayes_scores(p3, Prior((0.9, 0.1))) == pytest.approx((0.9, 0.1, 0.6))
    # uniform prior on the symmetric problem ties at 0.5; order breaks it
    assert choose_bayes(two_action_problem(), Prior.uniform(2)) == "a"
    # single state: degenerate prior reduces to the per-state argmax
    assert choose_bayes(p3, Prior((1.0,)), subset=["s2"]) == "b"
    with pytest.raises(InputError):
        choose_bayes(p3, Prior((0.5, 0.5)), subset=["s1"])


def test_choose_maximin():
    assert choose_maximin(three_action_problem()) == "c"
    assert choose_maximin(two_action_problem()) == "a"  # tie at 0 -> order
    single = DecisionProblem(("only",), ("s1", "s2"), ((0.2, 0.4),))
    assert choose_maximin(single) == "only"
    with pytest.raises(InputError):
        choose_maximin(three_action_problem(), subset=[])


def test_choose_mmr():
    action, value = choose_mmr(three_action_problem())
    assert action == "c"
    assert value == pytest.approx(0.4, abs=1e-15)
    action, value = choose_mmr(two_action_problem())
    assert (action, value) == ("a", 1.0)
    # single state: mmr action is the welfare maximizer with regret 0
    action, value = choose_mmr(three_action_problem(), subset=["s1"])
    assert (action, value) == ("a", 0.0)


def test_mmr_never_dominated_when_unique():
    rng = np.random.default_rng(20191203)
    for _ in range(200):
        n_act = int(rng.integers(2, 7))
        n_st = int(rng.integers(1, 7))
        table = np.round(rng.random((n_act, n_st)), 3)
        actions = tuple(f"a{i}" for i in range(n_act))
        states = tuple(f"s{j}" for j in range(n_st))
        p = DecisionProblem(actions, states, tuple(map(tuple, table)))
        scores = [round_sig(s) for s in mmr_scores(p)]
        winner, _ = choose_mmr(p)
        if scores.count(min(scores)) == 1:
            assert not weakly_dominated(winner, p)


def test_subset_equals_full():
    p = three_action_problem()
    full = list(p.states)
    assert choose_maximin(p, subset=full) == choose_maximin(p)
    assert choose_mmr(p, subset=full) == choose_mmr(p)
    assert choose_bayes(p, Prior((0.3, 0.7)), subset=full) == choose_bayes(
        p, Prior((0.3, 0.7))
    )


def test_affine_invariance():
    rng = np.random.default_rng(11)
    for _ in range(30):
        table = rng.random((3, 4))
        actions, states = ("a", "b", "c"), ("s0", "s1", "s2", "s3")
        p = DecisionProblem(actions, states, tuple(map(tuple, table)))
        alpha, beta = float(rng.uniform(0.1, 3.0)), float(rng.uniform(-2, 2))
        q = DecisionProblem(
            actions, states, tuple(tuple(alpha * v + beta for v in row) for row in table)
        )
        prior = Prior((0.1, 0.2, 0.3, 0.4))
        assert choose_bayes(p, prior) == choose_bayes(q, prior)
        assert choose_maximin(p) == choose_maximin(q)
        assert choose_mmr(p)[0] == choose_mmr(q)[0]


def test_rank_rules_dominance_and_mmr():
    prof_a = RiskProfile("A", ((0.9, 0.1, 0.0), (0.8, 0.2, 0.0)))
    prof_b = RiskProfile("B", ((0.5, 0.5, 0.0), (0.5, 0.5, 0.0)))
    optimum = (1.0, 1.0)
    for criterion, kwargs in [
        ("bayes", {"prior": Prior((0.5, 0.5))}),
        ("maximin", {}),
        ("mmr", {"optimum_per_state": optimum}),
    ]:
        assert rank_rules([prof_a, prof_b], criterion, **kwargs).winner == "A"

    prof_a = RiskProfile("A", ((0.8, 0.2, 0.0), (0.2, 0.8, 0.0)))
    res = rank_rules([prof_a, prof_b], "mmr", optimum_per_state=optimum)
    assert res.winner == "B"
    assert res.value == pytest.approx(0.5)


def test_rank_rules_errors():
    prof = RiskProfile("A", ((0.5, 0.5, 0.0),))
    with pytest.raises(InputError):
        rank_rules([prof], "bayes")
    with pytest.raises(InputError):
        rank_rules([prof], "mmr")
    with pytest.raises(InputError):
        rank_rules([prof], "nope")
    with pytest.raises(InputError):
        rank_rules([], "maximin")


def test_maximin_ignores_data_on_unrestricted_grid():
    # With all outcome means 0 feasible, every treatment rule has minimum
    # expected welfare 0, so maximin ties across the board.
    from decisionrisk import engine, treat

    states = [
        treat.TreatmentState(0.0, 0.0, 0.0, 0.0, 0.5),  # all means zero
        treat.TreatmentState(1.0, 0.0, 0.5, 1.0, 0.5),
        treat.TreatmentState(0.5, 0.5, 0.5, 0.5, 0.75),
    ]
    profiles = []
    for rid in treat.TREAT_RULE_IDS:
        rule = treat.get_rule(rid)
        ests = [engine.exact_risk_small(rule, st, 4) for st in states]
        profiles.append(engine.build_risk_profile(rid, ests))
    res = rank_rules(profiles, "maximin")
    assert res.value == 0.0
    assert set(res.ties) == set(treat.TREAT_RULE_IDS)


def test_prior_validation():
    with pytest.raises(InputError):
        Prior((0.5, 0.6))
    with pytest.raises(InputError):
        Prior((-0.5, 1.5))
    with pytest.raises(InputError):
        Prior(())
    assert sum(Prior.uniform(3).weights) == pytest.approx(1.0, abs=1e-15)


def test_risk_profile_validation():
    with pytest.raises(InputError):
        RiskProfile("bad", ((0.5, -0.1, 0.0),))
    with pytest.raises(InputError):
        RiskProfile("bad", ((0.5, 0.1, -1.0),))


def test_welfare_csv_round_trip(tmp_path):
    p = three_action_problem()
    path = tmp_path / "welfare.csv"
    save_welfare_csv(p, path)
    q = load_welfare_csv(path)
    assert q == p
    bad = tmp_path / "bad.csv"
    bad.write_text("state1,state2\n")
    with pytest.raises(InputError):
        load_welfare_csv(bad)
