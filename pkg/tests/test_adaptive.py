import math
from fractions import Fraction

import numpy as np
import pytest

import discountcast as dc
from discountcast.rng import as_stream, child

from conftest import tiny_instance


class ScriptedPolicy:
    """Probes a fixed list of pairs; used to exercise the trajectory engine."""

    def __init__(self, probes):
        self.probes = [dc.SeedDiscountPair(*p) for p in probes]
        self.snapshots = []

    def begin(self, state):
        self.i = 0

    def next_probe(self, state):
        self.snapshots.append((set(state.available), state.budget_left))
        if self.i >= len(self.probes):
            return None
        pair = self.probes[self.i]
        self.i += 1
        return pair


def greedy_factory(inst, spec):
    return dc.GreedyFactory(inst, spec)


def test_scripted_walkthrough_trajectory(fig1, hard2):
    real = dc.fig2_realization(fig1)
    policy = dc.GreedyPolicy(fig1, dc.SpreadEstimator(fig1.graph))
    rec = dc.run_policy(policy, fig1, hard2, real)
    probes = [(fig1.graph.labels[p.pair.node], p.pair.rate, p.accepted) for p in rec.probes]
    assert probes == [("a", 1.0, True), ("c", 1.0, False), ("d", 1.0, True)]
    assert rec.cascade_size == 4
    assert sorted(fig1.graph.labels[v] for v in rec.influenced) == ["a", "b", "d", "e"]
    assert rec.delivered_cost == pytest.approx(2.0, abs=0)
    lines = rec.log_lines(fig1.graph)
    assert lines[0] == "probe a 1 accept a->b:live a->c:blocked b->d:blocked"
    assert lines[1] == "probe c 1 reject"
    assert lines[2] == "probe d 1 accept d->e:live"


def test_rejection_prunes_only_cheaper_rates(fig1, hard2):
    # b's threshold sits between the two rates: reject at 1, accept at 2
    real = dc.Realization(
        seeding=dc.SeedingRealization(min_rate_idx=(2, 1, 2, 2, 2)),
        diffusion=dc.DiffusionRealization(live=(False,) * 5),
    )
    policy = ScriptedPolicy([(1, 1.0), (1, 2.0)])
    rec = dc.run_policy(policy, fig1, hard2, real)
    assert [p.accepted for p in rec.probes] == [False, True]
    after_reject = policy.snapshots[1][0]
    assert dc.SeedDiscountPair(1, 1.0) not in after_reject
    assert dc.SeedDiscountPair(1, 2.0) in after_reject
    assert rec.delivered_cost == pytest.approx(2.0, abs=0)


def test_acceptance_prunes_influenced_nodes(fig1, hard2):
    real = dc.fig2_realization(fig1)
    policy = ScriptedPolicy([(0, 1.0)])
    dc.run_policy(policy, fig1, hard2, real)
    final = policy.snapshots[-1][0]
    nodes_left = {p.node for p in final}
    assert nodes_left == {2, 3, 4}  # a and b are influenced, their offers are gone


def test_probing_influenced_node_is_a_contract_error(fig1, hard2):
    real = dc.fig2_realization(fig1)
    policy = ScriptedPolicy([(0, 1.0), (1, 1.0)])  # b is influenced by a's cascade
    with pytest.raises(dc.PolicyContractError):
        dc.run_policy(policy, fig1, hard2, real)


def test_overspending_is_a_contract_error(fig1):
    spec = dc.BudgetSpec(budget=1.0, mode="hard")
    real = dc.fig2_realization(fig1)
    policy = ScriptedPolicy([(0, 2.0)])
    with pytest.raises(dc.PolicyContractError):
        dc.run_policy(policy, fig1, spec, real)


def test_greedy_never_overspends_and_accepts_at_threshold():
    checked = 0
    for seed in range(4):
        inst, spec = tiny_instance(seed)
        factory = greedy_factory(inst, spec)
        policy = factory(as_stream(0))
        menu = inst.menu
        for t in range(250):
            real = dc.sample_realization(inst, child(as_stream(seed), t))
            rec = dc.run_policy(policy, inst, spec, real)
            assert rec.delivered_cost <= spec.budget + 1e-12
            for p in rec.probes:
                if p.accepted:
                    # an accepted greedy offer is the cheapest one the node takes
                    assert menu.index_of(p.pair.rate) == real.seeding.min_rate_idx[p.pair.node]
                    checked += 1
    assert checked > 100


def test_worstcase_policy_values():
    inst = dc.worstcase_instance(10)
    spec = dc.BudgetSpec(budget=1.0, mode="hard")
    gv, gr = dc.evaluate_policy(dc.GreedyFactory(inst, spec), inst, spec, "exhaustive")
    assert gr == 0.0
    assert gv == pytest.approx(1.0, abs=1e-9)
    ev, _ = dc.evaluate_policy(dc.EnhancedFactory(inst, spec), inst, spec, "exhaustive")
    assert ev == pytest.approx(9.0, abs=1e-9)
    iv, _ = dc.evaluate_policy(dc.IteratedFactory(inst, spec), inst, spec, "exhaustive")
    assert iv == pytest.approx(9.0, abs=1e-9)


def test_enhanced_delegates_when_branch_is_worse(fig1, hard2):
    gv, _ = dc.evaluate_policy(dc.GreedyFactory(fig1, hard2), fig1, hard2, "exhaustive")
    ev, _ = dc.evaluate_policy(dc.EnhancedFactory(fig1, hard2), fig1, hard2, "exhaustive")
    # one full-rate offer to a is worth 1.609, the greedy continuation more
    assert ev == gv


def test_exhaustive_evaluation_matches_manual_enumeration(fig1, hard2):
    factory = dc.GreedyFactory(fig1, hard2)
    val, rad = dc.evaluate_policy(factory, fig1, hard2, "exhaustive")
    policy = factory(as_stream(0))
    manual = 0.0
    weight = 0.0
    for w, real in dc.enumerate_conditional_realizations(fig1, dc.PartialObservation()):
        manual += w * dc.run_policy(policy, fig1, hard2, real).cascade_size
        weight += w
    assert weight == pytest.approx(1.0, abs=1e-12)
    assert val == manual
    assert rad == 0.0


def test_sampled_evaluation_approaches_exhaustive(fig1, hard2):
    factory = dc.GreedyFactory(fig1, hard2)
    exact, _ = dc.evaluate_policy(factory, fig1, hard2, "exhaustive")
    est, radius = dc.evaluate_policy(factory, fig1, hard2, 4000, stream=13)
    assert abs(est - exact) <= radius  # radius holds at 95%, this seed passes
    assert radius == dc.hoeffding_radius(5, 4000)


def test_evaluation_worker_count_is_invisible(fig1, hard2):
    factory = dc.GreedyFactory(fig1, hard2)
    v1, r1 = dc.evaluate_policy(factory, fig1, hard2, 300, stream=5, workers=1)
    v4, r4 = dc.evaluate_policy(factory, fig1, hard2, 300, stream=5, workers=4)
    assert (v1, r1) == (v4, r4)


def test_evaluate_policy_validates_trials(fig1, hard2):
    factory = dc.GreedyFactory(fig1, hard2)
    with pytest.raises(dc.ValidationError):
        dc.evaluate_policy(factory, fig1, hard2, 0)
    with pytest.raises(dc.ValidationError):
        dc.evaluate_policy(factory, fig1, hard2, "all")


def test_conditional_realizations_respect_rejections(fig1, hard2):
    obs = dc.PartialObservation()
    obs.probed.append((dc.SeedDiscountPair(1, 1.0), False))  # b rejected the cheap rate
    total = 0.0
    for w, real in dc.enumerate_conditional_realizations(fig1, obs):
        total += w
        assert real.seeding.min_rate_idx[1] >= 1
    assert total == pytest.approx(1.0, abs=1e-12)
    gen = np.random.default_rng(3)
    for _ in range(200):
        real = dc.sample_conditional_realization(fig1, obs, gen)
        assert real.seeding.min_rate_idx[1] >= 1


def test_conditional_realizations_pin_revealed_edges(fig1):
    real = dc.fig2_realization(fig1)
    obs = dc.PartialObservation()
    dc.reveal_cascade(fig1.graph, real.diffusion, obs, 0)
    for _, r in dc.enumerate_conditional_realizations(fig1, obs):
        assert r.diffusion.live[0] is True
        assert r.diffusion.live[1] is False
        assert r.diffusion.live[2] is False


def test_enumeration_cap(fig1):
    with pytest.raises(dc.TooLargeError):
        list(dc.enumerate_conditional_realizations(fig1, dc.PartialObservation(), max_outcomes=10))


def test_branch_estimator_modes_agree(fig1, hard2):
    est = dc.SpreadEstimator(fig1.graph)
    exhaustive = dc.BranchEstimator(fig1, hard2, est, dc.BranchConfig(mode="exhaustive"))
    rollout = dc.BranchEstimator(
        fig1, hard2, est, dc.BranchConfig(mode="rollouts", rollouts=4000), stream=as_stream(7)
    )
    state = dc.initial_state(fig1, hard2)
    a = exhaustive.greedy_value_from(state)
    b = rollout.greedy_value_from(state)
    assert a == pytest.approx(b, abs=0.15)
    again = dc.BranchEstimator(
        fig1, hard2, est, dc.BranchConfig(mode="rollouts", rollouts=4000), stream=as_stream(7)
    )
    assert again.greedy_value_from(dc.initial_state(fig1, hard2)) == b


def test_estimator_guards():
    g = dc.fig1_instance().graph
    with pytest.raises(dc.ValidationError):
        dc.SpreadEstimator(g, mode="mc")  # needs a stream
    with pytest.raises(dc.ValidationError):
        dc.SpreadEstimator(g, mode="other")
    with pytest.raises(dc.ValidationError):
        dc.BranchConfig(mode="sometimes")
    with pytest.raises(dc.ValidationError):
        dc.BranchConfig(mode="rollouts", rollouts=0)


def test_mc_spread_estimator_is_state_keyed(fig1):
    est = dc.SpreadEstimator(fig1.graph, mode="mc", samples=2000, stream=as_stream(31))
    val_empty = est.residual_spread(set(), 2)
    val_after = est.residual_spread({0, 1}, 2)
    est2 = dc.SpreadEstimator(fig1.graph, mode="mc", samples=2000, stream=as_stream(31))
    # same keys, fresh caches: identical draws either way around
    assert est2.residual_spread({0, 1}, 2) == val_after
    assert est2.residual_spread(set(), 2) == val_empty


def test_optimal_oracle_hand_computed_two_node_case():
    g = dc.SocialGraph(2, ("0", "1"), (dc.Edge(0, 1, 0.5),))
    menu = dc.DiscountMenu(rates=(1.0,))
    model = dc.AdoptionModel(menu=menu, probs=((0.6,), (0.8,)))
    inst = dc.Instance(graph=g, model=model)
    # probe 0 first: 0.6 * (1 + 0.5) + 0.4 * (0.8 * 1) = 1.22 beats probing 1 first (0.98)
    assert dc.optimal_policy_oracle(inst, dc.BudgetSpec(budget=1.0)) == pytest.approx(1.22, abs=1e-12)
    assert dc.optimal_policy_oracle(inst, dc.BudgetSpec(budget=2.0)) == pytest.approx(1.46, abs=1e-12)


def test_optimal_oracle_dominates_policies(fig1, hard2):
    opt = dc.optimal_policy_oracle(fig1, hard2, max_edges=6)
    for factory in (dc.GreedyFactory(fig1, hard2), dc.EnhancedFactory(fig1, hard2)):
        val, _ = dc.evaluate_policy(factory, fig1, hard2, "exhaustive")
        assert val <= opt + 1e-9


def test_optimal_oracle_caps():
    inst = dc.worstcase_instance(5)  # 12 clique edges
    spec = dc.BudgetSpec(budget=1.0)
    with pytest.raises(dc.TooLargeError):
        dc.optimal_policy_oracle(inst, spec)
    big, bspec = tiny_instance(0)
    with pytest.raises(dc.TooLargeError):
        dc.optimal_policy_oracle(big, bspec, max_nodes=2)


def test_iterated_heuristic_runs_clean_on_tiny_instances():
    for seed in range(6):
        inst, spec = tiny_instance(seed)
        val, _ = dc.evaluate_policy(dc.IteratedFactory(inst, spec), inst, spec, "exhaustive")
        opt = dc.optimal_policy_oracle(inst, spec)
        assert 0.0 <= val <= opt + 1e-9, f"seed {seed}"
