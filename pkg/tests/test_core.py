"""Run engine, charges, and problem invariants."""

import math

import pytest

from lll_lab.core import (
    LllError,
    all_charges,
    charge,
    computed_init_ratio,
    event_charge,
    normalized_measure,
    run,
    state_list,
    validate_problem,
)
from lll_lab.rng import source_for_run
from lll_lab.solvers import CnfInstance, ksat_mt, vertex_coloring_greedy
from lll_lab.solvers.aec import GraphInstance
from lll_lab.solvers.matchings import EdgeColoredClique, rainbow_matching


def colored_k6_one_conflict():
    colors = {}
    cid = 0
    for u in range(6):
        for v in range(u + 1, 6):
            colors[(u, v)] = cid
            cid += 1
    colors[(2, 3)] = colors[(0, 1)]
    return EdgeColoredClique(6, colors)


def test_flawless_start_returns_immediately():
    p = ksat_mt(CnfInstance(1, ((1,),)))
    # seeds where the initial assignment satisfies x1
    for seed in range(20):
        rep = run(p, seed=seed)
        if rep.final_state == (1,):
            assert rep.steps == 0 or rep.resample_counts[0] == rep.steps
    rep = run(p, seed=0, max_steps=0)
    if p.present_flaws(rep.final_state):
        assert not rep.terminated
        assert rep.steps == 0


def test_run_determinism(two_clause_mt):
    a = run(two_clause_mt, seed=42, record_trajectory=True)
    b = run(two_clause_mt, seed=42, record_trajectory=True)
    assert a == b
    c = run(two_clause_mt, seed=43)
    assert a.seed != c.seed or a == c


def test_run_report_invariants(two_clause_mt):
    for seed in range(30):
        rep = run(two_clause_mt, seed=seed)
        rep.check_invariants(two_clause_mt)
        assert sum(rep.resample_counts) == rep.steps


def test_expected_steps_one_clause_2sat(one_clause_2sat_mt):
    """Absorbing-chain oracle: from the uniform start the expected step
    count is (1/4) * (1 / (3/4)) = 1/3."""
    from lll_lab.analysis import exact_run_statistics

    stats = exact_run_statistics(one_clause_2sat_mt)
    # independent derivation: solve the 4-state chain by hand
    # E[steps | start 00] = 1 + (1/4) E[steps | 00] -> 4/3, weighted by 1/4
    assert math.isclose(stats.expected_steps, 1.0 / 3.0, abs_tol=1e-12)
    runs = 40000
    total = 0
    for r in range(runs):
        total += run(one_clause_2sat_mt, seed=9, run_index=r).steps
    mean = total / runs
    se = math.sqrt(1.0 / runs) * 2.0  # crude std bound: steps has small variance
    assert abs(mean - 1.0 / 3.0) < 4 * se


def test_charge_mt_clause_is_exact():
    p = ksat_mt(CnfInstance(3, ((1, 2, 3),)))
    assert abs(charge(p, 0) - 0.125) < 1e-12


def test_charge_empty_flaw_is_zero():
    p = ksat_mt(CnfInstance(2, ((1, 2), (1, -2))))
    # add an artificial flaw with empty extension via a wrapper problem
    from dataclasses import replace

    q = replace(
        p,
        num_flaws=3,
        present=lambda i, s: False if i == 2 else p.present(i, s),
        action_distribution=lambda i, s: {s: 1.0} if i == 2 else p.action_distribution(i, s),
        sample_action=lambda i, s, rng: s if i == 2 else p.sample_action(i, s, rng),
        neighbors=lambda i: frozenset() if i == 2 else p.neighbors(i),
        declared_charges=None,
        flaws_present=None,
        flaw_labels=None,
    )
    assert charge(q, 2) == 0.0


def test_charge_rainbow_k6():
    p = rainbow_matching(colored_k6_one_conflict())
    assert abs(charge(p, 0) - 1.0 / 15.0) < 1e-12
    assert abs(charge(p, 0) - 1.0 / ((6 - 1) * (6 - 3))) < 1e-12


def test_charge_greedy_coloring_c4():
    g = GraphInstance.from_edge_list(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    p = vertex_coloring_greedy(g, 5)
    got = charge(p, 0)
    assert abs(got - 1.0 / 9.0) < 1e-12


def test_charge_at_least_flaw_measure(two_clause_mt):
    from lll_lab.core import measure_of_flaws

    charges = all_charges(two_clause_mt)
    measures = measure_of_flaws(two_clause_mt)
    for g, mu in zip(charges, measures):
        assert g >= mu - 1e-12
        assert abs(g - mu) < 1e-12  # perfect resampler


def test_charge_requires_oracle_mode():
    p = ksat_mt(CnfInstance(2, ((1, 2),)))
    from dataclasses import replace

    q = replace(p, enumerate_states=None)
    with pytest.raises(LllError, match="oracle mode"):
        charge(q, 0)


def test_event_charge_identity_and_point(two_clause_mt):
    p = two_clause_mt
    got = event_charge(p, lambda s: p.present(0, s), lambda s: p.action_distribution(0, s))
    assert abs(got - charge(p, 0)) < 1e-12
    states = state_list(p)
    mu = normalized_measure(p)
    sigma0 = states[0]
    got = event_charge(p, lambda s: s == sigma0, lambda s: dict(mu))
    assert abs(got - mu[sigma0]) < 1e-12


def test_measure_support_violation():
    p = ksat_mt(CnfInstance(2, ((1, 2),)))
    from dataclasses import replace

    q = replace(p, weight=lambda s: 0.0 if s == (0, 1) else 1.0)
    # actions can land on the zero-weight state
    with pytest.raises(LllError, match="measure support"):
        charge(q, 0)


def test_validate_catches_asymmetric_neighbors(two_clause_mt):
    from dataclasses import replace

    bad = replace(
        two_clause_mt,
        neighbors=lambda i: frozenset({1}) if i == 0 else frozenset({1}),
    )
    with pytest.raises(LllError, match="symmetric"):
        validate_problem(bad)


def test_validate_catches_causality_gap(two_clause_mt):
    from dataclasses import replace

    bad = replace(two_clause_mt, neighbors=lambda i: frozenset({i}))
    with pytest.raises(LllError, match="causality"):
        validate_problem(bad)


def test_causality_cover_on_shipped_solvers(two_clause_mt):
    validate_problem(two_clause_mt)
    validate_problem(rainbow_matching(colored_k6_one_conflict()))
    g = GraphInstance.from_edge_list(4, [(0, 1), (1, 2), (2, 3)])
    validate_problem(vertex_coloring_greedy(g, 5))


def test_invalid_strategy_errors(two_clause_mt):
    from lll_lab.core import CustomStrategy

    bad = CustomStrategy(lambda present, state, history: 1 - present[0] if len(present) == 1 else present[0])
    # find a seed where exactly one flaw is present at some step
    with pytest.raises(LllError, match="invalid strategy"):
        for seed in range(50):
            run(two_clause_mt, bad, seed=seed)


def test_inconsistent_actions_detected(two_clause_mt):
    from dataclasses import replace

    lying = replace(
        two_clause_mt,
        action_distribution=lambda i, s: {s: 1.0},  # claims it never moves
    )
    with pytest.raises(LllError, match="inconsistent actions"):
        for seed in range(50):
            run(lying, seed=seed, check_support=True)


def test_single_step_frequencies_match_declared(two_clause_mt):
    """Coupling sanity: sampled next-state frequencies against the
    declared distribution, four standard errors per outcome."""
    p = two_clause_mt
    state = (0, 0, 0)  # violates clause 0
    assert p.present(0, state)
    dist = p.action_distribution(0, state)
    n = 200_000
    rng = source_for_run(123, 0)
    counts: dict = {}
    for _ in range(n):
        nxt = p.sample_action(0, state, rng)
        counts[nxt] = counts.get(nxt, 0) + 1
    for target, prob in dist.items():
        p_hat = counts.get(target, 0) / n
        se = math.sqrt(prob * (1 - prob) / n)
        assert abs(p_hat - prob) <= 4 * se


def test_init_ratio_computed_vs_declared(two_clause_mt):
    assert two_clause_mt.init_ratio == 1.0
    from dataclasses import replace

    q = replace(two_clause_mt, init_ratio=None)
    assert abs(computed_init_ratio(q) - 1.0) < 1e-12


def test_rainbow_k20_terminates_rainbow():
    from lll_lab.formats import generate_colored_clique
    from lll_lab.solvers.matchings import rainbow_validity

    rng = source_for_run(7, 0)
    clique = generate_colored_clique(10, 2, rng)
    p = rainbow_matching(clique)
    for seed in range(5):
        rep = run(p, seed=seed)
        assert rep.terminated
        assert rainbow_validity(clique, rep.final_state)


def test_trajectory_steps_were_valid(two_clause_mt):
    """Recorded steps address present flaws with positive declared mass."""
    for seed in range(20):
        rep = run(two_clause_mt, seed=seed, record_trajectory=True)
        states = rep.trajectory.states()
        for t, (w, nxt, rho) in enumerate(rep.trajectory.steps):
            assert two_clause_mt.present(w, states[t])
            assert rho is not None and rho > 0


def test_validate_backtracking_solvers():
    from lll_lab.solvers import CnfInstance, ksat_backtrack
    from lll_lab.solvers.aec import GraphInstance, aec_backtrack

    validate_problem(ksat_backtrack(CnfInstance(4, ((1, 2, 3), (-2, 3, 4)))))
    tri = GraphInstance.from_edge_list(3, [(0, 1), (0, 2), (1, 2)])
    validate_problem(aec_backtrack(tri, 6))


def test_event_charge_composite_coloring_event():
    """Conjunction event on a 4-vertex coloring, resampled over a vertex
    subset: the charge matches a from-scratch exhaustive maximization."""
    import itertools

    g = GraphInstance.from_edge_list(4, [(0, 1), (1, 2), (2, 3)])
    q = 3
    p = vertex_coloring_greedy(g, q)

    def event(state):
        # edge (1,2) monochromatic in color 0 and vertex 0 colored 2
        return state[1] == state[2] == 0 and state[0] == 2

    def event_actions(state):
        # resample vertices 0..2 uniformly
        out = {}
        prob = (1.0 / q) ** 3
        for combo in itertools.product(range(q), repeat=3):
            nxt = (combo[0], combo[1], combo[2], state[3])
            out[nxt] = out.get(nxt, 0.0) + prob
        return out

    got = event_charge(p, event, event_actions)
    # independent brute force straight from the definition
    states = list(itertools.product(range(q), repeat=4))
    mu = 1.0 / len(states)
    incoming = {}
    for s in states:
        if event(s):
            for t, prob in event_actions(s).items():
                incoming[t] = incoming.get(t, 0.0) + mu * prob
    brute = max(mass / mu for mass in incoming.values())
    assert abs(got - brute) < 1e-12


def test_recency_strategy_runs_and_is_deterministic(two_clause_mt):
    a = run(two_clause_mt, "recency", seed=31)
    b = run(two_clause_mt, "recency", seed=31)
    assert a == b
    assert a.terminated


def test_fixed_priority_strategy(two_clause_mt):
    from lll_lab.core import FixedPriorityStrategy

    rev = FixedPriorityStrategy([1, 0])
    for seed in range(30):
        rep = run(two_clause_mt, rev, seed=seed, record_trajectory=True)
        # whenever both flaws were present, flaw 1 went first
        states = rep.trajectory.states()
        for t, (w, _, _) in enumerate(rep.trajectory.steps):
            present = two_clause_mt.present_flaws(states[t])
            if len(present) == 2:
                assert w == 1


def test_custom_strategy_valid_callback(two_clause_mt):
    from lll_lab.core import CustomStrategy

    highest = CustomStrategy(lambda present, state, history: max(present))
    rep = run(two_clause_mt, highest, seed=3)
    assert rep.terminated


def test_causality_cover_all_shipped_solvers():
    """The spec-level invariant: every solver's declared neighborhoods
    survive the exhaustive causality check on enumerable instances."""
    from lll_lab.solvers import (
        CnfInstance,
        aec_backtrack,
        aec_clique_mt,
        ksat_backtrack,
        ksat_backtrack_biased,
        ksat_mt,
        vertex_coloring_greedy,
    )
    from lll_lab.solvers.aec import GraphInstance as G

    tri = G.from_edge_list(3, [(0, 1), (0, 2), (1, 2)])
    square = G.from_edge_list(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    cnf = CnfInstance(4, ((1, 2, 3), (-2, 3, 4)))
    problems = [
        ksat_mt(cnf),
        ksat_mt(CnfInstance(4, ((1, 2), (3, 4)))),
        ksat_backtrack(cnf),
        ksat_backtrack_biased(cnf, [{0: 0.3, 1: 0.7}] * 4),
        aec_backtrack(tri, 6),
        aec_clique_mt(square, 3)[0],
        rainbow_matching(colored_k6_one_conflict()),
        vertex_coloring_greedy(square, 5),
    ]
    for p in problems:
        validate_problem(p)
