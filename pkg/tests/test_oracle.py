import math

import numpy as np
import pytest
from scipy.optimize import linprog

from ramp import audits, oracle
from ramp.envs import chain_mdp, deterministic_policy, exact_occupancy


def test_entropy_and_kl_examples():
    assert oracle.exact_entropy(np.full(4, 0.25)) == pytest.approx(math.log(4))
    assert oracle.exact_kl([0.3, 0.7], [0.3, 0.7]) == 0.0
    expected = 0.8 * math.log(1.6) + 0.2 * math.log(0.4)
    assert oracle.exact_kl([0.8, 0.2], [0.5, 0.5]) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.19274, abs=1e-5)


def test_kl_support_violation_is_flagged():
    v = oracle.kl_with_flag([0.5, 0.5], [1.0, 0.0])
    assert v.value == math.inf and v.support_violation
    assert not oracle.kl_with_flag([1.0, 0.0], [0.5, 0.5]).support_violation


def test_distribution_validation():
    for bad in ([0.5, 0.6], [-0.1, 1.1], [], [np.nan, 1.0]):
        with pytest.raises(ValueError):
            oracle.as_dist(bad)


def test_mixture():
    np.testing.assert_array_equal(oracle.mixture([1, 0], [0, 1], 0.25), [0.25, 0.75])
    np.testing.assert_array_equal(oracle.mixture([1, 0], [0, 1], 1.0), [1, 0])
    np.testing.assert_array_equal(oracle.mixture([1, 0], [0, 1], 0.0), [0, 1])


def test_decomposition_fixed_point():
    mu = np.array([0.2, 0.3, 0.5])
    assert oracle.theorem1_decomposition(mu, mu, 0.4) == pytest.approx((0.0, 0.0, 0.0), abs=1e-15)


def test_decomposition_hand_case():
    dh, lb, res = oracle.theorem1_decomposition([0.0, 1.0], [1.0, 0.0], 0.5)
    assert dh == pytest.approx(math.log(2))
    assert lb == pytest.approx(0.5 * math.log(2))
    assert res == pytest.approx(0.5 * math.log(2))
    assert dh == pytest.approx(lb + res, abs=1e-15)


def test_theorem1_audit_passes():
    out = audits.audit_theorem1()
    assert out.passed, out.detail


# --- Wasserstein-1 ---------------------------------------------------------


def test_w1_examples():
    g3, g5 = oracle.MetricGraph.chain(3), oracle.MetricGraph.chain(5)
    assert oracle.w1_exact([0.2, 0.3, 0.5], [0.2, 0.3, 0.5], g3) == 0.0
    assert oracle.w1_exact(np.eye(5)[0], np.eye(5)[4], g5) == pytest.approx(4.0)
    assert oracle.w1_exact([0.5, 0.5, 0.0], [0.0, 0.0, 1.0], g3) == pytest.approx(1.5)


def _lp_w1(p, q, d):
    n = len(p)
    a_eq = np.zeros((2 * n, n * n))
    for i in range(n):
        a_eq[i, i * n : (i + 1) * n] = 1.0
        a_eq[n + i, i::n] = 1.0
    out = linprog(d.ravel(), A_eq=a_eq, b_eq=np.concatenate([p, q]), bounds=(0, None), method="highs")
    return out.fun


def test_w1_matches_linear_programming():
    rng = np.random.default_rng(0)
    for trial in range(150):
        n = int(rng.integers(2, 9))
        adj = rng.random((n, n)) < 0.35
        idx = np.arange(n)
        adj[idx, (idx + 1) % n] = True  # strongly connected ring
        if trial % 2:
            adj = adj | adj.T
        g = oracle.MetricGraph.from_adjacency(adj)
        p, q = audits.random_dist(rng, n, trial % 3 == 0), audits.random_dist(rng, n, trial % 4 == 0)
        t = oracle.min_cost_transport(p, q, g.dist)
        assert t.cost == pytest.approx(_lp_w1(p, q, g.dist), abs=1e-9)
        np.testing.assert_allclose(t.plan.sum(axis=1), p, atol=1e-12)
        np.testing.assert_allclose(t.plan.sum(axis=0), q, atol=1e-12)
        assert p @ t.potential - q @ t.potential == pytest.approx(t.cost, abs=1e-9)
        assert g.is_lipschitz(t.potential)


def test_dual_potential_is_centered():
    f = oracle.w1_dual_potential([0.5, 0.5, 0, 0], [0, 0, 0.5, 0.5], oracle.MetricGraph.chain(4))
    assert f.mean() == pytest.approx(0.0, abs=1e-15)


def test_chain_metric():
    d = oracle.MetricGraph.chain(6).dist
    np.testing.assert_array_equal(d, np.abs(np.subtract.outer(np.arange(6), np.arange(6))))


def test_mdp_metric_is_temporal_distance():
    g = oracle.MetricGraph.from_mdp(chain_mdp(4, T=2, slip=0.3))
    np.testing.assert_array_equal(g.dist, oracle.MetricGraph.chain(4).dist)


# --- policy-improvement audits ---------------------------------------------


def test_identical_policies_give_zero_errors():
    mdp = audits.theorem_mdp()
    pi = deterministic_policy([1, 0, 1, 1], 2)
    rho = exact_occupancy(mdp, pi)
    r = oracle.kl_reward(rho, np.array([0.4, 0.3, 0.2, 0.1]), 0.3)
    w = oracle.make_witness(mdp, np.array([0.4, 0.3, 0.2, 0.1]), 0.3, pi, pi, r, r)
    assert (w.eps0, w.eps1, w.eps2) == (0.0, 0.0, 0.0)
    assert oracle.theorem2_condition(w)
    assert oracle.theorem3_condition(w, 0.3)


def test_ratio_deviation():
    assert oracle.ratio_deviation([0.5, 0.5], [0.25, 0.75]) == pytest.approx(1.0)
    assert oracle.ratio_deviation([0.5, 0.5], [1.0, 0.0]) == math.inf


@pytest.mark.parametrize("eps1", [0.0, 0.05])
def test_theorem2_brute_force(eps1):
    mdp = audits.theorem_mdp()
    rng = np.random.default_rng(0)
    for mu, beta in audits.THEOREM_CASES:
        res = oracle.audit_theorem2(mdp, mu, beta, eps1, rng)
        assert res.pairs == 256
        assert res.counterexamples == []


@pytest.mark.parametrize("eps1", [0.0, 0.05])
def test_theorem3_brute_force(eps1):
    mdp = audits.theorem_mdp()
    g = oracle.MetricGraph.from_mdp(mdp)
    rng = np.random.default_rng(0)
    for mu, beta in audits.THEOREM_CASES:
        res = oracle.audit_theorem3(mdp, mu, beta, g, eps1, rng)
        assert res.counterexamples == []


def test_theorem_audits_are_not_vacuous():
    mdp = audits.theorem_mdp()
    rng = np.random.default_rng(0)
    g = oracle.MetricGraph.from_mdp(mdp)
    met2 = sum(oracle.audit_theorem2(mdp, mu, b, 0.05, rng).condition_met for mu, b in audits.THEOREM_CASES)
    met3 = sum(oracle.audit_theorem3(mdp, mu, b, g, 0.05, rng).condition_met for mu, b in audits.THEOREM_CASES)
    # beyond the 16 trivial diagonal pairs per case (which only meet the condition at eps1 = 0)
    assert met2 > 0 and met3 > 0


def test_sup_noise_has_exact_norm(rng):
    z = oracle._sup_noise(7, 0.05, rng)
    assert np.max(np.abs(z)) == pytest.approx(0.05, rel=1e-15)


# --- maximizers of the KL objective ----------------------------------------


def test_simplex_grid():
    g = oracle.simplex_grid(3, 4)
    assert len(g) == 15
    np.testing.assert_allclose(g.sum(axis=1), 1.0)
    assert len({tuple(r) for r in g}) == 15


def test_two_state_maximizer():
    res = oracle.prop1_audit(np.array([1.0, 0.0]), 0.5)
    assert res.holds and res.n_maximizers == 1
    assert res.max_value == pytest.approx(math.log(2), abs=1e-12)


def test_three_state_maximizer():
    res = oracle.prop1_audit(np.array([0.5, 0.5, 0.0]), 0.25)
    assert res.holds
    assert res.max_value == pytest.approx(math.log(4), abs=1e-12)


def test_fully_supported_mu_rejected():
    with pytest.raises(ValueError, match="vanish"):
        oracle.prop1_audit(np.array([0.5, 0.5]), 0.5)


def test_prop1_audit_cases():
    assert audits.audit_prop1().passed


def test_best_policy_reaches_unvisited_states():
    mdp = chain_mdp(4, T=4)
    mu = np.array([0.7, 0.3, 0.0, 0.0])
    pi, val = oracle.best_policy_kl(mdp, mu, 0.2)
    rho = exact_occupancy(mdp, pi)
    assert val == pytest.approx(oracle.kl_objective(rho, mu, 0.2))
    assert rho[2:].sum() > 0
