"""Named oracle audits shared by ``ramp verify`` and the test-suite.

Every audit returns an :class:`AuditOutcome`; a failing audit carries the
first offending instance so it can be printed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import oracle
from .envs import chain_mdp
from .reward_kl import make_kl_model, raw_logit, train_kl_samplers
from .reward_w import make_w_model, reward_w, train_w_samplers


@dataclass
class AuditOutcome:
    name: str
    passed: bool
    detail: str
    counterexample: object = None
    seconds: float = 0.0


# --- Theorem 1 -------------------------------------------------------------


def random_dist(rng: np.random.Generator, n: int, sparse: bool = False) -> np.ndarray:
    p = rng.dirichlet(np.ones(n))
    if sparse:
        p = p * (rng.random(n) < 0.6)
        if p.sum() == 0:
            p[rng.integers(n)] = 1.0
        p = p / p.sum()
    return p


def audit_theorem1(n_cases: int = 10_000, n_states: int = 8, seed: int = 0, tol: float = 1e-9) -> AuditOutcome:
    rng = np.random.default_rng(seed)
    betas = (0.1, 0.5, 0.9)
    worst = 0.0
    for k in range(n_cases):
        beta = betas[k % 3]
        rho = random_dist(rng, n_states, sparse=k % 10 == 9)
        mu = random_dist(rng, n_states, sparse=k % 10 == 8)
        dh, lb, res = oracle.theorem1_decomposition(rho, mu, beta)
        gap = abs(dh - lb - res)
        worst = max(worst, gap)
        if gap > tol or res < 0.0 or lb > dh + tol:
            return AuditOutcome("theorem1", False, f"identity gap {gap:.3e}, residual {res:.3e}",
                                {"rho": rho, "mu": mu, "beta": beta, "terms": (dh, lb, res)})
    return AuditOutcome("theorem1", True, f"{n_cases} triples, max |gap| {worst:.2e}")


# --- Theorems 2 and 3 ------------------------------------------------------
# A 4-state slippery chain: policies move occupancy by tens of percent, so
# pairs satisfy the KL condition even with a perturbed reward.  With
# mu = Dirac(s0) and small beta the exact reward spreads widely across states.

THEOREM_MDP = dict(n=4, T=3, slip=0.7)
THEOREM_CASES = (
    (np.array([1.0, 0.0, 0.0, 0.0]), 0.01),
    (np.array([0.4, 0.3, 0.2, 0.1]), 0.3),
)


def theorem_mdp():
    p = THEOREM_MDP
    return chain_mdp(p["n"], p["T"], slip=p["slip"], delta0=np.full(p["n"], 1.0 / p["n"]))


def _theorem_audit(name, run, eps1_draws: int, seed: int) -> AuditOutcome:
    mdp = theorem_mdp()
    rng = np.random.default_rng(seed)
    pairs = met = 0
    for mu, beta in THEOREM_CASES:
        for eps1, draws in ((0.0, 1), (0.05, eps1_draws)):
            for _ in range(draws):
                res = run(mdp, mu, beta, eps1, rng)
                pairs += res.pairs
                met += res.condition_met
                if res.counterexamples:
                    w = res.counterexamples[0]
                    return AuditOutcome(name, False, f"counterexample with mu={mu.tolist()}, beta={beta}, eps1={eps1}", w)
    return AuditOutcome(name, True, f"{pairs} policy pairs, {met} meet the condition, 0 counterexamples")


def audit_theorem2(eps1_draws: int = 10, seed: int = 0) -> AuditOutcome:
    return _theorem_audit("theorem2", lambda mdp, mu, beta, e, rng: oracle.audit_theorem2(mdp, mu, beta, e, rng), eps1_draws, seed)


def audit_theorem3(eps1_draws: int = 10, seed: int = 0) -> AuditOutcome:
    def run(mdp, mu, beta, e, rng):
        return oracle.audit_theorem3(mdp, mu, beta, oracle.MetricGraph.from_mdp(mdp), e, rng)

    return _theorem_audit("theorem3", run, eps1_draws, seed)


# --- Proposition on KL maximizers ------------------------------------------

PROP1_CASES = (
    (np.array([1.0, 0.0]), 0.5),
    (np.array([0.5, 0.5, 0.0]), 0.25),
    (np.array([0.7, 0.0, 0.3]), 0.1),
    (np.array([0.0, 0.0, 1.0]), 0.9),
    (np.array([0.2, 0.8, 0.0]), 0.007),
)


def audit_prop1(resolution: int = 200) -> AuditOutcome:
    for mu, beta in PROP1_CASES:
        res = oracle.prop1_audit(mu, beta, resolution)
        if not res.holds:
            return AuditOutcome("prop1", False, f"mu={mu.tolist()}, beta={beta}: max {res.max_value}", res)
    return AuditOutcome("prop1", True, f"{len(PROP1_CASES)} cases on a 1/{resolution} simplex grid")


# --- Wasserstein-1: dual potential and trained estimator --------------------


def audit_w1_dual(n_cases: int = 200, seed: int = 0) -> AuditOutcome:
    """Flow potentials are 1-Lipschitz and close the duality gap."""
    rng = np.random.default_rng(seed)
    for _ in range(n_cases):
        n = int(rng.integers(2, 16))
        adj = rng.random((n, n)) < 0.3
        adj = adj | adj.T
        i = np.arange(n - 1)
        adj[i, i + 1] = adj[i + 1, i] = True
        g = oracle.MetricGraph.from_adjacency(adj)
        p, q = random_dist(rng, n, True), random_dist(rng, n, True)
        t = oracle.min_cost_transport(p, q, g.dist)
        gap = abs(p @ t.potential - q @ t.potential - t.cost)
        if gap > 1e-9 or not g.is_lipschitz(t.potential):
            return AuditOutcome("w1_dual", False, f"duality gap {gap:.3e}", {"p": p, "q": q, "adj": adj})
    return AuditOutcome("w1_dual", True, f"{n_cases} random graphs, primal = dual")


CHAIN_N = 20
CHAIN_BETA = 0.1


def chain_cases() -> dict[str, tuple[np.ndarray, np.ndarray]]:
    e = np.eye(CHAIN_N)
    return {
        "dirac 0 vs 19": (e[0], e[19]),
        "dirac 2 vs 17": (e[2], e[17]),
        "dirac 5 vs 14": (e[5], e[14]),
        "two-point vs dirac": ((e[0] + e[19]) / 2, e[10]),
        "two-point vs two-point": ((e[0] + e[4]) / 2, (e[15] + e[19]) / 2),
    }


@dataclass
class ChainFit:
    dual: float
    w1: float
    violation_rate: float
    f: np.ndarray = field(repr=False)

    @property
    def rel_error(self) -> float:
        return abs(self.dual - self.w1) / self.w1


def fit_chain_potential(rho, mu, seed: int, steps: int = 3000, fine_steps: int = 1000) -> ChainFit:
    """Train the Wasserstein potential on a chain with states embedded as their index.

    Constraint pairs are uniform over chain edges in both directions (the
    transitions of a random walk).  Training runs at lr 1e-3, then 1e-4.
    """
    rng = np.random.default_rng(seed)
    n = len(rho)
    nu = oracle.mixture(rho, mu, CHAIN_BETA)
    m = make_w_model(1, CHAIN_BETA, rng, lr=1e-3)
    col = lambda i: np.asarray(i, dtype=np.float64)[:, None]  # noqa: E731

    def pairs(k):
        i = rng.integers(n - 1, size=k)
        fwd = rng.random(k) < 0.5
        return col(np.where(fwd, i, i + 1)), col(np.where(fwd, i + 1, i))

    pos = lambda k: col(rng.choice(n, k, p=rho))  # noqa: E731
    neg = lambda k: col(rng.choice(n, k, p=nu))  # noqa: E731
    train_w_samplers(m, pos, neg, pairs, steps)
    m.opt.lr = 1e-4
    train_w_samplers(m, pos, neg, pairs, fine_steps)
    f = reward_w(m, col(np.arange(n)))
    s, s2 = pairs(10_000)
    viol = float(np.mean(np.abs(reward_w(m, s) - reward_w(m, s2)) > 1.0 + m.eps_relax))
    w1 = oracle.w1_exact(rho, nu, oracle.MetricGraph.chain(n))
    return ChainFit(float(rho @ f - nu @ f), w1, viol, f)


def audit_w1_estimator(seed: int = 0) -> AuditOutcome:
    worst = 0.0
    for name, (rho, mu) in chain_cases().items():
        fit = fit_chain_potential(rho, mu, seed)
        worst = max(worst, fit.rel_error)
        if fit.rel_error > 0.10 or fit.violation_rate > 0.05:
            return AuditOutcome("w1_estimator", False, f"{name}: dual {fit.dual:.4f} vs W1 {fit.w1:.4f}, "
                                f"violations {fit.violation_rate:.3f}", fit)
    return AuditOutcome("w1_estimator", True, f"{len(chain_cases())} chain instances, worst relative error {worst:.3f}")


# --- KL density-ratio estimator --------------------------------------------

KL_BETA = 0.1
KL_STATES = 10


def fit_categorical_ratio(seed: int, steps: int = 3000, fine_steps: int = 1000):
    """Train the classifier on one-hot categorical states; returns (logits, exact log-ratio, rho)."""
    rng = np.random.default_rng(seed)
    rho = rng.dirichlet(np.ones(KL_STATES))
    mu = rng.dirichlet(np.ones(KL_STATES))
    nu = oracle.mixture(rho, mu, KL_BETA)
    eye = np.eye(KL_STATES)
    m = make_kl_model(KL_STATES, KL_BETA, rng, lr=1e-3)
    pos = lambda k: eye[rng.choice(KL_STATES, k, p=rho)]  # noqa: E731
    neg = lambda k: eye[rng.choice(KL_STATES, k, p=nu)]  # noqa: E731
    train_kl_samplers(m, pos, neg, steps)
    m.opt.lr = 1e-4
    train_kl_samplers(m, pos, neg, fine_steps)
    return raw_logit(m, eye), oracle.log_ratio(rho, mu, KL_BETA), rho


def audit_kl_estimator(seeds=range(5)) -> AuditOutcome:
    worst = 0.0
    for seed in seeds:
        logit, exact, rho = fit_categorical_ratio(seed)
        err = float(np.max(np.abs(logit - exact)[rho >= 0.01]))
        worst = max(worst, err)
        if err > 0.1:
            return AuditOutcome("kl_estimator", False, f"seed {seed}: max error {err:.4f}", (logit, exact, rho))
    return AuditOutcome("kl_estimator", True, f"{len(list(seeds))} seeds, worst abs error {worst:.3f}")


AUDITS: dict[str, Callable[[], AuditOutcome]] = {
    "theorem1": audit_theorem1,
    "theorem2": audit_theorem2,
    "theorem3": audit_theorem3,
    "prop1": audit_prop1,
    "w1_dual": audit_w1_dual,
    "w1_estimator": audit_w1_estimator,
    "kl_estimator": audit_kl_estimator,
}


def run_audit(name: str) -> AuditOutcome:
    t0 = time.perf_counter()
    out = AUDITS[name]()
    out.seconds = time.perf_counter() - t0
    return out
