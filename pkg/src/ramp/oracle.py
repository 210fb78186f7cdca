"""Exact finite-state reference computations.

Entropies, KL divergences, occupancy mixtures, Wasserstein-1 distances on
graph metrics (primal by min-cost flow, dual potential by complementary
slackness) and brute-force audits of the policy-improvement guarantees for
the KL and Wasserstein reward models.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .envs import TabularMDP, deterministic_policy, exact_occupancy

DIST_TOL = 1e-12
_FLOW_TOL = 1e-15


def as_dist(p, tol: float = DIST_TOL) -> np.ndarray:
    """Validate a probability vector and return it as a float array."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or len(p) == 0:
        raise ValueError("a distribution is a non-empty 1-D vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("distribution has negative or non-finite entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"distribution sums to {p.sum()!r}, not 1")
    return p


def exact_entropy(p) -> float:
    p = as_dist(p)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


@dataclass(frozen=True)
class KlValue:
    value: float
    support_violation: bool


def kl_with_flag(p, q) -> KlValue:
    """``KL(p || q)``; ``+inf`` flagged when ``p`` puts mass where ``q`` has none."""
    p = as_dist(p)
    q = as_dist(q)
    if p.shape != q.shape:
        raise ValueError("distributions over different supports")
    on = p > 0
    if np.any(q[on] == 0):
        return KlValue(math.inf, True)
    return KlValue(float(np.sum(p[on] * np.log(p[on] / q[on]))), False)


def exact_kl(p, q) -> float:
    return kl_with_flag(p, q).value


def mixture(rho, mu, beta: float) -> np.ndarray:
    """``beta * rho + (1 - beta) * mu``."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1]")
    return beta * as_dist(rho) + (1.0 - beta) * as_dist(mu)


def theorem1_decomposition(rho_next, mu_n, beta: float) -> tuple[float, float, float]:
    """Split the entropy gain of one mixture update.

    With ``mu' = beta rho + (1 - beta) mu`` returns ``(delta_H, lower_bound,
    residual)`` where ``delta_H = H(mu') - H(mu)``, ``lower_bound = beta (KL(rho
    || mu') + H(rho) - H(mu))`` and ``residual = (1 - beta) KL(mu || mu')``.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must be in (0, 1)")
    mu_next = mixture(rho_next, mu_n, beta)
    h_mu = exact_entropy(mu_n)
    delta_h = exact_entropy(mu_next) - h_mu
    lower = beta * (exact_kl(rho_next, mu_next) + exact_entropy(rho_next) - h_mu)
    residual = (1.0 - beta) * exact_kl(mu_n, mu_next)
    return delta_h, lower, residual


def kl_objective(rho, mu, beta: float) -> float:
    """``KL(rho || beta rho + (1 - beta) mu)``, always finite for ``beta > 0``."""
    return exact_kl(rho, mixture(rho, mu, beta))


def log_ratio(rho, mu, beta: float) -> np.ndarray:
    """Pointwise ``log(rho / (beta rho + (1 - beta) mu))``; ``-inf`` where ``rho = 0``."""
    rho = np.asarray(rho, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(rho) - np.log(beta * rho + (1.0 - beta) * mu)
    return np.where(rho > 0, out, -np.inf)


# --- graph metrics and Wasserstein-1 ---------------------------------------


@dataclass(frozen=True, eq=False)
class MetricGraph:
    """Shortest-path metric of a (possibly directed) graph with unit edge lengths."""

    adjacency: np.ndarray
    dist: np.ndarray

    @classmethod
    def from_adjacency(cls, adjacency) -> "MetricGraph":
        adj = np.asarray(adjacency, dtype=bool)
        n = adj.shape[0]
        if adj.shape != (n, n):
            raise ValueError("adjacency must be square")
        d = np.where(adj, 1.0, np.inf)
        np.fill_diagonal(d, 0.0)
        for k in range(n):
            d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
        return cls(adj, d)

    @classmethod
    def chain(cls, n: int) -> "MetricGraph":
        adj = np.zeros((n, n), dtype=bool)
        i = np.arange(n - 1)
        adj[i, i + 1] = adj[i + 1, i] = True
        return cls.from_adjacency(adj)

    @classmethod
    def from_mdp(cls, mdp: TabularMDP) -> "MetricGraph":
        """Temporal distance: fewest steps between states under some action sequence."""
        return cls.from_adjacency((mdp.P > 0).any(axis=1))

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def is_lipschitz(self, f, tol: float = 1e-9) -> bool:
        f = np.asarray(f, dtype=np.float64)
        # transport dual orientation: f(x) - f(y) <= d(x, y)
        return bool(np.all(f[:, None] - f[None, :] <= self.dist + tol))


@dataclass
class Transport:
    cost: float
    plan: np.ndarray
    potential: np.ndarray  # f with E_p f - E_q f = cost and f(x) - f(y) <= d(x, y)


def _bellman_ford(C, F, start_l, tol):
    """Shortest paths in the residual transport graph.

    Left node ``i`` reaches right node ``j`` at cost ``C[i, j]``; right ``j``
    returns to left ``i`` at cost ``-C[i, j]`` where flow ``F[i, j] > 0``.
    Returns distances and predecessors; ties go to the lowest index.
    """
    n = C.shape[0]
    dl = start_l.copy()
    dr = np.full(n, np.inf)
    pred_r = np.full(n, -1)
    pred_l = np.full(n, -1)  # -1: reached from the root
    back = F > tol
    for _ in range(2 * n + 2):
        cand_r = dl[:, None] + C
        best_i = np.argmin(cand_r, axis=0)
        new_r = cand_r[best_i, np.arange(n)]
        upd_r = new_r < dr - 1e-13
        dr = np.where(upd_r, new_r, dr)
        pred_r = np.where(upd_r, best_i, pred_r)
        cand_l = np.where(back, dr[None, :] - C, np.inf)
        best_j = np.argmin(cand_l, axis=1)
        new_l = cand_l[np.arange(n), best_j]
        upd_l = new_l < dl - 1e-13
        dl = np.where(upd_l, new_l, dl)
        pred_l = np.where(upd_l, best_j, pred_l)
        if not upd_r.any() and not upd_l.any():
            break
    return dl, dr, pred_l, pred_r


def min_cost_transport(p, q, cost) -> Transport:
    """Exact optimal transport by successive shortest augmenting paths."""
    p = as_dist(p, tol=1e-9)
    q = as_dist(q, tol=1e-9)
    C = np.asarray(cost, dtype=np.float64)
    n = len(p)
    if C.shape != (n, n) or len(q) != n:
        raise ValueError("cost matrix and distributions disagree in size")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix must be finite (graph not strongly connected)")
    F = np.zeros((n, n))
    rem_s = p.copy()
    rem_t = q.copy()
    while True:
        src = rem_s > _FLOW_TOL
        if not src.any():
            break
        dl, dr, pred_l, pred_r = _bellman_ford(C, F, np.where(src, 0.0, np.inf), _FLOW_TOL)
        sinks = np.flatnonzero((rem_t > _FLOW_TOL) & np.isfinite(dr))
        if len(sinks) == 0:
            break
        j = int(sinks[np.argmin(dr[sinks])])
        # walk back to a root-fed left node, collecting the path
        path = []
        amount = rem_t[j]
        jj = j
        for _ in range(4 * n + 4):
            i = int(pred_r[jj])
            path.append((i, jj))
            back_j = int(pred_l[i])
            if back_j < 0:
                amount = min(amount, rem_s[i])
                break
            amount = min(amount, F[i, back_j])
            path.append((i, -1 - back_j))
            jj = back_j
        else:
            raise RuntimeError("augmenting path did not terminate")
        for i, jj in path:
            if jj >= 0:
                F[i, jj] += amount
            else:
                F[i, -1 - jj] -= amount
        rem_s[path[-1][0]] -= amount
        rem_t[j] -= amount
    np.maximum(F, 0.0, out=F)
    # potentials from the final residual graph, every left node rooted at 0
    hl, hr, _, _ = _bellman_ford(C, F, np.zeros(n), _FLOW_TOL)
    g = np.min(hl[:, None] + C, axis=0)
    return Transport(float(np.sum(F * C)), F, -g)


def w1_exact(p, q, g: MetricGraph) -> float:
    """Wasserstein-1 distance under the graph's shortest-path metric."""
    return min_cost_transport(p, q, g.dist).cost


def w1_dual_potential(p, q, g: MetricGraph) -> np.ndarray:
    """An optimal 1-Lipschitz ``f`` with ``E_p f - E_q f = W1(p, q)``, shifted to mean zero."""
    f = min_cost_transport(p, q, g.dist).potential
    return f - f.mean()


# --- policy-improvement audits ---------------------------------------------


@dataclass
class TheoremWitness:
    eps0: float
    eps1: float
    eps2: float
    pi: np.ndarray
    pi_prime: np.ndarray
    r_hat: np.ndarray

    def __post_init__(self):
        if self.eps1 < 0:
            raise ValueError("eps1 must be >= 0")


def ratio_deviation(rho_prime, rho) -> float:
    """``max_s |rho'(s) / rho(s) - 1|``; infinite when ``rho`` misses support of ``rho'``."""
    rho = np.asarray(rho, dtype=np.float64)
    rho_prime = np.asarray(rho_prime, dtype=np.float64)
    if np.any((rho == 0) & (rho_prime > 0)):
        return math.inf
    on = rho > 0
    return float(np.max(np.abs(rho_prime[on] / rho[on] - 1.0)))


def kl_reward(rho, mu, beta: float) -> np.ndarray:
    """Exact KL reward for occupancy ``rho``; requires ``rho > 0`` everywhere."""
    if np.any(np.asarray(rho) <= 0):
        raise ValueError("exact KL reward needs a fully supported occupancy")
    return log_ratio(rho, mu, beta)


def w_reward(rho, mu, beta: float, g: MetricGraph) -> np.ndarray:
    return w1_dual_potential(rho, mixture(rho, mu, beta), g)


def make_witness(mdp, mu, beta, pi, pi_prime, r_hat, r_true) -> TheoremWitness:
    """Measure the witness errors exactly from occupancies and reward vectors."""
    rho = exact_occupancy(mdp, pi)
    rho_p = exact_occupancy(mdp, pi_prime)
    r_hat = np.asarray(r_hat, dtype=np.float64)
    return TheoremWitness(
        eps0=ratio_deviation(rho_p, rho),
        eps1=float(np.max(np.abs(r_hat - r_true))),
        eps2=float(rho_p @ r_hat - rho @ r_hat),
        pi=pi,
        pi_prime=pi_prime,
        r_hat=r_hat,
    )


def theorem2_condition(w: TheoremWitness) -> bool:
    if not w.eps0 < 1.0:
        return False
    return w.eps2 >= 2.0 * w.eps1 - math.log1p(-w.eps0)


def theorem3_condition(w: TheoremWitness, beta: float) -> bool:
    return w.eps2 >= 2.0 * w.eps1 * (1.0 + beta)


def check_theorem2(w: TheoremWitness, mdp, mu, beta: float, tol: float = 1e-12) -> bool:
    """False only for a counterexample: condition met but the KL objective decreased."""
    if not theorem2_condition(w):
        return True
    before = kl_objective(exact_occupancy(mdp, w.pi), mu, beta)
    after = kl_objective(exact_occupancy(mdp, w.pi_prime), mu, beta)
    return after >= before - tol


def check_theorem3(w: TheoremWitness, mdp, mu, beta: float, g: MetricGraph, tol: float = 1e-9) -> bool:
    """False only for a counterexample to the Wasserstein ordering.

    The ordering is checked non-strictly at the boundary ``eps2 = 2 eps1 = 0``
    and strictly whenever ``eps2 > 2 eps1 (1 + beta)``.
    """
    if not theorem3_condition(w, beta):
        return True
    rho = exact_occupancy(mdp, w.pi)
    rho_p = exact_occupancy(mdp, w.pi_prime)
    before = w1_exact(rho, mixture(rho, mu, beta), g)
    after = w1_exact(rho_p, mixture(rho_p, mu, beta), g)
    if w.eps2 > 2.0 * w.eps1 * (1.0 + beta) and w.eps2 > tol:
        return after > before
    return after >= before - tol


def deterministic_policies(mdp: TabularMDP):
    for acts in itertools.product(range(mdp.n_actions), repeat=mdp.n_states):
        yield deterministic_policy(acts, mdp.n_actions)


@dataclass
class AuditResult:
    pairs: int
    condition_met: int
    counterexamples: list


def audit_theorem2(mdp, mu, beta: float, eps1: float = 0.0, rng=None) -> AuditResult:
    """All ordered pairs of deterministic policies; ``r_hat`` is exact plus sup-norm ``eps1`` noise."""
    pols = list(deterministic_policies(mdp))
    res = AuditResult(0, 0, [])
    for pi in pols:
        rho = exact_occupancy(mdp, pi)
        r_true = kl_reward(rho, mu, beta)
        r_hat = r_true + _sup_noise(len(r_true), eps1, rng)
        for pi_p in pols:
            w = make_witness(mdp, mu, beta, pi, pi_p, r_hat, r_true)
            res.pairs += 1
            res.condition_met += theorem2_condition(w)
            if not check_theorem2(w, mdp, mu, beta):
                res.counterexamples.append(w)
    return res


def audit_theorem3(mdp, mu, beta: float, g: MetricGraph, eps1: float = 0.0, rng=None) -> AuditResult:
    pols = list(deterministic_policies(mdp))
    res = AuditResult(0, 0, [])
    for pi in pols:
        rho = exact_occupancy(mdp, pi)
        r_true = w_reward(rho, mu, beta, g)
        r_hat = r_true + _sup_noise(len(r_true), eps1, rng)
        for pi_p in pols:
            w = make_witness(mdp, mu, beta, pi, pi_p, r_hat, r_true)
            res.pairs += 1
            res.condition_met += theorem3_condition(w, beta)
            if not check_theorem3(w, mdp, mu, beta, g):
                res.counterexamples.append(w)
    return res


def _sup_noise(n: int, eps1: float, rng) -> np.ndarray:
    """Noise with sup norm exactly ``eps1`` (zero when ``eps1 == 0``)."""
    if eps1 == 0.0:
        return np.zeros(n)
    z = rng.uniform(-1.0, 1.0, size=n)
    return eps1 * z / np.max(np.abs(z))


# --- maximizers of the KL objective ----------------------------------------


def simplex_grid(n: int, resolution: int) -> np.ndarray:
    """All points of the probability simplex with coordinates in ``(1/resolution) Z``."""
    if n == 1:
        return np.ones((1, 1))
    pts = [c for c in itertools.combinations(range(resolution + n - 1), n - 1)]
    bars = np.array(pts, dtype=np.int64)
    edges = np.concatenate([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), resolution + n - 1)], axis=1)
    counts = np.diff(edges, axis=1) - 1
    return counts / resolution


def kl_objective_batch(rhos: np.ndarray, mu, beta: float) -> np.ndarray:
    mix = beta * rhos + (1.0 - beta) * np.asarray(mu)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(rhos > 0, rhos * (np.log(rhos) - np.log(mix)), 0.0)
    return terms.sum(axis=1)


@dataclass
class Prop1Result:
    holds: bool
    max_value: float
    n_maximizers: int
    bad_maximizers: np.ndarray
    bound_ok: bool


def prop1_audit(mu, beta: float, grid_resolution: int = 200, tol: float = 1e-12) -> Prop1Result:
    """Grid search of ``argmax_rho KL(rho || beta rho + (1 - beta) mu)``.

    Checks that every grid maximizer lives on ``{mu = 0}`` with value
    ``log(1/beta)``, and that the pointwise log-ratio never exceeds
    ``log(1/beta)`` and reaches it exactly where ``mu = 0``.
    """
    mu = as_dist(mu)
    zero = mu == 0
    if not zero.any():
        raise ValueError("mu must vanish on at least one state")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must be in (0, 1)")
    grid = simplex_grid(len(mu), grid_resolution)
    vals = kl_objective_batch(grid, mu, beta)
    top = vals.max()
    arg = grid[vals >= top - tol]
    bad = arg[(arg[:, ~zero] > 0).any(axis=1)]
    cap = math.log(1.0 / beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.log(grid) - np.log(beta * grid + (1.0 - beta) * mu[None, :])
    on = grid > 0
    bound_ok = bool(np.all(lr[on] <= cap + tol))
    at_cap = np.abs(lr - cap) <= tol
    bound_ok &= bool(np.all(at_cap[on] == np.broadcast_to(zero, grid.shape)[on]))
    holds = len(bad) == 0 and abs(top - cap) <= tol and bound_ok
    return Prop1Result(bool(holds), float(top), len(arg), bad, bound_ok)


def prop1_check(mu, beta: float, grid_resolution: int = 200) -> bool:
    return prop1_audit(mu, beta, grid_resolution).holds


def best_policy_kl(mdp, mu, beta: float):
    """Exhaustive argmax of the KL objective over deterministic policies."""
    best, best_val = None, -math.inf
    for pi in deterministic_policies(mdp):
        v = kl_objective(exact_occupancy(mdp, pi), mu, beta)
        if v > best_val + 1e-15:
            best, best_val = pi, v
    return best, best_val


def policy_entropy(pi) -> float:
    """Mean over states of the action entropy of a policy table."""
    pi = np.asarray(pi, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(pi > 0, pi * np.log(pi), 0.0).sum(axis=1)
    return float(h.mean())
