import numpy as np
import pytest

from ramp import oracle
from ramp.approximator import Mlp, init_mlp, zeros_like_mlp
from ramp.reward_w import (
    WRewardModel,
    constraint_term,
    dual_value,
    lambda_update,
    phi_objective_grads,
    reward_w,
    train_w_samplers,
    w_loss,
    w_loss_grads,
)

from conftest import fd_check


def const_model(c, lam=2.0, eps=0.05, **kw):
    net = Mlp((1, 1), [np.zeros((1, 1))], [np.array([float(c)])])
    return WRewardModel(net, 0.1, lam=lam, eps_relax=eps, **kw)


def ramp_model(lam=1.0, eps=0.05, slope=1.0, **kw):
    """``f(s) = slope * s`` on scalar states."""
    return WRewardModel(Mlp((1, 1), [np.array([[slope]])], [np.zeros(1)]), 0.1, lam=lam, eps_relax=eps, **kw)


def col(*v):
    return np.array(v, dtype=np.float64)[:, None]


def test_constant_potential_loss(rng):
    m = const_model(3.7, lam=2.0, eps=0.05)
    x = rng.normal(size=(6, 1))
    assert w_loss(m, x, x[::-1], x, x) == pytest.approx(2.0 * 0.05, abs=1e-15)


def test_identical_batches_cancel(rng):
    m = WRewardModel(init_mlp((1, 8, 1), rng), 0.1, lam=0.0)
    x = rng.normal(size=(16, 1))
    assert w_loss(m, x, x, x, x) == pytest.approx(0.0, abs=1e-12)


def test_chain_ramp_dual_equals_graph_distance():
    m = ramp_model(lam=1.5)
    pos, neg = col(4.0), col(0.0)
    assert dual_value(m, pos, neg) == 4.0
    assert oracle.w1_exact(np.eye(5)[4], np.eye(5)[0], oracle.MetricGraph.chain(5)) == pytest.approx(4.0)
    s, s2 = col(0, 1, 2, 3), col(1, 2, 3, 4)
    # unit steps sit exactly at |df| = 1, so each penalty term is max(0, -eps) = 0
    assert w_loss(m, pos, neg, s, s2) == pytest.approx(-4.0 + 1.5 * 0.0)


def test_w_loss_gradient_fd():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m = WRewardModel(init_mlp((2, 6, 6, 1), rng, "tanh"), 0.1, lam=float(rng.uniform(0.1, 5)), eps_relax=0.05)
        pos, neg = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
        # pairs far enough apart that some land on each side of the kink
        s, s2 = rng.normal(size=(10, 2)), 3 * rng.normal(size=(10, 2))
        _, grads = w_loss_grads(m, pos, neg, s, s2)
        fd_check(lambda: w_loss(m, pos, neg, s, s2), m.params.params(), grads)
        _, pgrads = phi_objective_grads(m, pos, neg, s, s2)
        fd_check(lambda: phi_objective_grads(m, pos, neg, s, s2)[0], m.params.params(), pgrads)


def test_surrogate_differs_only_in_penalty_sign(rng):
    m = WRewardModel(init_mlp((1, 4, 1), rng), 0.1, lam=3.0)
    pos, neg, s, s2 = (rng.normal(size=(5, 1)) for _ in range(4))
    lit = w_loss(m, pos, neg, s, s2)
    sur = phi_objective_grads(m, pos, neg, s, s2)[0]
    assert (lit + sur) / 2 == pytest.approx(dual_value(m, neg, pos), abs=1e-12)
    assert (sur - lit) / 2 == pytest.approx(3.0 * constraint_term(m, s, s2), abs=1e-12)


def test_lambda_decreases_when_satisfied():
    m = ramp_model(lam=1.0, eps=0.05, slope=0.5, lr_lambda=0.1)
    lambda_update(m, col(0.0, 1.0), col(1.0, 2.0))
    assert m.lam == pytest.approx(1.0 - 0.1 * 0.05)


def test_lambda_rises_on_violation():
    m = ramp_model(lam=1.0, eps=0.05, slope=2.0, lr_lambda=0.1)
    assert lambda_update(m, col(0.0, 1.0, 5.0), col(1.0, 2.0, 4.0)) == pytest.approx(1.1)


def test_lambda_is_floored_at_zero():
    m = ramp_model(lam=0.0, slope=0.1, lr_lambda=0.1)
    lambda_update(m, col(0.0), col(1.0))
    assert m.lam == 0.0


def test_zero_rounds_change_nothing(rng):
    m = WRewardModel(init_mlp((1, 4, 1), rng), 0.1, lam=7.0)
    before = [p.copy() for p in m.params.params()]
    train_w_samplers(m, lambda n: np.zeros((n, 1)), lambda n: np.ones((n, 1)), lambda n: (np.zeros((n, 1)), np.ones((n, 1))), 0)
    assert m.lam == 7.0
    for a, b in zip(before, m.params.params()):
        np.testing.assert_array_equal(a, b)


def test_untrained_zero_net_reward(rng):
    m = WRewardModel(zeros_like_mlp(init_mlp((2, 5, 1), rng)), 0.1)
    assert reward_w(m, np.array([0.2, -0.4])) == 0.0
    np.testing.assert_array_equal(reward_w(m, rng.normal(size=(3, 2))), np.zeros(3))


def test_validation(rng):
    net = init_mlp((1, 1), rng)
    with pytest.raises(ValueError):
        WRewardModel(net, 1.0)
    with pytest.raises(ValueError):
        WRewardModel(net, 0.1, lam=-1.0)
    with pytest.raises(ValueError):
        WRewardModel(net, 0.1, eps_relax=0.0)
    m = WRewardModel(net, 0.1)
    with pytest.raises(ValueError):
        w_loss(m, np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((3, 1)))
