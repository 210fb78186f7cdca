import numpy as np
import pytest

from ramp.approximator import (
    Adam,
    Mlp,
    adam_step,
    backward,
    dumps_mlp,
    forward,
    forward_cache,
    grad,
    init_mlp,
    load_mlp,
    loads_mlp,
    save_mlp,
    soft_update,
    zeros_like_mlp,
)

from conftest import fd_check


def test_zero_net_outputs_zero(rng):
    net = zeros_like_mlp(init_mlp((3, 5, 2), rng))
    np.testing.assert_array_equal(forward(net, rng.normal(size=(4, 3))), np.zeros((4, 2)))


def test_identity_layer(rng):
    net = Mlp((3, 3), [np.eye(3)], [np.zeros(3)])
    x = rng.normal(size=(6, 3))
    np.testing.assert_array_equal(forward(net, x), x)


def test_single_vector_input(rng):
    net = init_mlp((2, 4, 3), rng)
    x = rng.normal(size=2)
    np.testing.assert_array_equal(forward(net, x), forward(net, x[None, :])[0])


def test_hand_computed_forward():
    net = Mlp((2, 2, 1), [np.array([[1.0, -1.0], [2.0, 0.5]]), np.array([[1.0], [3.0]])], [np.array([0.0, 0.5]), np.array([-1.0])])
    # hidden pre-activation for x = (1, 1): (3, -0.5 + 0.5) -> relu (3, 0)
    assert forward(net, [1.0, 1.0])[0] == 2.0


def test_shape_validation(rng):
    net = init_mlp((2, 3, 1), rng)
    with pytest.raises(ValueError):
        forward(net, np.zeros((4, 3)))
    with pytest.raises(ValueError):
        Mlp((2, 3), [np.zeros((3, 2))], [np.zeros(3)])
    with pytest.raises(ValueError):
        init_mlp((2, 1), rng, activation="gelu")


def test_constant_loss_has_zero_gradient(rng):
    net = init_mlp((3, 6, 2), rng)
    loss, grads = grad(lambda out: (1.5, np.zeros_like(out)), net, rng.normal(size=(5, 3)))
    assert loss == 1.5
    assert all(not g.any() for g in grads)


def _sq_loss(target):
    def loss(out):
        d = out - target
        return 0.5 * float(np.sum(d * d)) / len(out), d / len(out)

    return loss


def test_gradients_match_finite_differences():
    """Parameter and input gradients on 100 random tanh nets."""
    rng = np.random.default_rng(0)
    for _ in range(100):
        sizes = (int(rng.integers(1, 4)), int(rng.integers(2, 6)), int(rng.integers(2, 6)), int(rng.integers(1, 3)))
        net = init_mlp(sizes, rng, activation="tanh")
        x = rng.normal(size=(7, sizes[0]))
        loss_fn = _sq_loss(rng.normal(size=(7, sizes[-1])))
        _, grads = grad(loss_fn, net, x)
        fd_check(lambda: loss_fn(forward(net, x))[0], net.params(), grads)

        out, cache = forward_cache(net, x)
        _, dx = backward(net, cache, loss_fn(out)[1], need_input_grad=True)
        fd_check(lambda: loss_fn(forward(net, x))[0], [x], [dx])


def test_relu_gradients_away_from_kinks():
    rng = np.random.default_rng(1)
    net = init_mlp((3, 16, 1), rng)
    x = rng.normal(size=(10, 3))
    loss_fn = _sq_loss(np.zeros((10, 1)))
    _, grads = grad(loss_fn, net, x)
    # skip only if a pre-activation sits within the probe width of zero
    pre = x @ net.weights[0] + net.biases[0]
    assert np.min(np.abs(pre)) > 1e-4
    fd_check(lambda: loss_fn(forward(net, x))[0], net.params(), grads)


def test_nonfinite_loss_raises(rng):
    net = init_mlp((1, 2, 1), rng)
    with pytest.raises(FloatingPointError):
        grad(lambda out: (float("nan"), np.zeros_like(out)), net, np.ones((1, 1)))


def test_adam_zero_gradient_leaves_params():
    p = [np.array([1.0, -2.0])]
    opt = Adam.for_params(p)
    adam_step(opt, p, [np.zeros(2)])
    np.testing.assert_array_equal(p[0], [1.0, -2.0])


def test_adam_first_step():
    p = [np.array([0.0])]
    opt = Adam.for_params(p, lr=0.1)
    adam_step(opt, p, [np.array([1.0])])
    assert p[0][0] == pytest.approx(-0.1 / (1.0 + 1e-8), rel=1e-15)


def test_adam_matches_scalar_reference():
    rng = np.random.default_rng(2)
    gs = rng.normal(size=50)
    p = [np.array([0.3])]
    opt = Adam.for_params(p, lr=0.01)
    q, m, v = 0.3, 0.0, 0.0
    for t, g in enumerate(gs, start=1):
        adam_step(opt, p, [np.array([g])])
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        q -= 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        assert p[0][0] == pytest.approx(q, rel=1e-12, abs=1e-15)


def test_adam_shape_mismatch(rng):
    p = [np.zeros(3)]
    opt = Adam.for_params(p)
    with pytest.raises(ValueError):
        adam_step(opt, p, [np.zeros(4)])


@pytest.mark.parametrize("tau, expected", [(1.0, 2.0), (0.0, 0.0), (0.5, 1.0)])
def test_soft_update(tau, expected):
    src = Mlp((1, 1), [np.array([[2.0]])], [np.array([2.0])])
    tgt = Mlp((1, 1), [np.array([[0.0]])], [np.array([0.0])])
    soft_update(tgt, src, tau)
    assert tgt.weights[0][0, 0] == expected and tgt.biases[0][0] == expected


def test_checkpoint_round_trip(tmp_path, rng):
    net = init_mlp((2, 7, 3, 1), rng, activation="tanh")
    save_mlp(net, tmp_path / "net.bin")
    back = load_mlp(tmp_path / "net.bin")
    assert back.sizes == net.sizes and back.activation == "tanh"
    for a, b in zip(net.params(), back.params()):
        np.testing.assert_array_equal(a, b)
    assert dumps_mlp(back) == dumps_mlp(net)


def test_checkpoint_rejects_garbage(rng):
    blob = dumps_mlp(init_mlp((2, 3, 1), rng))
    with pytest.raises(ValueError, match="not a network"):
        loads_mlp(b"XXXXXXXX" + blob[8:])
    with pytest.raises(ValueError, match="trailing"):
        loads_mlp(blob + b"\0")
