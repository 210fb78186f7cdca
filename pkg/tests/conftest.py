import numpy as np
import pytest


def fd_check(loss_fn, params, grads, h=1e-5, rtol=1e-4, atol=1e-9):
    """Compare analytic gradients with central differences, coordinate by coordinate.

    ``loss_fn()`` re-evaluates the loss from the (mutated in place) ``params``.
    A coordinate passes when ``|g - fd| <= rtol * max(|g|, |fd|)`` or, for
    vanishing gradients, when ``|g - fd| <= atol``.  Returns the worst
    relative error among coordinates whose gradient exceeds 1e-6.
    """
    worst = 0.0
    for p, g in zip(params, grads):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + h
            up = loss_fn()
            flat[k] = old - h
            down = loss_fn()
            flat[k] = old
            fd = (up - down) / (2 * h)
            err = abs(gflat[k] - fd)
            scale = max(abs(gflat[k]), abs(fd))
            rel = err / scale if scale > 0 else 0.0
            if scale > 1e-6:
                worst = max(worst, rel)
            if err <= atol:
                continue
            assert rel <= rtol, f"coordinate {k}: analytic {gflat[k]!r} vs numeric {fd!r} (rel {rel:.2e})"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
