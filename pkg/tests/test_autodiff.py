import numpy as np
import pytest

from net3 import autodiff as ad
from net3.autodiff import GradientTape


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def check(fn, *arrays, atol=1e-7):
    """Compare tape gradients of ``sum(fn(*args)**2)`` with finite differences."""
    tape = GradientTape()
    vars_ = [tape.watch(a) for a in arrays]
    grads = tape.gradient(ad.sum_squares(fn(*vars_)), vars_)
    for k, (a, g) in enumerate(zip(arrays, grads)):
        def f(v, k=k):
            args = list(arrays)
            args[k] = v
            return float(np.sum(fn(*args) ** 2))
        np.testing.assert_allclose(g, numeric_grad(f, a), atol=atol, rtol=1e-6)


def test_sum_squares_gradient_is_twice_x(rng):
    x = rng.standard_normal((3, 2))
    tape = GradientTape()
    v = tape.watch(x)
    np.testing.assert_array_equal(tape.gradient(ad.sum_squares(v), [v])[0], 2 * x)


def test_plain_arrays_pass_through():
    out = ad.add(np.ones(2), np.ones(2))
    assert isinstance(out, np.ndarray)


def test_unreached_source_gets_zero(rng):
    tape = GradientTape()
    a, b = tape.watch(rng.standard_normal(3)), tape.watch(rng.standard_normal(2))
    grads = tape.gradient(ad.sum_squares(a), [a, b])
    np.testing.assert_array_equal(grads[1], np.zeros(2))


def test_tape_mismatch_and_non_scalar(rng):
    t1, t2 = GradientTape(), GradientTape()
    a = t1.watch(np.ones(2))
    b = t2.watch(np.ones(2))
    with pytest.raises(ValueError):
        t2.gradient(ad.sum_squares(a), [b])
    with pytest.raises(ValueError, match="scalar"):
        t1.gradient(ad.mul(a, 2.0), [a])
    with pytest.raises(ValueError):
        ad.add(a, b)


def test_broadcast_gradients(rng):
    check(lambda x, b: x + b, rng.standard_normal((3, 4)), rng.standard_normal(4))
    check(lambda x, b: x * b, rng.standard_normal((2, 3, 4)), rng.standard_normal((3, 1)))
    check(lambda x, b: x - b, rng.standard_normal((3, 4)), rng.standard_normal((3, 4)))


@pytest.mark.parametrize("m", [0, 1, 2])
def test_mode_product_gradient(rng, m):
    x = rng.standard_normal((3, 4, 2))
    check(lambda a, u: ad.mode_product(a, u, m), x, rng.standard_normal((x.shape[m], 3)))


def test_matrix_and_shape_ops(rng):
    check(ad.matmul, rng.standard_normal((3, 4)), rng.standard_normal((4, 2)))
    check(lambda a: ad.transpose(a, (2, 0, 1)), rng.standard_normal((2, 3, 4)))
    check(lambda a: ad.reshape(a, (6, 4)), rng.standard_normal((2, 3, 4)))
    check(lambda a: ad.take(a, 1), rng.standard_normal((3, 2)))
    check(lambda a, b: ad.concat([a, b], axis=-1), rng.standard_normal((2, 3)), rng.standard_normal((2, 1)))
    check(lambda a, w: ad.einsum("nij,njk->nik", a, w), rng.standard_normal((2, 3, 4)), rng.standard_normal((2, 4, 2)))


@pytest.mark.parametrize("name", ["sigmoid", "tanh", "identity"])
def test_activation_gradients(rng, name):
    check(ad.activation(name), rng.standard_normal((3, 3)))


def test_relu_gradient_away_from_kink():
    x = np.array([-1.5, -0.2, 0.3, 2.0])
    check(ad.relu, x)


def test_sigmoid_is_stable():
    out = ad.sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    np.testing.assert_array_equal(out, [0.0, 0.5, 1.0])


def test_unknown_activation():
    with pytest.raises(ValueError):
        ad.activation("softplus")
