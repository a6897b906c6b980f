import math

import numpy as np
import pytest

from groundbox.autodiff import Tensor
from groundbox.optim import Adam, xavier_init, zeros_init


def test_xavier_same_seed_bit_identical():
    a = xavier_init((7, 5), np.random.default_rng(42))
    b = xavier_init((7, 5), np.random.default_rng(42))
    assert np.array_equal(a.data, b.data)
    assert a.track_grad


def test_xavier_bound_and_mean():
    t = xavier_init((100, 100), np.random.default_rng(7))
    bound = math.sqrt(6.0 / 200.0)
    assert t.data.size == 10_000
    assert np.all(np.abs(t.data) <= bound)
    assert abs(t.data.mean()) < 0.01


def test_xavier_rejects_bad_shapes():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        xavier_init((0, 5), rng)
    with pytest.raises(ValueError):
        xavier_init((3, 4, 5), rng)


def test_zeros_init_fill():
    b = zeros_init((4,), 1.0)
    assert np.all(b.data == 1.0)
    assert b.track_grad


def test_adam_zero_gradient_keeps_params():
    p = Tensor([1.0, -2.0, 3.0], track_grad=True)
    before = p.data.copy()
    opt = Adam([p])
    p.grad = np.zeros(3)
    opt.step(lr=0.1)
    assert np.array_equal(p.data, before)


def test_adam_first_step_magnitude_is_lr():
    # bias correction makes m_hat/sqrt(v_hat) = 1 for a unit gradient
    p = Tensor([0.0], track_grad=True)
    opt = Adam([p])
    p.grad = np.array([1.0])
    opt.step(lr=0.001)
    assert abs(p.data[0] + 0.001) < 1e-9
    assert p.grad is None  # cleared after the step


def test_adam_matches_hand_arithmetic_two_steps():
    beta1, beta2, eps, lr = 0.9, 0.99, 1e-8, 0.01
    grads = [0.5, -1.5]
    p = Tensor([2.0], track_grad=True)
    opt = Adam([p], beta1=beta1, beta2=beta2, epsilon=eps)

    x, m, v = 2.0, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        x -= lr * (m / (1 - beta1 ** t)) / (math.sqrt(v / (1 - beta2 ** t)) + eps)
        p.grad = np.array([g])
        opt.step(lr=lr)
        assert abs(p.data[0] - x) < 1e-12


def test_adam_rejects_missing_gradient():
    p = Tensor([1.0], track_grad=True)
    q = Tensor([1.0], track_grad=True)
    opt = Adam([p, q])
    p.grad = np.array([1.0])
    with pytest.raises(ValueError, match="gradient"):
        opt.step(lr=0.1)


def test_adam_identical_trajectories_same_seed():
    def run():
        rng = np.random.default_rng(9)
        p = xavier_init((4, 3), np.random.default_rng(1))
        opt = Adam([p])
        history = []
        for _ in range(20):
            p.grad = rng.standard_normal(p.data.shape)
            opt.step(lr=0.01)
            history.append(p.data.copy())
        return history

    for a, b in zip(run(), run()):
        assert np.array_equal(a, b)
