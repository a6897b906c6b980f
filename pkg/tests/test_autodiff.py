import numpy as np
import pytest

from groundbox import autodiff as ad
from helpers import GRAD_TOL, run_kernel_grad_suite


def test_softmax_symmetry():
    out = ad.softmax(ad.constant([0.0, 0.0]))
    assert np.allclose(out.data, [0.5, 0.5], atol=1e-12)


def test_relu_definition():
    out = ad.relu(ad.constant([-1.0, 2.5]))
    assert out.data[0] == 0.0
    assert out.data[1] == 2.5


def test_l2_normalize_hand_value():
    out = ad.l2_normalize(ad.constant([3.0, 4.0]))
    assert np.allclose(out.data, [0.6, 0.8], atol=1e-12)


def test_l2_normalize_zero_vector_passes_through():
    x = ad.tensor([0.0, 0.0, 0.0], track_grad=True)
    out = ad.l2_normalize(x)
    assert np.all(out.data == 0.0)
    ad.backward(ad.vsum(out))
    assert np.all(x.grad == 0.0)


def test_backward_sum_gives_ones():
    rng = np.random.default_rng(3)
    for shape in [(5,), (3, 4), ()]:
        x = ad.tensor(rng.standard_normal(shape), track_grad=True)
        ad.backward(ad.vsum(x))
        assert np.all(x.grad == 1.0)


def test_backward_relu_subgradient():
    x = ad.tensor([-1.0, 2.0], track_grad=True)
    ad.backward(ad.vsum(ad.relu(x)))
    assert np.array_equal(x.grad, [0.0, 1.0])


def test_backward_rejects_nonscalar():
    x = ad.tensor([1.0, 2.0], track_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        ad.backward(ad.relu(x))


def test_backward_rejects_untracked_loss():
    with pytest.raises(ValueError, match="track"):
        ad.backward(ad.constant(1.0))


def test_log_rejects_nonpositive():
    with pytest.raises(ValueError, match="log"):
        ad.log(ad.constant([1.0, 0.0]))
    with pytest.raises(ValueError, match="log"):
        ad.log(ad.constant([-1.0]))


def test_shape_errors_name_kernel_and_shapes():
    a, b = ad.constant(np.ones((2, 3))), ad.constant(np.ones((4, 5)))
    with pytest.raises(ValueError, match=r"matmul.*\(2, 3\).*\(4, 5\)"):
        ad.matmul(a, b)
    with pytest.raises(ValueError, match=r"add.*\(2, 3\).*\(4, 5\)"):
        ad.add(a, b)
    with pytest.raises(ValueError, match="mul"):
        ad.mul(ad.constant([1.0]), ad.constant([1.0, 2.0]))


def test_untracked_inputs_record_nothing():
    out = ad.add(ad.constant([1.0]), ad.constant([2.0]))
    assert out.op is None
    assert not out.track_grad
    assert out.grad is None


def test_gradient_accumulates_across_multiple_uses():
    # f(x) = sum(x*c1) + sum(x*c2) with shared x must equal the sum of
    # the two branch gradients computed on duplicated subgraphs.
    rng = np.random.default_rng(11)
    v = rng.standard_normal(6)
    c1, c2 = rng.standard_normal(6), rng.standard_normal(6)

    shared = ad.tensor(v, track_grad=True)
    loss = ad.add(ad.vsum(ad.mul(shared, ad.constant(c1))),
                  ad.vsum(ad.mul(shared, ad.constant(c2))))
    ad.backward(loss)

    branch_grads = []
    for c in (c1, c2):
        x = ad.tensor(v, track_grad=True)
        ad.backward(ad.vsum(ad.mul(x, ad.constant(c))))
        branch_grads.append(x.grad)
    assert np.allclose(shared.grad, branch_grads[0] + branch_grads[1],
                       atol=1e-12)


def test_gradient_accumulates_across_backward_calls():
    x = ad.tensor([1.0, 2.0], track_grad=True)
    ad.backward(ad.vsum(x))
    ad.backward(ad.vsum(x))
    assert np.array_equal(x.grad, [2.0, 2.0])


def test_softmax_is_distribution():
    rng = np.random.default_rng(5)
    for _ in range(200):
        scale = float(rng.uniform(0.1, 50.0))
        out = ad.softmax(ad.constant(rng.standard_normal(int(rng.integers(1, 9))) * scale))
        assert np.all(out.data >= 0.0)
        assert abs(out.data.sum() - 1.0) < 1e-6


def test_l2_normalize_unit_norm():
    rng = np.random.default_rng(6)
    for _ in range(200):
        v = rng.standard_normal(int(rng.integers(1, 9)))
        if np.linalg.norm(v) == 0.0:
            continue
        out = ad.l2_normalize(ad.constant(v))
        assert abs(np.linalg.norm(out.data) - 1.0) < 1e-6


def test_smooth_l1_values_and_c1_continuity():
    x = ad.constant([0.5, 2.0, -2.0, 0.0])
    out = ad.smooth_l1(x)
    assert np.allclose(out.data, [0.125, 1.5, 1.5, 0.0], atol=1e-12)
    # value and derivative agree from both sides of |x| = 1
    eps = 1e-9
    for sign in (1.0, -1.0):
        lo, hi = sign * (1.0 - eps), sign * (1.0 + eps)
        vlo = float(ad.smooth_l1(ad.constant([lo])).data[0])
        vhi = float(ad.smooth_l1(ad.constant([hi])).data[0])
        assert abs(vlo - vhi) < 1e-8
        dlo = _smooth_l1_grad_at(lo)
        dhi = _smooth_l1_grad_at(hi)
        assert abs(dlo - dhi) < 1e-8


def _smooth_l1_grad_at(v: float) -> float:
    x = ad.tensor([v], track_grad=True)
    ad.backward(ad.vsum(ad.smooth_l1(x)))
    return float(x.grad[0])


def test_concat_and_take_row_roundtrip_values():
    t = ad.constant(np.arange(12.0).reshape(3, 4))
    row = ad.take_row(t, 1)
    assert np.array_equal(row.data, [4.0, 5.0, 6.0, 7.0])
    joined = ad.concat([ad.constant([1.0]), ad.constant([2.0, 3.0])])
    assert np.array_equal(joined.data, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="take_row"):
        ad.take_row(t, 3)


def test_kernel_gradients_match_finite_differences():
    worst = run_kernel_grad_suite(trials=20, seed=100)
    bad = {k: v for k, v in worst.items() if v >= GRAD_TOL}
    assert not bad, f"kernels past tolerance: {bad}"
