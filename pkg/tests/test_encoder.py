import numpy as np
import pytest

from groundbox import autodiff as ad
from groundbox.encoder import GATES, QueryEncoderParams, encode_query, lstm_step
from helpers import GRAD_TOL, finite_diff, max_rel_err


def tiny_params(seed=0, vocab=11, d_e=5, d_q=7) -> QueryEncoderParams:
    return QueryEncoderParams(vocab, d_e, d_q, np.random.default_rng(seed))


def test_zero_params_give_zero_output():
    # every weight and bias forced to zero: each gate is sigma(0) or
    # tanh(0), so cell and hidden state stay exactly zero
    p = tiny_params()
    for _, t in p.named_params():
        t.data[...] = 0.0
    for tokens in ([3], [1, 2, 3], [5, 5, 5, 5]):
        out = encode_query(tokens, p)
        assert np.all(out.data == 0.0)


def test_single_token_equals_one_lstm_step():
    p = tiny_params(seed=3)
    out = encode_query([4], p)
    x = ad.take_row(p.embedding, 4)
    h0 = ad.constant(np.zeros(p.d_q))
    c0 = ad.constant(np.zeros(p.d_q))
    h1, _ = lstm_step(p, x, h0, c0)
    assert np.array_equal(out.data, h1.data)


def test_output_shape_fixed_regardless_of_length():
    p = tiny_params(seed=1)
    for n in (1, 2, 5, 9):
        assert encode_query(list(range(n % p.vocab_size, (n % p.vocab_size) + 1)) * n,
                            p).shape == (p.d_q,)


def test_encoding_deterministic():
    p = tiny_params(seed=5)
    a = encode_query([1, 2, 3], p)
    b = encode_query([1, 2, 3], p)
    assert np.array_equal(a.data, b.data)


def test_order_sensitivity():
    p = tiny_params(seed=7)
    a = encode_query([2, 3], p)
    b = encode_query([3, 2], p)
    assert np.max(np.abs(a.data - b.data)) > 1e-6


def test_rejects_bad_inputs():
    p = tiny_params()
    with pytest.raises(ValueError):
        encode_query([], p)
    with pytest.raises(ValueError):
        encode_query([p.vocab_size], p)
    with pytest.raises(ValueError):
        encode_query([-1], p)


def test_forget_bias_initialized_open():
    p = tiny_params(seed=2)
    assert np.all(p.b["f"].data == 1.0)
    for g in GATES:
        if g != "f":
            assert np.all(p.b[g].data == 0.0)


def test_encode_query_gradients_match_finite_differences():
    # full-sequence check over embedding and every gate parameter
    rng = np.random.default_rng(13)
    p = tiny_params(seed=13, vocab=9, d_e=4, d_q=5)
    tokens = [1, 7, 3]
    probe = rng.uniform(-1.0, 1.0, size=p.d_q)

    named = p.named_params()
    loss = ad.vsum(ad.mul(encode_query(tokens, p), ad.constant(probe)))
    ad.backward(loss)
    analytic = {name: t.grad.copy() for name, t in named}

    for name, t in named:
        def f(arr, _t=t):
            saved = _t.data.copy()
            _t.data[...] = arr
            out = float(ad.vsum(ad.mul(encode_query(tokens, p),
                                       ad.constant(probe))).data)
            _t.data[...] = saved
            return out

        numeric = finite_diff(f, [t.data.copy()])[0]
        err = max_rel_err(analytic[name], numeric)
        assert err < GRAD_TOL, f"{name}: fd error {err}"
