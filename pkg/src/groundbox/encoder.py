"""Query encoding: learned word embedding + one-layer LSTM.

A variable-length index sequence is embedded token by token and run
through a standard LSTM (input/forget/output gates plus cell candidate,
no peepholes) from zero initial state; the hidden state after the final
token is the query feature.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .optim import xavier_init, zeros_init

GATES = ("i", "f", "g", "o")


class QueryEncoderParams:
    """Embedding table plus per-gate weights and biases.

    Each gate consumes the concatenated [token embedding; previous
    hidden state], so its weight is one (d_e + d_q, d_q) matrix.
    """

    def __init__(self, vocab_size: int, d_e: int, d_q: int,
                 rng: np.random.Generator):
        if vocab_size < 2 or d_e < 1 or d_q < 1:
            raise ValueError(f"encoder dims out of range: vocab={vocab_size}, "
                             f"d_e={d_e}, d_q={d_q}")
        self.vocab_size = vocab_size
        self.d_e = d_e
        self.d_q = d_q
        self.embedding = xavier_init((vocab_size, d_e), rng)
        self.w = {g: xavier_init((d_e + d_q, d_q), rng) for g in GATES}
        # Forget gate starts open so early training does not wipe the cell.
        self.b = {g: zeros_init((d_q,), 1.0 if g == "f" else 0.0) for g in GATES}

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = [("embedding", self.embedding)]
        for g in GATES:
            out.append((f"lstm_w_{g}", self.w[g]))
            out.append((f"lstm_b_{g}", self.b[g]))
        return out


def lstm_step(params: QueryEncoderParams, x: Tensor, h: Tensor,
              c: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM cell update; returns (h_next, c_next)."""
    xh = ad.concat([x, h])

    def gate(name: str) -> Tensor:
        pre = ad.add(ad.matmul(xh, params.w[name]), params.b[name])
        return ad.tanh(pre) if name == "g" else ad.sigmoid(pre)

    i, f, g, o = (gate(n) for n in GATES)
    c_next = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_next = ad.mul(o, ad.tanh(c_next))
    return h_next, c_next


def encode_query(token_indices: list[int], params: QueryEncoderParams) -> Tensor:
    """Run the LSTM over the sequence and return the last hidden state."""
    if not token_indices:
        raise ValueError("encode_query: empty token sequence")
    for idx in token_indices:
        if not 0 <= idx < params.vocab_size:
            raise ValueError(f"encode_query: token index {idx} outside "
                             f"[0, {params.vocab_size})")
    h = ad.constant(np.zeros(params.d_q))
    c = ad.constant(np.zeros(params.d_q))
    for idx in token_indices:
        x = ad.take_row(params.embedding, idx)
        h, c = lstm_step(params, x, h, c)
    return h
