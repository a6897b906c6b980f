"""Shared test utilities: central finite differences, kernel specs, and
small model/sample builders."""

from __future__ import annotations

import numpy as np

from groundbox import autodiff as ad
from groundbox.boxes import BBox, ImageSize
from groundbox.head import GroundingModel, GroundingSample, ModelDims, Proposal
from groundbox.vocab import build_vocab

FD_STEP = 1e-5
GRAD_TOL = 1e-4

WORDS = ("red", "ball", "blue", "cube", "the", "left", "of")


def make_model(seed: int = 0, d_v: int = 6, d_e: int = 4, d_q: int = 5,
               d_o: int = 8) -> GroundingModel:
    vocab = build_vocab([list(WORDS)])
    dims = ModelDims(d_v=d_v, d_e=d_e, d_q=d_q, d_o=d_o)
    return GroundingModel(vocab, dims, np.random.default_rng(seed))


def make_sample(rng: np.random.Generator, d_v: int = 6, n_proposals: int = 4,
                tokens=("red", "ball")) -> GroundingSample:
    """Random sample whose ground truth overlaps proposal 0 heavily."""
    img = ImageSize(100, 100)
    proposals = []
    for _ in range(n_proposals):
        x = rng.uniform(0, 60)
        y = rng.uniform(0, 60)
        w = rng.uniform(10, 35)
        h = rng.uniform(10, 35)
        proposals.append(Proposal(BBox(x, y, min(x + w, 100), min(y + h, 100)),
                                  rng.standard_normal(d_v)))
    first = proposals[0].box
    gt = BBox(min(first.x_tl + 1.0, 99.0), min(first.y_tl + 1.0, 99.0),
              min(first.x_br + 1.0, 100.0), min(first.y_br + 1.0, 100.0))
    return GroundingSample(img, proposals, list(tokens), gt)


def finite_diff(f, arrays: list[np.ndarray], step: float = FD_STEP) -> list[np.ndarray]:
    """Central-difference gradient of scalar f(*arrays) for each array."""
    grads = []
    for ai, base in enumerate(arrays):
        g = np.zeros_like(base, dtype=np.float64)
        flat = g.ravel()
        for i in range(base.size):
            bumped = [a.copy() for a in arrays]
            bumped[ai].ravel()[i] += step
            hi = f(*bumped)
            bumped = [a.copy() for a in arrays]
            bumped[ai].ravel()[i] -= step
            lo = f(*bumped)
            flat[i] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst-entry error, relative for large gradients, absolute near 0."""
    denom = max(1.0, float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))))
    return float(np.max(np.abs(analytic - numeric))) / denom


def scalar_readout(out: ad.Tensor, probe: np.ndarray) -> ad.Tensor:
    """Deterministic scalar projection of any-shaped op output."""
    return ad.vsum(ad.mul(out, ad.constant(probe)))


def check_kernel_grad(build, arrays: list[np.ndarray], probe: np.ndarray) -> float:
    """Compare backward() against finite differences through ``build``.

    ``build`` maps input Tensors to the op output; returns the worst
    relative error across all inputs.
    """
    inputs = [ad.tensor(a.copy(), track_grad=True) for a in arrays]
    loss = scalar_readout(build(*inputs), probe)
    ad.backward(loss)

    def f(*arrs):
        rebuilt = [ad.constant(a) for a in arrs]
        return float(scalar_readout(build(*rebuilt), probe).data)

    numeric = finite_diff(f, arrays)
    return max(max_rel_err(t.grad, n) for t, n in zip(inputs, numeric))


def _away_from(x: np.ndarray, bad_points, margin: float, rng) -> np.ndarray:
    """Resample entries that sit within ``margin`` of a kink."""
    x = x.copy()
    for _ in range(100):
        mask = np.zeros(x.shape, dtype=bool)
        for b in bad_points:
            mask |= np.abs(x - b) < margin
        if not mask.any():
            return x
        x[mask] = rng.uniform(-2.0, 2.0, size=int(mask.sum()))
    raise AssertionError("could not move inputs away from kinks")


def kernel_cases(rng: np.random.Generator):
    """(name, build, arrays) triples covering every differentiable kernel."""
    n, m, p = 4, 3, 2
    u = lambda *shape: rng.uniform(-2.0, 2.0, size=shape)
    pos = lambda *shape: rng.uniform(0.2, 3.0, size=shape)
    relu_safe = _away_from(u(n), [0.0], 1e-3, rng)
    sl1_safe = _away_from(u(n), [-1.0, 1.0], 1e-3, rng)
    nonzero = u(n)
    if np.linalg.norm(nonzero) < 0.5:
        nonzero = nonzero + 1.0
    row = int(rng.integers(m))
    return [
        ("matmul 2dx2d", lambda a, b: ad.matmul(a, b), [u(m, n), u(n, p)]),
        ("matmul 1dx2d", lambda a, b: ad.matmul(a, b), [u(n), u(n, p)]),
        ("matmul 2dx1d", lambda a, b: ad.matmul(a, b), [u(m, n), u(n)]),
        ("matmul dot", lambda a, b: ad.matmul(a, b), [u(n), u(n)]),
        ("add", lambda a, b: ad.add(a, b), [u(n), u(n)]),
        ("add bias-broadcast", lambda a, b: ad.add(a, b), [u(m, n), u(n)]),
        ("sub", lambda a, b: ad.sub(a, b), [u(n), u(n)]),
        ("mul", lambda a, b: ad.mul(a, b), [u(n), u(n)]),
        ("addc", lambda a: ad.addc(a, 0.7), [u(n)]),
        ("scale", lambda a: ad.scale(a, -1.3), [u(n)]),
        ("concat", lambda a, b, c: ad.concat([a, b, c]), [u(n), u(m), u(p)]),
        ("relu", lambda a: ad.relu(a), [relu_safe]),
        ("sigmoid", lambda a: ad.sigmoid(a), [u(n)]),
        ("tanh", lambda a: ad.tanh(a), [u(n)]),
        ("log", lambda a: ad.log(a), [pos(n)]),
        ("softmax", lambda a: ad.softmax(a), [u(n)]),
        ("l2_normalize", lambda a: ad.l2_normalize(a), [nonzero]),
        ("vsum", lambda a: ad.vsum(a), [u(m, n)]),
        ("mean", lambda a: ad.mean(a), [u(m, n)]),
        ("smooth_l1", lambda a: ad.smooth_l1(a), [sl1_safe]),
        ("take_row", lambda t: ad.take_row(t, row), [u(m, n)]),
    ]


def run_kernel_grad_suite(trials: int, seed: int = 0) -> dict[str, float]:
    """Worst finite-difference error per kernel over ``trials`` cases."""
    worst: dict[str, float] = {}
    for trial in range(trials):
        rng = np.random.default_rng(seed + trial)
        for name, build, arrays in kernel_cases(rng):
            probe_shape = build(*[ad.constant(a) for a in arrays]).shape
            probe = rng.uniform(-1.0, 1.0, size=probe_shape)
            err = check_kernel_grad(build, arrays, probe)
            worst[name] = max(worst.get(name, 0.0), err)
    return worst
