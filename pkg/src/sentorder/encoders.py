"""Sentence and paragraph encoders built on :mod:`sentorder.autograd`.

All encoders are batched: the word-level input is ``(S, L, d)`` with one
true length per row; rows past the true length are ignored. A 2-D input
``(L, d)`` is treated as a batch of one and returns a 1-D vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, concat, matmul, max_, mul, sigmoid, sum_, tanh

Params = dict[str, Tensor]

ENCODER_KINDS = ("cbow", "cnn", "lstm")
CELL_FORMS = ("standard", "forget_outer")


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "lstm"
    d: int = 16
    d_f: int = 32
    l_f: int = 3
    h: int = 32
    cell_form: str = "standard"

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise ValueError(f"encoder kind must be one of {ENCODER_KINDS}, got {self.kind!r}")
        if min(self.d, self.d_f, self.h) < 1:
            raise ValueError("d, d_f and h must be >= 1")
        if self.l_f < 1 or self.l_f % 2 == 0:
            raise ValueError(f"l_f must be odd and >= 1, got {self.l_f}")
        if self.cell_form not in CELL_FORMS:
            raise ValueError(f"cell_form must be one of {CELL_FORMS}")

    @property
    def output_dim(self) -> int:
        return self.d if self.kind == "cbow" else self.d_f


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, name: str) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


def zeros_param(shape: tuple[int, ...], name: str) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def init_encoder(cfg: EncoderConfig, rng: np.random.Generator, prefix: str = "enc") -> Params:
    if cfg.kind == "cbow":
        return {}
    if cfg.kind == "cnn":
        fan_in = cfg.d * cfg.l_f
        return {
            f"{prefix}.W": uniform_init(rng, (fan_in, cfg.d_f), fan_in, f"{prefix}.W"),
            f"{prefix}.b": uniform_init(rng, (cfg.d_f,), fan_in, f"{prefix}.b"),
        }
    return init_lstm(cfg.d, cfg.d_f, rng, prefix)


def init_lstm(d_in: int, d_hidden: int, rng: np.random.Generator, prefix: str) -> Params:
    fan_in = d_in + d_hidden
    return {
        f"{prefix}.W": uniform_init(rng, (fan_in, 4 * d_hidden), fan_in, f"{prefix}.W"),
        f"{prefix}.b": uniform_init(rng, (4 * d_hidden,), fan_in, f"{prefix}.b"),
    }


def init_context(d_in: int, d_ctx: int, rng: np.random.Generator, prefix: str, pooling: str = "lstm") -> Params:
    if pooling == "lstm":
        return init_lstm(d_in, d_ctx, rng, prefix)
    if pooling == "mean":
        return {
            f"{prefix}.W": uniform_init(rng, (d_in, d_ctx), d_in, f"{prefix}.W"),
            f"{prefix}.b": uniform_init(rng, (d_ctx,), d_in, f"{prefix}.b"),
        }
    raise ValueError(f"unknown context pooling {pooling!r}")


def init_mlp(d_in: int, hidden: int, rng: np.random.Generator, prefix: str) -> Params:
    return {
        f"{prefix}.W1": uniform_init(rng, (d_in, hidden), d_in, f"{prefix}.W1"),
        f"{prefix}.b1": uniform_init(rng, (hidden,), d_in, f"{prefix}.b1"),
        f"{prefix}.W2": uniform_init(rng, (hidden, 1), hidden, f"{prefix}.W2"),
        f"{prefix}.b2": uniform_init(rng, (1,), hidden, f"{prefix}.b2"),
    }


def _as_batch(x, lengths):
    data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    single = data.ndim == 2
    if single:
        x = x.reshape(1, *data.shape) if isinstance(x, Tensor) else data[None]
        lengths = [lengths]
    x = x if isinstance(x, Tensor) else Tensor(x)
    lengths = np.asarray(lengths, dtype=np.int64).reshape(-1)
    if lengths.shape[0] != x.shape[0]:
        raise ValueError(f"{lengths.shape[0]} lengths for a batch of {x.shape[0]}")
    if (lengths < 1).any() or (lengths > x.shape[1]).any():
        raise ValueError(f"true lengths must lie in [1, {x.shape[1]}], got {lengths.tolist()}")
    return x, lengths, single


def _unbatch(out: Tensor, single: bool) -> Tensor:
    return out.reshape(out.shape[1:]) if single else out


def encode_cbow(x, lengths) -> Tensor:
    """Mean of the first ``length`` word vectors of each row."""
    x, lengths, single = _as_batch(x, lengths)
    mask = (np.arange(x.shape[1])[None, :] < lengths[:, None]).astype(np.float64)
    weights = (mask / lengths[:, None])[:, :, None]
    return _unbatch(sum_(mul(x, weights), axis=1), single)


def encode_cnn(x, lengths, params: Params, l_f: int = 3, prefix: str = "enc") -> Tensor:
    """Zero-pad one row per side, tanh(W^T [window] + b) per window, max over windows.

    A sentence of true length ``n`` yields ``n + 3 - l_f`` windows.
    """
    x, lengths, single = _as_batch(x, lengths)
    W, b = params[f"{prefix}.W"], params[f"{prefix}.b"]
    S, L, d = x.shape
    if W.shape != (d * l_f, b.shape[0]):
        raise ValueError(f"conv weight shape {W.shape} does not match d*l_f={d * l_f}")
    n_windows = lengths + 3 - l_f
    if (n_windows < 1).any():
        raise ValueError(f"sentence too short for filter length {l_f}")
    live = (np.arange(L)[None, :] < lengths[:, None]).astype(np.float64)[:, :, None]
    zero = np.zeros((S, 1, d))
    padded = concat([Tensor(zero), mul(x, live), Tensor(zero)], axis=1)
    K = L + 3 - l_f
    windows = concat([padded[:, u : u + K, :] for u in range(l_f)], axis=2)
    act = tanh(matmul(windows, W) + b)
    invalid = np.arange(K)[None, :] >= n_windows[:, None]
    act = act + (invalid[:, :, None] * -1e9)
    return _unbatch(max_(act, axis=1), single)


def _lstm_step(h, c, x_t, W, b, hidden: int, cell_form: str):
    z = matmul(concat([h, x_t], axis=1), W) + b
    i = sigmoid(z[:, 0:hidden])
    f = sigmoid(z[:, hidden : 2 * hidden])
    o = sigmoid(z[:, 2 * hidden : 3 * hidden])
    g = tanh(z[:, 3 * hidden :])
    if cell_form == "standard":
        c_new = mul(f, c) + mul(i, g)
    else:
        c_new = mul(f, c + mul(i, g))
    return mul(o, tanh(c_new)), c_new


def run_lstm(x, lengths, params: Params, prefix: str, cell_form: str = "standard") -> Tensor:
    """Final hidden state after ``length`` steps with ``h_0 = c_0 = 0``.

    Gate pre-activations are ``[h_{t-1}; x_t] @ W + b`` with columns laid out
    as input | forget | output | candidate.
    """
    x, lengths, single = _as_batch(x, lengths)
    W, b = params[f"{prefix}.W"], params[f"{prefix}.b"]
    S, L, d = x.shape
    hidden = W.shape[1] // 4
    if W.shape[0] != hidden + d:
        raise ValueError(f"LSTM weight shape {W.shape} does not match input dim {d}")
    h = Tensor(np.zeros((S, hidden)))
    c = Tensor(np.zeros((S, hidden)))
    for t in range(int(lengths.max())):
        h_new, c_new = _lstm_step(h, c, x[:, t, :], W, b, hidden, cell_form)
        live = (t < lengths)[:, None].astype(np.float64)
        if live.all():
            h, c = h_new, c_new
        else:
            h = mul(h_new, live) + mul(h, 1.0 - live)
            c = mul(c_new, live) + mul(c, 1.0 - live)
    return _unbatch(h, single)


def encode_lstm(x, lengths, params: Params, prefix: str = "enc", cell_form: str = "standard") -> Tensor:
    return run_lstm(x, lengths, params, prefix, cell_form)


def encode_sentences(cfg: EncoderConfig, x, lengths, params: Params, prefix: str = "enc") -> Tensor:
    if cfg.kind == "cbow":
        return encode_cbow(x, lengths)
    if cfg.kind == "cnn":
        return encode_cnn(x, lengths, params, cfg.l_f, prefix)
    return encode_lstm(x, lengths, params, prefix, cfg.cell_form)


def gather_sequences(vectors: Tensor, groups: list[list[int]]) -> tuple[Tensor, np.ndarray]:
    """Arrange rows of ``vectors`` into a padded ``(G, max group, dim)`` batch."""
    if not groups or any(len(g) == 0 for g in groups):
        raise ValueError("every context needs at least one sentence")
    width = max(len(g) for g in groups)
    pad_row = vectors.shape[0]
    index = np.full((len(groups), width), pad_row, dtype=np.int64)
    for r, g in enumerate(groups):
        index[r, : len(g)] = g
    padded = concat([vectors, Tensor(np.zeros((1, vectors.shape[1])))], axis=0)
    return padded[index], np.array([len(g) for g in groups], dtype=np.int64)


def encode_context(
    vectors: Tensor,
    groups: list[list[int]],
    params: Params,
    prefix: str = "ctx",
    pooling: str = "lstm",
    cell_form: str = "standard",
) -> Tensor:
    """One vector per group of sentence vectors, consumed in the listed order.

    ``pooling="mean"`` swaps the LSTM for an order-invariant
    ``tanh(mean @ W + b)`` summary.
    """
    seqs, counts = gather_sequences(vectors, groups)
    if pooling == "lstm":
        return run_lstm(seqs, counts, params, prefix, cell_form)
    if pooling == "mean":
        pooled = encode_cbow(seqs, counts)
        return tanh(matmul(pooled, params[f"{prefix}.W"]) + params[f"{prefix}.b"])
    raise ValueError(f"unknown context pooling {pooling!r}")


def mlp(x: Tensor, params: Params, prefix: str = "head") -> Tensor:
    """Two affine layers with tanh between; returns one scalar per row."""
    hidden = tanh(matmul(x, params[f"{prefix}.W1"]) + params[f"{prefix}.b1"])
    out = matmul(hidden, params[f"{prefix}.W2"]) + params[f"{prefix}.b2"]
    return out.reshape(out.shape[:-1])
