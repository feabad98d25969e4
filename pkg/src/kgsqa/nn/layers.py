"""LSTM encoders, additive attention and dropout on top of the autodiff layer."""

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyInputError, ShapeError, ValidationError
from . import autograd as ag
from .autograd import Tensor
from .params import ParamStore, uniform_init


def dropout(x, rate, train, rng):
    """Inverted dropout; identity unless ``train`` and ``rate > 0``."""
    if not train or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return ag.mul(x, keep)


def add_linear(params, name, n_in, n_out, rng, bias=True):
    params.add(f"{name}.W", uniform_init(rng, (n_in, n_out), n_in))
    if bias:
        params.add(f"{name}.b", np.zeros(n_out))


def linear(params, name, x):
    y = ag.matmul(x, params[f"{name}.W"])
    if f"{name}.b" in params:
        y = ag.add(y, params[f"{name}.b"])
    return y


@dataclass(frozen=True)
class LstmEncoder:
    """Configuration of a (possibly stacked, bidirectional, residual) LSTM.

    Parameters live in a ``ParamStore`` under ``name``; the encoder object
    itself is an immutable description.
    """

    name: str
    input_dim: int
    hidden: int
    layers: int = 1
    bidirectional: bool = False
    residual: bool = False
    dropout: float = 0.0

    def __post_init__(self):
        if self.hidden <= 0 or self.input_dim <= 0:
            raise ValidationError("LSTM dimensions must be positive")
        if self.layers < 1:
            raise ValidationError("LSTM needs at least one layer")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout rate must be in [0, 1)")
        if self.residual:
            for layer in range(self.layers):
                if self._layer_in(layer) != self.output_dim:
                    raise ShapeError(
                        f"residual layer {layer} maps width {self._layer_in(layer)} "
                        f"to {self.output_dim}")

    @property
    def directions(self):
        return 2 if self.bidirectional else 1

    @property
    def output_dim(self):
        return self.hidden * self.directions

    def _layer_in(self, layer):
        return self.input_dim if layer == 0 else self.output_dim

    def init(self, params: ParamStore, rng):
        h = self.hidden
        for layer in range(self.layers):
            n_in = self._layer_in(layer)
            for d in range(self.directions):
                p = f"{self.name}.l{layer}.d{d}"
                params.add(f"{p}.Wx", uniform_init(rng, (n_in, 4 * h), n_in))
                params.add(f"{p}.Wh", uniform_init(rng, (h, 4 * h), h))
                b = np.zeros(4 * h)
                b[h:2 * h] = 1.0  # forget gate
                params.add(f"{p}.b", b)

    def forward(self, params, x, mask=None, train=False, rng=None):
        """Encode ``x`` of shape (B, T, input_dim).

        Returns ``(states, final)``: states (B, T, output_dim) and the final
        state (B, output_dim). Padded steps (mask False) carry the previous
        state through, so ``final`` is the state after the last real token
        in each direction.
        """
        if x.ndim != 3:
            raise ShapeError("LSTM input must be (batch, time, features)")
        B, T, D = x.shape
        if T == 0:
            raise EmptyInputError("cannot encode an empty sequence")
        if D != self.input_dim:
            raise ShapeError(f"{self.name}: input width {D} != {self.input_dim}")
        if mask is None:
            mask = np.ones((B, T), dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        layer_in = x
        for layer in range(self.layers):
            outs = [self._run(params, f"{self.name}.l{layer}.d{d}", layer_in, mask,
                              reverse=(d == 1))
                    for d in range(self.directions)]
            out = outs[0] if len(outs) == 1 else ag.concat(outs, axis=-1)
            if self.residual:
                out = ag.add(out, layer_in)
            layer_in = dropout(out, self.dropout, train, rng)
        return layer_in, self._final_from_states(layer_in, mask)

    def _final_from_states(self, states, mask):
        # forward half at the last real step, backward half at the first
        B, T, _ = states.shape
        lengths = mask.sum(axis=1)
        last = np.maximum(lengths - 1, 0)
        rows = np.arange(B)
        fwd = ag.getitem(states, (rows, last))
        if not self.bidirectional:
            return fwd
        first = mask.argmax(axis=1)
        bwd = ag.getitem(states, (rows, first))
        h = self.hidden
        return ag.concat([fwd[:, :h], bwd[:, h:]], axis=-1)

    def _run(self, params, prefix, x, mask, reverse, h0=None, c0=None):
        B, T, _ = x.shape
        h = self.hidden
        Wx, b = params[f"{prefix}.Wx"], params[f"{prefix}.b"]
        xw = ag.add(ag.matmul(x, Wx), b)  # (B, T, 4h) for all steps at once
        hs = h0 if h0 is not None else Tensor(np.zeros((B, h)))
        cs = c0 if c0 is not None else Tensor(np.zeros((B, h)))
        outs = [None] * T
        steps = range(T - 1, -1, -1) if reverse else range(T)
        for t in steps:
            h_new, c_new = lstm_cell(params, prefix, xw[:, t], hs, cs, h)
            m = mask[:, t:t + 1]
            if m.all():
                cs, hs = c_new, h_new
            else:
                keep = 1.0 - m
                cs = ag.add(ag.mul(c_new, m.astype(float)), ag.mul(cs, keep))
                hs = ag.add(ag.mul(h_new, m.astype(float)), ag.mul(hs, keep))
            outs[t] = hs
        return ag.stack(outs, axis=1)

    def run_from(self, params, x, h0, c0=None, mask=None):
        """Single-layer forward pass from a given initial state; returns (B, T, h) states."""
        if self.layers != 1 or self.bidirectional:
            raise ValidationError("run_from needs a single-layer unidirectional LSTM")
        B, T, _ = x.shape
        if mask is None:
            mask = np.ones((B, T), dtype=bool)
        return self._run(params, f"{self.name}.l0.d0", x, np.asarray(mask, dtype=bool),
                         reverse=False, h0=h0, c0=c0)

    def step(self, params, x_t, h, c):
        """One step of a single-layer unidirectional LSTM; returns (h, c)."""
        prefix = f"{self.name}.l0.d0"
        xw = ag.add(ag.matmul(x_t, params[f"{prefix}.Wx"]), params[f"{prefix}.b"])
        return lstm_cell(params, prefix, xw, h, c, self.hidden)


def lstm_cell(params, prefix, xw_t, h, c, hidden):
    """Standard non-peephole LSTM cell; ``xw_t`` is the precomputed x W_x + b."""
    z = ag.add(xw_t, ag.matmul(h, params[f"{prefix}.Wh"]))
    i = ag.sigmoid(z[:, :hidden])
    f = ag.sigmoid(z[:, hidden:2 * hidden])
    g = ag.tanh(z[:, 2 * hidden:3 * hidden])
    o = ag.sigmoid(z[:, 3 * hidden:])
    c_new = ag.add(ag.mul(f, c), ag.mul(i, g))
    h_new = ag.mul(o, ag.tanh(c_new))
    return h_new, c_new


def lstm_encode(encoder: LstmEncoder, params, inputs, mode="eval", rng=None):
    """Encode one sequence of vectors; returns (per-step states, final state) as arrays."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise EmptyInputError("lstm_encode needs a non-empty (T, d) sequence")
    if mode not in ("train", "eval"):
        raise ValidationError(f"unknown mode {mode!r}")
    states, final = encoder.forward(params, Tensor(inputs[None]), train=(mode == "train"),
                                    rng=rng)
    return states.data[0], final.data[0]


@dataclass(frozen=True)
class Attention:
    """Additive attention: score_j = v . tanh(Wq q + Wk k_j + b)."""

    name: str
    query_dim: int
    key_dim: int
    attn_dim: int

    def init(self, params, rng):
        params.add(f"{self.name}.Wq", uniform_init(rng, (self.query_dim, self.attn_dim), self.query_dim))
        params.add(f"{self.name}.Wk", uniform_init(rng, (self.key_dim, self.attn_dim), self.key_dim))
        params.add(f"{self.name}.b", np.zeros(self.attn_dim))
        params.add(f"{self.name}.v", uniform_init(rng, (self.attn_dim,), self.attn_dim))

    def project_keys(self, params, keys):
        return ag.add(ag.matmul(keys, params[f"{self.name}.Wk"]), params[f"{self.name}.b"])

    def forward(self, params, query, keys, values, mask=None, projected_keys=None):
        """Attend with query (B, q) or a query sequence (B, T, q) over keys (B, L, k).

        Returns (context, weights): (B, v) and (B, L), or (B, T, v) and
        (B, T, L) for a query sequence. ``mask`` (B, L) hides padded keys.
        """
        if keys.shape[1] == 0:
            raise EmptyInputError("attention over an empty key set")
        if keys.shape[:2] != values.shape[:2]:
            raise ShapeError("keys and values must have the same length")
        pk = projected_keys if projected_keys is not None else self.project_keys(params, keys)
        q = ag.matmul(query, params[f"{self.name}.Wq"])
        B, L, A = pk.shape
        if query.ndim == 2:
            e = ag.tanh(ag.add(pk, ag.reshape(q, (B, 1, A))))
            scores = ag.matmul(e, params[f"{self.name}.v"])  # (B, L)
            weights = ag.softmax(scores, axis=-1, mask=mask)
            ctx = ag.matmul(ag.reshape(weights, (B, 1, L)), values)
            return ag.reshape(ctx, (B, values.shape[-1])), weights
        T = query.shape[1]
        e = ag.tanh(ag.add(ag.reshape(pk, (B, 1, L, A)), ag.reshape(q, (B, T, 1, A))))
        scores = ag.matmul(e, params[f"{self.name}.v"])  # (B, T, L)
        m = None if mask is None else np.asarray(mask, dtype=bool)[:, None, :]
        weights = ag.softmax(scores, axis=-1, mask=m)
        return ag.matmul(weights, values), weights


def attention(att: Attention, params, query, keys, values):
    """Single-instance convenience wrapper returning arrays."""
    keys = np.asarray(keys, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(keys) == 0:
        raise EmptyInputError("attention over an empty key set")
    ctx, w = att.forward(params, Tensor(np.asarray(query, dtype=float)[None]),
                         Tensor(keys[None]), Tensor(values[None]))
    return ctx.data[0], w.data[0]
