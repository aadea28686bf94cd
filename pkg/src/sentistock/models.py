"""Recurrent regressors: GRU and LSTM cells with hand-derived BPTT.

A :class:`Network` is a stack of one or two recurrent layers (optionally
bidirectional), inverted dropout on the final hidden state, and a dense
``D -> 1`` head.  All sequence arithmetic goes through :mod:`.backend`, so
the compiled and numpy kernels are interchangeable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import backend
from .errors import CacheError, CheckpointVersionError, ConfigError, ShapeError
from .numcore import SeededRng, glorot_init, sigmoid, tanh

CHECKPOINT_VERSION = 1


def _vec(x, n, what):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != n:
        raise ShapeError(f"{what}: expected length {n}, got {x.shape}")
    return x


class GruCell:
    """Gate weights ``W_*`` of shape (hidden, hidden + input) and biases ``b_*``."""

    kind = "gru"
    names = ("W_r", "W_u", "W_h", "b_r", "b_u", "b_h")

    def __init__(self, input_dim, hidden_dim, params=None):
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        H, D = self.hidden_dim, self.hidden_dim + self.input_dim
        if params is None:
            params = {n: np.zeros((H, D) if n[0] == "W" else H) for n in self.names}
        for n in self.names:
            want = (H, D) if n[0] == "W" else (H,)
            if params[n].shape != want:
                raise ShapeError(f"{n}: expected {want}, got {params[n].shape}")
        self.params = params

    @classmethod
    def init(cls, input_dim, hidden_dim, rng: SeededRng):
        H, D = hidden_dim, hidden_dim + input_dim
        params = {}
        for n in cls.names:
            params[n] = glorot_init(H, D, rng) if n[0] == "W" else np.zeros(H)
        return cls(input_dim, hidden_dim, params)

    def forward_sequence(self, X, h0=None):
        p = self.params
        if h0 is None:
            h0 = np.zeros((X.shape[0], self.hidden_dim))
        return backend.gru_sequence_forward(p["W_r"], p["W_u"], p["W_h"],
                                            p["b_r"], p["b_u"], p["b_h"], X, h0)

    def backward_sequence(self, X, cache, dHs):
        p = self.params
        grads, dX, _ = backend.gru_sequence_backward(p["W_r"], p["W_u"], p["W_h"],
                                                     X, cache, dHs)
        return grads, dX


class LstmCell:
    """Input, forget, output and candidate gates over ``[h_prev, x]``.

    The forget-gate bias starts at +1.
    """

    kind = "lstm"
    names = ("W_i", "W_f", "W_o", "W_g", "b_i", "b_f", "b_o", "b_g")

    def __init__(self, input_dim, hidden_dim, params=None):
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        H, D = self.hidden_dim, self.hidden_dim + self.input_dim
        if params is None:
            params = {n: np.zeros((H, D) if n[0] == "W" else H) for n in self.names}
        for n in self.names:
            want = (H, D) if n[0] == "W" else (H,)
            if params[n].shape != want:
                raise ShapeError(f"{n}: expected {want}, got {params[n].shape}")
        self.params = params

    @classmethod
    def init(cls, input_dim, hidden_dim, rng: SeededRng):
        H, D = hidden_dim, hidden_dim + input_dim
        params = {}
        for n in cls.names:
            params[n] = glorot_init(H, D, rng) if n[0] == "W" else np.zeros(H)
        params["b_f"][:] = 1.0
        return cls(input_dim, hidden_dim, params)

    def forward_sequence(self, X, h0=None, c0=None):
        p = self.params
        B = X.shape[0]
        h0 = np.zeros((B, self.hidden_dim)) if h0 is None else h0
        c0 = np.zeros((B, self.hidden_dim)) if c0 is None else c0
        return backend.lstm_sequence_forward(
            p["W_i"], p["W_f"], p["W_o"], p["W_g"],
            p["b_i"], p["b_f"], p["b_o"], p["b_g"], X, h0, c0)

    def backward_sequence(self, X, cache, dHs):
        p = self.params
        grads, dX, _, _ = backend.lstm_sequence_backward(
            p["W_i"], p["W_f"], p["W_o"], p["W_g"], X, cache, dHs)
        return grads, dX


CELLS = {"gru": GruCell, "lstm": LstmCell}


def gru_step(cell: GruCell, x_t, h_prev):
    """Single GRU update; returns ``(h_t, cache)`` for 1-D or batched inputs."""
    H = cell.hidden_dim
    x_t = _vec(x_t, cell.input_dim, "gru_step x_t")
    h_prev = _vec(h_prev, H, "gru_step h_prev")
    p = cell.params
    z = np.concatenate([h_prev, x_t], axis=-1)
    r = sigmoid(z @ p["W_r"].T + p["b_r"])
    u = sigmoid(z @ p["W_u"].T + p["b_u"])
    zr = np.concatenate([r * h_prev, x_t], axis=-1)
    cand = tanh(zr @ p["W_h"].T + p["b_h"])
    h = (1.0 - u) * h_prev + u * cand
    return h, {"r": r, "u": u, "candidate": cand, "h_prev": h_prev, "x": x_t}


def lstm_step(cell: LstmCell, x_t, h_prev, c_prev):
    """Single LSTM update; returns ``(h_t, c_t, cache)``."""
    H = cell.hidden_dim
    x_t = _vec(x_t, cell.input_dim, "lstm_step x_t")
    h_prev = _vec(h_prev, H, "lstm_step h_prev")
    c_prev = _vec(c_prev, H, "lstm_step c_prev")
    p = cell.params
    z = np.concatenate([h_prev, x_t], axis=-1)
    i = sigmoid(z @ p["W_i"].T + p["b_i"])
    f = sigmoid(z @ p["W_f"].T + p["b_f"])
    o = sigmoid(z @ p["W_o"].T + p["b_o"])
    g = tanh(z @ p["W_g"].T + p["b_g"])
    c = f * c_prev + i * g
    h = o * tanh(c)
    return h, c, {"i": i, "f": f, "o": o, "g": g, "c": c}


def dropout(x, rate, rng: SeededRng | None, training: bool):
    """Inverted dropout; returns ``(y, mask)`` with a 0/1 keep mask."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    x = np.asarray(x, dtype=np.float64)
    if not training or rate == 0.0:
        return x.copy(), np.ones_like(x)
    mask = (rng.random(x.shape) >= rate).astype(np.float64)
    return x * mask / (1.0 - rate), mask


@dataclass
class NetworkSpec:
    cell: str = "gru"
    layers: int = 1
    bidirectional: bool = False
    units: int = 50
    dropout_rate: float = 0.2
    input_dim: int = 1

    def __post_init__(self):
        if self.cell not in CELLS:
            raise ConfigError(f"unknown cell kind {self.cell!r}")
        if self.layers not in (1, 2):
            raise ConfigError("layers must be 1 or 2")
        if self.units < 1 or self.input_dim < 1:
            raise ConfigError("units and input_dim must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")

    @property
    def directions(self):
        return 2 if self.bidirectional else 1

    @property
    def label(self):
        name = self.cell.upper()
        if self.bidirectional:
            name = "Bi-" + name
        return f"{name} ({self.layers}_Layer)"


@dataclass
class ForwardCache:
    network_id: int
    version: int
    X: np.ndarray
    layer_inputs: list = field(default_factory=list)
    layer_caches: list = field(default_factory=list)
    final: np.ndarray | None = None
    mask: np.ndarray | None = None
    dropped: np.ndarray | None = None

    def __len__(self):
        return self.X.shape[1]


class Network:
    """Recurrent stack + dropout + dense head, per :class:`NetworkSpec`."""

    def __init__(self, spec: NetworkSpec, cells, head_W, head_b):
        self.spec = spec
        self.cells = cells  # cells[layer][direction]
        self.head_W = head_W
        self.head_b = head_b
        self.version = 0

    @classmethod
    def init(cls, spec: NetworkSpec, rng: SeededRng):
        cell_cls = CELLS[spec.cell]
        cells = []
        in_dim = spec.input_dim
        for _ in range(spec.layers):
            cells.append([cell_cls.init(in_dim, spec.units, rng)
                          for _ in range(spec.directions)])
            in_dim = spec.units * spec.directions
        head_W = glorot_init(1, spec.units * spec.directions, rng)
        return cls(spec, cells, head_W, np.zeros(1))

    def params(self):
        """Name -> array view of every trainable parameter (shared, not copied)."""
        out = {}
        for li, layer in enumerate(self.cells):
            for di, cell in enumerate(layer):
                for n, a in cell.params.items():
                    out[f"l{li}.d{di}.{n}"] = a
        out["head.W"] = self.head_W
        out["head.b"] = self.head_b
        return out

    def get_weights(self):
        return {k: a.copy() for k, a in self.params().items()}

    def set_weights(self, weights):
        for k, a in self.params().items():
            a[...] = weights[k]
        self.touch()

    def touch(self):
        """Mark parameters as modified; outstanding caches become stale."""
        self.version += 1

    def _check_input(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[2] != self.spec.input_dim or X.shape[1] < 1:
            raise ShapeError(f"expected windows (batch, lookback, {self.spec.input_dim}), "
                             f"got {X.shape}")
        return np.ascontiguousarray(X)

    def forward(self, X, training=False, rng: SeededRng | None = None):
        """Batched forward pass over windows ``X`` (B, T, F).

        Returns ``(predictions (B,), ForwardCache)``.
        """
        X = self._check_input(X)
        cache = ForwardCache(id(self), self.version, X)
        seq = X
        last = len(self.cells) - 1
        for li, layer in enumerate(self.cells):
            cache.layer_inputs.append(seq)
            outs, lcaches = [], []
            for di, cell in enumerate(layer):
                inp = seq if di == 0 else np.ascontiguousarray(seq[:, ::-1])
                Hs, c = cell.forward_sequence(inp)
                lcaches.append(c)
                if li == last:
                    outs.append(Hs[:, -1])
                else:
                    outs.append(Hs if di == 0 else Hs[:, ::-1])
            cache.layer_caches.append(lcaches)
            seq = np.concatenate(outs, axis=-1) if len(outs) > 1 else outs[0]
            seq = np.ascontiguousarray(seq)
        cache.final = seq
        rate = self.spec.dropout_rate
        dropped, cache.mask = dropout(seq, rate, rng, training and rate > 0)
        cache.dropped = dropped
        pred = dropped @ self.head_W[0] + self.head_b[0]
        return pred, cache

    def predict(self, X):
        return self.forward(X, training=False)[0]

    def predict_window(self, window):
        """Prediction for a single (lookback, features) window."""
        return float(self.predict(np.asarray(window)[None])[0])

    def backward(self, cache: ForwardCache, d_pred):
        """Gradient of the loss w.r.t. every parameter given dL/dprediction."""
        if cache.network_id != id(self) or cache.version != self.version:
            raise CacheError("forward cache is stale or belongs to another network")
        d_pred = np.asarray(d_pred, dtype=np.float64).reshape(-1)
        if d_pred.shape[0] != cache.X.shape[0]:
            raise ShapeError("d_prediction length differs from batch size")
        grads = {"head.W": (d_pred @ cache.dropped)[None, :],
                 "head.b": np.array([d_pred.sum()])}
        rate = self.spec.dropout_rate
        scale = 1.0 / (1.0 - rate) if rate else 1.0
        d_final = np.outer(d_pred, self.head_W[0]) * cache.mask * scale

        H = self.spec.units
        B, T = cache.X.shape[:2]
        last = len(self.cells) - 1
        d_seq = None
        for li in range(last, -1, -1):
            layer = self.cells[li]
            inp = cache.layer_inputs[li]
            d_inp = np.zeros_like(inp)
            for di, cell in enumerate(layer):
                dHs = np.zeros((B, T, H))
                if li == last:
                    dHs[:, -1] = d_final[:, di * H:(di + 1) * H]
                else:
                    part = d_seq[:, :, di * H:(di + 1) * H]
                    dHs[:] = part if di == 0 else part[:, ::-1]
                x_dir = inp if di == 0 else np.ascontiguousarray(inp[:, ::-1])
                g, dX = cell.backward_sequence(x_dir, cache.layer_caches[li][di], dHs)
                for n, a in g.items():
                    grads[f"l{li}.d{di}.{n}"] = a
                d_inp += dX if di == 0 else dX[:, ::-1]
            d_seq = d_inp
        return grads

    # -- serialisation -------------------------------------------------

    def to_dict(self):
        return {
            "version": CHECKPOINT_VERSION,
            "spec": asdict(self.spec),
            "params": {k: {"shape": list(a.shape), "data": a.ravel().tolist()}
                       for k, a in self.params().items()},
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != CHECKPOINT_VERSION:
            raise CheckpointVersionError(
                f"checkpoint version {d.get('version')!r} != {CHECKPOINT_VERSION}")
        spec = NetworkSpec(**d["spec"])
        net = cls.init(spec, SeededRng(0))
        stored = d["params"]
        if set(stored) != set(net.params()):
            raise CheckpointVersionError("checkpoint parameters do not match its spec")
        for k, a in net.params().items():
            arr = np.asarray(stored[k]["data"], dtype=np.float64).reshape(stored[k]["shape"])
            if arr.shape != a.shape:
                raise CheckpointVersionError(f"{k}: shape {arr.shape} != {a.shape}")
            a[...] = arr
        return net

    def dumps(self):
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def gru_forward(net: Network, window, training=False, rng=None):
    """Prediction and cache for one (lookback, features) window."""
    pred, cache = net.forward(np.asarray(window)[None], training, rng)
    return float(pred[0]), cache


def gru_backward(net: Network, cache: ForwardCache, d_prediction):
    return net.backward(cache, [d_prediction])


lstm_forward = gru_forward
lstm_backward = gru_backward


def bidirectional_forward(fwd, bwd, window):
    """Run ``fwd`` over t = 1..T and ``bwd`` over t = T..1 on one window.

    Returns ``(concat(final fwd state, final bwd state), caches)``.
    """
    if fwd.input_dim != bwd.input_dim:
        raise ShapeError("bidirectional cells must share input_dim")
    X = np.asarray(window, dtype=np.float64)[None]
    Hf, cf = fwd.forward_sequence(X)
    Hb, cb = bwd.forward_sequence(np.ascontiguousarray(X[:, ::-1]))
    return np.concatenate([Hf[0, -1], Hb[0, -1]]), (cf, cb)
