"""Dense numerical kernel: products, activations, initialisation, RNG and Adam.

Matrices are plain float64 ``numpy.ndarray`` objects; parameter sets are
``dict[str, ndarray]``.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError

_VALIDATE = False


def set_validation(enabled: bool) -> None:
    """Toggle NaN/Inf rejection on every public numcore operation."""
    global _VALIDATE
    _VALIDATE = bool(enabled)


@contextlib.contextmanager
def validation(enabled: bool = True):
    prev = _VALIDATE
    set_validation(enabled)
    try:
        yield
    finally:
        set_validation(prev)


def _check_finite(name, *arrays):
    if _VALIDATE:
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise NumericalError(f"{name}: non-finite input")


def matmul(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    _check_finite("matmul", a, b)
    return a @ b


def sigmoid(x):
    """Logistic function, evaluated without overflow for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    _check_finite("sigmoid", x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def sigmoid_grad(x):
    s = sigmoid(x)
    return s * (1.0 - s)


def tanh(x):
    x = np.asarray(x, dtype=np.float64)
    _check_finite("tanh", x)
    out = np.tanh(x)
    return out if out.ndim else float(out)


def tanh_grad(x):
    t = tanh(x)
    return 1.0 - t * t


class SeededRng:
    """Counter-based (Philox) generator that splits into independent streams.

    ``split(n)`` derives child streams through ``numpy.random.SeedSequence``
    spawning, so stream ``i`` of a given seed is the same regardless of how
    many siblings are drawn or in which order they are consumed.
    """

    def __init__(self, seed=0):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed))
        self.generator = np.random.Generator(np.random.Philox(self._seq))

    def split(self, n: int) -> list["SeededRng"]:
        return [SeededRng(s) for s in self._seq.spawn(n)]

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def random(self, size=None):
        return self.generator.random(size)

    def permutation(self, n):
        return self.generator.permutation(n)

    def choice(self, seq):
        return seq[int(self.generator.integers(len(seq)))]


def glorot_init(rows: int, cols: int, rng: SeededRng):
    if rows < 1 or cols < 1:
        raise ConfigError(f"glorot_init: bad shape ({rows}, {cols})")
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def copy(self):
        return AdamState(self.beta1, self.beta2, self.epsilon, self.t,
                         {k: a.copy() for k, a in self.m.items()},
                         {k: a.copy() for k, a in self.v.items()})


def adam_step(params: dict, grads: dict, state: AdamState, lr: float):
    """One in-place Adam update of ``params``; returns ``(params, state)``."""
    if lr < 0:
        raise ConfigError("learning rate must be non-negative")
    if params.keys() != grads.keys():
        raise ShapeError(f"adam_step: parameter/gradient keys differ: "
                         f"{sorted(params)} vs {sorted(grads)}")
    for name, p in params.items():
        if p.shape != grads[name].shape:
            raise ShapeError(f"adam_step: {name} has shape {p.shape}, "
                             f"gradient {grads[name].shape}")
        _check_finite("adam_step", grads[name])
    state.t += 1
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if lr:
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state
