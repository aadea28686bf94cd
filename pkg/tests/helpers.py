"""Shared oracles and fixtures-as-functions for the test modules."""

import math
import random

import numpy as np

from sentistock.models import Network, NetworkSpec
from sentistock.numcore import SeededRng
from sentistock.sentiment import reference_lexicon
from sentistock.training import make_windows


def random_instance(seed, cell, layers, bidirectional):
    """A small network with perturbed weights, a batch of windows and targets."""
    rng = np.random.default_rng(seed)
    spec = NetworkSpec(cell, layers, bidirectional, units=int(rng.integers(1, 5)),
                       dropout_rate=float(rng.choice([0.0, 0.3])),
                       input_dim=int(rng.integers(1, 3)))
    net = Network.init(spec, SeededRng(seed))
    for a in net.params().values():
        a += rng.normal(0.0, 0.3, a.shape)
    net.touch()
    T = int(rng.integers(1, 6))
    B = int(rng.integers(1, 4))
    X = rng.normal(0.0, 1.0, (B, T, spec.input_dim))
    y = rng.normal(0.0, 1.0, B)
    return net, X, y, seed


def gradient_check(net, X, y, mask_seed, h=1e-6, floor=1e-3):
    """Largest relative gap between analytic and central-difference gradients.

    Loss is 0.5 * sum((pred - y)^2).  The dropout mask is held fixed by
    re-seeding its stream before every forward pass.  The relative error
    uses ``max(|fd|, |analytic|, floor)`` as denominator so that entries
    whose true gradient is ~0 are judged on absolute error instead.
    """
    def run():
        return net.forward(X, training=True, rng=SeededRng(mask_seed))

    pred, cache = run()
    grads = net.backward(cache, pred - y)
    worst = 0.0
    for name, a in net.params().items():
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + h
            lp = 0.5 * np.sum((run()[0] - y) ** 2)
            a[idx] = orig - h
            lm = 0.5 * np.sum((run()[0] - y) ** 2)
            a[idx] = orig
            fd = (lp - lm) / (2 * h)
            an = grads[name][idx]
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), floor))
    return worst


GRADIENT_CASES = [("gru", 1, False), ("lstm", 1, False), ("gru", 1, True), ("lstm", 1, True),
                  ("gru", 2, False), ("lstm", 2, False), ("gru", 2, True), ("lstm", 2, True)]


def sine_windows(lookback=30, n=400, period=40, n_train=280, n_val=60):
    """Noiseless sine min-max scaled to [0, 1], as train and validation windows.

    Validation targets are the ``n_val`` rows after the training rows; their
    input windows reach back into the training tail.
    """
    s = np.sin(2 * np.pi * np.arange(n) / period)
    scaled = (s - s.min()) / (s.max() - s.min())
    data = np.column_stack([scaled, np.zeros_like(scaled)])
    train = make_windows(data[:n_train], lookback, with_sentiment=False)
    val = make_windows(data[n_train - lookback:n_train + n_val], lookback, with_sentiment=False)
    return train, val


LABELS = ("positive", "neutral", "negative")


def brute_weighted_prf(actual, predicted):
    """Support-weighted precision/recall/F1 from pairwise counting in plain Python."""
    n = len(actual)
    out = [0.0, 0.0, 0.0]
    for lab in LABELS:
        pairs = list(zip(actual, predicted))
        tp = sum(1 for a, p in pairs if a == lab and p == lab)
        fp = sum(1 for a, p in pairs if a != lab and p == lab)
        fn = sum(1 for a, p in pairs if a == lab and p != lab)
        support = tp + fn
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        for i, v in enumerate((prec, rec, f1)):
            out[i] += v * support / n
    acc = sum(1 for a, p in zip(actual, predicted) if a == p) / n
    return acc, *out


def brute_regression(actual, predicted, k):
    """MAE, MSE and adjusted R² with explicit loops and math.fsum."""
    n = len(actual)
    res = [a - p for a, p in zip(actual, predicted)]
    mae = math.fsum(abs(r) for r in res) / n
    mse = math.fsum(r * r for r in res) / n
    mean = math.fsum(actual) / n
    ss_tot = math.fsum((a - mean) ** 2 for a in actual)
    r2 = 1 - math.fsum(r * r for r in res) / ss_tot
    return mae, mse, 1 - (1 - r2) * (n - 1) / (n - k - 1)


EXTRA = ["not", "never", "very", "kinda", "so", "this", "least", "at", "no", "nor", "the",
         "stock", "TSLA", "is", "kind", "of", "without", "doubt", "GREAT", "BAD", "!", "!!",
         "?", "??", "???", "sort", "isn't", "extremely", "barely", "bomb", "yeah", "right"]


def fuzz_texts(n, seed, allow_but=False):
    """Random token soup mixing lexicon words with rule triggers."""
    rng = random.Random(seed)
    vocab = [w for w in reference_lexicon().valence if " " not in w]
    extra = EXTRA + (["but", "BUT"] if allow_but else [])
    out = []
    for _ in range(n):
        toks = [rng.choice(extra) if rng.random() < 0.5 else rng.choice(vocab)
                for _ in range(rng.randint(0, 12))]
        toks = [t.upper() if rng.random() < 0.1 else t for t in toks]
        out.append(" ".join(t + rng.choice(["", "", "!", ".", ",", "?"]) for t in toks))
    return out
