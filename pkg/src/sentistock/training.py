"""Chronological splits, min-max scaling, windowing, training and random search."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DivergenceError, InsufficientDataError, SearchFailureError
from .ingest import FeatureTable
from .models import Network, NetworkSpec
from .numcore import AdamState, SeededRng, adam_step

log = logging.getLogger(__name__)

FEATURES = ("adj_close", "sentiment")


class DegenerateFeatureWarning(UserWarning):
    pass


def chrono_split(table: FeatureTable, train_frac=0.7, val_frac=0.15, lookback=30):
    """Contiguous train / validation / test segments, in time order."""
    if train_frac <= 0 or val_frac <= 0 or train_frac + val_frac >= 1:
        raise ConfigError("need train_frac > 0, val_frac > 0 and train_frac + val_frac < 1")
    n = len(table)
    n_train = int(math.floor(n * train_frac + 1e-9))
    n_val = int(math.floor(n * val_frac + 1e-9))
    parts = (table.slice(0, n_train), table.slice(n_train, n_train + n_val),
             table.slice(n_train + n_val, n))
    for name, part in zip(("train", "validation", "test"), parts):
        if len(part) < lookback + 1:
            raise InsufficientDataError(
                f"{table.ticker or 'table'}: {name} segment has {len(part)} rows, "
                f"needs at least lookback + 1 = {lookback + 1}")
    return parts


def table_matrix(table: FeatureTable):
    """(n, 2) array of [adj_close, sentiment]."""
    return np.column_stack([table.adj_close, table.sentiment]) if len(table) \
        else np.empty((0, 2))


@dataclass
class ScalerParams:
    """Per-feature min/max taken from the training split only."""

    mins: np.ndarray
    maxs: np.ndarray
    feature_names: tuple = FEATURES

    @property
    def degenerate(self):
        return self.maxs <= self.mins

    def transform(self, values):
        values = np.asarray(values, dtype=np.float64)
        span = np.where(self.degenerate, 1.0, self.maxs - self.mins)
        out = (values - self.mins) / span
        return np.where(self.degenerate, 0.0, out)

    def inverse_transform(self, scaled):
        scaled = np.asarray(scaled, dtype=np.float64)
        return scaled * (self.maxs - self.mins) + self.mins

    def inverse_target(self, scaled, column=0):
        return np.asarray(scaled) * (self.maxs[column] - self.mins[column]) + self.mins[column]

    def to_dict(self):
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist(),
                "feature_names": list(self.feature_names)}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mins"], dtype=np.float64),
                   np.asarray(d["maxs"], dtype=np.float64), tuple(d["feature_names"]))


def fit_scaler(train) -> ScalerParams:
    """Fit min-max parameters; accepts a FeatureTable or an (n, F) array.

    A constant feature maps to 0.0 and raises a DegenerateFeatureWarning.
    """
    values = table_matrix(train) if isinstance(train, FeatureTable) else np.asarray(train, float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] == 0:
        raise InsufficientDataError("cannot fit a scaler on an empty split")
    names = FEATURES if values.shape[1] == 2 else tuple(f"x{i}" for i in range(values.shape[1]))
    params = ScalerParams(values.min(axis=0), values.max(axis=0), names)
    for name, flag in zip(names, params.degenerate):
        if flag:
            warnings.warn(f"feature {name!r} is constant on the training split; scaled to 0.0",
                          DegenerateFeatureWarning, stacklevel=2)
    return params


@dataclass
class SupervisedWindows:
    X: np.ndarray
    y: np.ndarray
    lookback: int
    feature_names: tuple

    def __len__(self):
        return len(self.y)


def make_windows(scaled, lookback: int, with_sentiment: bool) -> SupervisedWindows:
    """Window ``t`` holds rows ``[t - lookback, t)``; its target is row ``t``'s price."""
    scaled = np.asarray(scaled, dtype=np.float64)
    n = scaled.shape[0]
    if lookback < 1:
        raise ConfigError("lookback must be positive")
    if n <= lookback:
        raise InsufficientDataError(f"{n} rows cannot form a window of lookback {lookback}")
    cols = [0, 1] if with_sentiment else [0]
    feats = scaled[:, cols]
    idx = np.arange(lookback)[None, :] + np.arange(n - lookback)[:, None]
    X = np.ascontiguousarray(feats[idx])
    y = scaled[lookback:, 0].copy()
    names = FEATURES[:2] if with_sentiment else FEATURES[:1]
    return SupervisedWindows(X, y, lookback, names)


@dataclass
class PreparedData:
    train: SupervisedWindows
    val: SupervisedWindows
    test: SupervisedWindows
    scaler: ScalerParams
    test_dates: list
    test_actual: np.ndarray
    test_previous: np.ndarray


def prepare(table: FeatureTable, lookback=30, train_frac=0.7, val_frac=0.15,
            with_sentiment=True) -> PreparedData:
    """Split, scale on train, and window each segment.

    Validation and test windows draw their first ``lookback`` inputs from the
    tail of the preceding segment, so every row of a segment is a target.
    """
    train_t, val_t, test_t = chrono_split(table, train_frac, val_frac, lookback)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateFeatureWarning)
        scaler = fit_scaler(train_t)
    full = scaler.transform(table_matrix(table))
    n_tr, n_va = len(train_t), len(val_t)
    tr = make_windows(full[:n_tr], lookback, with_sentiment)
    va = make_windows(full[n_tr - lookback:n_tr + n_va], lookback, with_sentiment)
    te = make_windows(full[n_tr + n_va - lookback:], lookback, with_sentiment)
    prices = table.adj_close
    return PreparedData(tr, va, te, scaler, test_t.dates,
                        prices[n_tr + n_va:], prices[n_tr + n_va - 1:-1])


@dataclass
class TrainConfig:
    max_epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    patience: int = 10
    lr_factor: float = 0.5
    lr_patience: int = 5
    min_lr: float = 1e-5
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.patience < 1 or self.lr_patience < 1:
            raise ConfigError("patience values must be >= 1")
        if not 0.0 < self.lr_factor < 1.0:
            raise ConfigError("lr_factor must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ConfigError("batch_size must be >= 1 and max_epochs >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    events: tuple = ()


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    best_epoch: int | None = None

    def __len__(self):
        return len(self.epochs)

    @property
    def best_val_loss(self):
        return self.epochs[self.best_epoch - 1].val_loss if self.best_epoch else math.inf

    @property
    def stopped_early(self):
        return bool(self.epochs) and "early_stop" in self.epochs[-1].events

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_loss", "lr", "event"])
            for r in self.epochs:
                w.writerow([r.epoch, repr(r.train_loss), repr(r.val_loss), repr(r.lr),
                            ";".join(r.events)])


def mse(pred, y):
    d = np.asarray(pred) - np.asarray(y)
    return float(np.mean(d * d))


def train(spec: NetworkSpec, train_w: SupervisedWindows, val_w: SupervisedWindows,
          config: TrainConfig, rng: SeededRng | None = None):
    """Mini-batch Adam on MSE with ReduceLROnPlateau and EarlyStopping.

    The returned network carries the best-validation-epoch weights.
    """
    if len(train_w) == 0 or len(val_w) == 0:
        raise InsufficientDataError("train and validation windows must be non-empty")
    if train_w.X.shape[2] != spec.input_dim:
        raise ConfigError(f"spec.input_dim={spec.input_dim} but windows carry "
                          f"{train_w.X.shape[2]} features")
    if config.learning_rate < config.min_lr:
        raise ConfigError("learning_rate is below min_lr")
    rng = rng if rng is not None else SeededRng(config.seed)
    init_rng, shuffle_rng, drop_rng = rng.split(3)
    net = Network.init(spec, init_rng)
    history = TrainHistory()
    if config.max_epochs == 0:
        return net, history

    params = net.params()
    state = AdamState()
    lr = config.learning_rate
    best = math.inf
    best_weights = net.get_weights()
    wait = plateau = 0
    n = len(train_w)
    bs = config.batch_size
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        for s in range(0, n, bs):
            idx = order[s:s + bs]
            X, y = train_w.X[idx], train_w.y[idx]
            pred, cache = net.forward(X, training=True, rng=drop_rng)
            err = pred - y
            with np.errstate(over="ignore", invalid="ignore"):
                loss = float(np.mean(err * err))
            if not math.isfinite(loss):
                raise DivergenceError(epoch)
            grads = net.backward(cache, 2.0 * err / len(y))
            adam_step(params, grads, state, lr)
            net.touch()
            total += loss * len(y)
        train_loss = total / n
        val_loss = mse(net.predict(val_w.X), val_w.y)
        if not math.isfinite(val_loss):
            raise DivergenceError(epoch, "validation loss became non-finite")
        events = []
        used_lr = lr
        if val_loss < best:
            best, best_weights, history.best_epoch = val_loss, net.get_weights(), epoch
            wait = plateau = 0
            events.append("best")
        else:
            wait += 1
            plateau += 1
            if plateau >= config.lr_patience and lr > config.min_lr:
                lr = max(lr * config.lr_factor, config.min_lr)
                plateau = 0
                events.append("lr_reduced")
            if wait >= config.patience:
                events.append("early_stop")
        history.epochs.append(EpochRecord(epoch, train_loss, val_loss, used_lr, tuple(events)))
        if "early_stop" in events:
            break
    net.set_weights(best_weights)
    return net, history


@dataclass(frozen=True)
class HyperParams:
    units: int
    dropout_rate: float
    learning_rate: float


@dataclass(frozen=True)
class SearchSpace:
    units: tuple = (32, 50, 64, 96, 128)
    dropout: tuple = (0.0, 0.5)
    learning_rate: tuple = (1e-4, 1e-2)

    def __post_init__(self):
        lo, hi = self.dropout
        if not (0.0 <= lo <= hi < 1.0):
            raise ConfigError("dropout bounds must satisfy 0 <= lo <= hi < 1")
        lo, hi = self.learning_rate
        if not 0.0 < lo <= hi:
            raise ConfigError("learning-rate bounds must satisfy 0 < lo <= hi")
        if not self.units or min(self.units) < 1:
            raise ConfigError("units must be a non-empty set of positive integers")

    def sample(self, rng: SeededRng) -> HyperParams:
        units = int(self.units[int(rng.integers(len(self.units)))])
        drop = float(rng.uniform(*self.dropout))
        lo, hi = self.learning_rate
        lr = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        return HyperParams(units, drop, lr)


@dataclass
class TrialResult:
    index: int
    hparams: HyperParams
    val_loss: float | None
    epochs: int
    diverged: bool = False
    network: Network | None = field(default=None, repr=False)
    history: TrainHistory | None = field(default=None, repr=False)


@dataclass
class SearchResult:
    best: HyperParams
    best_index: int
    trials: list

    @property
    def network(self):
        return self.trials[self.best_index].network

    @property
    def history(self):
        return self.trials[self.best_index].history


def _run_trial(args):
    index, hp, template, train_w, val_w, config, rng = args
    spec = replace(template, units=hp.units, dropout_rate=hp.dropout_rate)
    cfg = replace(config, learning_rate=hp.learning_rate,
                  min_lr=min(config.min_lr, hp.learning_rate))
    try:
        net, hist = train(spec, train_w, val_w, cfg, rng)
    except DivergenceError as exc:
        log.info("trial %d diverged: %s", index, exc)
        return TrialResult(index, hp, None, exc.epoch, diverged=True)
    return TrialResult(index, hp, hist.best_val_loss, len(hist), network=net, history=hist)


def run_trials(candidates, template: NetworkSpec, train_w, val_w, config: TrainConfig,
               rngs=None, n_jobs=1) -> SearchResult:
    """Train every candidate; the lowest best-epoch validation loss wins,
    ties going to the lower index."""
    candidates = list(candidates)
    if not candidates:
        raise ConfigError("need at least one trial")
    if rngs is None:
        rngs = SeededRng(config.seed).split(len(candidates))
    jobs = [(i, hp, template, train_w, val_w, config, rngs[i])
            for i, hp in enumerate(candidates)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(j) for j in jobs]
    ok = [r for r in results if not r.diverged]
    if not ok:
        raise SearchFailureError(f"all {len(results)} trials diverged")
    winner = min(ok, key=lambda r: (r.val_loss, r.index))
    return SearchResult(winner.hparams, winner.index, results)


def random_search(space: SearchSpace, trials: int, template: NetworkSpec, train_w, val_w,
                  config: TrainConfig, n_jobs=1) -> SearchResult:
    """Sample ``trials`` configurations i.i.d. and train each.

    Trial ``i`` owns stream ``i`` of ``SeededRng(config.seed).split(trials)``;
    it draws its hyperparameters first, then initialises and trains from the
    same stream.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rngs = SeededRng(config.seed).split(trials)
    candidates = [space.sample(r) for r in rngs]
    return run_trials(candidates, template, train_w, val_w, config, rngs, n_jobs)
