"""End-to-end operations behind the command-line interface."""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import baselines, evaluation
from .config import DataConfig, RunConfig
from .errors import (CheckpointVersionError, ConfigError, DataError, EmptyInputError, NumericalError,
                     RowError)
from .ingest import MissingLikesWarning, build_feature_table, filter_tweets
from .models import Network
from .sentiment import (SentimentLabel, classify, load_lexicon, reference_lexicon,
                        score_additive, score_tweet)
from .training import (ScalerParams, chrono_split, make_windows, prepare, random_search,
                       table_matrix, train)

log = logging.getLogger(__name__)

CHECKPOINT_KIND = "sentistock-checkpoint"
CHECKPOINT_VERSION = 1
ADDITIVE_THRESHOLD = 1.0
GAN_NOTE = "GAN-based models are not part of this comparison grid."
ACCURACY_NOTE = "accuracy_pct = 100 * (1 - MAPE) on adjusted-close prices in USD"
RETRAIN_NOTE = "tuned models are not retrained on train+validation after the search"


# -- scoring ---------------------------------------------------------------

def make_scorer(kind="vader", lexicon_path=None):
    """Return ``text -> (score, SentimentLabel)`` for the chosen scorer."""
    if kind == "vader":
        lex = reference_lexicon() if lexicon_path is None else load_lexicon(lexicon_path)

        def score(text):
            c = score_tweet(text, lex).compound
            return c, classify(c)
    elif kind == "additive":
        lex = reference_lexicon() if lexicon_path is None else load_lexicon(lexicon_path)

        def score(text):
            s = score_additive(text, lex)
            return s, classify(s, ADDITIVE_THRESHOLD, -ADDITIVE_THRESHOLD)
    else:
        raise ConfigError(f"unknown scorer {kind!r}")
    return score


def score_rows(tweets, scorer):
    rows = []
    for t in tweets:
        s, label = scorer(t.text)
        rows.append((t.day.isoformat(), t.ticker, s, label.value))
    return rows


def write_scores(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "ticker", "compound", "label"])
        for date, ticker, s, label in rows:
            w.writerow([date, ticker, repr(float(s)), label])


def read_labeled(path):
    """Rows of ``text,label``; an unknown label names its line."""
    texts, labels = [], []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"text", "label"} <= set(reader.fieldnames):
            raise DataError(f"{path}: need columns 'text' and 'label'")
        for rec in reader:
            try:
                labels.append(SentimentLabel.parse(rec["label"]))
            except ValueError:
                raise RowError(reader.line_num, f"unknown label {rec['label']!r}") from None
            texts.append(rec["text"])
    return texts, labels


def evaluate_lexicon(texts, labels, scorer):
    predicted = [scorer(t)[1] for t in texts]
    return evaluation.confusion_and_classification(labels, predicted)


# -- correlation -----------------------------------------------------------

@dataclass
class CorrelationRow:
    ticker: str
    tweet_volume: int
    days: int
    pearson_r: float | None
    note: str = ""


def ticker_table(bars, tweets, ticker, data: DataConfig, scorer):
    return build_feature_table(bars, tweets, ticker, lambda text: scorer(text)[0],
                               data.min_likes)


def correlate(bars, tweets, tickers, data: DataConfig, scorer):
    """Pearson r between daily sentiment and adjusted close, per ticker.

    Bars without any tweet coverage are left out of the correlation.
    """
    out = []
    for ticker in tickers:
        tk = ticker.upper()
        tw = [t for t in tweets if t.ticker == tk]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MissingLikesWarning)
            volume = len(filter_tweets(tw, data.min_likes))
        try:
            table = ticker_table(bars, tweets, tk, data, scorer)
        except EmptyInputError as exc:
            log.warning("%s: %s", tk, exc)
            out.append(CorrelationRow(tk, volume, 0, None, str(exc)))
            continue
        covered = [r for r in table.rows if not r.imputed]
        try:
            r = evaluation.pearson([x.sentiment for x in covered], [x.adj_close for x in covered])
            note = ""
        except (NumericalError, DataError) as exc:
            r, note = None, str(exc)
            log.warning("%s: %s", tk, exc)
        out.append(CorrelationRow(tk, volume, len(covered), r, note))
    return out


# -- model grid --------------------------------------------------------------

@dataclass(frozen=True)
class GridEntry:
    key: str
    kind: str  # "arima", "net", "tuned", "persistence"
    cell: str = ""
    layers: int = 1
    bidirectional: bool = False

    def name(self, sentiment):
        if self.kind == "persistence":
            return "Persistence"
        if self.kind == "arima":
            base = "ARIMA"
        elif self.kind == "tuned":
            if sentiment and self.cell == "gru":
                return "GRU_vader"
            base = f"{self.cell.upper()} (Tuned)"
        else:
            base = ("Bi-" if self.bidirectional else "") + \
                f"{self.cell.upper()} ({self.layers}_Layer)"
        return base + (" + Vader" if sentiment else "")


GRID = (
    GridEntry("arima", "arima"),
    GridEntry("lstm1", "net", "lstm", 1),
    GridEntry("lstm2", "net", "lstm", 2),
    GridEntry("bilstm", "net", "lstm", 1, True),
    GridEntry("lstm_tuned", "tuned", "lstm"),
    GridEntry("gru1", "net", "gru", 1),
    GridEntry("gru2", "net", "gru", 2),
    GridEntry("bigru", "net", "gru", 1, True),
    GridEntry("gru_tuned", "tuned", "gru"),
    GridEntry("persistence", "persistence"),
)
GRID_KEYS = tuple(e.key for e in GRID)


def derived_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def select_models(spec):
    if not spec:
        return list(GRID)
    keys = [k.strip().lower() for k in spec.split(",") if k.strip()]
    bad = [k for k in keys if k not in GRID_KEYS]
    if bad:
        raise ConfigError(f"unknown model key(s) {bad}; choose from {list(GRID_KEYS)}")
    return [e for e in GRID if e.key in keys]


@dataclass
class ModelRun:
    name: str
    key: str
    sentiment: bool
    metrics: evaluation.MetricsReport | None
    predictions: np.ndarray | None = None
    network: Network | None = None
    history: object = None
    error: str = ""
    extra: dict | None = None

    def row(self):
        d = {"model": self.name, "key": self.key, "sentiment": self.sentiment,
             "status": "ok" if self.metrics is not None else "failed"}
        if self.metrics is not None:
            m = self.metrics
            d.update(adjusted_r2=m.adjusted_r2, mae=m.mae, mse=m.mse,
                     accuracy_pct=m.accuracy_pct, n=m.n, k=m.k)
        else:
            d["error"] = self.error
        if self.extra:
            d.update(self.extra)
        return d


def _run_entry(entry, idx, sentiment, table, cfg: RunConfig):
    d = cfg.data
    name = entry.name(sentiment)
    k = 2 if sentiment else 1
    prepared = prepare(table, d.lookback, d.train_frac, d.val_frac, with_sentiment=sentiment)
    actual = prepared.test_actual
    meta = {"ticker": table.ticker, "model": name, "sentiment": sentiment,
            "seed": cfg.training.seed, "config": cfg.digest()}
    if entry.kind == "persistence":
        preds = prepared.test_previous
        return ModelRun(name, entry.key, False,
                        evaluation.regression_metrics(actual, preds, 1, meta), preds)
    if entry.kind == "arima":
        prices = table.adj_close
        n_hist = len(prices) - len(actual)
        exog = baselines.lagged(table.sentiment, 1) if sentiment else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", baselines.NonStationaryWarning)
            preds = baselines.forecast_walk(cfg.arima.arima_order, prices[:n_hist], actual,
                                            cfg.arima.refit_every, exog)
        return ModelRun(name, entry.key, sentiment,
                        evaluation.regression_metrics(actual, preds, k, meta), preds,
                        extra={"order": str(cfg.arima.arima_order)})
    tcfg = replace(cfg.training, seed=derived_seed(cfg.training.seed, 2 * idx + int(sentiment)))
    input_dim = 2 if sentiment else 1
    extra = None
    if entry.kind == "tuned":
        template = replace(cfg.model.spec(input_dim), cell=entry.cell, layers=1,
                           bidirectional=False)
        result = random_search(cfg.search.space(), cfg.search.trials, template,
                               prepared.train, prepared.val, tcfg, cfg.search.n_jobs)
        net, hist = result.network, result.history
        extra = {"hparams": asdict(result.best), "best_trial": result.best_index}
    else:
        spec = replace(cfg.model.spec(input_dim), cell=entry.cell, layers=entry.layers,
                       bidirectional=entry.bidirectional)
        net, hist = train(spec, prepared.train, prepared.val, tcfg)
    preds = prepared.scaler.inverse_target(net.predict(prepared.test.X))
    return ModelRun(name, entry.key, sentiment,
                    evaluation.regression_metrics(actual, preds, k, meta), preds,
                    net, hist, extra=extra)


def compare(table, cfg: RunConfig, models=None, sentiments=(False, True), exog=None):
    """Train and score every selected grid model on one ticker.

    The ARIMA row with sentiment exists only when ``exog`` (or the config's
    arima.exog) asks for the lagged-sentiment regressor.  Failures are
    recorded on their row; the other rows still run.
    """
    entries = list(GRID) if models is None else list(models)
    exog = cfg.arima.exog if exog is None else exog
    runs = []
    for entry in entries:
        idx = GRID_KEYS.index(entry.key)
        flags = (False,) if entry.kind == "persistence" else sentiments
        for s in flags:
            if entry.kind == "arima" and s and not exog:
                continue
            try:
                runs.append(_run_entry(entry, idx, s, table, cfg))
            except NumericalError as exc:
                log.error("%s: %s", entry.name(s), exc)
                runs.append(ModelRun(entry.name(s), entry.key, s, None, error=str(exc)))
    runs.sort(key=lambda r: r.name)
    return runs


def compare_report(ticker, runs, cfg: RunConfig, persistence_mae=None):
    return {
        "version": evaluation.REPORT_VERSION,
        "ticker": ticker,
        "seed": cfg.training.seed,
        "config_digest": cfg.digest(),
        "persistence_mae": persistence_mae,
        "rows": [r.row() for r in runs],
        "notes": [GAN_NOTE, ACCURACY_NOTE, RETRAIN_NOTE],
    }


def format_compare(report):
    head = f"{'model':<24}{'adj_R2':>10}{'MAE':>10}{'MSE':>12}{'acc%':>9}{'MAE/pers':>10}"
    lines = [f"ticker {report['ticker']}  seed {report['seed']}", head, "-" * len(head)]
    pm = report.get("persistence_mae")
    for row in report["rows"]:
        if row["status"] != "ok":
            lines.append(f"{row['model']:<24}  failed: {row['error']}")
            continue
        ratio = f"{row['mae'] / pm:10.3f}" if pm else f"{'n/a':>10}"
        lines.append(f"{row['model']:<24}{row['adjusted_r2']:10.4f}{row['mae']:10.4f}"
                     f"{row['mse']:12.4f}{row['accuracy_pct']:9.2f}{ratio}")
    lines += [f"note: {n}" for n in report["notes"]]
    return "\n".join(lines)


# -- checkpoints ------------------------------------------------------------

def checkpoint_dict(net: Network, scaler: ScalerParams, ticker, data: DataConfig,
                    with_sentiment, hparams=None):
    return {"kind": CHECKPOINT_KIND, "version": CHECKPOINT_VERSION, "ticker": ticker,
            "with_sentiment": bool(with_sentiment), "data": asdict(data),
            "scaler": scaler.to_dict(), "network": net.to_dict(), "hparams": hparams}


def save_checkpoint(path, *args, **kwargs):
    evaluation.write_json(checkpoint_dict(*args, **kwargs), path)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointVersionError(f"{path}: not a checkpoint ({exc})") from None
    if d.get("kind") != CHECKPOINT_KIND or d.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: expected {CHECKPOINT_KIND} v{CHECKPOINT_VERSION}, "
            f"got {d.get('kind')!r} v{d.get('version')!r}")
    net = Network.from_dict(d["network"])
    want = 2 if d["with_sentiment"] else 1
    if net.spec.input_dim != want:
        raise CheckpointVersionError(
            f"{path}: network expects {net.spec.input_dim} features but the checkpoint "
            f"declares with_sentiment={d['with_sentiment']}")
    return d, net, ScalerParams.from_dict(d["scaler"]), DataConfig(**d["data"])


def diagnose(net, scaler, table, data: DataConfig, with_sentiment):
    """Test-split dates, actual prices, predictions and residuals (USD)."""
    train_t, val_t, test_t = chrono_split(table, data.train_frac, data.val_frac, data.lookback)
    start = len(train_t) + len(val_t)
    full = scaler.transform(table_matrix(table))
    windows = make_windows(full[start - data.lookback:], data.lookback, with_sentiment)
    preds = scaler.inverse_target(net.predict(windows.X))
    actual = table.adj_close[start:]
    return test_t.dates, actual, preds, actual - preds


def risk_return_rows(bars_by_ticker):
    rows = []
    for ticker in sorted(bars_by_ticker):
        try:
            ret, risk = evaluation.risk_return(bars_by_ticker[ticker])
        except DataError as exc:
            log.warning("%s: %s", ticker, exc)
            continue
        rows.append((ticker, risk, ret))
    return rows


def finite_report(report):
    """True when every ok row carries finite metrics."""
    for row in report["rows"]:
        if row["status"] == "ok" and not all(
                math.isfinite(row[k]) for k in ("adjusted_r2", "mae", "mse", "accuracy_pct")):
            return False
    return True
