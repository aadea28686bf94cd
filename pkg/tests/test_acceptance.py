"""Acceptance checks, one test per criterion.

The terminal summary prints one PASS/FAIL line per criterion.  Criteria 7
and 8 need the public tweet and price CSVs.  They are read from
``$SENTISTOCK_DATA`` or ``<repo>/data`` and the tests fail when the files are
absent.
"""

import json
import math
import time

import numpy as np
import pytest

from conftest import dataset_dir
from helpers import (GRADIENT_CASES, LABELS, brute_regression, brute_weighted_prf, fuzz_texts,
                     gradient_check, random_instance, sine_windows)
from sentistock import pipeline
from sentistock.baselines import ArimaOrder, fit_css, forecast_walk, persistence_walk
from sentistock.cli import main
from sentistock.config import DataConfig
from sentistock.evaluation import confusion_and_classification, qq_points, regression_metrics
from sentistock.ingest import load_stock_csv, load_tweets_csv
from sentistock.models import NetworkSpec
from sentistock.numcore import AdamState, adam_step
from sentistock.sentiment import reference_lexicon, reference_lexicon_path, score_vader
from sentistock.training import TrainConfig, train

TABLE_TICKERS = ("TSLA", "AAPL", "BA", "META", "NIO", "PG", "AMD")


def require_dataset():
    path = dataset_dir()
    if path is None:
        pytest.fail("public dataset not found: put stock_yfinance_data.csv and "
                    "stock_tweets.csv in $SENTISTOCK_DATA or ./data")
    return path


@pytest.mark.criterion(1, "analytic gradients match central differences")
def test_gradient_correctness():
    start = time.perf_counter()
    worst = {}
    for cell, layers, bi in GRADIENT_CASES:
        for seed in range(20):
            net, X, y, mseed = random_instance(seed, cell, layers, bi)
            assert net.spec.units <= 4 and X.shape[1] <= 5
            err = gradient_check(net, X, y, mseed, h=1e-6)
            worst[(cell, layers, bi)] = max(err, worst.get((cell, layers, bi), 0.0))
    elapsed = time.perf_counter() - start
    print(f"worst relative error per case: {worst}; {elapsed:.1f}s")
    assert max(worst.values()) <= 1e-5
    assert elapsed < 60


@pytest.mark.criterion(2, "Adam step equals the closed-form update")
def test_optimizer_correctness():
    theta, g, lr = 0.5, 0.2, 0.01
    b1, b2, eps = 0.9, 0.999, 1e-8
    m, v = (1 - b1) * g, (1 - b2) * g * g
    expected = theta - lr * (m / (1 - b1)) / (math.sqrt(v / (1 - b2)) + eps)
    p = {"w": np.array([theta])}
    adam_step(p, {"w": np.array([g])}, AdamState(), lr)
    assert abs(p["w"][0] - expected) <= 1e-12
    q = {"w": np.array([theta])}
    adam_step(q, {"w": np.array([g])}, AdamState(), 0.0)
    assert q["w"][0] == theta


@pytest.mark.criterion(3, "sentiment engine bounds, lexicon size and reference agreement")
def test_sentiment_engine():
    vader = pytest.importorskip("vaderSentiment.vaderSentiment")
    for text in fuzz_texts(10_000, seed=2024, allow_but=True):
        s = score_vader(text)
        assert -1.0 <= s.compound <= 1.0
        assert abs(s.pos + s.neg + s.neu - 1.0) <= 1e-9
    assert score_vader("").compound == 0.0
    assert len(reference_lexicon()) == 7517
    ref = vader.SentimentIntensityAnalyzer(lexicon_file=str(reference_lexicon_path()))
    assert abs(ref.polarity_scores("good")["compound"] - 0.4404) <= 1e-4
    assert abs(score_vader("good").compound - 0.4404) <= 1e-4


@pytest.mark.criterion(4, "metrics match brute-force recomputation")
def test_metric_oracles():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n = int(rng.integers(1, 80))
        actual, predicted = list(rng.choice(LABELS, n)), list(rng.choice(LABELS, n))
        _, rep = confusion_and_classification(actual, predicted)
        _, p, r, f = brute_weighted_prf(actual, predicted)
        assert max(abs(rep.precision - p), abs(rep.recall - r), abs(rep.f1 - f)) <= 1e-12
    for _ in range(100):
        n, k = int(rng.integers(4, 80)), int(rng.integers(1, 3))
        y = rng.normal(0, 1, n)
        yhat = y + rng.normal(0, 0.3, n)
        rep = regression_metrics(y, yhat, k)
        mae, mse, adj = brute_regression(list(y), list(yhat), k)
        assert max(abs(rep.mae - mae), abs(rep.mse - mse), abs(rep.adjusted_r2 - adj)) <= 1e-12
    y = np.arange(10.0)
    assert regression_metrics(y, np.full(10, y.mean()), 1).adjusted_r2 == -0.125


@pytest.mark.criterion(5, "ARIMA recovers AR(1) and (0,1,0) equals persistence")
def test_arima_recovery():
    start = time.perf_counter()
    rng = np.random.default_rng(20240)
    e = rng.normal(size=2200)
    y = np.zeros(2200)
    for t in range(1, 2200):
        y[t] = 0.7 * y[t - 1] + e[t]
    model = fit_css(y[200:], ArimaOrder(1, 0, 0))
    print(f"phi_hat = {model.phi[0]:.4f}")
    assert abs(model.phi[0] - 0.7) <= 0.05
    walk = np.cumsum(rng.normal(size=300)) + 50
    preds = forecast_walk(ArimaOrder(0, 1, 0), walk[:240], walk[240:])
    np.testing.assert_array_equal(preds, persistence_walk(walk[:240], walk[240:]))
    assert time.perf_counter() - start < 60


@pytest.mark.criterion(6, "GRU learns a noiseless sine")
def test_learning_sanity():
    start = time.perf_counter()
    tr, va = sine_windows(lookback=30)
    spec = NetworkSpec("gru", 1, False, 50, 0.2, 1)
    cfg = TrainConfig(max_epochs=200, seed=0)
    _, h1 = train(spec, tr, va, cfg)
    _, h2 = train(spec, tr, va, cfg)
    ratio = h1.best_val_loss / h1.epochs[0].val_loss
    print(f"epochs {len(h1)}, best/epoch-1 validation MSE ratio {ratio:.2e}")
    assert ratio <= 0.10
    assert [r.val_loss for r in h1.epochs] == [r.val_loss for r in h2.epochs]
    assert time.perf_counter() - start < 300


@pytest.mark.dataset
@pytest.mark.criterion(7, "tweet volume and sentiment/price correlation on the public data")
def test_dataset_correlation():
    data = require_dataset()
    bars = load_stock_csv(data / "stock_yfinance_data.csv")
    tweets = load_tweets_csv(data / "stock_tweets.csv")
    rows = pipeline.correlate(bars, tweets, TABLE_TICKERS, DataConfig(),
                              pipeline.make_scorer("vader"))
    by = {r.ticker: r for r in rows}
    print({t: (r.tweet_volume, r.pearson_r) for t, r in by.items()})
    assert by["TSLA"].tweet_volume == 37422
    assert abs(by["TSLA"].pearson_r - 0.44) <= 0.15
    top = sorted(TABLE_TICKERS, key=lambda t: -(by[t].pearson_r or -2))[:2]
    assert set(top) == {"TSLA", "META"}


@pytest.mark.dataset
@pytest.mark.slow
@pytest.mark.criterion(8, "end-to-end comparison on TSLA")
def test_end_to_end_compare(tmp_path):
    data = require_dataset()
    args = ["compare", "--stocks", str(data / "stock_yfinance_data.csv"),
            "--tweets", str(data / "stock_tweets.csv"), "--ticker", "TSLA",
            "--exog", "sentiment", "--seed", "0"]
    assert main(["--out", str(tmp_path / "a"), *args]) == 0
    assert main(["--out", str(tmp_path / "b"), *args]) == 0
    first = (tmp_path / "a" / "compare_TSLA.json").read_bytes()
    assert first == (tmp_path / "b" / "compare_TSLA.json").read_bytes()
    report = json.loads(first)
    names = {r["model"] for r in report["rows"]}
    assert len(report["rows"]) == 19 and "GRU_vader" in names
    assert pipeline.finite_report(report)
    gru = next(r for r in report["rows"] if r["model"] == "GRU_vader")
    print(f"GRU_vader accuracy {gru['accuracy_pct']:.2f}%")
    assert gru["accuracy_pct"] >= 95.0


@pytest.mark.criterion(9, "Q-Q slope of normal residuals")
def test_qq_diagnostics():
    r = np.random.default_rng(9).standard_normal(10_000)
    slope = qq_points(r).slope()
    print(f"Q-Q slope {slope:.5f}")
    assert 0.97 <= slope <= 1.03
