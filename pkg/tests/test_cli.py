import csv
import datetime as dt
import json

import numpy as np
import pytest

from conftest import synthetic_market, trading_days
from sentistock import pipeline
from sentistock.cli import main
from sentistock.config import DataConfig
from sentistock.errors import ConfigError
from sentistock.ingest import OhlcvBar, TweetRecord, write_stock_csv, write_tweets_csv
from sentistock.models import Network, NetworkSpec
from sentistock.numcore import SeededRng
from sentistock.sentiment import score_tweet
from sentistock.training import DegenerateFeatureWarning, fit_scaler

UTC = dt.timezone.utc


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main(["--out", str(out), *map(str, argv)])
    return code, out


def manifest(out, command):
    return json.loads((out / f"{command}.manifest.json").read_text())


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- score -------------------------------------------------------------------

def test_score_sample_tweets_one_row_each(tmp_path, fixtures):
    code, out = run(tmp_path, "score", "--tweets", fixtures / "tweets_sample.csv")
    assert code == 0
    rows = read_csv(out / "scores.csv")
    assert len(rows) == 10
    assert rows[0]["date"] == "2022-09-29" and rows[0]["ticker"] == "TSLA"
    assert all(-1 <= float(r["compound"]) <= 1 for r in rows)
    assert {r["label"] for r in rows} <= {"positive", "neutral", "negative"}
    m = manifest(out, "score")
    assert m["status"] == "ok" and m["exit_code"] == 0
    assert list(m["inputs"].values())[0].startswith("sha256:")


def test_score_empty_file_gives_header_only(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code, out = run(tmp_path, "score", "--tweets", empty)
    assert code == 0
    assert (out / "scores.csv").read_text().strip() == "date,ticker,compound,label"


def test_additive_scorer_uses_raw_sums(tmp_path, fixtures):
    code, out = run(tmp_path, "score", "--tweets", fixtures / "tweets_sample.csv",
                    "--scorer", "additive", "--lexicon", fixtures / "afinn_small.txt")
    assert code == 0
    rows = read_csv(out / "scores.csv")
    values = [float(r["compound"]) for r in rows]
    assert all(v == int(v) for v in values)
    assert max(abs(v) for v in values) > 1  # not squashed into [-1, 1]


# -- eval-lexicon --------------------------------------------------------------

@pytest.mark.parametrize("fixture, scorer, lexicon, golden", [
    ("labeled_60.csv", "vader", None, "golden_labeled_60_vader.json"),
    ("labeled_2000.csv", "vader", None, "golden_labeled_2000_vader.json"),
    ("labeled_60.csv", "additive", "afinn_small.txt", "golden_labeled_60_additive.json"),
])
def test_eval_lexicon_matches_golden(tmp_path, fixtures, fixture, scorer, lexicon, golden):
    args = ["eval-lexicon", "--labeled", fixtures / fixture, "--scorer", scorer]
    if lexicon:
        args += ["--lexicon", fixtures / lexicon]
    code, out = run(tmp_path, *args)
    assert code == 0
    got = json.loads((out / "eval_lexicon.json").read_text())
    want = json.loads((fixtures / golden).read_text())
    for key in ("accuracy", "precision", "recall", "f1"):
        assert got[key] == pytest.approx(want[key], abs=0.005), key
    assert got["n"] == sum(sum(r) for r in got["confusion_matrix"]["counts"])


def test_eval_lexicon_unknown_label_is_a_data_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("text,label\ngood day,positive\nmeh,bullish\n")
    code, out = run(tmp_path, "eval-lexicon", "--labeled", bad)
    assert code == 3
    assert "line 3" in manifest(out, "eval-lexicon")["status"]


# -- correlate ---------------------------------------------------------------

def test_correlate_recovers_a_planted_linear_relation(tmp_path):
    texts = ["good", "great results", "terrible", "bad news", "love it", "awful",
             "ok", "nice", "horrible loss", "amazing"]
    days = trading_days(dt.date(2022, 3, 1), 40)
    bars, tweets = [], []
    for i, d in enumerate(days):
        text = texts[i % len(texts)]
        price = 100.0 + 25.0 * score_tweet(text).compound
        bars.append(OhlcvBar(d, price, price, price, price, price, 1000, "PLNT"))
        tweets.append(TweetRecord(dt.datetime(d.year, d.month, d.day, 15, tzinfo=UTC), text,
                                  "PLNT", "Planted Inc.", 50))
    tweets.append(TweetRecord(dt.datetime(2022, 3, 2, 15, tzinfo=UTC), "great", "PLNT",
                              "Planted Inc.", 3))  # below the likes cut-off
    write_stock_csv(bars, tmp_path / "s.csv")
    write_tweets_csv(tweets, tmp_path / "t.csv")
    code, out = run(tmp_path, "correlate", "--stocks", tmp_path / "s.csv",
                    "--tweets", tmp_path / "t.csv")
    assert code == 0
    row = read_csv(out / "correlation.csv")[0]
    assert row["ticker"] == "PLNT" and row["tweet_volume"] == "40" and row["days"] == "40"
    assert float(row["pearson_r"]) == pytest.approx(1.0, abs=1e-12)


def test_correlate_synthetic_market_is_positive(tmp_path, market_files):
    stocks, tweets = market_files
    code, out = run(tmp_path, "correlate", "--stocks", stocks, "--tweets", tweets,
                    "--tickers", "ccc,aaa,ZZZ")
    assert code == 0
    rows = json.loads((out / "correlation.json").read_text())["rows"]
    assert [r["ticker"] for r in rows] == ["AAA", "CCC", "ZZZ"]
    assert rows[0]["pearson_r"] > 0.3 and rows[1]["pearson_r"] > 0.3
    assert rows[2]["pearson_r"] is None and rows[2]["tweet_volume"] == 0


# -- train / tune / compare --------------------------------------------------

def test_train_writes_checkpoint_history_and_metrics(tmp_path, market_files, fast_config):
    stocks, tweets = market_files
    code, out = run(tmp_path, "train", "--config", fast_config, "--stocks", stocks,
                    "--tweets", tweets, "--ticker", "bbb", "--cell", "lstm")
    assert code == 0
    metrics = json.loads((out / "BBB_lstm1_vader_metrics.json").read_text())
    assert metrics["k"] == 2 and metrics["metadata"]["model"] == "LSTM (1_Layer)"
    assert len(read_csv(out / "BBB_lstm1_vader_history.csv")) == metrics["epochs"]
    ck, net, scaler, data = pipeline.load_checkpoint(out / "BBB_lstm1_vader.ckpt.json")
    assert data.lookback == 5 and net.spec.cell == "lstm" and ck["with_sentiment"]
    assert manifest(out, "train")["seed"] == 3


def test_tune_reports_every_trial(tmp_path, market_files, fast_config):
    stocks, tweets = market_files
    code, out = run(tmp_path, "tune", "--config", fast_config, "--stocks", stocks,
                    "--tweets", tweets, "--ticker", "AAA", "--trials", "3", "--no-sentiment")
    assert code == 0
    rep = json.loads((out / "AAA_gru_tuned_search.json").read_text())
    assert [t["index"] for t in rep["trials"]] == [0, 1, 2]
    assert rep["best"]["units"] in (4, 8)


def test_compare_persistence_only(tmp_path, market_files, fast_config):
    stocks, tweets = market_files
    code, out = run(tmp_path, "compare", "--config", fast_config, "--stocks", stocks,
                    "--tweets", tweets, "--ticker", "AAA", "--models", "persistence")
    assert code == 0
    rep = json.loads((out / "compare_AAA.json").read_text())
    assert [r["model"] for r in rep["rows"]] == ["Persistence"]
    assert rep["rows"][0]["mae"] == rep["persistence_mae"]


def test_compare_rows_and_byte_identical_reruns(tmp_path, market_files, fast_config):
    stocks, tweets = market_files
    args = ["compare", "--config", fast_config, "--stocks", stocks, "--tweets", tweets,
            "--ticker", "AAA", "--models", "arima,gru1,gru_tuned,persistence",
            "--exog", "sentiment"]
    code, out = run(tmp_path, *args)
    assert code == 0
    first = (out / "compare_AAA.json").read_bytes()
    rep = json.loads(first)
    names = [r["model"] for r in rep["rows"]]
    assert names == sorted(names)
    assert set(names) == {"ARIMA", "ARIMA + Vader", "GRU (1_Layer)", "GRU (1_Layer) + Vader",
                          "GRU (Tuned)", "GRU_vader", "Persistence"}
    assert pipeline.finite_report(rep)
    assert len(rep["notes"]) == 3
    code, _ = run(tmp_path, *args)
    assert code == 0 and (out / "compare_AAA.json").read_bytes() == first


def test_compare_without_exog_has_no_arima_sentiment_row(tmp_path, market_files, fast_config):
    stocks, tweets = market_files
    code, out = run(tmp_path, "compare", "--config", fast_config, "--stocks", stocks,
                    "--tweets", tweets, "--ticker", "AAA", "--models", "arima",
                    "--arima", "0,1,0", "--sentiment", "with")
    assert code == 0
    assert json.loads((out / "compare_AAA.json").read_text())["rows"] == []


def test_compare_arima_010_equals_persistence(tmp_path, market_files, fast_config):
    stocks, tweets = market_files
    code, out = run(tmp_path, "compare", "--config", fast_config, "--stocks", stocks,
                    "--tweets", tweets, "--ticker", "AAA", "--models", "arima,persistence",
                    "--arima", "0,1,0", "--sentiment", "without")
    rows = json.loads((out / "compare_AAA.json").read_text())["rows"]
    assert rows[0]["mae"] == rows[1]["mae"] and rows[0]["order"] == "(0,1,0)"


def test_compare_failed_model_exits_numerical(tmp_path, market_files, fast_config,
                                              monkeypatch):
    from sentistock.errors import DivergenceError

    def boom(*a, **k):
        raise DivergenceError(1)

    monkeypatch.setattr(pipeline, "train", boom)
    stocks, tweets = market_files
    code, out = run(tmp_path, "compare", "--config", fast_config, "--stocks", stocks,
                    "--tweets", tweets, "--ticker", "AAA", "--models", "gru1,persistence",
                    "--sentiment", "without")
    assert code == 4
    rows = json.loads((out / "compare_AAA.json").read_text())["rows"]
    assert [r["status"] for r in rows] == ["failed", "ok"]
    assert "GRU (1_Layer)" in manifest(out, "compare")["status"]


# -- diagnose ----------------------------------------------------------------

def perfect_checkpoint(tmp_path):
    """Prices where a constant network is exactly right on the test split."""
    days = trading_days(dt.date(2022, 1, 3), 40)
    prices = [100.0 if i % 2 else 200.0 for i in range(28)] + [150.0] * 12
    bars = [OhlcvBar(d, p, p, p, p, p, 10, "FLAT") for d, p in zip(days, prices)]
    write_stock_csv(bars, tmp_path / "flat.csv")
    write_tweets_csv([TweetRecord(dt.datetime(2022, 1, 3, tzinfo=UTC), "good", "FLAT", "F", 20)],
                     tmp_path / "flat_tweets.csv")
    data = DataConfig(lookback=3, train_frac=0.7, val_frac=0.15)
    net = Network.init(NetworkSpec("gru", 1, False, 2, 0.0, 1), SeededRng(0))
    net.head_W[...] = 0.0
    net.head_b[...] = 0.5
    with pytest.warns(DegenerateFeatureWarning):
        scaler = fit_scaler(np.column_stack([prices[:28], np.zeros(28)]))
    pipeline.save_checkpoint(tmp_path / "flat.ckpt.json", net, scaler, "FLAT", data, False)
    return tmp_path / "flat.ckpt.json"


def test_diagnose_perfect_prediction_is_degenerate(tmp_path):
    ck = perfect_checkpoint(tmp_path)
    code, out = run(tmp_path, "diagnose", "--checkpoint", ck, "--stocks", tmp_path / "flat.csv",
                    "--tweets", tmp_path / "flat_tweets.csv")
    assert code == 4
    rows = read_csv(out / "FLAT_residuals.csv")
    assert len(rows) == 6 and all(float(r["residual"]) == 0.0 for r in rows)
    assert not (out / "FLAT_qq.csv").exists()
    assert not list(out.glob("*.svg"))
    assert "constant" in manifest(out, "diagnose")["status"]


def test_diagnose_after_training(tmp_path, market_files, fast_config):
    stocks, tweets = market_files
    assert run(tmp_path, "train", "--config", fast_config, "--stocks", stocks, "--tweets",
               tweets, "--ticker", "CCC", "--no-sentiment")[0] == 0
    code, out = run(tmp_path, "diagnose", "--checkpoint", tmp_path / "out/CCC_gru1.ckpt.json",
                    "--stocks", stocks, "--tweets", tweets, "--svg")
    assert code == 0
    assert len(read_csv(out / "CCC_qq.csv")) == len(read_csv(out / "CCC_residuals.csv"))
    assert (out / "CCC_qq.svg").exists() and (out / "CCC_residuals.svg").exists()


def test_diagnose_rejects_foreign_json(tmp_path, market_files):
    stocks, tweets = market_files
    (tmp_path / "x.json").write_text('{"kind": "other"}')
    code, _ = run(tmp_path, "diagnose", "--checkpoint", tmp_path / "x.json", "--stocks", stocks,
                  "--tweets", tweets)
    assert code == 3


# -- risk-return and error handling -----------------------------------------

def test_risk_return(tmp_path, fixtures):
    code, out = run(tmp_path, "risk-return", "--stocks", fixtures / "stocks_sample.csv", "--svg")
    assert code == 0
    rows = read_csv(out / "risk_return.csv")
    assert [r["ticker"] for r in rows] == ["TSLA", "XPEV"]
    closes = [258.493347, 258.406677, 260.510010, 260.196655, 260.916656]
    r = np.diff(closes) / closes[:-1]
    assert float(rows[0]["expected_return"]) == pytest.approx(r.mean(), rel=1e-9)
    assert float(rows[0]["risk"]) == pytest.approx(r.std(ddof=1), rel=1e-9)
    assert (out / "risk_return.svg").exists()


@pytest.mark.parametrize("argv, code", [
    (["risk-return", "--stocks", "missing.csv"], 3),
    (["compare", "--stocks", "{s}", "--tweets", "{t}", "--ticker", "AAA", "--models", "nope"], 2),
    (["compare", "--stocks", "{s}", "--tweets", "{t}", "--ticker", "AAA", "--arima", "9,0,0"], 2),
    (["train", "--stocks", "{s}", "--tweets", "{t}", "--ticker", "NONE"], 3),
    (["train", "--config", "{bad}", "--stocks", "{s}", "--tweets", "{t}", "--ticker", "AAA"], 2),
])
def test_exit_codes(tmp_path, market_files, argv, code):
    stocks, tweets = market_files
    bad = tmp_path / "bad.ini"
    bad.write_text("[training]\nwhatever = 1\n")
    argv = [a.format(s=stocks, t=tweets, bad=bad) for a in argv]
    got, out = run(tmp_path, *argv)
    assert got == code
    m = manifest(out, argv[0])
    assert m["exit_code"] == code and m["status"].startswith("failed")


def test_short_history_is_a_data_error(tmp_path, fixtures):
    code, _ = run(tmp_path, "train", "--stocks", fixtures / "stocks_sample.csv", "--tweets",
                  fixtures / "tweets_sample.csv", "--ticker", "TSLA")
    assert code == 3


def test_usage_error_exits_two(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["score"])
    assert exc.value.code == 2


def test_global_flags_accepted_after_subcommand(tmp_path, fixtures):
    out = tmp_path / "late"
    assert main(["risk-return", "--stocks", str(fixtures / "stocks_sample.csv"),
                 "--out", str(out), "--seed", "17"]) == 0
    assert manifest(out, "risk-return")["seed"] == 17


def test_unknown_scorer_in_pipeline():
    with pytest.raises(ConfigError):
        pipeline.make_scorer("bert")
    with pytest.raises(ConfigError):
        pipeline.select_models("gru1,transformer")


def test_grid_names():
    names = {e.key: (e.name(False), e.name(True)) for e in pipeline.GRID}
    assert names["gru_tuned"] == ("GRU (Tuned)", "GRU_vader")
    assert names["lstm_tuned"] == ("LSTM (Tuned)", "LSTM (Tuned) + Vader")
    assert names["bigru"] == ("Bi-GRU (1_Layer)", "Bi-GRU (1_Layer) + Vader")
    assert names["persistence"] == ("Persistence", "Persistence")
    assert pipeline.derived_seed(0, 1) != pipeline.derived_seed(0, 2)


def test_synthetic_market_is_deterministic():
    assert synthetic_market(seed=1) == synthetic_market(seed=1)
