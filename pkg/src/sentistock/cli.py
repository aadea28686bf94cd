"""Command-line interface.

Every run writes ``<command>.manifest.json`` into ``--out`` recording the
config snapshot, input digests, seed, outputs and wall-clock time.  Exit
codes: 0 success, 2 usage, 3 data, 4 numerical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import __version__, backend, evaluation, pipeline
from .config import dump_config, load_config
from .errors import ConfigError, DataError, NumericalError, SentistockError
from .ingest import bars_by_ticker, load_stock_csv, load_tweets_csv
from .training import prepare, random_search, train

log = logging.getLogger("sentistock")


@dataclass
class RunManifest:
    command: str
    argv: list
    seed: int
    config: dict
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    status: str = "ok"
    exit_code: int = 0
    duration_s: float = 0.0
    backend: str = ""
    version: str = __version__

    def add_input(self, path):
        if path is None:
            return
        h = hashlib.sha256()
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
        self.inputs[str(path)] = "sha256:" + h.hexdigest()

    def add_output(self, path):
        self.outputs.append(str(path))
        return path


def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=d, help="INI run configuration")
    p.add_argument("--seed", type=int, default=d, help="override [training] seed")
    p.add_argument("--out", metavar="DIR", default=d if suppress else "out",
                   help="output directory (default: out)")
    p.add_argument("--svg", action="store_true", default=d if suppress else False,
                   help="also write SVG plots")
    p.add_argument("-v", "--verbose", action="count", default=d if suppress else 0)


def _data_args(p, ticker=True, tweets=True):
    p.add_argument("--stocks", required=True, metavar="CSV", help="daily OHLCV price file")
    if tweets:
        p.add_argument("--tweets", required=True, metavar="CSV", help="tweet file")
    p.add_argument("--lexicon", metavar="PATH", help="lexicon file (default: bundled VADER)")
    if ticker:
        p.add_argument("--ticker", required=True)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    parser = argparse.ArgumentParser(
        prog="sentistock",
        description="Tweet sentiment scoring and stock price forecasting experiments.")
    _global_flags(parser, suppress=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("score", parents=[common], help="score tweets")
    p.add_argument("--tweets", required=True, metavar="CSV")
    p.add_argument("--lexicon", metavar="PATH")
    p.add_argument("--scorer", choices=("vader", "additive"), default="vader")

    p = sub.add_parser("eval-lexicon", parents=[common],
                       help="confusion matrix and P/R/F1 on labelled text")
    p.add_argument("--labeled", required=True, metavar="CSV", help="columns text,label")
    p.add_argument("--lexicon", metavar="PATH")
    p.add_argument("--scorer", choices=("vader", "additive"), default="vader")

    p = sub.add_parser("correlate", parents=[common],
                       help="tweet volume and sentiment/price correlation per ticker")
    _data_args(p, ticker=False)
    p.add_argument("--tickers", help="comma-separated (default: every ticker with prices)")

    p = sub.add_parser("tune", parents=[common], help="random hyperparameter search")
    _data_args(p)
    p.add_argument("--cell", choices=("gru", "lstm"), default=None)
    p.add_argument("--trials", type=int)
    p.add_argument("--no-sentiment", action="store_true")

    p = sub.add_parser("train", parents=[common], help="train one network")
    _data_args(p)
    p.add_argument("--cell", choices=("gru", "lstm"), default=None)
    p.add_argument("--layers", type=int, choices=(1, 2))
    p.add_argument("--bidirectional", action="store_true", default=None)
    p.add_argument("--no-sentiment", action="store_true")

    p = sub.add_parser("compare", parents=[common], help="run the model grid on one ticker")
    _data_args(p)
    p.add_argument("--models", help="comma-separated keys: " + ",".join(pipeline.GRID_KEYS))
    p.add_argument("--sentiment", choices=("both", "with", "without"), default="both")
    p.add_argument("--arima", metavar="P,D,Q", help="ARIMA order (default from config)")
    p.add_argument("--exog", choices=("sentiment",), help="add the ARIMA + Vader row")
    p.add_argument("--trials", type=int, help="override [search] trials")

    p = sub.add_parser("diagnose", parents=[common], help="test residuals and Q-Q points")
    p.add_argument("--checkpoint", required=True, metavar="JSON")
    _data_args(p, ticker=False)
    p.add_argument("--ticker", help="default: the checkpoint's ticker")

    p = sub.add_parser("risk-return", parents=[common],
                       help="mean daily return and its standard deviation per ticker")
    p.add_argument("--stocks", required=True, metavar="CSV")
    return parser


# -- handlers ---------------------------------------------------------------

def _load(args, m):
    m.add_input(args.stocks)
    m.add_input(args.tweets)
    m.add_input(getattr(args, "lexicon", None))
    return load_stock_csv(args.stocks), load_tweets_csv(args.tweets)


def _table(args, cfg, m):
    bars, tweets = _load(args, m)
    scorer = pipeline.make_scorer("vader", args.lexicon)
    return pipeline.ticker_table(bars, tweets, args.ticker.upper(), cfg.data, scorer)


def cmd_score(args, cfg, out, m):
    m.add_input(args.tweets)
    m.add_input(args.lexicon)
    tweets = [] if os.path.getsize(args.tweets) == 0 else load_tweets_csv(args.tweets)
    scorer = pipeline.make_scorer(args.scorer, args.lexicon)
    rows = pipeline.score_rows(tweets, scorer)
    path = m.add_output(out / "scores.csv")
    pipeline.write_scores(rows, path)
    print(f"scored {len(rows)} tweets -> {path}")
    return 0


def cmd_eval_lexicon(args, cfg, out, m):
    m.add_input(args.labeled)
    m.add_input(args.lexicon)
    texts, labels = pipeline.read_labeled(args.labeled)
    cm, rep = pipeline.evaluate_lexicon(texts, labels, pipeline.make_scorer(args.scorer,
                                                                            args.lexicon))
    report = {
        "version": evaluation.REPORT_VERSION, "scorer": args.scorer,
        "lexicon": Path(args.lexicon).name if args.lexicon else "vader (bundled)",
        "n": len(labels),
        "accuracy": 100 * rep.accuracy, "precision": 100 * rep.precision,
        "recall": 100 * rep.recall, "f1": 100 * rep.f1,
        "per_class": rep.per_class, "zero_division": rep.zero_division,
        "confusion_matrix": {"order": [r[0] for r in cm.to_rows()],
                             "counts": [r[1:] for r in cm.to_rows()]},
    }
    evaluation.write_json(report, m.add_output(out / "eval_lexicon.json"))
    print(f"n={len(labels)}  accuracy {report['accuracy']:.2f}  precision "
          f"{report['precision']:.2f}  recall {report['recall']:.2f}  F1 {report['f1']:.2f}")
    print(cm.format())
    return 0


def cmd_correlate(args, cfg, out, m):
    bars, tweets = _load(args, m)
    tickers = ([t.strip().upper() for t in args.tickers.split(",") if t.strip()]
               if args.tickers else sorted(bars_by_ticker(bars)))
    rows = pipeline.correlate(bars, tweets, sorted(tickers), cfg.data,
                              pipeline.make_scorer("vader", args.lexicon))
    path = m.add_output(out / "correlation.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["ticker", "tweet_volume", "days", "pearson_r"])
        for r in rows:
            w.writerow([r.ticker, r.tweet_volume, r.days,
                        "" if r.pearson_r is None else repr(r.pearson_r)])
    evaluation.write_json({"version": evaluation.REPORT_VERSION,
                           "rows": [asdict(r) for r in rows]},
                          m.add_output(out / "correlation.json"))
    print(f"{'ticker':<8}{'tweets':>10}{'days':>7}{'pearson_r':>12}")
    for r in rows:
        rv = f"{r.pearson_r:12.4f}" if r.pearson_r is not None else f"{'n/a':>12}"
        print(f"{r.ticker:<8}{r.tweet_volume:>10,}{r.days:>7}{rv}")
    return 0


def _test_metrics(net, prepared, k, meta):
    preds = prepared.scaler.inverse_target(net.predict(prepared.test.X))
    return evaluation.regression_metrics(prepared.test_actual, preds, k, meta)


def cmd_train(args, cfg, out, m):
    table = _table(args, cfg, m)
    sent = not args.no_sentiment
    d = cfg.data
    prepared = prepare(table, d.lookback, d.train_frac, d.val_frac, sent)
    spec = cfg.model.spec(2 if sent else 1)
    overrides = {k: v for k, v in (("cell", args.cell), ("layers", args.layers),
                                   ("bidirectional", args.bidirectional)) if v is not None}
    if overrides:
        spec = replace(spec, **overrides)
    net, hist = train(spec, prepared.train, prepared.val, cfg.training)
    stem = f"{table.ticker}_{spec.cell}{spec.layers}{'bi' if spec.bidirectional else ''}" \
           f"{'_vader' if sent else ''}"
    pipeline.save_checkpoint(m.add_output(out / f"{stem}.ckpt.json"), net, prepared.scaler,
                             table.ticker, d, sent)
    hist.to_csv(m.add_output(out / f"{stem}_history.csv"))
    rep = _test_metrics(net, prepared, 2 if sent else 1,
                        {"ticker": table.ticker, "model": spec.label, "sentiment": sent,
                         "seed": cfg.training.seed, "config": cfg.digest()})
    evaluation.write_json({"version": evaluation.REPORT_VERSION, **rep.to_dict(),
                           "epochs": len(hist), "best_epoch": hist.best_epoch},
                          m.add_output(out / f"{stem}_metrics.json"))
    print(f"{spec.label}{' + Vader' if sent else ''}: {len(hist)} epochs, best "
          f"{hist.best_epoch}; test MAE {rep.mae:.4f}  adj R2 {rep.adjusted_r2:.4f}  "
          f"accuracy {rep.accuracy_pct:.2f}%")
    return 0


def cmd_tune(args, cfg, out, m):
    table = _table(args, cfg, m)
    sent = not args.no_sentiment
    d = cfg.data
    if args.trials is not None:
        cfg = cfg.with_overrides("search", trials=args.trials)
    prepared = prepare(table, d.lookback, d.train_frac, d.val_frac, sent)
    template = cfg.model.spec(2 if sent else 1)
    if args.cell:
        template = replace(template, cell=args.cell)
    result = random_search(cfg.search.space(), cfg.search.trials, template, prepared.train,
                           prepared.val, cfg.training, cfg.search.n_jobs)
    stem = f"{table.ticker}_{template.cell}_tuned{'_vader' if sent else ''}"
    pipeline.save_checkpoint(m.add_output(out / f"{stem}.ckpt.json"), result.network,
                             prepared.scaler, table.ticker, d, sent, asdict(result.best))
    result.history.to_csv(m.add_output(out / f"{stem}_history.csv"))
    rep = _test_metrics(result.network, prepared, 2 if sent else 1,
                        {"ticker": table.ticker, "model": stem, "sentiment": sent,
                         "seed": cfg.training.seed, "config": cfg.digest()})
    trials = [{"index": t.index, **asdict(t.hparams), "val_loss": t.val_loss,
               "epochs": t.epochs, "diverged": t.diverged} for t in result.trials]
    evaluation.write_json({"version": evaluation.REPORT_VERSION, "best": asdict(result.best),
                           "best_trial": result.best_index, "trials": trials,
                           "test_metrics": rep.to_dict(), "notes": [pipeline.RETRAIN_NOTE]},
                          m.add_output(out / f"{stem}_search.json"))
    print(f"best trial {result.best_index}: {result.best}; test MAE {rep.mae:.4f}  "
          f"accuracy {rep.accuracy_pct:.2f}%")
    return 0


def cmd_compare(args, cfg, out, m):
    table = _table(args, cfg, m)
    if args.arima:
        cfg = cfg.with_overrides("arima", order=args.arima)
        cfg.arima.arima_order  # validate early
    if args.trials is not None:
        cfg = cfg.with_overrides("search", trials=args.trials)
    sentiments = {"both": (False, True), "with": (True,), "without": (False,)}[args.sentiment]
    models = pipeline.select_models(args.models)
    runs = pipeline.compare(table, cfg, models, sentiments,
                            exog=True if args.exog == "sentiment" else None)
    d = cfg.data
    p = prepare(table, d.lookback, d.train_frac, d.val_frac, False)
    pers = evaluation.regression_metrics(p.test_actual, p.test_previous, 1).mae
    report = pipeline.compare_report(table.ticker, runs, cfg, pers)
    evaluation.write_json(report, m.add_output(out / f"compare_{table.ticker}.json"))
    print(pipeline.format_compare(report))
    failed = [r for r in runs if r.metrics is None]
    if failed:
        m.status = "failed: " + "; ".join(f"{r.name}: {r.error}" for r in failed)
        return NumericalError.exit_code
    return 0


def cmd_diagnose(args, cfg, out, m):
    m.add_input(args.checkpoint)
    ck, net, scaler, data = pipeline.load_checkpoint(args.checkpoint)
    args.ticker = args.ticker or ck["ticker"]
    bars, tweets = _load(args, m)
    table = pipeline.ticker_table(bars, tweets, args.ticker.upper(), data,
                                  pipeline.make_scorer("vader", args.lexicon))
    dates, actual, preds, resid = pipeline.diagnose(net, scaler, table, data,
                                                    ck["with_sentiment"])
    t = table.ticker
    path = m.add_output(out / f"{t}_residuals.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["order", "date", "actual", "predicted", "residual"])
        for i, row in enumerate(zip(dates, actual, preds, resid)):
            w.writerow([i, row[0].isoformat()] + [repr(float(v)) for v in row[1:]])
    if args.svg:
        evaluation.scatter_svg(m.add_output(out / f"{t}_residuals.svg"), range(len(resid)),
                               resid, f"{t} residuals", "order", "residual (USD)", hline=0.0)
    qq = evaluation.qq_points(resid)
    evaluation.write_qq_csv(m.add_output(out / f"{t}_qq.csv"), qq)
    if args.svg:
        evaluation.scatter_svg(m.add_output(out / f"{t}_qq.svg"), qq.theoretical, qq.sample,
                               f"{t} normal Q-Q", "theoretical quantile",
                               "standardised residual", identity_line=True)
    print(f"{t}: {len(resid)} test residuals, mean {resid.mean():.4f}, "
          f"Q-Q slope {qq.slope():.4f}")
    return 0


def cmd_risk_return(args, cfg, out, m):
    m.add_input(args.stocks)
    rows = pipeline.risk_return_rows(bars_by_ticker(load_stock_csv(args.stocks)))
    path = m.add_output(out / "risk_return.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["ticker", "risk", "expected_return"])
        for t, risk, ret in rows:
            w.writerow([t, repr(risk), repr(ret)])
    if args.svg and rows:
        evaluation.scatter_svg(m.add_output(out / "risk_return.svg"), [r[1] for r in rows],
                               [r[2] for r in rows], "Risk vs expected daily return",
                               "risk (std of daily return)", "expected daily return",
                               labels=[r[0] for r in rows])
    print(f"{'ticker':<8}{'risk':>12}{'return':>12}")
    for t, risk, ret in rows:
        print(f"{t:<8}{risk:12.6f}{ret:12.6f}")
    return 0


HANDLERS = {
    "score": cmd_score,
    "eval-lexicon": cmd_eval_lexicon,
    "correlate": cmd_correlate,
    "tune": cmd_tune,
    "train": cmd_train,
    "compare": cmd_compare,
    "diagnose": cmd_diagnose,
    "risk-return": cmd_risk_return,
}


def _fail(args, m, exc, code):
    print(f"sentistock {args.command}: {exc}", file=sys.stderr)
    m.status = f"failed: {exc}"
    return code


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose or 0, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    out = Path(args.out)
    start = time.perf_counter()
    m = RunManifest(args.command, argv, 0, {}, backend=backend.name)
    code = 0
    try:
        out.mkdir(parents=True, exist_ok=True)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        m.seed, m.config = cfg.training.seed, cfg.to_dict()
        m.add_input(args.config)
        log.debug("effective config:\n%s", dump_config(cfg))
        code = HANDLERS[args.command](args, cfg, out, m)
    except SentistockError as exc:
        code = _fail(args, m, exc, exc.exit_code)
    except (OSError, csv.Error, UnicodeDecodeError) as exc:
        code = _fail(args, m, exc, DataError.exit_code)
    except ValueError as exc:
        code = _fail(args, m, exc, ConfigError.exit_code)
    m.exit_code = code
    m.duration_s = round(time.perf_counter() - start, 3)
    try:
        evaluation.write_json(asdict(m), out / f"{args.command}.manifest.json")
    except OSError as exc:
        print(f"sentistock: cannot write manifest: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
