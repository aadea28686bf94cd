"""Tweet sentiment scoring and recurrent-network stock price forecasting.

Submodules: ``ingest`` (CSV loading and the price/sentiment merge),
``sentiment`` (VADER and additive lexicon scorers), ``numcore`` (RNG, Adam,
activations), ``models`` (GRU/LSTM networks with hand-written BPTT),
``training`` (windows, scaling, training loop, random search),
``baselines`` (ARIMA by CSS, persistence), ``evaluation`` (metrics and
diagnostics) and ``cli``.
"""

__version__ = "0.1.0"
