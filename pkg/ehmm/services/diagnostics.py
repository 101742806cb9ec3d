"""Mixing and accuracy diagnostics: traces, autocorrelation, sign switches, oracle error.

A state of exactly 0.0 counts as positive throughout.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

from ehmm.core.errors import DegenerateSeriesError, UsageError
from ehmm.core.model import StateSeq

if TYPE_CHECKING:
    from ehmm.services.chain import ChainRecord


@dataclass(frozen=True, eq=False)
class TraceSeries:
    """Value of x_t across stored iterations."""

    t: int
    iterations: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, eq=False)
class OracleError:
    per_time: np.ndarray
    mean: float


def _values(x: Union[StateSeq, TraceSeries, np.ndarray]) -> np.ndarray:
    if isinstance(x, (StateSeq, TraceSeries)):
        return np.asarray(x.values, dtype=float)
    return np.asarray(x, dtype=float).reshape(-1)


def trace_at_time(rec: "ChainRecord", t: int) -> TraceSeries:
    if not 0 <= t < rec.n:
        raise UsageError(f"time {t} outside sequence of length {rec.n}")
    return TraceSeries(t=t, iterations=rec.sample_iters.copy(), values=rec.samples[:, t].astype(float))


def autocorr(series, max_lag: int) -> np.ndarray:
    """Biased autocorrelation estimate for lags 0..max_lag.

    Mean-centred, each lag's sum divided by the lag-0 sum (the series length
    cancels), so lag 0 is exactly 1.
    """
    x = _values(series)
    if max_lag < 0 or x.size <= max_lag:
        raise UsageError(f"series of length {x.size} is too short for max_lag={max_lag}")
    x = x - x.mean()
    c0 = float(np.dot(x, x))
    if c0 == 0.0:
        raise DegenerateSeriesError("autocorrelation undefined for a constant series")
    acf = np.empty(max_lag + 1)
    acf[0] = 1.0
    for k in range(1, max_lag + 1):
        acf[k] = np.dot(x[:-k], x[k:]) / c0
    return acf


def sign_switch_count(x) -> int:
    """Number of t with sign(x_t) != sign(x_{t-1})."""
    positive = _values(x) >= 0.0
    return int(np.count_nonzero(positive[1:] != positive[:-1]))


def sign_run_lengths(x) -> np.ndarray:
    """Lengths of maximal runs of same-signed states."""
    positive = _values(x) >= 0.0
    if positive.size == 0:
        return np.empty(0, dtype=np.int64)
    cuts = np.flatnonzero(positive[1:] != positive[:-1]) + 1
    edges = np.concatenate(([0], cuts, [positive.size]))
    return np.diff(edges)


def visits_both_regions(series, level: float = 0.5) -> bool:
    """True if the series reaches both x >= level and x <= -level."""
    v = _values(series)
    return bool(np.any(v >= level) and np.any(v <= -level))


def positive_fraction(rec: "ChainRecord") -> np.ndarray:
    """Per-time fraction of stored samples with x_t > 0 (0.0 counted positive)."""
    if rec.n_stored == 0:
        raise UsageError("no stored samples")
    return np.mean(rec.samples >= 0.0, axis=0)


def oracle_error(rec: "ChainRecord", p_positive) -> OracleError:
    """|estimated P(x_t > 0 | y) - oracle| per time, and its mean."""
    p_positive = np.asarray(p_positive, dtype=float).reshape(-1)
    if rec.n_stored == 0:
        raise UsageError("no stored samples to compare with the oracle")
    if p_positive.size != rec.n:
        raise UsageError(f"oracle has {p_positive.size} times, samples have {rec.n}")
    per_time = np.abs(positive_fraction(rec) - p_positive)
    return OracleError(per_time=per_time, mean=float(per_time.mean()))
