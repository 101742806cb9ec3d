"""The embedded HMM over pool indexes.

Path weight of an index sequence k_0..k_{n-1}:

    log_init[k_0] + sum_t log_trans[t-1][k_{t-1}, k_t] + sum_t log_w[t][k_t]

which equals log_joint of the corresponding state sequence minus
sum_t log rho_t(state) exactly.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from ehmm.core.config import settings
from ehmm.core.errors import DomainError, ImpossibleUpdateError, NumericError, UsageError
from ehmm.core.model import ObsSeq, StateSpaceModel
from ehmm.core.rng import RngStream
from ehmm.services.pools import Pool, PoolKernel

logger = logging.getLogger(__name__)


@dataclass
class OpCounter:
    """Dense inner-loop operation counts for one update."""

    table_entries: int = 0
    forward_madds: int = 0
    backward_madds: int = 0

    @property
    def inner_ops(self) -> int:
        """K x K cell operations: transition entries built plus forward multiply-adds."""
        return self.table_entries + self.forward_madds


@dataclass(frozen=True, eq=False)
class IndexHmmTables:
    """Log weight tables of the embedded HMM."""

    log_init: np.ndarray  # (K,)
    log_trans: np.ndarray  # (n-1, K, K), [t-1, j, k]
    log_w: np.ndarray  # (n, K)

    @property
    def n(self) -> int:
        return int(self.log_w.shape[0])

    @property
    def K(self) -> int:
        return int(self.log_w.shape[1])

    def path_log_weight(self, path: Sequence[int]) -> float:
        path = np.asarray(path, dtype=np.intp)
        if path.size != self.n:
            raise UsageError(f"index path has length {path.size}, tables have n={self.n}")
        total = self.log_init[path[0]] + self.log_w[np.arange(self.n), path].sum()
        if self.n > 1:
            total += self.log_trans[np.arange(self.n - 1), path[:-1], path[1:]].sum()
        return float(total)


@dataclass(frozen=True, eq=False)
class ForwardMessages:
    """Normalised filtered distributions with their per-step log normalisers."""

    probs: np.ndarray  # (n, K), rows sum to 1
    log_norms: np.ndarray  # (n,)
    counter: OpCounter = field(default_factory=OpCounter)

    @property
    def log_normalizer(self) -> float:
        return float(np.sum(self.log_norms))


def _validated(arr: np.ndarray, what: str) -> np.ndarray:
    if np.isnan(arr).any():
        raise NumericError(f"NaN in embedded HMM {what}")
    return arr


def build_tables(
    model: StateSpaceModel,
    pools: Sequence[Pool],
    kernels: Sequence[PoolKernel],
    y: ObsSeq,
    counter: Optional[OpCounter] = None,
) -> IndexHmmTables:
    """Encode the pool-restricted posterior over index paths."""
    n = len(y)
    if len(pools) != n or len(kernels) != n:
        raise UsageError(
            f"need one pool and one kernel per time step (n={n}, pools={len(pools)}, "
            f"kernels={len(kernels)})"
        )
    sizes = {p.K for p in pools}
    if len(sizes) != 1:
        raise UsageError(f"pools differ in size: {sorted(sizes)}")
    K = sizes.pop()

    S = np.stack([p.states for p in pools])
    ys = y.values
    with np.errstate(divide="ignore"):
        log_init = np.asarray(model.log_init(S[0]), dtype=float).reshape(K)
        log_trans = np.asarray(
            model.log_trans(S[:-1, :, None], S[1:, None, :]), dtype=float
        ).reshape(n - 1, K, K)
        log_rho = np.stack([np.asarray(kernels[t].log_rho(S[t]), dtype=float).reshape(K) for t in range(n)])
        log_emit = np.asarray(model.log_emit(S, ys[:, None]), dtype=float).reshape(n, K)

    _validated(log_rho, "pool densities")
    if not np.all(np.isfinite(log_rho)):
        t, k = np.argwhere(~np.isfinite(log_rho))[0]
        raise DomainError(f"pool density is zero at its own draw (t={t}, k={k})")

    tables = IndexHmmTables(
        log_init=_validated(log_init, "initial weights"),
        log_trans=_validated(log_trans, "transition weights"),
        log_w=_validated(log_emit - log_rho, "emission weights"),
    )
    if counter is not None:
        counter.table_entries += (n - 1) * K * K
    return tables


def forward_pass(tables: IndexHmmTables, counter: Optional[OpCounter] = None) -> ForwardMessages:
    """Forward filtering with per-step normalisation, O(n K^2)."""
    n, K = tables.n, tables.K
    counter = counter if counter is not None else OpCounter()
    probs = np.empty((n, K))
    log_norms = np.empty(n)

    with np.errstate(divide="ignore"):
        log_a = tables.log_init + tables.log_w[0]
        for t in range(n):
            if t > 0:
                log_prev = np.log(probs[t - 1])
                log_a = logsumexp(log_prev[:, None] + tables.log_trans[t - 1], axis=0)
                log_a = log_a + tables.log_w[t]
                counter.forward_madds += K * K
            c = logsumexp(log_a)
            if not np.isfinite(c):
                raise ImpossibleUpdateError(f"no finite-weight index path reaches time {t}")
            probs[t] = np.exp(log_a - c)
            log_norms[t] = c

    return ForwardMessages(probs=probs, log_norms=log_norms, counter=counter)


def _categorical_rows(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One categorical draw per row of non-negative ``weights`` from uniforms ``u``."""
    cdf = np.cumsum(weights, axis=1)
    return np.sum(cdf <= (u * cdf[:, -1])[:, None], axis=1)


def backward_sample(
    msgs: ForwardMessages, tables: IndexHmmTables, rng: RngStream, size: Optional[int] = None
) -> np.ndarray:
    """Draw index paths with probability proportional to their path weight.

    Returns one path of shape (n,), or ``size`` independent paths of shape
    (size, n) drawn together from the one stream.
    """
    if size is not None and size < 1:
        raise UsageError(f"number of paths must be >= 1, got {size}")
    draws = 1 if size is None else int(size)
    gen = rng.generator()
    n, K = tables.n, tables.K
    paths = np.empty((draws, n), dtype=np.intp)
    last = np.broadcast_to(msgs.probs[-1], (draws, K))
    paths[:, -1] = _categorical_rows(last, gen.random(draws))
    with np.errstate(divide="ignore"):
        for t in range(n - 2, -1, -1):
            # (draws, K): filtered message times the column into each successor
            logp = np.log(msgs.probs[t])[None, :] + tables.log_trans[t].T[paths[:, t + 1]]
            top = np.max(logp, axis=1, keepdims=True)
            if not np.all(np.isfinite(top)):
                raise ImpossibleUpdateError(f"backward step at time {t} has no successor mass")
            paths[:, t] = _categorical_rows(np.exp(logp - top), gen.random(draws))
            msgs.counter.backward_madds += K * draws
    return paths[0] if size is None else paths


@dataclass(frozen=True, eq=False)
class PathDistribution:
    """Exact distribution over every index path."""

    paths: np.ndarray  # (K**n, n), lexicographic order
    probs: np.ndarray  # (K**n,)
    log_total: float  # log of the summed exp path weights

    def marginals(self, K: int) -> np.ndarray:
        """(n, K) per-time marginal over indexes."""
        return np.stack(
            [np.bincount(self.paths[:, t], weights=self.probs, minlength=K) for t in range(self.paths.shape[1])]
        )


def brute_force_path_dist(tables: IndexHmmTables) -> PathDistribution:
    """Exact distribution over all K**n index paths by direct enumeration."""
    n, K = tables.n, tables.K
    if K**n > settings.max_enumeration:
        raise UsageError(f"K**n = {K**n} exceeds the enumeration limit {settings.max_enumeration}")
    paths = np.array(list(itertools.product(range(K), repeat=n)), dtype=np.intp).reshape(-1, n)
    logw = tables.log_init[paths[:, 0]] + tables.log_w[np.arange(n), paths].sum(axis=1)
    if n > 1:
        steps = np.arange(n - 1)
        logw = logw + tables.log_trans[steps, paths[:, :-1], paths[:, 1:]].sum(axis=1)
    total = float(logsumexp(logw))
    if not np.isfinite(total):
        raise ImpossibleUpdateError("every index path has zero weight")
    return PathDistribution(paths=paths, probs=np.exp(logw - total), log_total=total)
