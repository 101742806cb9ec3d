"""Pool kernels and per-time pool construction.

A pool for time t holds K candidate states indexed by the signed offset
j in {-K+J+1, ..., 0, ..., J}. It is stored flat, lowest j first, with the
position of j=0 (the current state) recorded. Duplicate states stay as
distinct entries.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from ehmm.core.errors import DomainError, NumericError, UsageError
from ehmm.core.rng import RngStream

logger = logging.getLogger(__name__)

StepFn = Callable[[Any, np.random.Generator], Any]

_TOL = 1e-12


@dataclass(frozen=True)
class PoolKernel:
    """Pool distribution rho_t with forward kernel R_t and its reversal.

    ``step_fwd`` draws from R_t(. | x), ``step_rev`` from the reversed
    kernel; both receive a materialised generator. ``log_step(x, x')`` is
    log R_t(x' | x) where the kernel has a density. Finite kernels also
    carry their tables, ``log_r[x, x'] = log R(x' | x)``.
    """

    log_rho: Callable[[Any], Any]
    step_fwd: StepFn
    step_rev: StepFn
    log_step: Optional[Callable[[Any, Any], Any]] = None
    log_r: Optional[np.ndarray] = None
    log_r_rev: Optional[np.ndarray] = None
    log_rho_table: Optional[np.ndarray] = None
    reversible: bool = False
    name: str = "kernel"

    @property
    def is_finite(self) -> bool:
        return self.log_r is not None


@dataclass(frozen=True, eq=False)
class Pool:
    """K candidate states for one time step."""

    states: np.ndarray
    offset: int
    j_draw: int

    @property
    def K(self) -> int:
        return int(self.states.size)

    @property
    def current(self):
        return self.states[self.offset]

    def at(self, j: int):
        """State at signed index j."""
        if not -self.offset <= j <= self.j_draw:
            raise UsageError(f"pool index {j} outside [{-self.offset}, {self.j_draw}]")
        return self.states[self.offset + j]

    def signed_indexes(self) -> np.ndarray:
        return np.arange(-self.offset, self.K - self.offset)


def _check_state(state) -> None:
    if isinstance(state, (float, np.floating)) and np.isnan(state):
        raise NumericError("pool kernel draw returned NaN")


def build_pool(kernel: PoolKernel, current, K: int, rng: RngStream) -> Pool:
    """Build the pool around ``current``: J uniform, J forward and K-1-J reverse steps."""
    if K < 1:
        raise UsageError(f"pool size K must be >= 1, got {K}")
    gen = rng.generator()
    J = int(gen.integers(K))
    offset = K - 1 - J
    states = np.empty(K, dtype=np.result_type(current))
    states[offset] = current
    for j in range(1, J + 1):
        nxt = kernel.step_fwd(states[offset + j - 1], gen)
        _check_state(nxt)
        states[offset + j] = nxt
    for j in range(-1, -K + J, -1):
        nxt = kernel.step_rev(states[offset + j + 1], gen)
        _check_state(nxt)
        states[offset + j] = nxt
    states.setflags(write=False)
    return Pool(states=states, offset=offset, j_draw=J)


# Finite kernels


def finite_reverse_kernel(
    log_r, log_rho, labels: Optional[Sequence[Any]] = None
) -> np.ndarray:
    """Log table of the reversed kernel: R~(x | x') = rho(x) R(x' | x) / rho(x').

    Row x' of the result is the distribution R~(. | x').
    """
    log_r = np.asarray(log_r, dtype=float)
    log_rho = np.asarray(log_rho, dtype=float)
    size = log_rho.size
    if log_r.shape != (size, size):
        raise UsageError(f"kernel table shape {log_r.shape} does not match {size} states")
    if labels is not None and len(labels) != size:
        raise UsageError("label set size does not match the kernel tables")

    zero_rho = ~np.isfinite(log_rho)
    reachable = np.isfinite(log_r).any(axis=0)
    bad = np.flatnonzero(zero_rho & reachable)
    if bad.size:
        names = [labels[i] for i in bad] if labels is not None else bad.tolist()
        raise DomainError(f"pool density is zero at reachable states {names}")

    with np.errstate(invalid="ignore"):
        rev = log_rho[None, :] + log_r.T - log_rho[:, None]
    # States outside rho's support are never reached; give them a self-loop.
    for i in np.flatnonzero(zero_rho):
        rev[i, :] = -np.inf
        rev[i, i] = 0.0

    row_mass = np.exp(logsumexp(rev, axis=1))
    if np.any(np.abs(row_mass - 1.0) > _TOL):
        raise DomainError(f"kernel does not leave rho invariant (reversed row sums {row_mass})")
    return rev


def _table_sampler(log_table: np.ndarray) -> StepFn:
    cdf = np.cumsum(np.exp(log_table), axis=1)

    def step(state, gen: np.random.Generator):
        row = cdf[int(state)]
        return int(np.searchsorted(row, gen.random() * row[-1], side="right"))

    return step


def make_finite_kernel(rho_probs, r_probs, name: str = "finite") -> PoolKernel:
    """Finite pool kernel from rho and R (``r_probs[x, x'] = R(x' | x)``)."""
    rho = np.asarray(rho_probs, dtype=float)
    r = np.asarray(r_probs, dtype=float)
    if np.any(rho < 0) or abs(rho.sum() - 1.0) > _TOL:
        raise DomainError("rho must be a probability vector")
    if np.any(r < 0) or np.any(np.abs(r.sum(axis=1) - 1.0) > _TOL):
        raise DomainError("R rows must be probability vectors")
    if np.any(np.abs(rho @ r - rho) > _TOL):
        raise DomainError("R does not leave rho invariant")

    with np.errstate(divide="ignore"):
        log_rho = np.log(rho)
        log_r = np.log(r)
    log_rev = finite_reverse_kernel(log_r, log_rho)
    reversible = bool(np.allclose(np.exp(log_rev), r, rtol=0.0, atol=_TOL))

    step_fwd = _table_sampler(log_r)
    step_rev = step_fwd if reversible else _table_sampler(log_rev)
    log_r.setflags(write=False)
    log_rev.setflags(write=False)
    log_rho.setflags(write=False)
    return PoolKernel(
        log_rho=lambda s: log_rho[np.asarray(s, dtype=np.intp)],
        step_fwd=step_fwd,
        step_rev=step_rev,
        log_step=lambda a, b: log_r[np.asarray(a, dtype=np.intp), np.asarray(b, dtype=np.intp)],
        log_r=log_r,
        log_r_rev=log_rev,
        log_rho_table=log_rho,
        reversible=reversible,
        name=name,
    )


def identity_kernel(rho_probs, name: str = "identity") -> PoolKernel:
    """Kernel that never moves; every pool is K copies of the current state."""
    rho = np.asarray(rho_probs, dtype=float)
    return make_finite_kernel(rho, np.eye(rho.size), name=name)


def _require_tables(kernel: PoolKernel) -> None:
    if not kernel.is_finite or kernel.log_r_rev is None or kernel.log_rho_table is None:
        raise UsageError(f"kernel {kernel.name!r} has no finite tables")


def pool_log_prob(kernel: PoolKernel, pool: Pool) -> float:
    """log P(J, pool | current) as the product of the individual draws."""
    _require_tables(kernel)
    s = pool.states.astype(np.intp)
    o = pool.offset
    total = -np.log(pool.K)
    for j in range(1, pool.j_draw + 1):
        total += kernel.log_step(s[o + j - 1], s[o + j])
    for j in range(-1, -o - 1, -1):
        total += kernel.log_r_rev[s[o + j + 1], s[o + j]]
    return float(total)


def pool_log_prob_closed_form(kernel: PoolKernel, pool: Pool) -> float:
    """Telescoped form: log rho(lowest) - log rho(current) + forward R chain over the pool."""
    _require_tables(kernel)
    s = pool.states.astype(np.intp)
    rho = kernel.log_rho_table
    chain = float(np.sum(kernel.log_step(s[:-1], s[1:])))
    return float(-np.log(pool.K) + rho[s[0]] - rho[s[pool.offset]] + chain)


def enumerate_pools(kernel: PoolKernel, current: int, K: int) -> Iterator[Tuple[Pool, float]]:
    """Every (pool, log probability) a finite kernel can build around ``current``."""
    _require_tables(kernel)
    labels = range(kernel.log_r.shape[0])
    for J in range(K):
        offset = K - 1 - J
        for fwd in itertools.product(labels, repeat=J):
            for rev in itertools.product(labels, repeat=offset):
                # rev[0] is j=-1, rev[1] is j=-2, ...
                states = np.array(list(reversed(rev)) + [current] + list(fwd), dtype=np.int64)
                states.setflags(write=False)
                pool = Pool(states=states, offset=offset, j_draw=J)
                lp = pool_log_prob(kernel, pool)
                if np.isfinite(lp):
                    yield pool, lp
