"""The embedded-HMM transition and chain runner.

One update builds a pool around every current state, then picks a new
sequence among all sequences through the pools with probability
proportional to pi(x) / prod_t rho_t(x_t), by forward filtering and
backward sampling over pool indexes. Pools are fresh every update.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ehmm.core.errors import DomainError, UsageError
from ehmm.core.model import ObsSeq, StateSeq, StateSpaceModel, log_joint
from ehmm.core.rng import Purpose, RngStream
from ehmm.services.chain import ChainRecord, ProgressFn, StepOutcome, drive_chain
from ehmm.services.index_hmm import (
    OpCounter,
    backward_sample,
    brute_force_path_dist,
    build_tables,
    forward_pass,
)
from ehmm.services.pools import Pool, PoolKernel, build_pool, enumerate_pools

logger = logging.getLogger(__name__)


class EhmmConfig(BaseModel):
    """Pool size, per-time kernels and the chain schedule."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    K: int = Field(ge=1)
    kernels: Union[List[PoolKernel], Callable[[int], PoolKernel]]
    iterations: int = Field(default=0, ge=0)
    burn_in: int = Field(default=0, ge=0)
    thin: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    chain: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _burn_in_fits(self) -> "EhmmConfig":
        if self.burn_in > self.iterations:
            raise ValueError("burn_in must not exceed iterations")
        return self

    def kernels_for(self, n: int) -> List[PoolKernel]:
        if callable(self.kernels):
            return [self.kernels(t) for t in range(n)]
        if len(self.kernels) != n:
            raise UsageError(f"{len(self.kernels)} kernels given for a sequence of length {n}")
        return list(self.kernels)


@dataclass(eq=False)
class EhmmStep:
    """Everything one update produced."""

    x: StateSeq
    pools: List[Pool]
    path: np.ndarray  # selected index per time (flat pool positions)
    current: np.ndarray  # flat position of the old state per time
    counter: OpCounter

    @property
    def moved_fraction(self) -> float:
        return float(np.mean(self.path != self.current))


def ehmm_step(
    model: StateSpaceModel,
    cfg: EhmmConfig,
    x: StateSeq,
    y: ObsSeq,
    rng: RngStream,
    kernels: Optional[Sequence[PoolKernel]] = None,
) -> EhmmStep:
    """One embedded-HMM update, keeping the pools and index path."""
    n = len(y)
    if len(x) != n:
        raise UsageError(f"state sequence length {len(x)} != observation length {n}")
    kernels = list(kernels) if kernels is not None else cfg.kernels_for(n)

    counter = OpCounter()
    pools = [build_pool(kernels[t], x[t], cfg.K, rng.child(Purpose.POOL, t)) for t in range(n)]
    tables = build_tables(model, pools, kernels, y, counter)

    current = np.array([p.offset for p in pools], dtype=np.intp)
    if not np.isfinite(tables.path_log_weight(current)):
        raise DomainError("current sequence has zero weight in the embedded HMM")

    msgs = forward_pass(tables, counter)
    path = backward_sample(msgs, tables, rng.child(Purpose.PATH))
    states = np.stack([p.states for p in pools])
    new = StateSeq(states[np.arange(n), path])
    return EhmmStep(x=new, pools=pools, path=path, current=current, counter=counter)


def ehmm_transition(
    model: StateSpaceModel, cfg: EhmmConfig, x: StateSeq, y: ObsSeq, rng: RngStream
) -> StateSeq:
    """Draw the next sequence from the embedded-HMM transition Q(. | x)."""
    return ehmm_step(model, cfg, x, y, rng).x


StepObserver = Callable[[int, EhmmStep], None]


def run_chain(
    model: StateSpaceModel,
    cfg: EhmmConfig,
    x0: StateSeq,
    y: ObsSeq,
    progress: Optional[ProgressFn] = None,
    observer: Optional[StepObserver] = None,
) -> ChainRecord:
    """Run ``cfg.iterations`` updates from x0 on stream (seed, chain)."""
    kernels = cfg.kernels_for(len(y))

    def step(i: int, x: StateSeq, rng: RngStream) -> StepOutcome:
        s = ehmm_step(model, cfg, x, y, rng, kernels)
        if observer is not None:
            observer(i, s)
        return StepOutcome(x=s.x, accept_rate=s.moved_fraction, inner_ops=s.counter.inner_ops)

    logger.info(
        "eHMM chain %d: K=%d, n=%d, %d iterations (burn-in %d, thin %d)",
        cfg.chain, cfg.K, len(y), cfg.iterations, cfg.burn_in, cfg.thin,
    )
    return drive_chain(
        step,
        model,
        x0,
        y,
        iterations=cfg.iterations,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        rng=RngStream(cfg.seed, (cfg.chain,)),
        progress=progress,
    )


def pool_support_ok(kernels: Sequence[PoolKernel], probes) -> bool:
    """True if every pool density is positive at every probe state."""
    probes = np.asarray(probes)
    with np.errstate(divide="ignore"):
        return all(bool(np.all(np.isfinite(k.log_rho(probes)))) for k in kernels)


def enumerate_transition_matrix(
    model: StateSpaceModel, kernels: Sequence[PoolKernel], K: int, y: ObsSeq
) -> Tuple[np.ndarray, np.ndarray]:
    """Exact Q(x' | x) of a finite model by enumerating J, pools and index paths.

    Returns ``(sequences, Q)`` with ``Q[a, b] = Q(sequences[b] | sequences[a])``.
    Rows of zero-density sequences are left at zero.
    """
    if not model.descriptor.is_finite:
        raise UsageError("transition enumeration needs a finite state space")
    n = len(y)
    size = model.descriptor.size
    shape = (size,) * n
    seqs = np.array(list(itertools.product(range(size), repeat=n)), dtype=np.int64)
    Q = np.zeros((seqs.shape[0], seqs.shape[0]))

    for a, x in enumerate(seqs):
        if not np.isfinite(log_joint(model, StateSeq(x), y)):
            continue
        per_time = [list(enumerate_pools(kernels[t], int(x[t]), K)) for t in range(n)]
        for combo in itertools.product(*per_time):
            pools = [pool for pool, _ in combo]
            weight = float(np.exp(sum(lp for _, lp in combo)))
            dist = brute_force_path_dist(build_tables(model, pools, kernels, y))
            states = np.stack([p.states for p in pools])
            picked = states[np.arange(n), dist.paths]
            cols = np.ravel_multi_index(tuple(picked.T), shape)
            np.add.at(Q[a], cols, weight * dist.probs)
    return seqs, Q
