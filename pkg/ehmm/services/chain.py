"""Chain driver and the record of a run, shared by every sampler."""

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ehmm.core.errors import DomainError, NumericError, UsageError
from ehmm.core.model import ObsSeq, StateSeq, StateSpaceModel, log_joint
from ehmm.core.rng import RngStream
from ehmm.services.diagnostics import sign_switch_count

logger = logging.getLogger(__name__)


@dataclass
class StepOutcome:
    """What one transition reports back to the driver."""

    x: StateSeq
    accept_rate: float = 1.0
    inner_ops: int = 0


StepFn = Callable[[int, StateSeq, RngStream], StepOutcome]
ProgressFn = Callable[[int], None]


@dataclass(eq=False)
class ChainRecord:
    """Stored samples (after burn-in and thinning) plus per-iteration summaries."""

    sample_iters: np.ndarray  # (m,)
    samples: np.ndarray  # (m, n)
    log_joint: np.ndarray  # (iterations,)
    switches: np.ndarray  # (iterations,)
    accept_rate: np.ndarray  # (iterations,)
    inner_ops: np.ndarray  # (iterations,)
    seconds: np.ndarray  # (iterations,)

    @property
    def n_stored(self) -> int:
        return int(self.samples.shape[0])

    @property
    def n(self) -> int:
        return int(self.samples.shape[1])

    @property
    def iterations(self) -> int:
        return int(self.log_joint.size)

    def sample(self, m: int) -> StateSeq:
        return StateSeq(self.samples[m])

    @classmethod
    def from_samples(cls, sample_iters, samples) -> "ChainRecord":
        """A record holding only stored samples (e.g. read back from CSV)."""
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2:
            raise UsageError("samples must be a 2-D (stored iteration, time) array")
        empty = np.empty(0)
        return cls(
            sample_iters=np.asarray(sample_iters, dtype=np.int64),
            samples=samples,
            log_joint=empty,
            switches=empty.astype(np.int64),
            accept_rate=empty,
            inner_ops=empty.astype(np.int64),
            seconds=empty,
        )


def stored_count(iterations: int, burn_in: int, thin: int) -> int:
    return max(0, (iterations - burn_in) // thin)


def drive_chain(
    step: StepFn,
    model: StateSpaceModel,
    x0: StateSeq,
    y: ObsSeq,
    iterations: int,
    burn_in: int,
    thin: int,
    rng: RngStream,
    progress: Optional[ProgressFn] = None,
) -> ChainRecord:
    """Apply ``step`` ``iterations`` times from x0, recording as configured.

    Iteration i (1-based) uses stream ``rng.child(i)``; it is stored when
    i > burn_in and (i - burn_in) is a multiple of ``thin``.
    """
    if burn_in > iterations or thin < 1:
        raise UsageError(f"invalid schedule iterations={iterations} burn_in={burn_in} thin={thin}")
    if not np.isfinite(log_joint(model, x0, y)):
        raise DomainError("initial sequence has zero posterior density")

    m = stored_count(iterations, burn_in, thin)
    n = len(x0)
    samples = np.empty((m, n), dtype=x0.values.dtype)
    sample_iters = np.empty(m, dtype=np.int64)
    lj = np.empty(iterations)
    switches = np.empty(iterations, dtype=np.int64)
    accept = np.empty(iterations)
    ops = np.empty(iterations, dtype=np.int64)
    seconds = np.empty(iterations)

    x = x0
    stored = 0
    for i in range(1, iterations + 1):
        start = time.perf_counter()
        out = step(i, x, rng.child(i))
        seconds[i - 1] = time.perf_counter() - start
        x = out.x
        lj[i - 1] = log_joint(model, x, y)
        switches[i - 1] = sign_switch_count(x)
        accept[i - 1] = out.accept_rate
        ops[i - 1] = out.inner_ops
        if i > burn_in and (i - burn_in) % thin == 0:
            if not np.isfinite(lj[i - 1]):
                raise NumericError(f"stored sample at iteration {i} has non-finite log density")
            samples[stored] = x.values
            sample_iters[stored] = i
            stored += 1
        if progress is not None:
            progress(i)

    logger.debug("chain finished: %d iterations, %d stored", iterations, stored)
    return ChainRecord(
        sample_iters=sample_iters,
        samples=samples,
        log_joint=lj,
        switches=switches,
        accept_rate=accept,
        inner_ops=ops,
        seconds=seconds,
    )
