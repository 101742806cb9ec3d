"""State-space model abstraction, sequence containers and the joint density.

All densities are handled in log space. ``-inf`` is a legal value (a zero
density); NaN always means a broken model and raises ``NumericError``.
Model callbacks must be pure and must broadcast over numpy arrays, so the
same callback serves scalar evaluation and whole-table construction.
"""

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from ehmm.core.config import settings
from ehmm.core.errors import DomainError, NumericError, UsageError

LogDensity1 = Callable[[Any], Any]
LogDensity2 = Callable[[Any, Any], Any]

_LOG_2PI = float(np.log(2.0 * np.pi))
_SUM_TOL = 1e-12


def gaussian_logpdf(x, mean, sd):
    """Log N(x | mean, sd**2), broadcasting over arrays."""
    z = (x - mean) / sd
    return -0.5 * z * z - np.log(sd) - 0.5 * _LOG_2PI


@dataclass(frozen=True)
class StateDescriptor:
    """What a state is: a real scalar or one of a finite set of labels."""

    kind: str = "real"
    labels: Optional[Tuple[Any, ...]] = None

    def __post_init__(self):
        if self.kind not in ("real", "finite"):
            raise UsageError(f"unknown state kind: {self.kind!r}")
        if self.kind == "finite" and not self.labels:
            raise UsageError("finite state descriptor needs a non-empty label set")

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def size(self) -> int:
        if not self.is_finite:
            raise UsageError("real state space has no finite size")
        return len(self.labels)

    @classmethod
    def real(cls) -> "StateDescriptor":
        return cls("real")

    @classmethod
    def finite(cls, labels: Sequence[Any]) -> "StateDescriptor":
        return cls("finite", tuple(labels))


def _frozen_array(values, dtype=None) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateSeq:
    """Immutable hidden state sequence x_0..x_{n-1}.

    Real-valued sequences hold float64; finite-state sequences hold integer
    label indexes.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.size < 1:
            raise UsageError("a state sequence needs at least one state")
        if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
            raise NumericError("state sequence contains non-finite values")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    def __getitem__(self, t):
        return self.values[t]

    def __iter__(self):
        return iter(self.values)

    def equals(self, other: "StateSeq") -> bool:
        return np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class ObsSeq:
    """Immutable observation sequence y_0..y_{n-1}."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.size < 1:
            raise UsageError("an observation sequence needs at least one value")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    def __getitem__(self, t):
        return self.values[t]


@dataclass(frozen=True)
class StateSpaceModel:
    """Initial, transition and emission log-densities defining pi(x | y)."""

    log_init: LogDensity1
    log_trans: LogDensity2
    log_emit: LogDensity2
    descriptor: StateDescriptor = field(default_factory=StateDescriptor.real)
    name: str = "model"


def _paired(x: StateSeq, y: ObsSeq) -> Tuple[np.ndarray, np.ndarray]:
    if len(x) != len(y):
        raise UsageError(
            f"state and observation sequences differ in length ({len(x)} != {len(y)})"
        )
    return x.values, y.values


def _checked(term, what: str) -> np.ndarray:
    arr = np.asarray(term, dtype=float)
    if np.isnan(arr).any():
        raise NumericError(f"model {what} log-density returned NaN")
    return arr


def log_joint(model: StateSpaceModel, x: StateSeq, y: ObsSeq) -> float:
    """log P(x_0) + sum log P(x_t | x_{t-1}) + sum log P(y_t | x_t)."""
    xs, ys = _paired(x, y)
    with np.errstate(divide="ignore"):
        init = _checked(model.log_init(xs[0]), "initial")
        trans = _checked(model.log_trans(xs[:-1], xs[1:]), "transition")
        emit = _checked(model.log_emit(xs, ys), "emission")
    return float(init) + float(np.sum(trans)) + float(np.sum(emit))


def log_posterior_unnorm(model: StateSpaceModel, x: StateSeq, y: ObsSeq) -> float:
    """Unnormalised log pi(x); the observation normaliser is constant in x."""
    return log_joint(model, x, y)


# Finite state spaces


def _log_table(probs, what: str, axis: int = -1) -> np.ndarray:
    table = np.asarray(probs, dtype=float)
    if np.any(table < 0) or np.isnan(table).any():
        raise DomainError(f"{what} probabilities must be non-negative numbers")
    sums = table.sum(axis=axis)
    if np.any(np.abs(sums - 1.0) > _SUM_TOL):
        raise DomainError(f"{what} probabilities do not sum to 1 (sums={sums})")
    with np.errstate(divide="ignore"):
        return np.log(table)


def make_finite_model(
    init_probs,
    trans_probs,
    emit_probs,
    labels: Optional[Sequence[Any]] = None,
    name: str = "finite",
) -> StateSpaceModel:
    """Build a finite-state model from probability tables.

    ``trans_probs[i, j] = P(x_t = j | x_{t-1} = i)`` and
    ``emit_probs[i, o] = P(y_t = o | x_t = i)``; states and observations are
    integer indexes.
    """
    log_pi = _log_table(init_probs, "initial")
    log_a = _log_table(trans_probs, "transition")
    log_b = _log_table(emit_probs, "emission")
    size = log_pi.shape[0]
    if log_a.shape != (size, size) or log_b.shape[0] != size:
        raise UsageError("finite model tables have inconsistent shapes")
    labels = tuple(labels) if labels is not None else tuple(range(size))

    def log_init(s):
        return log_pi[np.asarray(s, dtype=np.intp)]

    def log_trans(prev, s):
        return log_a[np.asarray(prev, dtype=np.intp), np.asarray(s, dtype=np.intp)]

    def log_emit(s, obs):
        return log_b[np.asarray(s, dtype=np.intp), np.asarray(obs, dtype=np.intp)]

    return StateSpaceModel(
        log_init=log_init,
        log_trans=log_trans,
        log_emit=log_emit,
        descriptor=StateDescriptor.finite(labels),
        name=name,
    )


def _require_finite(model: StateSpaceModel) -> np.ndarray:
    if not model.descriptor.is_finite:
        raise UsageError(f"model {model.name!r} does not have a finite state space")
    return np.arange(model.descriptor.size)


def finite_log_marginal_likelihood(model: StateSpaceModel, y: ObsSeq) -> float:
    """log P(y_0..y_{n-1}) of a finite model by a forward pass over labels."""
    states = _require_finite(model)
    ys = y.values
    with np.errstate(divide="ignore"):
        log_a = _checked(model.log_trans(states[:, None], states[None, :]), "transition")
        alpha = model.log_init(states) + model.log_emit(states, ys[0])
        for obs in ys[1:]:
            alpha = logsumexp(alpha[:, None] + log_a, axis=0) + model.log_emit(states, obs)
    return float(logsumexp(alpha))


def exact_posterior(model: StateSpaceModel, y: ObsSeq) -> Tuple[np.ndarray, np.ndarray]:
    """Enumerate every state sequence of a finite model with its posterior mass.

    Returns ``(sequences, probs)`` with sequences in lexicographic order.
    """
    states = _require_finite(model)
    n = len(y)
    count = states.size**n
    if count > settings.max_enumeration:
        raise UsageError(f"{count} sequences exceed the enumeration limit")
    seqs = np.array(list(itertools.product(states, repeat=n)), dtype=np.int64)
    logs = np.array([log_joint(model, StateSeq(s), y) for s in seqs])
    if not np.isfinite(logs).any():
        raise DomainError("every state sequence has zero posterior density")
    probs = np.exp(logs - logsumexp(logs))
    return seqs, probs
