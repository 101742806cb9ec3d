"""Baselines: single-site Metropolis and the grid-discretised exact-HMM oracle."""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from ehmm.core.errors import GridTooSmallWarning, UsageError
from ehmm.core.model import ObsSeq, StateSeq, StateSpaceModel, gaussian_logpdf
from ehmm.core.rng import Purpose, RngStream
from ehmm.models import GridSpec, MetropolisConfig, ProposalKind, TanhModelParams
from ehmm.services.chain import ChainRecord, ProgressFn, StepOutcome, drive_chain

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-6


# Single-site Metropolis


def _local_log_density(model: StateSpaceModel, xs: np.ndarray, ys: np.ndarray, t: int, v) -> float:
    """The (at most three) factors of the joint density that involve x_t = v."""
    lp = model.log_emit(v, ys[t])
    lp = lp + (model.log_init(v) if t == 0 else model.log_trans(xs[t - 1], v))
    if t + 1 < xs.size:
        lp = lp + model.log_trans(v, xs[t + 1])
    return float(lp)


def _sweep(
    model: StateSpaceModel, cfg: MetropolisConfig, x: StateSeq, y: ObsSeq, rng: RngStream
) -> Tuple[np.ndarray, int]:
    n = len(x)
    if len(y) != n:
        raise UsageError(f"state sequence length {n} != observation length {len(y)}")
    gen = rng.child(Purpose.PROPOSAL).generator()
    xs = np.array(x.values, copy=True)
    ys = y.values

    if cfg.proposal is ProposalKind.UNIFORM:
        if not model.descriptor.is_finite:
            raise UsageError("uniform proposals need a finite state space")
        proposals = gen.integers(model.descriptor.size, size=n)
    elif cfg.proposal is ProposalKind.INDEPENDENCE:
        proposals = cfg.proposal_mean + cfg.proposal_sd * gen.standard_normal(n)
    else:
        proposals = cfg.proposal_sd * gen.standard_normal(n)
    log_u = np.log(gen.random(n))

    accepted = 0
    with np.errstate(divide="ignore"):
        for t in range(n):
            old = xs[t]
            new = proposals[t] if cfg.proposal is not ProposalKind.RANDOM_WALK else old + proposals[t]
            log_ratio = _local_log_density(model, xs, ys, t, new) - _local_log_density(model, xs, ys, t, old)
            if cfg.proposal is ProposalKind.INDEPENDENCE:
                log_ratio += float(
                    gaussian_logpdf(old, cfg.proposal_mean, cfg.proposal_sd)
                    - gaussian_logpdf(new, cfg.proposal_mean, cfg.proposal_sd)
                )
            if log_u[t] < log_ratio:
                xs[t] = new
                accepted += 1
    return xs, accepted


def metropolis_sweep(
    model: StateSpaceModel, cfg: MetropolisConfig, x: StateSeq, y: ObsSeq, rng: RngStream
) -> StateSeq:
    """Update x_0..x_{n-1} in turn with Metropolis-Hastings on the local factors."""
    xs, _ = _sweep(model, cfg, x, y, rng)
    return StateSeq(xs)


def run_metropolis(
    model: StateSpaceModel,
    cfg: MetropolisConfig,
    x0: StateSeq,
    y: ObsSeq,
    progress: Optional[ProgressFn] = None,
) -> ChainRecord:
    """Run ``cfg.iterations`` sweeps from x0 on stream (seed, chain)."""

    def step(i: int, x: StateSeq, rng: RngStream) -> StepOutcome:
        xs, accepted = _sweep(model, cfg, x, y, rng)
        return StepOutcome(x=StateSeq(xs), accept_rate=accepted / len(xs))

    logger.info(
        "Metropolis chain %d: %s proposal, n=%d, %d sweeps",
        cfg.chain, cfg.proposal.value, len(y), cfg.iterations,
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


# Grid oracle


@dataclass(frozen=True, eq=False)
class OracleResult:
    """Smoothed marginals of the grid-discretised model."""

    grid: np.ndarray  # (m,) cell midpoints
    marginals: np.ndarray  # (n, m)
    p_positive: np.ndarray  # (n,)
    mean: np.ndarray  # (n,)
    sd: np.ndarray  # (n,)
    boundary_mass: np.ndarray  # (n,) mass in the two outermost cells
    log_evidence: float
    samples: Optional[np.ndarray] = None  # (draws, n) grid-valued sequences

    @property
    def grid_too_small(self) -> bool:
        return bool(np.max(self.boundary_mass) > BOUNDARY_TOL)


def grid_points(grid: GridSpec) -> np.ndarray:
    width = (grid.hi - grid.lo) / grid.m
    return grid.lo + (np.arange(grid.m) + 0.5) * width


def grid_oracle_marginals(
    p: TanhModelParams,
    y: ObsSeq,
    grid: GridSpec,
    draws: int = 0,
    rng: Optional[RngStream] = None,
    check_boundary: bool = True,
) -> OracleResult:
    """Exact forward-backward smoothing of the tanh model restricted to a grid.

    Transition rows are row-normalised Gaussian densities at the grid
    midpoints, so the discretised model is itself a finite HMM. With
    ``check_boundary`` a boundary mass above BOUNDARY_TOL is logged and
    emitted as GridTooSmallWarning.
    """
    g = grid_points(grid)
    ys = np.asarray(y.values, dtype=float)
    n, m = ys.size, g.size

    log_p = gaussian_logpdf(g[None, :], np.tanh(p.eta * g)[:, None], p.tau)
    log_p = log_p - logsumexp(log_p, axis=1, keepdims=True)
    trans = np.exp(log_p)
    log_pi = gaussian_logpdf(g, p.init_mean, p.init_sd)
    log_pi = log_pi - logsumexp(log_pi)

    log_e = gaussian_logpdf(ys[:, None], g[None, :], p.sigma)
    e_max = log_e.max(axis=1, keepdims=True)
    lik = np.exp(log_e - e_max)

    alpha = np.empty((n, m))
    c = np.empty(n)
    a = np.exp(log_pi) * lik[0]
    for t in range(n):
        if t > 0:
            a = (alpha[t - 1] @ trans) * lik[t]
        c[t] = a.sum()
        alpha[t] = a / c[t]

    beta = np.empty((n, m))
    beta[-1] = 1.0
    for t in range(n - 2, -1, -1):
        beta[t] = trans @ (beta[t + 1] * lik[t + 1]) / c[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)

    positive = g >= 0.0
    p_positive = gamma[:, positive].sum(axis=1)
    mean = gamma @ g
    sd = np.sqrt(np.maximum(gamma @ (g * g) - mean * mean, 0.0))
    boundary = gamma[:, 0] + gamma[:, -1]
    log_evidence = float(np.sum(np.log(c)) + np.sum(e_max))

    samples = None
    if draws > 0:
        if rng is None:
            raise UsageError("sampling from the grid oracle needs an RngStream")
        samples = _grid_backward_samples(alpha, trans, g, draws, rng)

    result = OracleResult(
        grid=g,
        marginals=gamma,
        p_positive=p_positive,
        mean=mean,
        sd=sd,
        boundary_mass=boundary,
        log_evidence=log_evidence,
        samples=samples,
    )
    if check_boundary and result.grid_too_small:
        worst = int(np.argmax(boundary))
        msg = (
            f"posterior mass {boundary[worst]:.3g} at the grid boundary (t={worst}); "
            f"widen [{grid.lo}, {grid.hi}]"
        )
        logger.warning(msg)
        warnings.warn(msg, GridTooSmallWarning, stacklevel=2)
    return result


def _grid_backward_samples(
    alpha: np.ndarray, trans: np.ndarray, g: np.ndarray, draws: int, rng: RngStream
) -> np.ndarray:
    gen = rng.child(Purpose.ORACLE).generator()
    n, m = alpha.shape
    out = np.empty((draws, n))
    for d in range(draws):
        cdf = np.cumsum(alpha[-1])
        k = int(np.searchsorted(cdf, gen.random() * cdf[-1], side="right"))
        out[d, -1] = g[k]
        for t in range(n - 2, -1, -1):
            cdf = np.cumsum(alpha[t] * trans[:, k])
            k = int(np.searchsorted(cdf, gen.random() * cdf[-1], side="right"))
            out[d, t] = g[k]
    return out
