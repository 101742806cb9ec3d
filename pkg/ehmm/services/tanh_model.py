"""Tanh-drift Gaussian state-space model, its simulator and Gaussian pool kernels.

    P(x_0)            = N(x_0 | init_mean, init_sd**2)   (N(0, 1) by default)
    P(x_t | x_{t-1})  = N(x_t | tanh(eta * x_{t-1}), tau**2)
    P(y_t | x_t)      = N(y_t | x_t, sigma**2)

Pool kernels are Gaussian AR(1) moves
R_t(x' | x) = N(x' | mu_t + alpha (x - mu_t), (1 - alpha**2) nu_t**2),
which are reversible with respect to rho_t = N(mu_t, nu_t**2).
"""

import logging
from typing import List, Optional, Tuple, Union

import numpy as np

from ehmm.core.errors import UsageError
from ehmm.core.model import ObsSeq, StateDescriptor, StateSeq, StateSpaceModel, gaussian_logpdf
from ehmm.core.rng import RngStream
from ehmm.models import GaussPoolParams, PoolStrategy, TanhModelParams
from ehmm.services.pools import PoolKernel

logger = logging.getLogger(__name__)


def make_tanh_model(p: TanhModelParams) -> StateSpaceModel:
    """The tanh model as a StateSpaceModel with vectorised log-densities."""
    sigma, eta, tau = p.sigma, p.eta, p.tau
    init_mean, init_sd = p.init_mean, p.init_sd

    def log_init(x):
        return gaussian_logpdf(x, init_mean, init_sd)

    def log_trans(prev, x):
        return gaussian_logpdf(x, np.tanh(eta * prev), tau)

    def log_emit(x, y):
        return gaussian_logpdf(y, x, sigma)

    return StateSpaceModel(
        log_init=log_init,
        log_trans=log_trans,
        log_emit=log_emit,
        descriptor=StateDescriptor.real(),
        name=f"tanh(sigma={sigma}, eta={eta}, tau={tau})",
    )


def simulate(
    p: TanhModelParams, n: int, rng: RngStream, x0: Optional[float] = None
) -> Tuple[StateSeq, ObsSeq]:
    """Ancestral sampling of states and observations.

    ``x0`` pins the initial state instead of drawing it from P(x_0).
    """
    if n < 1:
        raise UsageError(f"sequence length must be >= 1, got {n}")
    gen = rng.generator()
    z = gen.standard_normal(n)
    e = gen.standard_normal(n)
    x = np.empty(n)
    x[0] = p.init_mean + p.init_sd * z[0] if x0 is None else float(x0)
    for t in range(1, n):
        x[t] = np.tanh(p.eta * x[t - 1]) + p.tau * z[t]
    y = x + p.sigma * e
    logger.debug("simulated n=%d from %s", n, p)
    return StateSeq(x), ObsSeq(y)


def make_gauss_pool_kernel(g: GaussPoolParams) -> PoolKernel:
    """Gaussian AR(1) pool kernel; step_rev is step_fwd since it is reversible."""
    mu, nu, alpha = g.mu, g.nu, g.alpha
    step_sd = float(np.sqrt(1.0 - alpha * alpha) * nu)

    def log_rho(x):
        return gaussian_logpdf(x, mu, nu)

    def log_step(x, x1):
        return gaussian_logpdf(x1, mu + alpha * (np.asarray(x) - mu), step_sd)

    def step(x, gen: np.random.Generator) -> float:
        return float(mu + alpha * (x - mu) + step_sd * gen.standard_normal())

    return PoolKernel(
        log_rho=log_rho,
        step_fwd=step,
        step_rev=step,
        log_step=log_step,
        reversible=True,
        name=f"gauss(mu={mu}, nu={nu}, alpha={alpha})",
    )


def pool_params_from_obs(
    strategy: Union[PoolStrategy, str],
    y: ObsSeq,
    p: TanhModelParams,
    mu: float = 0.0,
    nu: float = 1.0,
    alpha: float = 0.0,
) -> List[GaussPoolParams]:
    """Per-time pool parameters: constant (mu, nu), or mu_t = y_t and nu_t = sigma."""
    strategy = PoolStrategy(strategy)
    if strategy is PoolStrategy.FIXED:
        fixed = GaussPoolParams(mu=mu, nu=nu, alpha=alpha)
        return [fixed] * len(y)
    return [GaussPoolParams(mu=float(v), nu=p.sigma, alpha=alpha) for v in y.values]


def make_pool_kernels(params: List[GaussPoolParams]) -> List[PoolKernel]:
    """One kernel per time step, sharing kernels for repeated parameters."""
    cache = {}
    kernels = []
    for g in params:
        key = (g.mu, g.nu, g.alpha)
        if key not in cache:
            cache[key] = make_gauss_pool_kernel(g)
        kernels.append(cache[key])
    return kernels
