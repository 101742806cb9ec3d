import numpy as np
import pytest
from scipy.stats import chisquare

from ehmm.core.errors import DomainError, UsageError
from ehmm.core.model import ObsSeq, StateSeq, exact_posterior, log_joint, make_finite_model
from ehmm.core.rng import RngStream
from ehmm.services.ehmm import (
    EhmmConfig,
    ehmm_step,
    ehmm_transition,
    enumerate_transition_matrix,
    pool_support_ok,
    run_chain,
)
from ehmm.models import GaussPoolParams
from ehmm.services.pools import identity_kernel
from ehmm.services.tanh_model import (
    make_gauss_pool_kernel,
    make_pool_kernels,
    make_tanh_model,
    pool_params_from_obs,
    simulate,
)


def _check_detailed_balance(model, kernels, K, y):
    seqs, Q = enumerate_transition_matrix(model, kernels, K, y)
    _, post = exact_posterior(model, y)
    assert np.allclose(Q.sum(axis=1), 1.0, atol=1e-12)
    flow = post[:, None] * Q
    rel = np.abs(flow - flow.T)[flow > 0] / flow[flow > 0]
    assert rel.max() < 1e-10
    assert np.allclose(post @ Q, post, atol=1e-12)
    return seqs, Q, post


def test_detailed_balance_binary(binary_model, binary_kernel):
    y = ObsSeq(np.array([0, 1]))
    _check_detailed_balance(binary_model, [binary_kernel] * 2, 2, y)


def test_detailed_balance_non_reversible_kernel(toy_model, cyclic_kernel):
    y = ObsSeq(np.array([1, 0]))
    _, Q, _ = _check_detailed_balance(toy_model, [cyclic_kernel] * 2, 2, y)
    # The chain actually moves.
    assert np.diag(Q).max() < 1.0


def test_detailed_balance_mixed_kernels(toy_model, metropolis_kernel, cyclic_kernel, obs_short):
    _check_detailed_balance(toy_model, [metropolis_kernel, cyclic_kernel, metropolis_kernel], 2, obs_short)


def test_identity_kernel_never_moves(toy_model, obs_short):
    kernel = identity_kernel([0.2, 0.3, 0.5])
    cfg = EhmmConfig(K=4, kernels=[kernel] * 3)
    x = StateSeq(np.array([2, 0, 1]))
    for i in range(5):
        assert ehmm_transition(toy_model, cfg, x, obs_short, RngStream(3, (i,))).equals(x)


def test_k1_returns_current(demo_params):
    model = make_tanh_model(demo_params)
    x, y = simulate(demo_params, 20, RngStream(1))
    cfg = EhmmConfig(K=1, kernels=make_pool_kernels(pool_params_from_obs("fixed", y, demo_params)))
    step = ehmm_step(model, cfg, x, y, RngStream(2))
    assert step.x.equals(x)
    assert step.moved_fraction == 0.0


def test_current_sequence_is_in_pools(demo_params):
    model = make_tanh_model(demo_params)
    x, y = simulate(demo_params, 15, RngStream(4))
    cfg = EhmmConfig(K=5, kernels=lambda t: make_gauss_pool_kernel(GaussPoolParams(mu=0.0, nu=1.0)))
    step = ehmm_step(model, cfg, x, y, RngStream(5))
    for t, pool in enumerate(step.pools):
        assert pool.states[step.current[t]] == x[t]
        assert step.x[t] == pool.states[step.path[t]]


@pytest.mark.parametrize("draws", [20_000, pytest.param(100_000, marks=pytest.mark.acceptance)])
def test_posterior_invariance_statistical(binary_model, binary_kernel, draws):
    y = ObsSeq(np.array([0, 1]))
    seqs, post = exact_posterior(binary_model, y)
    cfg = EhmmConfig(K=2, kernels=[binary_kernel] * 2)
    gen = np.random.default_rng(2024)
    starts = gen.choice(len(seqs), size=draws, p=post)
    rng = RngStream(77)
    ends = np.empty(draws, dtype=np.int64)
    for i, a in enumerate(starts):
        x = ehmm_transition(binary_model, cfg, StateSeq(seqs[a]), y, rng.child(i))
        ends[i] = np.ravel_multi_index(tuple(x.values), (2, 2))
    observed = np.bincount(ends, minlength=len(seqs))
    assert chisquare(observed, post * draws).pvalue > 1e-4


def test_chain_targets_posterior(toy_model, metropolis_kernel, obs_short):
    seqs, post = exact_posterior(toy_model, obs_short)
    cfg = EhmmConfig(K=3, kernels=[metropolis_kernel] * 3, iterations=8000, burn_in=200, seed=6)
    rec = run_chain(toy_model, cfg, StateSeq(np.array([0, 0, 0])), obs_short)
    codes = np.ravel_multi_index(tuple(rec.samples.astype(np.int64).T), (3, 3, 3))
    freq = np.bincount(codes, minlength=len(seqs)) / rec.n_stored
    assert 0.5 * np.abs(freq - post).sum() < 0.06


def test_chain_schedule_and_determinism(demo_params):
    model = make_tanh_model(demo_params)
    x, y = simulate(demo_params, 30, RngStream(10))
    kernels = make_pool_kernels(pool_params_from_obs("fixed", y, demo_params))
    cfg = EhmmConfig(K=4, kernels=kernels, iterations=10, burn_in=3, thin=2, seed=9)
    x0 = StateSeq(y.values)
    a = run_chain(model, cfg, x0, y)
    b = run_chain(model, cfg, x0, y)
    assert a.sample_iters.tolist() == [5, 7, 9]
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.log_joint, b.log_joint)
    assert a.log_joint[8] == log_joint(model, StateSeq(a.samples[-1]), y)
    assert np.all(a.inner_ops == 2 * 29 * 16)

    other = run_chain(model, cfg.model_copy(update={"chain": 1}), x0, y)
    assert not np.array_equal(a.samples, other.samples)


def test_burn_in_equal_to_iterations_stores_nothing(demo_params):
    model = make_tanh_model(demo_params)
    x, y = simulate(demo_params, 10, RngStream(10))
    cfg = EhmmConfig(K=3, kernels=make_pool_kernels(pool_params_from_obs("fixed", y, demo_params)), iterations=4, burn_in=4)
    rec = run_chain(model, cfg, x, y)
    assert rec.n_stored == 0 and rec.iterations == 4


def test_config_validation(binary_kernel):
    with pytest.raises(ValueError):
        EhmmConfig(K=0, kernels=[binary_kernel])
    with pytest.raises(ValueError):
        EhmmConfig(K=2, kernels=[binary_kernel], iterations=3, burn_in=4)
    with pytest.raises(UsageError):
        EhmmConfig(K=2, kernels=[binary_kernel]).kernels_for(3)


def test_zero_density_start_rejected():
    model = make_finite_model([1.0, 0.0], [[0.5, 0.5], [0.5, 0.5]], [[1.0], [1.0]])
    kernel = identity_kernel([0.5, 0.5])
    cfg = EhmmConfig(K=2, kernels=[kernel] * 2, iterations=2)
    with pytest.raises(DomainError):
        run_chain(model, cfg, StateSeq(np.array([1, 0])), ObsSeq(np.array([0, 0])))


def test_demo_pool_support(demo_params):
    _, y = simulate(demo_params, 5, RngStream(1))
    kernels = make_pool_kernels(pool_params_from_obs("fixed", y, demo_params))
    assert pool_support_ok(kernels, np.linspace(-10.0, 10.0, 101))

