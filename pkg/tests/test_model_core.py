import itertools

import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import norm

from ehmm.core.errors import DomainError, NumericError, UsageError
from ehmm.core.model import (
    ObsSeq,
    StateDescriptor,
    StateSeq,
    StateSpaceModel,
    exact_posterior,
    finite_log_marginal_likelihood,
    gaussian_logpdf,
    log_joint,
    log_posterior_unnorm,
    make_finite_model,
)
from ehmm.core.rng import Purpose, RngStream
from ehmm.services.tanh_model import make_tanh_model


def test_gaussian_logpdf_matches_scipy():
    x = np.linspace(-4.0, 4.0, 17)
    assert np.allclose(gaussian_logpdf(x, 0.3, 1.7), norm.logpdf(x, 0.3, 1.7), rtol=0, atol=1e-13)


def test_log_joint_tanh_by_hand(demo_params):
    model = make_tanh_model(demo_params)
    x = StateSeq([0.5, -0.2, 1.1])
    y = ObsSeq([1.0, 0.0, -2.0])
    expected = (
        norm.logpdf(0.5, 0.0, 1.0)
        + norm.logpdf(-0.2, np.tanh(2.5 * 0.5), 0.4)
        + norm.logpdf(1.1, np.tanh(2.5 * -0.2), 0.4)
        + norm.logpdf([1.0, 0.0, -2.0], [0.5, -0.2, 1.1], 2.5).sum()
    )
    assert log_joint(model, x, y) == pytest.approx(expected, abs=1e-12)
    assert log_posterior_unnorm(model, x, y) == log_joint(model, x, y)


def test_single_state_sequence_has_no_transition_terms(demo_params):
    model = make_tanh_model(demo_params)
    lj = log_joint(model, StateSeq([0.3]), ObsSeq([1.2]))
    assert lj == pytest.approx(norm.logpdf(0.3) + norm.logpdf(1.2, 0.3, 2.5), abs=1e-12)


def test_log_joint_length_mismatch(demo_params):
    model = make_tanh_model(demo_params)
    with pytest.raises(UsageError):
        log_joint(model, StateSeq([0.0, 1.0]), ObsSeq([0.0]))


def test_zero_density_is_minus_inf_not_error():
    model = make_finite_model(
        init_probs=[1.0, 0.0],
        trans_probs=[[0.5, 0.5], [0.5, 0.5]],
        emit_probs=[[1.0], [1.0]],
    )
    lj = log_joint(model, StateSeq(np.array([1, 0])), ObsSeq(np.array([0, 0])))
    assert lj == -np.inf


def test_nan_from_callback_is_numeric_error():
    model = StateSpaceModel(
        log_init=lambda x: 0.0 * x,
        log_trans=lambda a, b: 0.0 * b,
        log_emit=lambda x, y: np.full(np.shape(x), np.nan),
    )
    with pytest.raises(NumericError):
        log_joint(model, StateSeq([0.0, 1.0]), ObsSeq([0.0, 0.0]))


def test_state_seq_is_immutable_and_rejects_nan():
    x = StateSeq([1.0, 2.0])
    with pytest.raises(ValueError):
        x.values[0] = 5.0
    with pytest.raises(NumericError):
        StateSeq([1.0, np.nan])
    with pytest.raises(UsageError):
        StateSeq([])


def test_state_descriptor():
    assert not StateDescriptor.real().is_finite
    d = StateDescriptor.finite(["a", "b"])
    assert d.is_finite and d.size == 2
    with pytest.raises(UsageError):
        StateDescriptor("finite", ())
    with pytest.raises(UsageError):
        StateDescriptor.real().size


def test_finite_model_rejects_improper_tables():
    with pytest.raises(DomainError):
        make_finite_model([0.5, 0.6], [[1, 0], [0, 1]], [[1.0], [1.0]])
    with pytest.raises(DomainError):
        make_finite_model([0.5, 0.5], [[0.9, 0.2], [0, 1]], [[1.0], [1.0]])
    with pytest.raises(DomainError):
        make_finite_model([1.5, -0.5], [[1, 0], [0, 1]], [[1.0], [1.0]])


def test_marginal_likelihood_matches_enumeration(toy_model, obs_short):
    logs = [
        log_joint(toy_model, StateSeq(np.array(s)), obs_short)
        for s in itertools.product(range(3), repeat=len(obs_short))
    ]
    assert finite_log_marginal_likelihood(toy_model, obs_short) == pytest.approx(
        logsumexp(logs), abs=1e-12
    )


def test_exact_posterior_is_normalised(toy_model, obs_short):
    seqs, probs = exact_posterior(toy_model, obs_short)
    assert seqs.shape == (27, 3)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(seqs[1], [0, 0, 1])


def test_exact_posterior_needs_finite_model(demo_params):
    with pytest.raises(UsageError):
        exact_posterior(make_tanh_model(demo_params), ObsSeq([0.0]))


def test_rng_streams_reproducible_and_independent():
    a = RngStream(7, (0, 3)).generator().random(5)
    b = RngStream(7, (0, 3)).generator().random(5)
    c = RngStream(7, (0, 4)).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(7).child(0, Purpose.POOL) == RngStream(7, (0, 0))


def test_rng_rejects_bad_seed():
    with pytest.raises(UsageError):
        RngStream(-1)
    with pytest.raises(UsageError):
        RngStream(2**64)
    with pytest.raises(UsageError):
        RngStream(1, (0, -2))
