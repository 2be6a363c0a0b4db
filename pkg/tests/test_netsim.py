import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from deepstable import (ActivationSpec, Envelope, NetworkConfig, StableParams, UniformStream,
                        estimate_scale, forward_conditional, forward_network, get_activation,
                        stable_cdf, validate_envelope)
from deepstable.errors import ConfigurationError, NumericalError, ParameterDomainError, ShapeError
from deepstable.netsim import _check_flags, conditional_measure, conditional_scale, resolve_workers
from deepstable.spectral import marginal_scale
from deepstable.stats import empirical_cf, ks_distance, ks_two_sample

from conftest import KS_1PCT_TWO_SAMPLE, N

TWO_INPUTS = [[-0.5, 1.0]]


# ---------------------------------------------------------------- envelope gate

@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
def test_tanh_accepted(alpha):
    assert validate_envelope(get_activation("tanh"), alpha).accepted


@pytest.mark.parametrize("name", ["relu", "identity"])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
def test_linear_growth_rejected(name, alpha):
    report = validate_envelope(get_activation(name), alpha)
    assert not report.accepted
    assert report.violations


@given(st.sampled_from(["relu", "identity"]), st.floats(0.1, 2.0),
       st.floats(1e-3, 1e6), st.floats(1e-3, 1e6), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_no_witness_rescues_linear_growth(name, alpha, a, b, frac_gamma, frac_beta):
    gamma = frac_gamma / alpha
    beta = frac_beta / gamma
    act = get_activation(name)
    candidate = ActivationSpec(name, act.fn, Envelope(a, b, beta, gamma))
    assert not validate_envelope(candidate, alpha).accepted


def test_witness_inequalities_checked():
    tanh = get_activation("tanh")
    assert not validate_envelope(ActivationSpec("t", tanh.fn, Envelope(1, 1, 1, 0.7)), 1.5)
    assert not validate_envelope(ActivationSpec("t", tanh.fn, Envelope(1, 1, 3, 0.45)), 1.5)
    assert not validate_envelope(ActivationSpec("t", tanh.fn, None), 1.5)


def test_custom_sublinear_activation_accepted():
    # sign(s) |s|^0.3 is covered by (1 + |s|)^0.3 for alpha < 1/0.3
    act = ActivationSpec("root", lambda s: np.sign(s) * np.abs(s) ** 0.3, Envelope(1, 1, 1, 0.3))
    assert validate_envelope(act, 2.0).accepted


def test_config_validation():
    with pytest.raises(ConfigurationError):
        NetworkConfig.build(1.5, 1, 1, 1, 2, 10, "relu")
    with pytest.raises(ConfigurationError):
        NetworkConfig(1, 2, 10, StableParams(1.5), StableParams(1.2))
    with pytest.raises(ParameterDomainError):
        NetworkConfig.build(1.5, 1, 1, 1, 0, 10)
    with pytest.raises(ParameterDomainError):
        get_activation("gelu")


# ---------------------------------------------------------------- forward_network

def test_output_shape_and_unit_extension():
    cfg = NetworkConfig.build(1.5, 1, 1, 1, 3, 8)
    out = forward_network(cfg, TWO_INPUTS, UniformStream("pseudo", 1), 3, units=(1, 20, 1), repeats=5)
    assert out.values.shape == (5, 3, 2)
    assert np.array_equal(out.values[:, 0], out.values[:, 2])
    assert out.n_flagged == 0


def test_input_shape_checked():
    cfg = NetworkConfig.build(1.5, 1, 1, 2, 2, 8)
    with pytest.raises(ShapeError):
        forward_network(cfg, [1.0, 2.0, 3.0], UniformStream(), repeats=2)


@pytest.mark.parametrize("alpha", [0.8, 1.5])
def test_layer_one_law(alpha):
    x = np.array([0.3, -1.2, 2.0])
    cfg = NetworkConfig.build(alpha, 0.7, 1.3, 3, 1, 5)
    out = forward_network(cfg, x, UniformStream("pseudo", 2), 1, repeats=N).values[:, 0, 0]
    sigma = (0.7**alpha * np.sum(np.abs(x) ** alpha) + 1.3**alpha) ** (1 / alpha)
    assert ks_distance(out, lambda v: stable_cdf(StableParams(alpha, sigma), v)) < 0.01


def test_units_exchangeable():
    cfg = NetworkConfig.build(1.2, 1, 1, 1, 2, 10)
    out = forward_network(cfg, [0.7], UniformStream("pseudo", 3), 2, units=(1, 2), repeats=N).values
    assert ks_two_sample(out[:, 0, 0], out[:, 1, 0]) < KS_1PCT_TWO_SAMPLE


def test_input_permutation_invariance():
    cfg = NetworkConfig.build(1.3, 1, 1, 3, 1, 4)
    x = np.array([0.5, -2.0, 1.0])
    a = forward_network(cfg, x, UniformStream("pseudo", 4), repeats=N).values.ravel()
    b = forward_network(cfg, x[[2, 0, 1]], UniformStream("pseudo", 5), repeats=N).values.ravel()
    assert ks_two_sample(a, b) < KS_1PCT_TWO_SAMPLE


def test_scale_equivariance_layer_one():
    c = 2.5
    x = [1.0, -0.4]
    base = NetworkConfig.build(1.6, 1.0, 0.5, 2, 1, 3)
    scaled = NetworkConfig.build(1.6, c, c * 0.5, 2, 1, 3)
    s0 = estimate_scale(forward_network(base, x, UniformStream("pseudo", 6), repeats=N).values, 1.6)
    s1 = estimate_scale(forward_network(scaled, x, UniformStream("pseudo", 7), repeats=N).values, 1.6)
    assert abs(s1 / s0 / c - 1) < 0.03


def test_worker_count_does_not_change_results():
    cfg = NetworkConfig.build(1.5, 1, 1, 1, 3, 12)
    a = forward_network(cfg, TWO_INPUTS, UniformStream("pseudo", 8), repeats=200, workers=1).values
    b = forward_network(cfg, TWO_INPUTS, UniformStream("pseudo", 8), repeats=200, workers=3).values
    assert np.array_equal(a, b)


def test_worker_env(monkeypatch):
    monkeypatch.setenv("STABLE_LIMITS_THREADS", "3")
    assert resolve_workers() == 3
    monkeypatch.setenv("STABLE_LIMITS_THREADS", "0")
    assert resolve_workers() >= 1


def test_non_finite_repeats_raise():
    cfg = NetworkConfig.build(1.5, 1, 1, 1, 2, 4)
    with pytest.raises(NumericalError) as info:
        forward_network(cfg, [1e308], UniformStream("pseudo", 9), repeats=100)
    assert info.value.diagnostics["flagged"] > 0


def test_flag_threshold():
    flags = np.zeros(10_000, bool)
    flags[:10] = True
    _check_flags(flags, 10_000)
    flags[10] = True
    with pytest.raises(NumericalError):
        _check_flags(flags, 10_000)


# ---------------------------------------------------------------- conditional path

def test_conditional_layer_one_is_forward_network():
    cfg = NetworkConfig.build(1.5, 1, 1, 1, 2, 6)
    a = forward_conditional(cfg, TWO_INPUTS, UniformStream("pseudo", 10), 1, repeats=50).values
    b = forward_network(cfg, TWO_INPUTS, UniformStream("pseudo", 10), 1, repeats=50).values[:, 0]
    assert np.array_equal(a, b)


def test_conditional_scale_by_hand():
    cfg = NetworkConfig.build(1.5, 2.0, 0.5, 1, 2, 3)
    prev = np.array([0.2, -1.0, 3.0])
    by_hand = (0.5**1.5 + 2.0**1.5 * np.sum(np.abs(np.tanh(prev)) ** 1.5) / 3) ** (1 / 1.5)
    assert conditional_scale(cfg, prev) == pytest.approx(by_hand, rel=1e-14)
    m = conditional_measure(cfg, prev)
    assert marginal_scale(m, 1.5, 1) == pytest.approx(by_hand, rel=1e-14)


def test_conditional_measure_skips_zero_activations():
    cfg = NetworkConfig.build(1.5, 1, 1, 1, 2, 3)
    m = conditional_measure(cfg, np.array([[0.0, 0.0], [1.0, 2.0], [0.0, 0.0]]))
    assert len(m) == 2


def test_conditional_matches_network_two_inputs():
    cfg = NetworkConfig.build(1.5, 1, 1, 1, 2, 300)
    net = forward_network(cfg, TWO_INPUTS, UniformStream("pseudo", 11), 2, repeats=N).values[:, 0]
    cond = forward_conditional(cfg, TWO_INPUTS, UniformStream("pseudo", 12), 2, repeats=N).values
    for r in range(2):
        assert ks_two_sample(net[:, r], cond[:, r]) < KS_1PCT_TWO_SAMPLE


def test_conditional_matches_network_one_input():
    cfg = NetworkConfig.build(1.1, 1, 1, 1, 3, 20)
    net = forward_network(cfg, [0.8], UniformStream("pseudo", 13), 3, repeats=N).values[:, 0, 0]
    cond = forward_conditional(cfg, [0.8], UniformStream("pseudo", 14), 3, repeats=N).values[:, 0]
    assert ks_two_sample(net, cond) < KS_1PCT_TWO_SAMPLE


def test_units_asymptotically_independent():
    cfg = NetworkConfig.build(1.5, 1, 1, 1, 2, 300)
    out = forward_network(cfg, [1.0], UniformStream("pseudo", 15), 2, units=(1, 2), repeats=N).values
    f = out[:, :, 0]
    for t1, t2 in [(0.5, 0.5), (1.0, -1.0), (0.3, 1.5)]:
        joint = empirical_cf(f, [[t1, t2]])[0]
        prod = empirical_cf(f[:, 0], [t1])[0] * empirical_cf(f[:, 1], [t2])[0]
        assert abs(joint - prod) < 0.02
