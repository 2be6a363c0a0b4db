import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deepstable import (RecursionResult, UniformStream, gamma_recursion, gaussian_variance_recursion,
                        marginal_scale, sigma_recursion)
from deepstable.errors import ConfigurationError, ParameterDomainError

# (q_x, q_x', c, rho) for tanh, sigma_w^2 = sigma_b^2 = 2, x = 1, x' = -0.5; adaptive
# scipy quadrature (quad / dblquad), independent of the Gauss-Hermite rule
GAUSS_ORACLE = np.array([
    (4.0, 2.5, 1.0, 0.31622776601683794),
    (3.2705224685138803, 3.1176428605812765, 2.3254374952856605, 0.7282540700738233),
    (3.2070585456822904, 3.1915014266425077, 2.7978552129173786, 0.8745291111571881),
    (3.200711444970079, 3.1991318917735745, 2.997119368941966, 0.9366227585667402),
    (3.200068150348849, 3.1999078143816506, 3.0922357518951005, 0.9663273018231426),
])


def stream(seed=1, kind="pseudo"):
    return UniformStream(kind, seed)


# ---------------------------------------------------------------- sigma recursion

def test_first_layer_closed_form():
    res = sigma_recursion(1.5, 1.0, 1.0, [1.0], "tanh", 1, 100, stream())
    assert res.scales[0] == pytest.approx(2 ** (2 / 3), rel=1e-15)


def test_gaussian_correspondence():
    sw, sb = 1.0, 1.0
    res = sigma_recursion(2.0, sw, sb, [1.0], "tanh", 10, 10**6, stream(2))
    g = gaussian_variance_recursion(2 * sw**2, 2 * sb**2, [1.0], [1.0], "tanh", 10)
    assert np.all(np.abs(2 * np.array(res.scales) ** 2 / g.q_x - 1) < 0.01)


def test_seed_to_seed_spread_within_reported_error():
    a = sigma_recursion(1.5, 1.0, 1.0, [1.0], "tanh", 10, 10**5, stream(3))
    b = sigma_recursion(1.5, 1.0, 1.0, [1.0], "tanh", 10, 10**5, stream(4))
    se = np.hypot(a.accumulated_stderr, b.accumulated_stderr)
    diff = np.abs(np.subtract(a.scales, b.scales))
    assert np.all(diff[1:] < 3 * se[1:])
    assert diff[0] == 0.0


def test_accumulated_error_dominates_layer_error():
    res = sigma_recursion(1.2, 1.0, 0.5, [0.3, -0.4], "tanh", 6, 5000, stream(5))
    assert np.all(np.array(res.accumulated_stderr) >= np.array(res.stderr))
    assert res.sampling_cost == [0] + [5000] * 5


@settings(max_examples=15)
@given(st.floats(0.6, 2.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(-3, 3))
def test_sigma_bounds(alpha, sw, sb, x):
    res = sigma_recursion(alpha, sw, sb, [x], "tanh", 4, 500, stream(6))
    s = np.array(res.scales) ** alpha
    assert np.all(s >= sb**alpha * (1 - 1e-12))
    assert np.all(s[1:] <= (sb**alpha + sw**alpha) * (1 + 1e-12))


def test_deterministic_and_sobol():
    a = sigma_recursion(1.5, 1, 1, [1.0], "tanh", 5, 2**12, stream(7, "sobol"))
    b = sigma_recursion(1.5, 1, 1, [1.0], "tanh", 5, 2**12, stream(7, "sobol"))
    assert a.scales == b.scales
    ref = sigma_recursion(1.5, 1, 1, [1.0], "tanh", 5, 10**6, stream(8))
    assert np.allclose(a.scales, ref.scales, rtol=3e-3)


def test_rejected_activation_and_bad_sizes():
    with pytest.raises(ConfigurationError):
        sigma_recursion(1.5, 1, 1, [1.0], "relu", 3, 100, stream())
    with pytest.raises(ParameterDomainError):
        sigma_recursion(1.5, 1, 1, [1.0], "tanh", 0, 100, stream())


# ---------------------------------------------------------------- gamma recursion

def test_first_layer_atoms_by_hand():
    res = gamma_recursion(2.0, 1.0, 1.0, [[-0.5, 1.0]], "tanh", 1, 100, stream())
    m = res.measures[0]
    r2 = 1 / math.sqrt(2)
    assert np.allclose(m.directions, [[r2, r2], [-0.5 / math.sqrt(1.25), 1 / math.sqrt(1.25)]], rtol=1e-15)
    assert np.allclose(m.weights, [2.0, 1.25], rtol=1e-15)


def test_atom_count_bound():
    res = gamma_recursion(1.5, 1.0, 1.0, [[-0.5, 1.0]], "tanh", 4, 1000, stream(9))
    assert all(len(m) <= 1001 for m in res.measures[1:])


def test_gamma_deterministic():
    a = gamma_recursion(1.5, 1.0, 1.0, [[-0.5, 1.0]], "tanh", 3, 300, stream(10))
    b = gamma_recursion(1.5, 1.0, 1.0, [[-0.5, 1.0]], "tanh", 3, 300, stream(10))
    for ma, mb in zip(a.measures, b.measures):
        assert np.array_equal(ma.directions, mb.directions)
        assert np.array_equal(ma.weights, mb.weights)


@pytest.mark.parametrize("alpha", [0.9, 1.5])
def test_gamma_marginals_match_sigma(alpha):
    X = [[0.4, -1.5]]
    M = 3000  # sampling cost grows like M^2 for k = 2
    g = gamma_recursion(alpha, 1.0, 0.8, X, "tanh", 6, M, stream(11))
    for r in range(2):
        s = sigma_recursion(alpha, 1.0, 0.8, [X[0][r]], "tanh", 6, M, stream(12 + r))
        for l in range(1, 7):
            got = marginal_scale(g.measures[l - 1], alpha, r + 1)
            tol = 3 * math.hypot(g.accumulated_stderr[l - 1][r], s.accumulated_stderr[l - 1])
            assert abs(got - s.scales[l - 1]) <= tol + 1e-12


def test_result_json_round_trip():
    for res in (sigma_recursion(1.5, 1, 1, [1.0], "tanh", 3, 200, stream()),
                gamma_recursion(1.5, 1, 1, [[-0.5, 1.0]], "tanh", 3, 200, stream())):
        d = json.loads(json.dumps(res.to_dict()))
        assert len(d["layers"]) == 3
        assert {"M", "seed", "kind", "stderr"} <= d.keys()
        back = RecursionResult.from_dict(d)
        for l in (1, 2, 3):
            assert np.allclose(back.marginal_scales(l), res.marginal_scales(l), rtol=1e-15)


# ---------------------------------------------------------------- Gaussian recursion

def test_gaussian_initial_condition():
    g = gaussian_variance_recursion(1.0, 1.0, [1.0, 0.0], [0.0, 1.0], "tanh", 1)
    assert g.q_x[0] == 2.0


def test_gaussian_oracle():
    g = gaussian_variance_recursion(2.0, 2.0, [1.0], [-0.5], "tanh", 5)
    got = np.column_stack([g.q_x, g.q_xp, g.c, g.rho])
    # 64 nodes resolve tanh(2z)^2 only to ~5e-5: its poles sit at distance pi/4
    assert np.max(np.abs(got / GAUSS_ORACLE - 1)) < 1e-4
    fine = gaussian_variance_recursion(2.0, 2.0, [1.0], [-0.5], "tanh", 5, quad_points=256)
    got = np.column_stack([fine.q_x, fine.q_xp, fine.c, fine.rho])
    assert np.max(np.abs(got / GAUSS_ORACLE - 1)) < 1e-8


def test_gaussian_relu_closed_form():
    # E[relu(sqrt(q) z)^2] = q / 2
    sw2, sb2 = 1.5, 0.3
    g = gaussian_variance_recursion(sw2, sb2, [2.0], [2.0], "relu", 6)
    q = [sb2 + sw2 * 4.0]
    for _ in range(5):
        q.append(sb2 + sw2 * q[-1] / 2)
    assert np.allclose(g.q_x, q, rtol=1e-12)


def test_identical_inputs_fully_correlated():
    g = gaussian_variance_recursion(1.7, 0.4, [0.3, -1.0], [0.3, -1.0], "tanh", 10)
    assert np.all(np.abs(g.rho - 1) < 1e-10)


@settings(max_examples=25)
@given(st.floats(0.1, 5), st.floats(0, 5), st.lists(st.floats(-3, 3), min_size=2, max_size=2),
       st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_correlation_bounded(sw2, sb2, x, xp):
    if sb2 == 0 and (not any(x) or not any(xp)):
        return
    g = gaussian_variance_recursion(sw2, sb2, x, xp, "tanh", 6)
    assert np.all(np.abs(g.rho) <= 1 + 1e-8)


def test_gaussian_domain():
    with pytest.raises(ParameterDomainError):
        gaussian_variance_recursion(1.0, 1.0, [1.0], [1.0], "tanh", 3, quad_points=8)
    with pytest.raises(ParameterDomainError):
        gaussian_variance_recursion(0.0, 1.0, [1.0], [1.0], "tanh", 3)
