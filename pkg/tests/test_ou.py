import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

import oracles
from phi4torus.ou import (NoiseStream, OUEnsemble, burn_in_bias, burn_in_trees, combine_increments, decay_rate,
                          default_burn_in, hermitian_normal, linear_update, ou_increment, ou_init_stationary,
                          ou_noise_variance, ou_step, stationary_variance, tree_convolved_step, tree_first,
                          tree_resonant, tree_snapshot, tree_wick2)
from phi4torus.renorm import RenormConstants, renorm_c2, renorm_c2_discrete, renorm_constants
from phi4torus.torus import NORM, SpectralField


def mode(field, k):
    Kc = field.cutoffs
    return field.coeffs[..., k[0] + Kc[0], k[1] + Kc[1], k[2] + Kc[2]]


def is_hermitian(c):
    return np.array_equal(c, np.conj(c[..., ::-1, ::-1, ::-1]))


def test_noise_stream_is_reproducible():
    a = NoiseStream(7, 1, 2).generator.standard_normal(5)
    b = NoiseStream(7, 1, 2).generator.standard_normal(5)
    c = NoiseStream(7, 1, 3).generator.standard_normal(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    d = NoiseStream(7, 1).child(2).generator.standard_normal(5)
    assert np.array_equal(a, d)


def test_hermitian_normal_moments():
    c = hermitian_normal(NoiseStream(1), 1, (40000,))
    assert is_hermitian(c)
    assert np.all(c[:, 1, 1, 1].imag == 0)
    second = np.mean(np.abs(c) ** 2, axis=0)
    assert np.max(np.abs(second - 1)) < 0.05
    pair = np.mean(c[:, 2, 1, 0] * c[:, 0, 1, 2], axis=0)  # k and -k
    same = np.mean(c[:, 2, 1, 0] ** 2, axis=0)
    assert abs(pair - 1) < 0.05 and abs(same) < 0.05


def test_stationary_marginals():
    K, m0, n = 2, 1.0, 20000
    ens = ou_init_stationary(K, m0, NoiseStream(2), (n,))
    v = stationary_variance(K, m0)
    var = np.mean(np.abs(ens.z.coeffs) ** 2, axis=0)
    # |c|^2 is exponential (chi-square for k=0), so its SE is at most sqrt(2) v / sqrt(n)
    assert np.all(np.abs(var - v) <= 4 * math.sqrt(2) * v / math.sqrt(n))
    k = (1, 2, 0)
    sd = math.sqrt(0.5 / (5 + m0**2) / 2)
    assert stats.kstest(mode(ens.z, k).real / sd, "norm").pvalue > 1e-3
    assert stats.kstest(mode(ens.z, k).imag / sd, "norm").pvalue > 1e-3


def test_lag_covariance_single_mode():
    m0, n, tau = 1.0, 20000, 0.3
    rng = NoiseStream(3)
    e0 = ou_init_stationary(1, m0, rng, (n,))
    e1 = ou_step(e0, tau, rng)
    k = (1, 0, 0)
    prod = mode(e1.z, k) * np.conj(mode(e0.z, k))
    target = math.exp(-tau * 2.0) / (2 * 2.0)
    assert abs(prod.mean().real - target) <= 4 * prod.real.std() / math.sqrt(n)
    assert e1.t == pytest.approx(tau)


def test_deterministic_decay():
    ens = ou_init_stationary(2, 0.7, NoiseStream(4))
    A = decay_rate(2, 0.7)
    out = ou_step(ens, 0.25, noise=np.zeros_like(ens.z.coeffs))
    np.testing.assert_allclose(out.z.coeffs, np.exp(-0.25 * A) * ens.z.coeffs, rtol=1e-15)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(1e-4, 3), b=st.floats(1e-4, 3), A=st.floats(1e-2, 50))
def test_increment_variances_compose(a, b, A):
    A = np.array(A)
    lhs = np.exp(-2 * b * A) * ou_noise_variance(A, a) + ou_noise_variance(A, b)
    assert lhs == pytest.approx(ou_noise_variance(A, a + b), rel=1e-12)


def test_combined_increment_is_a_single_step():
    K, m0, a, b = 1, 1.0, 0.2, 0.3
    A = decay_rate(K, m0)
    rng = NoiseStream(5)
    ens = ou_init_stationary(K, m0, rng, (3,))
    n1, n2 = ou_increment(rng, K, m0, a, (3,)), ou_increment(rng, K, m0, b, (3,))
    two = ou_step(ou_step(ens, a, noise=n1), b, noise=n2)
    one = ou_step(ens, a + b, noise=combine_increments(n1, n2, A, b))
    np.testing.assert_allclose(two.z.coeffs, one.z.coeffs, atol=1e-15)


def test_linear_update_fixed_point():
    A = decay_rate(1, 1.3)
    F = np.random.default_rng(0).standard_normal(A.shape)
    c = F / A
    np.testing.assert_allclose(linear_update(c, A, 0.7, F), c, rtol=1e-13)


def test_midpoint_convolution_is_second_order():
    a, omega, T = 2.0, 3.0, 1.0
    exact = oracles.convolution_integral_cos(T, a, omega)
    errs = []
    for n in (20, 40, 80, 160):
        dt, v = T / n, np.zeros(1)
        for i in range(n):
            v = linear_update(v, np.array([a]), dt, np.array([math.cos(omega * (i + 0.5) * dt)]))
        errs.append(abs(v[0] - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def test_errors():
    with pytest.raises(ValueError):
        ou_init_stationary(1, 0.0, NoiseStream(0))
    ens = ou_init_stationary(1, 1.0, NoiseStream(0))
    with pytest.raises(ValueError):
        ou_step(ens, 0.0, NoiseStream(0))
    with pytest.raises(ValueError):
        ou_step(ens, 0.1)
    with pytest.raises(ValueError):
        tree_convolved_step(ens, 0.1)
    with pytest.raises(ValueError):
        tree_resonant(ens)


def test_zero_noise_tree_values():
    """From Z = 0 with no noise everything is constant in space and solvable by hand."""
    m0, N, dt, steps = 1.0, 0, 0.1, 7
    c = renorm_constants(N, m0)
    ens = OUEnsemble(SpectralField.zeros(1), 0.0, m0, N)
    zero = np.zeros_like(ens.z.coeffs)
    for _ in range(steps):
        ens = tree_convolved_step(ens, dt, noise=(zero, zero))
    t = steps * dt
    v02_value = -c.c1 * (1 - math.exp(-m0**2 * t)) / m0**2
    assert mode(ens.v02, (0, 0, 0)) / NORM == pytest.approx(v02_value, rel=1e-12)
    assert np.all(ens.v03.coeffs == 0)
    z22, z23 = tree_resonant(ens)
    assert mode(z22, (0, 0, 0)) / NORM == pytest.approx(-c.c1 * v02_value - c.c2, rel=1e-12)
    assert np.count_nonzero(np.abs(z22.coeffs) > 1e-18) == 1
    assert np.all(z23.coeffs == 0)


@pytest.mark.parametrize("alpha", [0.5, 2.0, -1.5])
def test_homogeneity_without_counterterms(alpha):
    m0, N, dt = 1.0, 1, 0.05
    zc = RenormConstants.zero(N, m0)
    base = ou_init_stationary(3, m0, NoiseStream(6), N=N, consts=zc)
    scaled = OUEnsemble(alpha * base.z, 0.0, m0, N, consts=zc)
    zero = np.zeros_like(base.z.coeffs)
    for _ in range(3):
        base = tree_convolved_step(base, dt, noise=(zero, zero))
        scaled = tree_convolved_step(scaled, dt, noise=(zero, zero))
    b22, b23 = tree_resonant(base)
    s22, s23 = tree_resonant(scaled)
    np.testing.assert_allclose(s22.coeffs, alpha**4 * b22.coeffs, atol=1e-14 * np.max(np.abs(alpha**4 * b22.coeffs)))
    np.testing.assert_allclose(s23.coeffs, alpha**5 * b23.coeffs, atol=1e-14 * np.max(np.abs(alpha**5 * b23.coeffs)))


def test_trees_are_real_fields():
    rng = NoiseStream(8)
    ens = ou_init_stationary(3, 1.0, rng, (2,), N=1)
    for _ in range(3):
        ens = tree_convolved_step(ens, 0.05, rng)
    snap = tree_snapshot(ens)
    for name in ("z1", "z2", "z3", "z02", "z03", "z22", "z23"):
        f = getattr(snap, name)
        assert f.real and is_hermitian(f.coeffs), name
    assert snap.t == pytest.approx(0.15)
    assert tree_first(ens).cutoffs == (3, 3, 3)
    assert tree_wick2(ens).cutoffs == (6, 6, 6)


def test_burn_in_warning_and_bias():
    ens = ou_init_stationary(1, 1.0, NoiseStream(9))
    with pytest.warns(RuntimeWarning):
        out = burn_in_trees(ens, 0.5, NoiseStream(9, 1), T_burn=1.0)
    assert out.has_trees and out.burn_in == pytest.approx(1.0)
    assert default_burn_in(2.0) == 5.0
    assert burn_in_bias(1.0, 20.0) == pytest.approx(math.exp(-20))


def test_resonant_tree_mean_matches_time_stepped_constant():
    """After burn-in the mean of Z22 is the gap between the stepped and continuous C2."""
    m0, dt, n = 1.0, 0.1, 2000
    rng = NoiseStream(10)
    ens = burn_in_trees(ou_init_stationary(1, m0, rng, (n,)), dt, rng)
    z22, _ = tree_resonant(ens)
    mean_field = mode(z22, (0, 0, 0)).real / NORM
    target = renorm_c2_discrete(0, m0, dt) - renorm_c2(0, m0)
    se = mean_field.std() / math.sqrt(n)
    assert abs(mean_field.mean() - target) <= 4 * se
    assert renorm_c2(0, m0) > 20 * se  # the counterterm is resolved by this sample
