import math

import numpy as np
import pytest

from conftest import random_field
from phi4torus.ou import NoiseStream, decay_rate, ou_init_stationary, projected, tree_convolved_step
from phi4torus.paracontrolled import (ConsistencyResult, DiagnosticsRecorder, EnergyParams, SplitTrajectory,
                                      coupled_evolution, coupled_start, diagnostics_run, diagnostics_sweep,
                                      energy_X, energy_Y, evolve_split, shift_fields, split_consistency,
                                      split_init, split_phi_terms, split_rhs, tree_terms, unshift, unsplit_rhs)
from phi4torus.projections import project
from phi4torus.torus import SpectralField

VOL = (2 * math.pi) ** 3


def trees(N, steps=4, batch=(2,), seed=0, dt=0.05):
    rng = NoiseStream(seed)
    ens = ou_init_stationary(2 ** (N + 2) - 1, 1.0, rng, batch, N=N)
    for _ in range(steps):
        ens = tree_convolved_step(ens, dt, rng)
    return ens


def test_shift_round_trip(rng):
    ens = trees(0)
    X = random_field(rng, 3, batch=(2,))
    x1, x2 = shift_fields(X, ens.z, ens.v03, 0, 0.3)
    np.testing.assert_allclose(unshift(x2, ens.z, ens.v03, 0, 0.3).coeffs, X.coeffs, atol=1e-15)
    np.testing.assert_allclose((x2 - x1).coeffs, 0.3 * ens.v03.resized(3).coeffs, atol=1e-15)
    pz = project(2, 0, ens.z)
    x1, x2 = shift_fields(pz, ens.z, ens.v03, 0, 0.0)
    assert np.max(np.abs(x1.coeffs)) == 0 and np.max(np.abs(x2.coeffs)) == 0


def test_energy_params():
    assert EnergyParams().bound_applies
    assert not EnergyParams(eta=0.3).bound_applies
    for bad in (dict(eta=1.0), dict(gamma=0.125), dict(epsilon=0.06), dict(q=8 / 7)):
        with pytest.raises(ValueError):
            EnergyParams(**bad)


def test_split_starts_with_zero_low_part(rng):
    ens = trees(0)
    X2 = random_field(rng, 3, batch=(2,))
    st = split_init(X2, ens, 0.5)
    assert np.all(st.x_lt.coeffs == 0) and np.all(st.J.coeffs == 0)
    np.testing.assert_array_equal(st.x_geq.coeffs, X2.coeffs)
    np.testing.assert_array_equal(st.H.coeffs, projected(ens.v02, 0, ens.profile).coeffs)


@pytest.mark.parametrize("N", [0, 1])
def test_split_reassembles_the_unsplit_right_hand_side(rng, N):
    lam, dt = 0.7, 0.02
    ens = trees(N, batch=(1,))
    K2 = 2 ** (N + 2) - 1
    st = split_init(random_field(rng, K2, batch=(1,)), ens, lam)
    for _ in range(3):
        st = evolve_split(st, ens, dt)
        ens = tree_convolved_step(ens, dt, NoiseStream(1))
    # the scheme keeps P1 x_lt = -3 lam J exactly
    np.testing.assert_allclose(projected(st.x_lt, N, ens.profile).coeffs, -3 * lam * st.J.coeffs,
                               atol=1e-14 * np.max(np.abs(st.J.coeffs)))
    tt = tree_terms(ens)
    r_lt, r_geq, _ = split_rhs(st, tt)
    full = unsplit_rhs(st.x2, tt, N, lam)
    total = r_lt + r_geq.resized(r_lt.cutoffs)
    assert np.max(np.abs(total.coeffs - full.coeffs)) <= 1e-11 * np.max(np.abs(full.coeffs))


def test_phi_terms_partition(rng):
    lam = 0.4
    ens = trees(0, batch=(1,))
    st = split_init(random_field(rng, 3, batch=(1,)), ens, lam)
    st = evolve_split(st, ens, 0.02)
    ens = tree_convolved_step(ens, 0.02, NoiseStream(2))
    terms = split_phi_terms(st, tree_terms(ens))
    assert set(terms) == {"phi1", "phi2", "phi3", "psi1", "psi2"}
    for f in terms.values():
        assert np.all(np.isfinite(f.coeffs))


def test_free_split_is_pure_decay(rng):
    ens = trees(0)
    X2 = random_field(rng, 3, batch=(2,))
    st = split_init(X2, ens, 0.0)
    dt, n = 0.05, 4
    for _ in range(n):
        st = evolve_split(st, ens, dt)
        ens = tree_convolved_step(ens, dt, NoiseStream(3))
    assert np.all(st.x_lt.coeffs == 0)
    A = decay_rate(3, 1.0)
    np.testing.assert_allclose(st.x_geq.coeffs, np.exp(-n * dt * A) * X2.coeffs, atol=1e-14)


def test_evolve_split_errors(rng):
    ens = trees(0)
    st = split_init(random_field(rng, 3, batch=(2,)), ens, 0.1)
    with pytest.raises(ValueError):
        evolve_split(st, ens, 0.0)
    with pytest.raises(ValueError):
        evolve_split(st, tree_convolved_step(ens, 0.05, NoiseStream(4)), 0.05)


def test_shifted_galerkin_field_is_noise_free_at_zero_coupling():
    """With P2-projected noise, X - P2 Z only decays when lam = 0, and the split tracks it exactly."""
    start = coupled_start(0, 1.0, seed=4, paths=3, burn_dt=0.05, burn_in=10.0)
    x1_0 = shift_fields(start.X0, start.trees.z, start.trees.v03, 0, 0.0)[0]
    A = decay_rate(3, 1.0)
    for st, X, ens in coupled_evolution(start, 0.0, 0.02, 5):
        x1 = shift_fields(X, ens.z, ens.v03, 0, 0.0)[0]
        np.testing.assert_allclose(x1.coeffs, np.exp(-st.t * A) * x1_0.coeffs, atol=1e-13)
        np.testing.assert_allclose(st.x2.coeffs, x1.coeffs, atol=1e-13)


def test_small_consistency_gap_halves():
    res = split_consistency(0, 1.0, 0.5, [0.02, 0.01], 0.2, seed=5, paths=8, burn_in=10.0)
    assert res.gaps[1] < res.gaps[0]
    assert 1.5 < res.ratios[0] < 2.6
    assert len(res.times) == 10 and res.ratio_stderr()[0] > 0


def test_ratio_stderr_vanishes_for_identical_paths():
    res = ConsistencyResult([0.02, 0.01], np.array([[4.0] * 5, [1.0] * 5]), np.arange(3))
    assert res.gaps == [2.0, 1.0] and res.ratios == [2.0]
    assert res.ratio_stderr() == [0.0]


def test_energy_functionals_of_zero_path():
    ep = EnergyParams()
    z = SpectralField.zeros(3, (2,))
    traj = SplitTrajectory([0.0, 0.5, 1.0], [z] * 3, [z] * 3)
    assert np.all(energy_X(traj, ep, 0, 0.3) == 0) and np.all(energy_Y(traj, ep, 0) == 0)


def test_energy_functionals_of_constant_path():
    ep, lam, v, T = EnergyParams(), 0.3, 0.7, 2.0
    z, c = SpectralField.zeros(3), SpectralField.constant(v, 3)
    times = np.linspace(0, T, 5)
    traj = SplitTrajectory(times, [z] * 5, [c] * 5)
    assert float(energy_X(traj, ep, 0, lam)) == pytest.approx(T * VOL * (v**2 + lam * v**4), rel=1e-12)
    # a constant field only has the j = -1 block: ||c||_{B^s_p} = 2^{-s} ||c||_{L^p}
    b43 = 2.0 ** (-(1 + ep.epsilon)) * v * VOL ** 0.75
    assert float(energy_Y(traj, ep, 0)) == pytest.approx(T * b43, rel=1e-8)


def test_hoelder_term_of_linear_path():
    ep = EnergyParams()
    g = SpectralField.constant(1.0, 1)
    times = [0.0, 0.25, 0.5, 1.0]
    z = SpectralField.zeros(1)
    rec = DiagnosticsRecorder(ep, 0, 0.0)
    for t in times:
        rec.add(t, z, t * g)
    norm = VOL ** 0.75  # ||1||_{L^{4/3}}
    expected = max(s**ep.eta * (t - s) ** (1 - ep.gamma) * norm for s in times for t in times if 0 < s < t)
    grad_free = float(np.trapezoid([VOL * t * t for t in times], times))
    assert float(rec.energy_X()) == pytest.approx(grad_free + expected, rel=1e-10)
    with pytest.raises(ValueError):
        rec.add(0.5, z, g)
    assert [row["t"] for row in rec.integrand_table()] == times


def test_diagnostics_run_and_sweep():
    run = diagnostics_run(0, 1.0, 0.1, 0.02, 0.1, seed=1, chains=2, burn_in=10.0, record_every=1)
    assert set(run.summary) == {"energy_X", "energy_Y", "energy_Y_q", "sup_x_lt", "sup_x_geq"}
    assert all(np.all(np.isfinite(v)) and np.all(v >= 0) for v in run.summary.values())
    assert len(run.table) == 6
    rows = diagnostics_sweep([0], [1, 2], dt=0.02, T=0.1, chains=2, burn_in=10.0)
    assert {r.functional for r in rows} == set(run.summary)
    assert all(r.finite and r.seeds == 2 for r in rows)
