import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import random_field
from phi4torus.torus import (NORM, GridField, ResolutionError, SpectralField, SymmetryError, apply_multiplier,
                             forward_transform, inner_product, integral, inverse_transform, lp_norm, multiply,
                             pointwise_product, read_snapshot, read_snapshot_with_meta, write_csv, write_snapshot)


def grid(M):
    x = 2 * np.pi * np.arange(M) / M
    return np.meshgrid(x, x, x, indexing="ij")


def test_forward_constant_is_e0():
    g = GridField(np.full((4, 4, 4), 1.0 / NORM))
    f = forward_transform(g, 1)
    expected = np.zeros((3, 3, 3))
    expected[1, 1, 1] = 1.0
    np.testing.assert_allclose(f.coeffs, expected, atol=1e-15)


def test_forward_cosine():
    x1, _, _ = grid(6)
    f = forward_transform(GridField(np.cos(x1) / NORM), 2)
    assert f.coefficient((1, 0, 0)) == pytest.approx(0.5, abs=1e-15)
    assert f.coefficient((-1, 0, 0)) == pytest.approx(0.5, abs=1e-15)
    c = np.array(f.coeffs)
    c[3, 2, 2] = c[1, 2, 2] = 0
    assert np.max(np.abs(c)) < 1e-15
    assert f.real


def test_inverse_of_examples():
    const = inverse_transform(SpectralField.basis((0, 0, 0)), 5).values
    np.testing.assert_allclose(const, 1.0 / NORM, rtol=1e-14)
    cosf = SpectralField.from_modes({(1, 0, 0): 0.5, (-1, 0, 0): 0.5}, 1)
    x1, _, _ = grid(5)
    np.testing.assert_allclose(inverse_transform(cosf, 5).values, np.cos(x1) / NORM, atol=1e-15)


def test_round_trip_k3_m8(rng):
    f = random_field(rng, 3)
    g = inverse_transform(f, 8)
    assert np.max(np.abs(inverse_transform(forward_transform(g, 3), 8).values - g.values)) <= 1e-12
    assert np.max(np.abs(forward_transform(g, 3).coeffs - f.coeffs)) <= 1e-12


def test_transform_matches_direct_synthesis(rng):
    f = random_field(rng, 2, decay=1.0)
    pts = oracles.grid_points(5)
    direct = oracles.synthesize(f.coeffs, pts).reshape(5, 5, 5)
    np.testing.assert_allclose(inverse_transform(f, 5).values, direct.real, atol=1e-13)
    assert np.max(np.abs(direct.imag)) < 1e-13


def test_resolution_too_small():
    with pytest.raises(ResolutionError):
        forward_transform(GridField(np.zeros((4, 4, 4))), 2)
    with pytest.raises(ResolutionError):
        inverse_transform(SpectralField.zeros(3), 6)


def test_symmetry_violation_rejected():
    c = np.zeros((3, 3, 3), complex)
    c[2, 1, 1] = 1.0
    with pytest.raises(SymmetryError):
        SpectralField(c, real=True)
    # a complex-flagged field is fine and synthesizes complex values
    vals = inverse_transform(SpectralField(c, real=False), 3).values
    assert np.iscomplexobj(vals)


def test_non_finite_rejected():
    c = np.zeros((3, 3, 3), complex)
    c[1, 1, 1] = np.nan
    with pytest.raises(ValueError):
        SpectralField(c)


def test_orthonormality():
    a = SpectralField.basis((1, 2, 0), K=2)
    b = SpectralField.basis((1, 0, 0), K=2)
    assert inner_product(a, a) == pytest.approx(1.0)
    assert inner_product(a, b) == 0.0


def test_parseval_against_quadrature(rng):
    f = random_field(rng, 4, decay=0.5)
    M = 2 * (2 * 4) + 1  # |f|^2 has cutoff 8, so the Riemann sum is exact
    vals = inverse_transform(f, M).values
    quad = np.sum(vals**2) * (2 * np.pi / M) ** 3
    ip = inner_product(f, f).real
    assert abs(ip - quad) <= 1e-10 * ip


def test_multiplier_identity_and_laplacian():
    f = SpectralField.basis((1, 1, 0))
    assert np.array_equal(apply_multiplier(lambda kx, ky, kz: 1.0, f).coeffs, f.coeffs)
    lap = apply_multiplier(lambda kx, ky, kz: -(kx**2 + ky**2 + kz**2), f)
    np.testing.assert_allclose(lap.coeffs, -2.0 * f.coeffs)


def test_heat_multiplier_semigroup(rng):
    f = random_field(rng, 4)
    t = 0.37
    heat = lambda s: (lambda kx, ky, kz: np.exp(-s * (kx**2 + ky**2 + kz**2)))  # noqa: E731
    twice = apply_multiplier(heat(t / 2), apply_multiplier(heat(t / 2), f))
    once = apply_multiplier(heat(t), f)
    assert np.max(np.abs(twice.coeffs - once.coeffs)) <= 1e-12


def test_odd_multiplier_loses_real_flag(rng):
    f = random_field(rng, 2)
    assert not apply_multiplier(lambda kx, ky, kz: kx.astype(float), f).real
    assert apply_multiplier(lambda kx, ky, kz: 1j * kx, f).real  # derivative: h(-k) = conj h(k)


def test_even_multiplier_preserves_symmetry_bit_exactly(rng):
    f = random_field(rng, 3)
    g = apply_multiplier(lambda kx, ky, kz: np.cos(kx) + kz**2, f)
    assert g.real
    assert np.array_equal(g.coeffs, np.conj(g.coeffs[::-1, ::-1, ::-1]))


def test_product_with_one_and_basis_product(rng):
    f = random_field(rng, 2)
    one = SpectralField.constant(1.0)
    np.testing.assert_allclose(pointwise_product(f, one).resized(2).coeffs, f.coeffs, atol=1e-14)
    p = pointwise_product(SpectralField.basis((1, 0, -1), K=1), SpectralField.basis((0, 1, 1), K=1))
    assert p.coefficient((1, 1, 0)) == pytest.approx(1.0 / NORM)
    c = np.array(p.coeffs)
    c[3, 3, 2] = 0
    assert np.max(np.abs(c)) < 1e-16


def test_product_matches_convolution_oracle(rng):
    f = random_field(rng, 2)
    g = random_field(rng, (1, 2, 1))
    p = pointwise_product(f, g)
    ref = oracles.convolution(f.coeffs, g.coeffs)
    assert np.max(np.abs(p.coeffs - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_triple_product_and_truncation(rng):
    f = random_field(rng, 1)
    full = multiply(f, f, f)
    assert full.cutoffs == (3, 3, 3)
    ref = oracles.convolution(oracles.convolution(f.coeffs, f.coeffs), f.coeffs)
    np.testing.assert_allclose(full.coeffs, ref, atol=1e-13)
    cut = multiply(f, f, f, cutoff=1)
    np.testing.assert_allclose(cut.coeffs, full.resized(1).coeffs, atol=1e-14)


def test_lp_norms_of_constant():
    f = SpectralField.constant(2.0, 1)
    vol = (2 * np.pi) ** 3
    assert lp_norm(f, 2) == pytest.approx(2.0 * math.sqrt(vol))
    assert lp_norm(f, 4) == pytest.approx(2.0 * vol**0.25)
    assert lp_norm(f, np.inf) == pytest.approx(2.0)
    assert integral(f) == pytest.approx(2.0 * vol)


def test_batched_fields_act_independently(rng):
    f = random_field(rng, 2, batch=(3,))
    g = random_field(rng, 2, batch=(3,))
    p = pointwise_product(f, g)
    for i in range(3):
        np.testing.assert_allclose(p[i].coeffs, pointwise_product(f[i], g[i]).coeffs, atol=1e-14)


def test_snapshot_round_trip(tmp_path, rng):
    f = random_field(rng, 3)
    path = tmp_path / "f.phi4"
    write_snapshot(path, f, "run_digest=abc seed=1")
    g, meta = read_snapshot_with_meta(path)
    assert np.array_equal(g.coeffs, f.coeffs) and g.real and meta == "run_digest=abc seed=1"
    raw = path.read_bytes()
    assert raw[:4] == b"PHI4"
    n = 7**3
    body = np.frombuffer(raw[13:13 + 16 * n], dtype="<c16").reshape(7, 7, 7)
    assert np.array_equal(body, f.coeffs)  # row-major, kx slowest, offset +K
    path2 = tmp_path / "plain.phi4"
    write_snapshot(path2, f)
    assert np.array_equal(read_snapshot(path2).coeffs, f.coeffs)


def test_snapshot_rejects_garbage(tmp_path):
    p = tmp_path / "bad.phi4"
    p.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(ValueError):
        read_snapshot(p)


def test_csv_export(tmp_path):
    f = SpectralField.from_modes({(1, 0, 0): 0.5 + 0.25j, (-1, 0, 0): 0.5 - 0.25j}, 1)
    path = tmp_path / "f.csv"
    write_csv(path, f)
    text = path.read_text()
    assert "1,0,0,0.5,0.25" in text.replace(" ", "")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(0, 3))
def test_round_trip_property(seed, K):
    f = random_field(np.random.default_rng(seed), K)
    M = 2 * K + 1
    back = forward_transform(inverse_transform(f, M), K)
    assert np.max(np.abs(back.coeffs - f.coeffs)) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_product_commutative_and_bilinear(seed, a, b):
    r = np.random.default_rng(seed)
    f, g, h = random_field(r, 2), random_field(r, 2), random_field(r, 1)
    fg, gf = pointwise_product(f, g), pointwise_product(g, f)
    scale = max(1.0, np.max(np.abs(fg.coeffs)))
    assert np.max(np.abs(fg.coeffs - gf.coeffs)) <= 1e-13 * scale
    lhs = pointwise_product(a * f + b * g, h)
    rhs = a * pointwise_product(f, h) + b * pointwise_product(g, h)
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs.coeffs)))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_parseval_property(seed):
    f = random_field(np.random.default_rng(seed), 2)
    M = 9
    vals = inverse_transform(f, M).values
    quad = np.sum(vals**2) * (2 * np.pi / M) ** 3
    assert abs(inner_product(f, f).real - quad) <= 1e-10 * inner_product(f, f).real
