import numpy as np
import pytest
from hypothesis import given, strategies as st

import blochhom as bh
from blochhom.lattice import (Lattice, analyze, constant_vector_field, h1_weights,
                              random_field, strain_symbols, synthesize, zero_field)

import oracles


def test_mode_count_and_zero():
    lat = Lattice(3)
    assert lat.n_modes == 7 ** 3
    assert np.all(lat.modes[lat.zero_index] == 0)
    assert np.sum(np.all(lat.modes == 0, axis=1)) == 1


def test_synthesize_analyze_roundtrip(rng):
    lat = Lattice(2)
    u = random_field(lat, rng)
    vals = synthesize(lat, u.coeffs, 12)
    back = analyze(lat, vals)
    assert np.abs(back - u.coeffs).max() < 1e-12


def test_parseval_against_refined_quadrature(rng):
    lat = Lattice(2)
    u = random_field(lat, rng)
    v = random_field(lat, rng)
    coeff_inner = u.inner(v)
    n = 2 * (2 * lat.K + 1)
    uu = synthesize(lat, u.coeffs, 2 * n)
    vv = synthesize(lat, v.coeffs, 2 * n)
    quad = np.sum(uu * vv.conj()) / (2 * n) ** 3
    assert abs(coeff_inner - quad) < 1e-12 * max(1.0, abs(coeff_inner))


def test_mean_is_zero_mode(rng):
    lat = Lattice(2)
    u = random_field(lat, rng)
    n = 2 * (2 * lat.K + 1)
    vals = synthesize(lat, u.coeffs, n)
    assert np.abs(vals.mean(axis=(0, 1, 2)) - u.mean()).max() < 1e-12


def test_x_chi_constant_example():
    lat = Lattice(1)
    u = constant_vector_field(lat, [0.0, 1.0, 0.0])
    out = bh.x_chi_apply([1.0, 0.0, 0.0], u)
    m = out[lat.zero_index]
    want = np.zeros((3, 3))
    want[0, 1] = want[1, 0] = 0.5
    assert np.abs(m - want).max() < 1e-15
    assert np.abs(out[1:]).max() == 0.0


def test_x_chi_zero():
    lat = Lattice(1)
    u = constant_vector_field(lat, [1.0, 2.0, 3.0])
    assert np.abs(bh.x_chi_apply([0.0, 0.0, 0.0], u)).max() == 0.0


def test_x_chi_norm_ratio(rng):
    lat = Lattice(2)
    for _ in range(25):
        chi = rng.uniform(-np.pi, np.pi, 3)
        u = random_field(lat, rng)
        num = np.linalg.norm(bh.x_chi_apply(chi, u))
        den = np.linalg.norm(chi) * u.l2_norm()
        assert 0.5 * den <= num <= 1.0 * den + 1e-12
        # sharp enclosure from the rank-one identity
        assert num >= den / np.sqrt(2) - 1e-12


def test_sym_grad_constant_is_zero():
    lat = Lattice(2)
    u = constant_vector_field(lat, [1.0, -2.0, 0.5])
    assert np.abs(bh.sym_grad(u)).max() == 0.0


def test_sym_grad_single_mode():
    # u = (sin 2 pi y2, 0, 0): coefficients at k = +-(0,1,0)
    lat = Lattice(2)
    c = np.zeros((lat.n_modes, 3), dtype=complex)
    c[lat.index_of([0, 1, 0]), 0] = 1 / 2j
    c[lat.index_of([0, -1, 0]), 0] = -1 / 2j
    g = bh.sym_grad(bh.TorusField(lat, c))
    m = g[lat.index_of([0, 1, 0])]
    want = np.zeros((3, 3), dtype=complex)
    want[0, 1] = want[1, 0] = 0.5 * (2j * np.pi) / 2j    # pi/... sym of a (2 pi i k)^T
    assert np.abs(m - want).max() < 1e-14


def test_sym_grad_matches_finite_differences(rng):
    lat = Lattice(2)
    u = random_field(lat, rng)
    defects = []
    for n in (32, 64):
        vals = synthesize(lat, u.coeffs, n)
        fd = oracles.fd_sym_grad(vals, 1.0 / n)
        exact = synthesize(lat, bh.sym_grad(u), n)
        defects.append(np.abs(fd - exact).max())
    ratio = defects[0] / defects[1]
    assert 3.3 < ratio < 4.7          # centered differences converge at h^2


def test_sym_grad_kernel_dimension():
    lat = Lattice(2)
    e = strain_symbols(lat, np.zeros(3))
    norms = np.linalg.norm(e.reshape(lat.n_modes, 3, -1), axis=2)
    zero_rows = np.isclose(norms, 0.0).all(axis=1)
    assert zero_rows.sum() == 1 and zero_rows[lat.zero_index]
    assert np.all(norms[~zero_rows] > 1e-12)


def test_h1_weights_vs_norm(rng):
    lat = Lattice(2)
    u = random_field(lat, rng)
    w = h1_weights(lat)
    direct = np.sqrt(np.sum((w[:, None] * np.abs(u.coeffs)) ** 2))
    assert abs(direct - u.h1_norm()) < 1e-12 * direct


@given(st.integers(0, 10 ** 6))
def test_field_mean_invariant(seed):
    lat = Lattice(1)
    rng = np.random.default_rng(seed)
    u = random_field(lat, rng)
    assert np.allclose(u.mean(), u.coeffs[lat.zero_index])


def test_grid_too_small_rejected(rng):
    lat = Lattice(2)
    u = random_field(lat, rng)
    with pytest.raises(ValueError):
        synthesize(lat, u.coeffs, 3)


def test_zero_field_norms():
    lat = Lattice(1)
    u = zero_field(lat)
    assert u.l2_norm() == 0.0 and u.h1_norm() == 0.0


def test_torus_field_container_roundtrip(rng, tmp_path):
    import os
    from blochhom.lattice import read_torus_field, write_torus_field
    u = random_field(Lattice(2), rng)
    path = os.path.join(tmp_path, "field.bhg")
    write_torus_field(u, path)
    back = read_torus_field(path)
    assert back.lattice.K == 2
    assert np.abs(back.coeffs - u.coeffs).max() == 0.0
