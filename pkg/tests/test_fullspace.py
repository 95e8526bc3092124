import numpy as np
import pytest

from blochhom.cell import homogenized_tensor
from blochhom.fullspace import (EpsilonStudyConfig, derivative_commutation_defect,
                                epsilon_rate_study, gelfand_forward,
                                gelfand_roundtrip_defect, smoothing_apply,
                                smoothing_energy_split,
                                smoothing_multiplier_check, two_scale_agreement)
from blochhom.lattice import Lattice, random_field


def test_smoothing_keeps_inside(rng):
    eps = 0.25
    freqs = rng.uniform(-4.0, 4.0, (50, 3))
    amps = rng.standard_normal((50, 3)) + 1j * rng.standard_normal((50, 3))
    out, keep = smoothing_apply(freqs, amps, eps)
    inside = np.all(np.abs(freqs) < 2.0, axis=1)
    assert np.array_equal(keep, inside)
    assert keep.any() and (~keep).any()
    assert np.abs(out[keep] - amps[keep]).max() == 0.0
    assert np.abs(out[~keep]).max() == 0.0


def test_smoothing_annihilates_outside(rng):
    freqs = np.array([[3.0, 0, 0], [0, -2.5, 0.1]])
    amps = np.ones((2, 3), dtype=complex)
    out, _ = smoothing_apply(freqs, amps, 0.25)
    assert np.abs(out).max() == 0.0


def test_smoothing_idempotent_selfadjoint_parseval(rng):
    eps = 0.125
    freqs = rng.uniform(-8, 8, (200, 3))
    a = rng.standard_normal((200, 3)) + 1j * rng.standard_normal((200, 3))
    b = rng.standard_normal((200, 3)) + 1j * rng.standard_normal((200, 3))
    once, keep = smoothing_apply(freqs, a, eps)
    twice, _ = smoothing_apply(freqs, once, eps)
    assert np.abs(twice - once).max() == 0.0
    bs, _ = smoothing_apply(freqs, b, eps)
    lhs = np.vdot(once, b)
    rhs = np.vdot(a, bs)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))
    kept, dropped = smoothing_energy_split(freqs, a, eps)
    total = float(np.sum(np.abs(a) ** 2))
    assert abs(kept + dropped - total) < 1e-12 * total


def test_multiplier_check_isotropic(iso_field, rng):
    hom = homogenized_tensor(iso_field, 2)
    out = smoothing_multiplier_check(hom, [0.5, 0.25, 0.125], 0.0, 200, rng)
    assert abs(out["nu1"] - 1.0) < 1e-6      # min eig of the unit isotropic symbol
    for row in out["rows"]:
        assert row["ratio_l2"] <= out["cap_l2"] * (1 + 1e-9)
        assert row["ratio_h1"] <= out["cap_h1"] * (1 + 1e-9)


def test_multiplier_quarters_when_eps_halves(iso_field, rng):
    # halving eps doubles the cutoff radius; deep in the symbol regime the
    # resolvent bound at the boundary scales like eps^2 (gamma = 0)
    hom = homogenized_tensor(iso_field, 2)
    xi1 = np.array([0.5 / 0.02, 0.0, 0.0])
    xi2 = np.array([0.5 / 0.01, 0.0, 0.0])
    b1 = 1.0 / (1.0 + np.linalg.eigvalsh(hom.fiber_matrix(xi1))[0])
    b2 = 1.0 / (1.0 + np.linalg.eigvalsh(hom.fiber_matrix(xi2))[0])
    assert b2 / b1 == pytest.approx(0.25, rel=0.01)


def test_multiplier_check_laminate(laminate_field, rng):
    hom = homogenized_tensor(laminate_field, 2)
    out = smoothing_multiplier_check(hom, [0.5, 0.25, 0.125, 0.0625], 0.0, 200, rng)
    ratios = [r["ratio_l2"] for r in out["rows"]]
    assert max(ratios) <= out["cap_l2"]


def test_gelfand_spike_roundtrip():
    vals = np.zeros((1, 3), dtype=complex)
    vals[0] = [1.0, 2.0 - 1.0j, 0.25]
    offs = np.array([[0, 0, 0]])
    defect, parseval = gelfand_roundtrip_defect(vals, offs, 0.5,
                                                np.array([0.3, 0.3, 0.3]), 4)
    assert defect < 1e-13
    assert parseval < 1e-13


def test_gelfand_translation_phase(rng):
    eps = 0.5
    y = np.array([0.1, 0.2, 0.3])
    chis = rng.uniform(-np.pi, np.pi, (5, 3))
    base = np.array([[1.0 + 0.5j, -0.25, 0.75j]])
    n0 = np.array([[2, -1, 3]])
    g0 = gelfand_forward(base, np.array([[0, 0, 0]]), eps, y, chis)
    g1 = gelfand_forward(base, n0, eps, y, chis)
    want = np.exp(-1j * chis @ n0[0]) [:, None] * g0
    assert np.abs(g1 - want).max() < 1e-13


def test_gelfand_random_signal(rng):
    vals = rng.standard_normal((64, 3)) + 1j * rng.standard_normal((64, 3))
    ax = np.arange(-2, 2)
    offs = np.stack(np.meshgrid(ax, ax, ax, indexing='ij'), axis=-1).reshape(-1, 3)
    defect, parseval = gelfand_roundtrip_defect(vals, offs, 0.25,
                                                np.array([0.7, 0.1, 0.5]), 32)
    assert defect < 1e-10
    assert parseval < 1e-10


def test_gelfand_quadrature_must_resolve_box(rng):
    # with fewer chi nodes than the signal box width the inversion aliases
    vals = rng.standard_normal((64, 3)) + 1j * rng.standard_normal((64, 3))
    ax = np.arange(-2, 2)
    offs = np.stack(np.meshgrid(ax, ax, ax, indexing='ij'), axis=-1).reshape(-1, 3)
    defect, _ = gelfand_roundtrip_defect(vals, offs, 0.25,
                                         np.array([0.7, 0.1, 0.5]), 3)
    assert defect > 1e-3


def test_derivative_commutation_exact():
    worst = derivative_commutation_defect([0.4, -1.2, 0.7], 0.2, 2,
                                          [[0.1, 0.5, 0.9], [0.25, 0.25, 0.75]])
    assert worst < 1e-13


def test_two_scale_homogeneous(iso_field, rng):
    lat = Lattice(2)
    f = random_field(lat, rng)
    defect = two_scale_agreement(iso_field, [0.2, 0.0, 0.1], 0.25, 0.0, 2, f.coeffs)
    assert defect < 1e-12


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 1.0])
def test_two_scale_laminate(laminate_field, rng, gamma):
    lat = Lattice(2)
    fs = np.stack([random_field(lat, rng).coeffs for _ in range(5)])
    defect = two_scale_agreement(laminate_field, [0.125, 0.0, 0.0], 0.25, gamma,
                                 2, fs)
    assert defect < 1e-9


def test_two_scale_constant_data(laminate_field):
    lat = Lattice(2)
    f = np.zeros((lat.n_modes, 3), dtype=complex)
    f[lat.zero_index] = [1.0, 0.0, 0.0]
    defect = two_scale_agreement(laminate_field, [0.25, 0.0, 0.0], 0.5, 0.0, 2, f)
    assert defect < 1e-9


def test_two_scale_linearity(laminate_field, rng):
    # both sides are linear in the data, so defects are subadditive under
    # superposition; verify on a random pair
    lat = Lattice(2)
    f1 = random_field(lat, rng).coeffs
    f2 = random_field(lat, rng).coeffs
    d12 = two_scale_agreement(laminate_field, [0.1, 0.05, 0.0], 0.25, 0.0, 2,
                              np.stack([f1, f2, f1 + f2]))
    assert d12 < 1e-9


def test_epsilon_study_config_validation():
    with pytest.raises(ValueError):
        EpsilonStudyConfig(gammas=[-2.5], epsilons=[0.5], theta=[1, 0, 0],
                           j_range=[2], grid_n=2, K=2)


def test_epsilon_study_homogeneous_quick(iso_field):
    # constant coefficients: the only error is the high-mode tail, which
    # decays at twice the generic rate
    cfg = EpsilonStudyConfig(gammas=[0.0], epsilons=[0.5, 0.25, 0.125, 0.0625],
                             theta=[1, 0, 0], j_range=[2, 3, 4], grid_n=2,
                             K=2, seed=5)
    res = epsilon_rate_study(iso_field, cfg)
    assert res.slopes[(0.0, "l2l2")] >= 1.9
    assert res.slopes[(0.0, "withcorr")] >= 1.9
    assert res.passed()
