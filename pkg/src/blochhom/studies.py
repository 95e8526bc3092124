"""The runnable verification studies behind the CLI subcommands.

Each study computes its quantities, writes CSV artifacts under the output
directory, and records a pass/fail entry with details in the shared run
manifest.  Randomness is drawn from generators seeded by the config.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .cell import fiber_hom_matrix, homogenized_tensor
from .contour import build_contour
from .expansion import CorrectorOps
from .fiber import (abstract_resolvent_check, export_spectrum_csv, get_operator,
                    rayleigh_bounds)
from .fullspace import (EpsilonStudyConfig, epsilon_rate_study,
                        gelfand_roundtrip_defect, smoothing_multiplier_check,
                        two_scale_agreement)
from .korn import korn_constants, korn_constants_dense, rank_one_sym_ratio
from .lattice import Lattice, random_field
from .manifest import write_csv, write_gnuplot
from .rates import fiber_rate_study, _zkey

KORN_CAP = 3.0
RANK_ONE_CAP = np.sqrt(2.0) + 1e-9
TWO_SCALE_TOL = 1e-9


def _parallel(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _ray(cfg):
    theta = np.asarray(cfg.theta, dtype=float)
    theta = theta / np.linalg.norm(theta)
    return [2.0 ** -j * theta for j in cfg.j_range]


def study_cell(cfg, out, manifest):
    """Homogenized tensor, certificates, and the structural identities."""
    field = cfg.coefficient_field()
    hom = homogenized_tensor(field, cfg.K, cfg.pad, cache_dir=cfg.cache_dir or None)
    c4 = hom.tensor()
    sym_defect = max(float(np.abs(c4 - c4.transpose(1, 0, 2, 3)).max()),
                     float(np.abs(c4 - c4.transpose(0, 1, 3, 2)).max()),
                     float(np.abs(c4 - c4.transpose(2, 3, 0, 1)).max()))
    rng = cfg.rng(11)
    fact_defect = 0.0
    for _ in range(8):
        chi = rng.uniform(-np.pi, np.pi, 3)
        direct = fiber_hom_matrix(field, chi, cfg.K, cfg.pad)
        viasym = hom.fiber_matrix(chi)
        fact_defect = max(fact_defect, float(np.abs(direct - viasym).max()
                                             / max(np.abs(direct).max(), 1e-300)))
    passed = (sym_defect <= 1e-10 * max(1.0, float(np.abs(hom.voigt).max()))
              and hom.nu_hom > 0 and fact_defect <= 1e-9)
    with open(os.path.join(out, "hom_tensor.json"), 'w') as fh:
        fh.write(hom.to_json())
    manifest.record("cell", passed, {
        "nu_hom": hom.nu_hom,
        "tensor_symmetry_defect": sym_defect,
        "factorization_defect": fact_defect,
        "route_defect": hom.provenance.get("route_defect"),
    })
    return passed


def study_bloch(cfg, out, manifest):
    """Band structure along the dyadic ray: low bands, gap, counting."""
    field = cfg.coefficient_field()
    ray = _ray(cfg)
    rb = rayleigh_bounds(field, ray, cfg.K, cfg.pad)
    entries = []
    count_ok = True
    for chi in ray:
        op = get_operator(field, chi, cfg.K, cfg.pad)
        w = op.eigenvalues()
        entries.append((chi, w[:12]))
        count_ok = count_ok and int(np.sum(w < rb["gap"] / 2)) == 3
    export_spectrum_csv(os.path.join(out, "bands.csv"), entries)
    band_ratio = rb["C_high"] / rb["c_low"]
    passed = rb["ok"] and count_ok and band_ratio < 100.0
    manifest.record("bloch", passed, {
        "c_low": rb["c_low"], "C_high": rb["C_high"], "gap": rb["gap"],
        "band_ratio": band_ratio, "three_below_half_gap": count_ok,
    })
    return passed


def study_fiber_rates(cfg, out, manifest):
    """Resolvent-difference norms along the ray, at z = -1 and on the contour."""
    field = cfg.coefficient_field()
    ray = _ray(cfg)
    contour = build_contour(field, ray, cfg.K, cfg.pad)
    zs = [complex(-1.0, 0.0)] + list(contour.side_midpoints()[:cfg.z_sweep])
    res = fiber_rate_study(field, cfg.theta, cfg.j_range, zs, cfg.K, cfg.pad,
                           seed=cfg.seed)
    for i, z in enumerate(res.z_values):
        key = _zkey(z)
        rows = [(s, res.err_l2l2[key][a], res.err_l2h1[key][a], res.err_withcorr[key][a])
                for a, s in enumerate(res.scales)]
        write_csv(os.path.join(out, f"fiber_rates_z{i}.csv"),
                  ["scale", "err_l2l2", "err_l2h1", "err_withcorr"], rows)
    write_gnuplot(os.path.join(out, "fiber_rates.gp"), "fiber_rates_z0.csv",
                  [(3, "no corrector, H1"), (4, "with correctors, H1")],
                  "fiber resolvent rates")
    passed = res.passed()
    manifest.record("fiber_rates", passed, {
        "medium": field.digest(),
        "K": cfg.K,
        "theta": list(map(float, res.theta)),
        "slopes_l2h1": res.slopes_l2h1,
        "slopes_withcorr": res.slopes_withcorr,
        "rho0": contour.rho0,
        "z_values": [str(z) for z in res.z_values],
    })
    return passed


def study_eps_rates(cfg, out, manifest):
    """Epsilon-ladder norm rates via the fiber sup, plus the symbol drop check."""
    field = cfg.coefficient_field()
    study = EpsilonStudyConfig(gammas=cfg.gammas, epsilons=cfg.eps_ladder,
                               theta=cfg.theta, j_range=cfg.j_range,
                               grid_n=cfg.chi_grid_n, K=cfg.K, pad=cfg.pad,
                               seed=cfg.seed)
    res = epsilon_rate_study(field, study)
    for g in cfg.gammas:
        rows = []
        for i, e in enumerate(cfg.eps_ladder):
            row = [e, res.err[(g, "l2l2")][i],
                   res.err[(g, "l2h1")][i] if (g, "l2h1") in res.err else float("nan"),
                   res.err[(g, "withcorr")][i]]
            rows.append(tuple(row))
        write_csv(os.path.join(out, f"eps_rates_gamma{g:+.2f}.csv"),
                  ["scale", "err_l2l2", "err_l2h1", "err_withcorr"], rows)
    hom = homogenized_tensor(field, cfg.K, cfg.pad, cache_dir=cfg.cache_dir or None)
    drop = smoothing_multiplier_check(hom, cfg.eps_ladder, 0.0, 1000, cfg.rng(23))
    drop_ok = (all(r["ratio_l2"] <= drop["cap_l2"] * (1 + 1e-9) for r in drop["rows"])
               and all(r["ratio_h1"] <= drop["cap_h1"] * (1 + 1e-9) for r in drop["rows"]))
    passed = res.passed() and drop_ok
    manifest.record("eps_rates", passed, {
        "medium": field.digest(),
        "K": cfg.K,
        "gammas": cfg.gammas,
        "slopes": {f"gamma={g}:{fl}": res.slopes[(g, fl)] for (g, fl) in res.slopes},
        "floors": {f"gamma={g}": res.floors(g) for g in cfg.gammas},
        "chi_grid_growth": {f"gamma={g}:{fl}": v
                            for (g, fl), v in res.grid_growth().items()},
        "smoothing_drop_ok": drop_ok,
        "smoothing_nu1": drop["nu1"],
    })
    return passed


def study_korn(cfg, out, manifest):
    """Inequality lab: rank-one constants, Korn constants, abstract bound."""
    rng = cfg.rng(31)
    worst_real = rank_one_sym_ratio(1_000_000, rng)
    worst_complex = rank_one_sym_ratio(100_000, rng, complex_vectors=True)
    chis = [np.array([np.pi, 0, 0]), np.array([0.1, -0.2, 0.3]),
            np.array([-np.pi / 2, np.pi / 3, 0.7])]
    chis += [rng.uniform(-np.pi, np.pi, 3) for _ in range(9)]
    rows = []

    def one(args):
        k_cut, chi = args
        c = korn_constants(k_cut, chi)
        return (k_cut, chi, c)

    items = [(k_cut, chi) for k_cut in (2, 3, 4) for chi in chis]
    for k_cut, chi, c in _parallel(one, items, cfg.jobs):
        rows.append((float(k_cut), float(chi[0]), float(chi[1]), float(chi[2]),
                     c.c_est1, c.c_est11, c.c_est12))
    write_csv(os.path.join(out, "korn.csv"),
              ["K", "chi1", "chi2", "chi3", "c_est1", "c_est11", "c_est12"], rows)
    worst_const = max(max(r[4], r[5], r[6]) for r in rows)
    dense = korn_constants_dense(2, chis[1])
    symb = korn_constants(2, chis[1])
    route_defect = max(abs(dense.c_est1 - symb.c_est1),
                       abs(dense.c_est11 - symb.c_est11),
                       abs(dense.c_est12 - symb.c_est12))

    field = cfg.coefficient_field()
    op = get_operator(field, np.array([0.11, -0.07, 0.05]), cfg.K, cfg.pad)
    abstract_ok = True
    worst_gap = 0.0
    zrng = cfg.rng(37)
    for _ in range(100):
        z = complex(zrng.uniform(-3, 3), zrng.uniform(-2, 2))
        if op.dist_rescaled(z) < 1e-3:
            continue
        ratio, bound, sharp = abstract_resolvent_check(op, z, zrng, n_samples=1)
        abstract_ok = abstract_ok and ratio <= bound * (1 + 1e-12) and sharp <= bound
        worst_gap = max(worst_gap, ratio / bound)
    passed = (worst_real <= RANK_ONE_CAP and worst_const <= KORN_CAP
              and route_defect <= 1e-8 and abstract_ok)
    manifest.record("korn", passed, {
        "rank_one_real": worst_real,
        "rank_one_complex_observed": worst_complex,
        "korn_constant_cap": KORN_CAP,
        "korn_constant_worst": worst_const,
        "dense_vs_symbol_defect": route_defect,
        "abstract_bound_ok": abstract_ok,
        "abstract_worst_fraction": worst_gap,
    })
    return passed


def study_two_scale(cfg, out, manifest):
    """First-corrector agreement with the cell-basis contraction."""
    field = cfg.coefficient_field()
    rng = cfg.rng(41)
    lat = Lattice(cfg.K)
    pairs = [(np.array([0.25, 0.0, 0.0]), 0.5),
             (np.array([0.125, 0.0, 0.0]), 0.25),
             (np.array([0.1, -0.05, 0.02]), 0.125),
             (np.array([0.03, 0.04, 0.0]), 0.5),
             (np.array([0.0625, 0.0625, 0.0625]), 0.0625)]
    rows = []
    worst = 0.0
    for chi, eps in pairs:
        ops = CorrectorOps(field, chi, cfg.K, cfg.pad)
        fs = np.stack([random_field(lat, rng).coeffs for _ in range(20)])
        local = two_scale_agreement(field, chi, eps, 0.0, cfg.K, fs, cfg.pad, ops=ops)
        rows.append((float(np.linalg.norm(chi)), float(eps), local))
        worst = max(worst, local)
    write_csv(os.path.join(out, "two_scale.csv"),
              ["chi_abs", "eps", "worst_defect"], rows)

    sig_rng = cfg.rng(43)
    vals = sig_rng.standard_normal((27, 3)) + 1j * sig_rng.standard_normal((27, 3))
    offs = np.stack(np.meshgrid(*([np.arange(-1, 2)] * 3), indexing='ij'), axis=-1).reshape(-1, 3)
    g_defect, parseval = gelfand_roundtrip_defect(vals, offs, 0.5,
                                                 np.array([0.2, 0.7, 0.4]), 32)
    passed = worst <= TWO_SCALE_TOL and g_defect <= 1e-10 and parseval <= 1e-10
    manifest.record("two_scale", passed, {
        "worst_defect": worst,
        "gelfand_roundtrip_defect": g_defect,
        "gelfand_parseval_defect": parseval,
    })
    return passed


STUDIES = {
    "cell": study_cell,
    "bloch": study_bloch,
    "fiber-rates": study_fiber_rates,
    "eps-rates": study_eps_rates,
    "korn": study_korn,
    "two-scale": study_two_scale,
}


def run_studies(names, cfg, out, manifest):
    ok = True
    for name in names:
        ok = STUDIES[name](cfg, out, manifest) and ok
    return ok
