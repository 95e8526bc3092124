"""Operator-norm convergence studies on the quasimomentum fibers.

The measured objects are operator norms of resolvent differences, with the
target-space norm realized by a diagonal per-mode weight.  Norms are
computed by block power iteration on D*D with a seeded start, so studies
are deterministic for a fixed seed.
"""
from dataclasses import dataclass, field as dfield

import numpy as np

from .contour import spectral_filter
from .expansion import CorrectorOps
from .fiber import get_operator
from .lattice import h1_weights


def operator_norm(matvec, rmatvec, dim_in, rng, tol=1e-9, max_iter=800, block=3,
                  x0=None, return_vec=False):
    """Largest singular value by block power iteration on the normal map.

    A previously converged block can be passed back as x0 to warm-start a
    nearby problem (used along the epsilon ladder).
    """
    if x0 is not None and x0.shape == (dim_in, block):
        x = x0
    else:
        x = rng.standard_normal((dim_in, block)) + 1j * rng.standard_normal((dim_in, block))
        x, _ = np.linalg.qr(x)
    sig = 0.0
    hits = 0
    for _ in range(max_iter):
        z = rmatvec(matvec(x))
        x, r = np.linalg.qr(z)
        sig_new = float(np.sqrt(np.abs(np.diag(r)).max()))
        hits = hits + 1 if abs(sig_new - sig) <= tol * max(sig_new, 1e-300) else 0
        sig = sig_new
        if hits >= 2:
            break
    return (sig, x) if return_vec else sig


def dense_norm(mat, rng, weight=None, tol=1e-9):
    """Operator norm of a dense matrix, optionally left-weighted by a diagonal."""
    m = mat if weight is None else weight[:, None] * mat
    mh = m.conj().T
    return operator_norm(lambda x: m @ x, lambda y: mh @ y, m.shape[1], rng, tol)


RATE_FIT_FLOOR = 1e-8    # quantities below the solver tolerance ladder are
                         # excluded from slope fits


def fit_slope(scales, errors, floor=RATE_FIT_FLOOR):
    """Least-squares slope of log(err) against log(scale).

    Errors at or below the floor sit on the solver noise floor and are
    dropped, unless that would leave fewer than three points.
    """
    s = np.asarray(scales, dtype=float)
    e = np.asarray(errors, dtype=float)
    if floor is not None:
        keep = e > floor
        if keep.sum() >= 3:
            s, e = s[keep], e[keep]
    x = np.log(s)
    y = np.log(e)
    a = np.vstack([x, np.ones_like(x)]).T
    sol, *_ = np.linalg.lstsq(a, y, rcond=None)
    return float(sol[0])


# ---------------------------------------------------------------------------
# rescaled corrector operators
# ---------------------------------------------------------------------------
def r_corr1_eps(ops, epsilon, gamma):
    """First rescaled corrector: lift o (eps^-(g+2) Ahom + I)^-1 o mean."""
    h = np.linalg.inv(ops.ahom * epsilon ** (-(gamma + 2.0)) + np.eye(3))
    return ops.corrector_lift @ h @ ops.sel.conj().T


def r_corr1_eps_contour(ops, contour, epsilon, gamma):
    """Same operator through the contour form of the holomorphic calculus."""
    g = spectral_filter(epsilon, gamma, ops.chi)
    vals = np.stack([g(z) * ops.r_corr1(z) for z in contour.nodes])
    return contour.resolvent_avg(vals)


def r_corr2_eps_row(ops, contour, epsilon, gamma):
    """Constant-valued part (3, 3M) of the second rescaled corrector."""
    g = spectral_filter(epsilon, gamma, ops.chi)
    acc = np.zeros((3, ops.sel.shape[0]), dtype=complex)
    for z, w in zip(contour.nodes, contour.weights):
        acc += (w * g(z)) * ops.r_corr2_factors(z)
    return acc / (-2j * np.pi)


def r_corr2_eps(ops, contour, epsilon, gamma):
    """Second rescaled corrector by contour quadrature (its defining form)."""
    return ops.sel @ r_corr2_eps_row(ops, contour, epsilon, gamma)


def rescaled_correctors(coeffs, chi, epsilon, gamma, contour, K, pad=2):
    """Both rescaled corrector operators as dense maps on the fiber space.

    The first uses its direct resolvent formula (valid for every chi != 0);
    the second is defined by the contour form inside the quasimomentum box
    and vanishes outside it.
    """
    chi = np.asarray(chi, dtype=float)
    ops = CorrectorOps(coeffs, chi, K, pad)
    r1 = r_corr1_eps(ops, epsilon, gamma)
    if np.abs(chi).max() <= contour.mu:
        r2 = r_corr2_eps(ops, contour, epsilon, gamma)
    else:
        r2 = np.zeros_like(r1)
    return {"r1_eps": r1, "r2_eps": r2}


def r_corr2_eps_closed(ops, epsilon, gamma):
    """Second rescaled corrector in closed form via divided differences.

    With Ahom/|chi|^2 = U diag(lam) U*, the double-resolvent part of the
    calculus integral reduces to the first divided differences of the
    filter, sigma / ((sigma lam_i + 1)(sigma lam_j + 1)); the single-
    resolvent part evaluates the filter at the eigenvalues.  Used as the
    independent cross-check of the quadrature route.
    """
    s = ops.s
    sigma = s / epsilon ** (gamma + 2.0)
    lam, u = np.linalg.eigh(ops.ahom / s)
    denom = sigma * lam + 1.0
    c = sigma / np.outer(denom, denom)
    wa_u = u.conj().T @ ops.wa() @ u
    part1 = (u @ (c * wa_u) @ u.conj().T) / s @ ops.sel.conj().T
    part2 = u @ np.diag(1.0 / denom) @ u.conj().T @ ops.g_perp_row()
    return ops.sel @ (part1 + part2)


# ---------------------------------------------------------------------------
# fiber rate study
# ---------------------------------------------------------------------------
@dataclass
class FiberRateResult:
    theta: np.ndarray
    j_range: list
    z_values: list
    scales: list
    err_l2l2: dict = dfield(default_factory=dict)      # z -> list over j
    err_l2h1: dict = dfield(default_factory=dict)
    err_withcorr: dict = dfield(default_factory=dict)
    slopes_l2h1: dict = dfield(default_factory=dict)
    slopes_withcorr: dict = dfield(default_factory=dict)

    def passed(self, floor_plain=0.9, floor_corr=1.9, z_spread=0.1):
        s1 = list(self.slopes_l2h1.values())
        s2 = list(self.slopes_withcorr.values())
        ok = all(s >= floor_plain for s in s1) and all(s >= floor_corr for s in s2)
        ok = ok and (max(s1) - min(s1) <= z_spread) and (max(s2) - min(s2) <= z_spread)
        return ok


def fiber_rate_study(field, theta, j_range, z_values, K, pad=2, seed=0):
    """Norm errors of the fiber resolvent approximations along a dyadic ray.

    For each chi = 2^-j theta and each z, measures the L2->L2 and L2->H1
    norms of (resolvent - hom-resolvent o mean) and the L2->H1 norm after
    subtracting both corrector operators.
    """
    theta = np.asarray(theta, dtype=float)
    theta = theta / np.linalg.norm(theta)
    res = FiberRateResult(theta=theta, j_range=list(j_range),
                          z_values=[complex(z) for z in z_values],
                          scales=[2.0 ** -j for j in j_range])
    for z in res.z_values:
        key = _zkey(z)
        res.err_l2l2[key] = []
        res.err_l2h1[key] = []
        res.err_withcorr[key] = []
    for j in j_range:
        chi = 2.0 ** -j * theta
        op = get_operator(field, chi, K, pad)
        w, v = op.eig()
        s = float(np.dot(chi, chi))
        ops = CorrectorOps(field, chi, K, pad)
        wh1 = h1_weights(op.engine.lattice).repeat(3)
        rng = np.random.default_rng(seed + 7001 * j)
        for z in res.z_values:
            key = _zkey(z)
            resolvent = (v * (1.0 / (w / s - z))) @ v.conj().T
            hom = ops.sel @ ops.hom_resolvent(z) @ ops.sel.conj().T
            d0 = resolvent - hom
            d1 = d0 - ops.r_corr1(z) - ops.r_corr2(z)
            res.err_l2l2[key].append(dense_norm(d0, rng))
            res.err_l2h1[key].append(dense_norm(d0, rng, weight=wh1))
            res.err_withcorr[key].append(dense_norm(d1, rng, weight=wh1))
    for z in res.z_values:
        key = _zkey(z)
        res.slopes_l2h1[key] = fit_slope(res.scales, res.err_l2h1[key])
        res.slopes_withcorr[key] = fit_slope(res.scales, res.err_withcorr[key])
    return res


def _zkey(z):
    return f"{z.real:+.6f}{z.imag:+.6f}j"
