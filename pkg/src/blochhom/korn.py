"""Discrete constants of the quasimomentum Korn inequalities on the torus.

For the strain D = sym grad + i X_chi on the truncated lattice, the three
extremal constants measured here are

    c_est1  = max |chi| |u|       / |D u|      (u in the truncated space)
    c_est11 = max |grad u|        / |D u|
    c_est12 = max |u - mean u|    / |D u|

Because the quadratic forms diagonalize over modes, each constant reduces
to per-mode 3x3 symbol eigenproblems; a dense generalized eigensolve of
the full pencil is kept as an independent route for cross-checking.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .lattice import Lattice
from .sym6 import sym


@dataclass(frozen=True)
class KornConstants:
    c_est1: float
    c_est11: float
    c_est12: float


def _strain_gram(w):
    """3x3 matrix of a -> |sym(a w^T)|^2 for a real vector w: (|w|^2 I + w w^T)/2."""
    return 0.5 * (np.dot(w, w) * np.eye(3) + np.outer(w, w))


def korn_constants(K, chi):
    """Extremal discrete constants via the per-mode symbol reduction."""
    chi = np.asarray(chi, dtype=float)
    if np.dot(chi, chi) == 0.0:
        raise ValueError("korn_constants requires chi != 0 (c_est12 alone is "
                         "defined at chi = 0; use korn_mean_constant)")
    lat = Lattice(K)
    w = 2 * np.pi * lat.modes + chi
    grams = 0.5 * (np.einsum('md,md->m', w, w)[:, None, None] * np.eye(3)
                   + np.einsum('mp,mq->mpq', w, w))
    lam_min = np.linalg.eigvalsh(grams)[:, 0]
    grad2 = np.sum((2 * np.pi * lat.modes) ** 2, axis=1)
    chi2 = float(np.dot(chi, chi))
    nz = np.arange(lat.n_modes) != lat.zero_index
    return KornConstants(
        c_est1=float(np.sqrt((chi2 / lam_min).max())),
        c_est11=float(np.sqrt((grad2 / lam_min).max())),
        c_est12=float(np.sqrt((1.0 / lam_min[nz]).max())),
    )


def korn_mean_constant(K, chi):
    """c_est12 alone; valid for chi = 0 as well (mode zero dropped)."""
    chi = np.asarray(chi, dtype=float)
    lat = Lattice(K)
    w = 2 * np.pi * lat.modes + chi
    nz = np.arange(lat.n_modes) != lat.zero_index
    lam = np.array([np.linalg.eigvalsh(_strain_gram(wk))[0] for wk in w[nz]])
    return float(np.sqrt((1.0 / lam).max()))


def korn_constants_dense(K, chi):
    """Same constants by a dense Hermitian generalized eigensolve of the pencil.

    Independent of the symbol shortcut; intended for K <= 3 cross-checks.
    """
    chi = np.asarray(chi, dtype=float)
    lat = Lattice(K)
    m = lat.n_modes
    w = 2 * np.pi * lat.modes + chi
    g2 = np.zeros((3 * m, 3 * m))
    for i, wk in enumerate(w):
        g2[3 * i:3 * i + 3, 3 * i:3 * i + 3] = _strain_gram(wk)
    chi2 = float(np.dot(chi, chi))
    g1 = chi2 * np.eye(3 * m)
    c1 = np.sqrt(sla.eigh(g1, g2, eigvals_only=True)[-1])
    ggrad = np.zeros((3 * m, 3 * m))
    for i, k in enumerate(lat.modes):
        ggrad[3 * i:3 * i + 3, 3 * i:3 * i + 3] = np.dot(2 * np.pi * k, 2 * np.pi * k) * np.eye(3)
    c11 = np.sqrt(sla.eigh(ggrad, g2, eigvals_only=True)[-1])
    nzmask = np.repeat(np.arange(m) != lat.zero_index, 3)
    gmean = np.eye(3 * m)[np.ix_(nzmask, nzmask)]
    c12 = np.sqrt(sla.eigh(gmean, g2[np.ix_(nzmask, nzmask)], eigvals_only=True)[-1])
    return KornConstants(float(c1), float(c11), float(c12))


def rank_one_sym_ratio(n_samples, rng, complex_vectors=False):
    """Worst ratio |a (x) b| / |sym(a (x) b)| over random vector pairs.

    For real pairs the supremum is sqrt(2), attained at orthogonal pairs;
    the complex case is measured but carries no asserted bound.
    Sampling is batched; returns the max ratio found.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    worst = 0.0
    remaining = n_samples
    while remaining > 0:
        batch = min(remaining, 200_000)
        a = rng.standard_normal((batch, 3))
        b = rng.standard_normal((batch, 3))
        if complex_vectors:
            a = a + 1j * rng.standard_normal((batch, 3))
            b = b + 1j * rng.standard_normal((batch, 3))
        outer = np.einsum('np,nq->npq', a, b.conj())
        s = sym(outer)
        num = np.linalg.norm(outer.reshape(batch, -1), axis=1)
        den = np.linalg.norm(s.reshape(batch, -1), axis=1)
        ok = den > 0
        worst = max(worst, float((num[ok] / den[ok]).max()))
        remaining -= batch
    return worst
