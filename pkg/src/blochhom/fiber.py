"""Assembly and spectral analysis of the quasimomentum fiber operators.

For a coefficient field A(y) and quasimomentum chi, the fiber operator is
the Galerkin matrix of the energy form

    a_chi(u, v) = quad_Y A(y) (sym grad + i X_chi) u : conj((sym grad + i X_chi) v)

on the truncated lattice, where quad_Y is the midpoint rule on an N^3 grid
(N = pad * (2K+1), pad >= 1).  Because the quadrature is a plain grid sum,
the matrix equals a convolution in mode space with the grid DFT of the
sampled coefficients, and every variational identity used downstream holds
to machine precision within this discretization.

Flat degrees of freedom are ordered mode-major: index = 3*m + p.
"""
import threading
from collections import OrderedDict

import numpy as np
import scipy.linalg as sla

from .lattice import Lattice, TorusField, analyze, strain_symbols, synthesize

HERMITICITY_TOL = 1e-12  # relative
ASSEMBLY_CERT_TOL = 1e-10
EIG_RESIDUAL_TOL = 1e-10
SOLVE_RESIDUAL_TOL = 1e-10
SPECTRUM_MARGIN = 1e-8


class SpectrumProximityError(ValueError):
    """Raised when a resolvent solve is requested too close to the spectrum."""

    def __init__(self, z, dist):
        super().__init__(f"z={z} at distance {dist:.3e} from the rescaled spectrum")
        self.z = z
        self.dist = dist


class AliasingBudgetError(ValueError):
    """Quadrature grid too small to carry the requested mode cutoff."""


class FormEngine:
    """Quadrature, symbols and assembly for one (field, K, pad) triple."""

    def __init__(self, field, K, pad=2):
        cert = field.certificate()
        if cert.symmetry_defect > ASSEMBLY_CERT_TOL:
            raise ValueError(
                f"coefficient certificate fails: symmetry defect {cert.symmetry_defect:.3e}")
        self.field = field
        self.cert = cert
        self.lattice = Lattice(K)
        self.pad = pad
        self.grid_n = pad * (2 * K + 1)
        if self.grid_n < 2 * K + 1:
            raise AliasingBudgetError(
                f"grid {self.grid_n} cannot represent strains of modes up to K={K}")
        n = self.grid_n
        ax = (np.arange(n) + 0.5) / n
        pts = np.stack(np.meshgrid(ax, ax, ax, indexing='ij'), axis=-1)
        self.samples = field.at(pts)              # (N,N,N,3,3,3,3)
        # grid DFT G[m] = (1/N^3) sum_j A(y_j) e^{2 pi i m.j/N}; the midpoint
        # half-shift phase is applied per true difference frequency at gather
        self._conv = np.fft.ifftn(self.samples, axes=(0, 1, 2))
        self._lock = threading.Lock()
        self._chol0 = None

    # -- symbol families ----------------------------------------------------
    def symbols(self, chi, family='full'):
        """Strain symbols (M,3,3,3): family 'full', 'symgrad' or 'xchi'."""
        if family == 'full':
            return strain_symbols(self.lattice, chi)
        if family == 'symgrad':
            return strain_symbols(self.lattice, np.zeros(3))
        if family == 'xchi':
            e = strain_symbols(self.lattice, chi).copy()
            k0 = strain_symbols(self.lattice, np.zeros(3))
            return e - k0
        raise ValueError(f"unknown symbol family {family!r}")

    # -- assembly -----------------------------------------------------------
    def _gather(self, d):
        """Convolution coefficients F(d) for integer differences d (..., 3)."""
        n = self.grid_n
        ph = np.exp(1j * np.pi * d.sum(axis=-1) / n)
        idx = np.mod(d, n)
        block = self._conv[idx[..., 0], idx[..., 1], idx[..., 2]]
        return ph[..., None, None, None, None] * block

    def mixed_block(self, chi, trial='full', test='full', row_modes=None, chunk=48):
        """Dense block B[(m,p),(m',q)] = quad A (trial_q at m') : conj(test_p at m).

        row_modes restricts the test modes (array of flat mode indices).
        """
        lat = self.lattice
        k = lat.modes
        rows = np.arange(lat.n_modes) if row_modes is None else np.asarray(row_modes)
        e_test = self.symbols(chi, test)
        e_trial = self.symbols(chi, trial)
        out = np.empty((3 * rows.size, 3 * lat.n_modes), dtype=complex)
        for s in range(0, rows.size, chunk):
            r = rows[s:s + chunk]
            d = k[None, :, :] - k[r][:, None, :]        # (R, M, 3): col - row
            f = self._gather(d)                          # (R, M, 3,3,3,3)
            t1 = np.einsum('rcijlm,cqlm->rcijq', f, e_trial, optimize=True)
            blk = np.einsum('rpij,rcijq->rpcq', e_test[r].conj(), t1, optimize=True)
            out[3 * s:3 * (s + r.size)] = blk.reshape(3 * r.size, 3 * lat.n_modes)
        return out

    def assemble(self, chi):
        """Hermitian fiber matrix at quasimomentum chi, with defect bookkeeping."""
        a = self.mixed_block(chi, 'full', 'full')
        scale = max(np.abs(a).max(), 1e-300)
        defect = float(np.abs(a - a.conj().T).max() / scale)
        if defect > 100 * HERMITICITY_TOL:
            raise AssertionError(f"assembly lost hermiticity: defect {defect:.3e}")
        return FiberOperator(self, np.asarray(chi, dtype=float),
                             0.5 * (a + a.conj().T), defect)

    # -- physical-space route (independent of mixed_block) -------------------
    def matrix_field_values(self, p_modes):
        """Evaluate a matrix-valued mode field (M,3,3) on the quadrature grid."""
        return synthesize(self.lattice, p_modes, self.grid_n)

    def stress(self, p_modes):
        """Grid values of A(y) P(y) for a matrix-valued mode field P."""
        vals = self.matrix_field_values(p_modes)
        return np.einsum('...ijlm,...lm->...ij', self.samples, vals)

    def weak_load(self, p_modes, chi, test='full'):
        """Vector b[m,p] = quad A P : conj(test-strain of basis (m,p))."""
        sig = analyze(self.lattice, self.stress(p_modes), self.grid_n)
        e_test = self.symbols(chi, test)
        return np.einsum('mpij,mij->mp', e_test.conj(), sig)

    def apply(self, chi, u_modes):
        """Operator application via the grid (FFT) route; u_modes (M,3)."""
        e = self.symbols(chi, 'full')
        p = np.einsum('mp,mpij->mij', u_modes, e)
        return self.weak_load(p, chi, 'full')

    def pair(self, p_modes, q_modes):
        """Energy pairing quad A P : conj(Q) of two matrix-valued mode fields."""
        sig = analyze(self.lattice, self.stress(p_modes), self.grid_n)
        return complex(np.einsum('mij,mij->', sig, np.asarray(q_modes).conj()))

    # -- cell stiffness (chi = 0, zero-mean modes) ---------------------------
    def chol0(self):
        """Cholesky factor of the chi=0 stiffness on mean-zero modes."""
        with self._lock:
            if self._chol0 is None:
                a0 = self.mixed_block(np.zeros(3), 'symgrad', 'symgrad')
                self._chol0 = sla.cho_factor(a0[3:, 3:], check_finite=False)
            return self._chol0

    def solve_mean_zero(self, rhs):
        """Solve the chi=0 stiffness system for mean-zero data.

        rhs has shape (3M,) or (3M, nrhs) in flat dof order; the mode-0 rows
        are ignored (they must vanish for solvability) and the solution has
        zero mean by construction.
        """
        rhs = np.asarray(rhs, dtype=complex)
        single = rhs.ndim == 1
        r = rhs.reshape(rhs.shape[0], -1)
        x = np.zeros_like(r)
        x[3:] = sla.cho_solve(self.chol0(), r[3:], check_finite=False)
        return x[:, 0] if single else x


class FiberOperator:
    """Assembled fiber matrix with cached spectral data."""

    def __init__(self, engine, chi, matrix, hermiticity_defect):
        self.engine = engine
        self.chi = chi
        self.matrix = matrix
        self.hermiticity_defect = hermiticity_defect
        self._eig = None

    @property
    def K(self):
        return self.engine.lattice.K

    @property
    def dim(self):
        return self.matrix.shape[0]

    def eig(self):
        """Full Hermitian eigendecomposition (ascending), cached."""
        if self._eig is None:
            w, v = np.linalg.eigh(self.matrix)
            self._eig = (w, v)
        return self._eig

    def eigenvalues(self):
        return self.eig()[0]

    def low_eigenvalues(self, count):
        """First eigenvalues only; avoids the full decomposition when uncached."""
        if self._eig is not None:
            return self._eig[0][:count]
        return sla.eigh(self.matrix, eigvals_only=True,
                        subset_by_index=[0, count - 1], check_finite=False)

    def dist_rescaled(self, z):
        """Distance from z to the spectrum of |chi|^-2 A_chi."""
        s = float(np.dot(self.chi, self.chi))
        return float(np.abs(self.eigenvalues() / s - z).min())

    def resolvent_apply(self, z, f_flat):
        """Solve (|chi|^-2 A - z) u = f by direct dense solve, with residual check."""
        s = float(np.dot(self.chi, self.chi))
        d = self.dist_rescaled(z)
        if d < SPECTRUM_MARGIN:
            raise SpectrumProximityError(z, d)
        m = self.matrix / s - z * np.eye(self.dim)
        u = np.linalg.solve(m, f_flat)
        res = np.linalg.norm(m @ u - f_flat)
        if res > SOLVE_RESIDUAL_TOL * max(np.linalg.norm(f_flat), 1e-300):
            raise AssertionError(f"resolvent residual {res:.3e} too large")
        return u

    def resolvent_apply_eig(self, z, f_flat):
        """Same solve through the eigendecomposition (independent route)."""
        s = float(np.dot(self.chi, self.chi))
        w, v = self.eig()
        return v @ ((v.conj().T @ f_flat) / (w / s - z))


class FiberSpectrum:
    """Leading eigenpairs of a fiber operator and the rank-3 low projector."""

    def __init__(self, op, count):
        if count > op.dim:
            raise ValueError(f"requested {count} eigenpairs of a {op.dim}-dim operator")
        w, v = op.eig()
        scale = max(abs(w[0]), abs(w[-1]), 1e-300)
        res = np.linalg.norm(op.matrix @ v[:, :count] - v[:, :count] * w[:count], axis=0)
        if res.max() > EIG_RESIDUAL_TOL * scale:
            raise AssertionError(f"eigen residual {res.max():.3e} exceeds tolerance")
        self.operator = op
        self.eigenvalues = w[:count].copy()
        self.vectors = v[:, :count].copy()
        self.count = count

    def field(self, i):
        lat = self.operator.engine.lattice
        return TorusField(lat, self.vectors[:, i].reshape(lat.n_modes, 3))

    def low_projection(self):
        """Orthogonal projector onto the span of the three lowest eigenvectors."""
        v3 = self.eig_vectors_low()
        return v3 @ v3.conj().T

    def eig_vectors_low(self):
        if self.count < 3:
            raise ValueError("need at least three eigenpairs")
        return self.vectors[:, :3]


def fiber_spectrum(op, count):
    return FiberSpectrum(op, count)


def fiber_resolvent(op, z, f):
    """Solve (|chi|^-2 A_chi - z) u = f for a TorusField f; returns a TorusField."""
    u = op.resolvent_apply(z, np.asarray(f.coeffs).reshape(-1))
    return TorusField(op.engine.lattice, u.reshape(-1, 3))


# ---------------------------------------------------------------------------
# engine / spectral caches
# ---------------------------------------------------------------------------
_ENGINES = {}
_ENGINE_LOCK = threading.Lock()
_OPS = OrderedDict()
_OPS_CAPACITY = 6
_CACHE_STATS = {"hits": 0, "misses": 0}


def get_engine(field, K, pad=2):
    key = (field.digest(), K, pad)
    with _ENGINE_LOCK:
        if key not in _ENGINES:
            _ENGINES[key] = FormEngine(field, K, pad)
        return _ENGINES[key]


def get_operator(field, chi, K, pad=2):
    """Assembled fiber operator with a small LRU so eigendata can be reused."""
    chi = np.asarray(chi, dtype=float)
    key = (field.digest(), K, pad, chi.tobytes())
    with _ENGINE_LOCK:
        if key in _OPS:
            _OPS.move_to_end(key)
            _CACHE_STATS["hits"] += 1
            return _OPS[key]
        _CACHE_STATS["misses"] += 1
    op = get_engine(field, K, pad).assemble(chi)
    with _ENGINE_LOCK:
        _OPS[key] = op
        while len(_OPS) > _OPS_CAPACITY:
            _OPS.popitem(last=False)
    return op


def cache_stats():
    return dict(_CACHE_STATS)


def clear_caches():
    with _ENGINE_LOCK:
        _ENGINES.clear()
        _OPS.clear()
        _CACHE_STATS.update(hits=0, misses=0)


# ---------------------------------------------------------------------------
# spectral structure checks
# ---------------------------------------------------------------------------
def rayleigh_bounds(field, chi_samples, K, pad=2, n_low=4):
    """Rescaled low-eigenvalue band and gap over a set of quasimomenta.

    Returns dict with c_low = min lambda_1/|chi|^2, C_high = max
    lambda_3/|chi|^2, gap = min lambda_4, and the per-chi table.
    """
    rows = []
    for chi in chi_samples:
        chi = np.asarray(chi, dtype=float)
        s = float(np.dot(chi, chi))
        if s == 0.0:
            raise ValueError("rayleigh_bounds requires chi != 0")
        op = get_operator(field, chi, K, pad)
        w = op.low_eigenvalues(n_low)
        rows.append((chi, w))
    c_low = min(float(w[0] / np.dot(c, c)) for c, w in rows)
    c_high = max(float(w[2] / np.dot(c, c)) for c, w in rows)
    gap = min(float(w[3]) for c, w in rows)
    ok = c_low > 0 and gap > 0
    return {"c_low": c_low, "C_high": c_high, "gap": gap, "ok": ok, "table": rows}


def abstract_resolvent_check(op, z, rng, n_samples=20):
    """Weak-resolvent inequality test in the graph norm |(A^(1/2)+I) . |.

    For functionals r represented against the graph inner product, the
    solution of a(u,v) - z<u,v> = R(v) satisfies, per eigencomponent, the
    multiplier (sqrt(f)+1)^2/(f-z), and the measured ratio
    |u|_X / |R|_X* must stay below 4 * max(1, |z+1|/dist(z, spec)).

    Returns (worst_ratio, bound, sharp) where sharp is the exact supremum
    of the multiplier ratio over the discrete spectrum.
    """
    s = float(np.dot(op.chi, op.chi))
    w, v = op.eig()
    f = w / s
    d = float(np.abs(f - z).min())
    if d <= 0:
        raise SpectrumProximityError(z, d)
    mult = (np.sqrt(f) + 1.0) ** 2 / (f - z)
    worst = 0.0
    for _ in range(n_samples):
        r = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
        rc = v.conj().T @ r
        num = np.linalg.norm((np.sqrt(f) + 1.0) * mult * rc)
        den = np.linalg.norm((np.sqrt(f) + 1.0) * rc)
        worst = max(worst, num / den)
    bound = 4.0 * max(1.0, abs(z + 1.0) / d)
    sharp = float(np.abs(mult).max())
    return worst, bound, sharp


def export_spectrum_csv(path, entries):
    """Write eigenvalue tables: columns chi1, chi2, chi3, index, eigenvalue."""
    with open(path, 'w') as fh:
        fh.write("chi1,chi2,chi3,index,eigenvalue\n")
        for chi, evals in entries:
            c = [repr(float(x)) for x in chi]
            for i, lam in enumerate(evals):
                fh.write(f"{c[0]},{c[1]},{c[2]},{i + 1},{repr(float(lam))}\n")
