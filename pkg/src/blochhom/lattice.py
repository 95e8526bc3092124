"""Truncated Fourier lattice and periodic vector fields on the unit cell.

A field u(y) = sum_k a_k exp(2 pi i k.y) is stored by its coefficients on
the symmetric lattice |k_i| <= K, one complex 3-vector per mode, modes
enumerated in FFT axis order so that embedding into an FFT array of any
size N >= 2K+1 is plain indexing at k mod N.

Physical-space evaluation uses the midpoint grid y_j = (j+1/2)/N, matching
the voxel-center sampling of coefficient fields; the half-shift is carried
by a per-mode phase.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sym6 import sym


@lru_cache(maxsize=32)
def _modes(k_cut):
    ax = np.fft.fftfreq(2 * k_cut + 1, 1.0 / (2 * k_cut + 1)).astype(int)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing='ij'), axis=-1)
    m = g.reshape(-1, 3)
    m.flags.writeable = False
    return m


@dataclass(frozen=True)
class Lattice:
    """Symmetric cubic mode set |k_i| <= K; (2K+1)^3 modes with 0 included once."""
    K: int

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("cutoff K must be >= 1")

    @property
    def modes(self):
        return _modes(self.K)

    @property
    def n_modes(self):
        return (2 * self.K + 1) ** 3

    @property
    def zero_index(self):
        return 0  # FFT order puts k = 0 first

    def index_of(self, k):
        """Flat index of an integer mode k (must satisfy |k_i| <= K)."""
        k = np.asarray(k, dtype=int)
        if np.abs(k).max() > self.K:
            raise ValueError(f"mode {k} outside lattice K={self.K}")
        n = 2 * self.K + 1
        km = np.mod(k, n)
        return int((km[..., 0] * n + km[..., 1]) * n + km[..., 2])


def _shift_phase(lattice, grid_n):
    """Per-mode phase exp(i pi (k1+k2+k3)/N) for the midpoint grid."""
    k = lattice.modes
    return np.exp(1j * np.pi * k.sum(axis=1) / grid_n)


def synthesize(lattice, coeffs, grid_n):
    """Evaluate mode coefficients (M, *c) on the midpoint grid -> (N,N,N,*c)."""
    n = grid_n
    if n < 2 * lattice.K + 1:
        raise ValueError(f"grid {n} cannot carry modes up to K={lattice.K}")
    coeffs = np.asarray(coeffs)
    comp = coeffs.shape[1:]
    spec = np.zeros((n, n, n) + comp, dtype=complex)
    k = lattice.modes
    ph = _shift_phase(lattice, n).reshape((-1,) + (1,) * len(comp))
    spec[tuple(np.mod(k, n).T)] = coeffs * ph
    return np.fft.ifftn(spec, axes=(0, 1, 2)) * n ** 3


def analyze(lattice, values, grid_n=None):
    """Project midpoint-grid samples (N,N,N,*c) onto the lattice modes (M,*c).

    Returns the discrete Fourier coefficients of the trigonometric
    interpolant; exact inverse of synthesize for band-limited data.
    """
    values = np.asarray(values)
    n = values.shape[0] if grid_n is None else grid_n
    spec = np.fft.fftn(values, axes=(0, 1, 2)) / n ** 3
    k = lattice.modes
    comp = values.shape[3:]
    ph = _shift_phase(lattice, n).reshape((-1,) + (1,) * len(comp))
    return spec[tuple(np.mod(k, n).T)] / ph


@dataclass(frozen=True)
class TorusField:
    """Periodic vector field by Fourier coefficients, shape (M, 3)."""
    lattice: Lattice
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.coeffs, dtype=complex))
        if c.shape != (self.lattice.n_modes, 3):
            raise ValueError(f"expected {(self.lattice.n_modes, 3)}, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, 'coeffs', c)

    def mean(self):
        return self.coeffs[self.lattice.zero_index].copy()

    def l2_norm(self):
        return float(np.linalg.norm(self.coeffs))

    def h1_norm(self):
        w = 1.0 + np.sum((2 * np.pi * self.lattice.modes) ** 2, axis=1)
        return float(np.sqrt(np.sum(w[:, None] * np.abs(self.coeffs) ** 2)))

    def inner(self, other):
        """L2 inner product <u, v> (conjugate on the second argument)."""
        return complex(np.sum(self.coeffs * other.coeffs.conj()))


def zero_field(lattice):
    return TorusField(lattice, np.zeros((lattice.n_modes, 3), dtype=complex))


def constant_vector_field(lattice, c):
    a = np.zeros((lattice.n_modes, 3), dtype=complex)
    a[lattice.zero_index] = np.asarray(c, dtype=complex)
    return TorusField(lattice, a)


def random_field(lattice, rng, scale=1.0):
    a = rng.standard_normal((lattice.n_modes, 3)) + 1j * rng.standard_normal((lattice.n_modes, 3))
    return TorusField(lattice, scale * a)


def sym_grad(u):
    """Per-mode symmetrized gradient a_k -> sym(a_k (2 pi i k)^T), shape (M,3,3)."""
    k = u.lattice.modes
    g = np.einsum('mp,mq->mpq', u.coeffs, 2j * np.pi * k)
    return sym(g)


def x_chi_apply(chi, u):
    """Zero-order strain a_k -> sym(a_k chi^T), shape (M,3,3)."""
    chi = np.asarray(chi, dtype=float)
    g = np.einsum('mp,q->mpq', u.coeffs, chi)
    return sym(g)


def strain_symbols(lattice, chi):
    """Symbols of (sym grad + i X_chi) on the mode/vector basis.

    Returns E of shape (M, 3, 3, 3) with E[m, p] the strain of the basis
    field e_p exp(2 pi i k_m . y): i * sym(e_p (2 pi k_m + chi)^T).
    """
    chi = np.asarray(chi, dtype=float)
    w = 2 * np.pi * lattice.modes + chi  # (M, 3)
    e = np.zeros((lattice.n_modes, 3, 3, 3), dtype=complex)
    for p in range(3):
        g = np.zeros((lattice.n_modes, 3, 3), dtype=complex)
        g[:, p, :] = 1j * w
        e[:, p] = sym(g)
    return e


def h1_weights(lattice):
    """Diagonal per-mode weight sqrt(1 + |2 pi k|^2) realizing the H1 target norm."""
    return np.sqrt(1.0 + np.sum((2 * np.pi * lattice.modes) ** 2, axis=1))


def write_torus_field(u, path_or_buf):
    """BHG1 container, section 'field': int64 cutoff, interleaved complex."""
    import struct
    from .tensors import MAGIC, _open
    buf = _open(path_or_buf, 'wb')
    try:
        buf.write(MAGIC)
        buf.write(b"field   ")
        buf.write(struct.pack('<q', u.lattice.K))
        inter = np.empty((u.lattice.n_modes, 3, 2))
        inter[..., 0] = u.coeffs.real
        inter[..., 1] = u.coeffs.imag
        buf.write(inter.astype('<f8').tobytes())
    finally:
        if not hasattr(path_or_buf, 'write'):
            buf.close()


def read_torus_field(path_or_buf):
    """Inverse of write_torus_field."""
    import struct
    from .tensors import MAGIC, _open
    buf = _open(path_or_buf, 'rb')
    try:
        if buf.read(4) != MAGIC:
            raise ValueError("bad magic in field container")
        if buf.read(8) != b"field   ":
            raise ValueError("unexpected section in field container")
        k_cut = struct.unpack('<q', buf.read(8))[0]
        lat = Lattice(k_cut)
        raw = np.frombuffer(buf.read(lat.n_modes * 3 * 2 * 8), dtype='<f8')
        raw = raw.reshape(lat.n_modes, 3, 2)
        return TorusField(lat, raw[..., 0] + 1j * raw[..., 1])
    finally:
        if not hasattr(path_or_buf, 'read'):
            buf.close()


def scaled_h1_weights(lattice, chi, epsilon):
    """Weight sqrt(1 + |2 pi k + chi|^2 / eps^2): the eps-scaled gradient norm."""
    w = 2 * np.pi * lattice.modes + np.asarray(chi, dtype=float)
    return np.sqrt(1.0 + np.sum(w ** 2, axis=1) / epsilon ** 2)
