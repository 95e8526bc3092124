"""Periodic fourth-order coefficient tensors on a voxel grid.

Storage convention: a tensor C acts on a matrix m by
(C m)_ij = sum_kl C[i,j,k,l] m[k,l], with the minor symmetries
C[i,j,k,l] = C[j,i,k,l] = C[i,j,l,k] and the major symmetry
C[i,j,k,l] = C[k,l,i,j].

A CoefficientField holds one tensor per voxel of an n1 x n2 x n3 grid over
the unit cell [0,1)^3, the voxel value being the medium evaluated at the
voxel center (i+1/2)/n.  Fields are immutable after construction.
"""
import hashlib
import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .sym6 import PAIRS, sym, tensor_to_voigt

_EYE = np.eye(3)

MAGIC = b"BHG1"


@dataclass(frozen=True)
class ElasticTensor:
    """A single fourth-order stiffness tensor (3,3,3,3)."""
    entries: np.ndarray

    def __post_init__(self):
        e = np.ascontiguousarray(np.asarray(self.entries, dtype=float))
        if e.shape != (3, 3, 3, 3):
            raise ValueError(f"expected shape (3,3,3,3), got {e.shape}")
        e.flags.writeable = False
        object.__setattr__(self, 'entries', e)


def apply_tensor(t, m):
    """(C m)_ij = sum_kl C[i,j,k,l] m[k,l]; linear in m, complex m allowed."""
    c = t.entries if isinstance(t, ElasticTensor) else np.asarray(t)
    return np.einsum('ijkl,...kl->...ij', c, np.asarray(m))


def make_isotropic(lam, mu):
    """Isotropic stiffness C xi = 2 mu sym(xi) + lam tr(xi) I.

    Requires mu > 0 and 3 lam + 2 mu > 0 (positive definiteness on
    symmetric matrices, with nu = min(2 mu, 3 lam + 2 mu)).
    """
    if not (mu > 0 and 3 * lam + 2 * mu > 0):
        raise ValueError(
            f"isotropic tensor not positive definite: mu={mu}, 3*lam+2*mu={3 * lam + 2 * mu}")
    c = (mu * (np.einsum('ik,jl->ijkl', _EYE, _EYE) + np.einsum('il,jk->ijkl', _EYE, _EYE))
         + lam * np.einsum('ij,kl->ijkl', _EYE, _EYE))
    return ElasticTensor(c)


@dataclass(frozen=True)
class Certificate:
    """Measured properties of a coefficient field (never trusted, always recomputed)."""
    nu_estimate: float
    linf: float
    symmetry_defect: float


@dataclass(frozen=True)
class CoefficientField:
    """Voxel samples of the periodic coefficient, shape (n1,n2,n3,3,3,3,3)."""
    samples: np.ndarray
    _digest: str = field(default="", compare=False)

    def __post_init__(self):
        s = np.ascontiguousarray(np.asarray(self.samples, dtype=float))
        if s.ndim != 7 or s.shape[3:] != (3, 3, 3, 3):
            raise ValueError(f"expected shape (n1,n2,n3,3,3,3,3), got {s.shape}")
        s.flags.writeable = False
        object.__setattr__(self, 'samples', s)
        h = hashlib.sha256()
        h.update(struct.pack('<3q', *s.shape[:3]))
        h.update(s.tobytes())
        object.__setattr__(self, '_digest', h.hexdigest())

    @property
    def resolution(self):
        return self.samples.shape[:3]

    def digest(self):
        return self._digest

    def certificate(self):
        """Measured nu/linf/symmetry data; computed on demand and cached,
        never trusted from construction."""
        cert = getattr(self, '_cert', None)
        if cert is None:
            cert = check_coefficients(self)
            object.__setattr__(self, '_cert', cert)
        return cert

    def at(self, points):
        """Voxel lookup at points in [0,1)^3; points shape (..., 3)."""
        pts = np.mod(np.asarray(points), 1.0)
        n = np.array(self.resolution)
        idx = np.minimum((pts * n).astype(int), n - 1)
        return self.samples[idx[..., 0], idx[..., 1], idx[..., 2]]


def constant_field(t, resolution=1):
    """Homogeneous field made of one tensor."""
    n = (resolution,) * 3 if np.isscalar(resolution) else tuple(resolution)
    s = np.broadcast_to(t.entries, n + (3, 3, 3, 3)).copy()
    return CoefficientField(s)


def make_laminate(phase_a, phase_b, volume_fraction, axis, resolution):
    """Two-phase laminate along one axis (1-based), piecewise constant.

    A voxel belongs to phase_a iff its center coordinate along the axis is
    below volume_fraction; the realized fraction is therefore
    round-to-voxel of the requested one (documented rounding rule).
    """
    if not 0.0 < volume_fraction < 1.0:
        raise ValueError(f"volume_fraction must lie in (0,1), got {volume_fraction}")
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    n = int(resolution)
    if n < 1:
        raise ValueError("resolution must be positive")
    centers = (np.arange(n) + 0.5) / n
    in_a = centers < volume_fraction
    if in_a.all() or not in_a.any():
        raise ValueError(
            f"fraction {volume_fraction} unresolvable at resolution {n}: "
            "one phase would vanish after round-to-voxel")
    s = np.empty((n, n, n, 3, 3, 3, 3))
    shape = [1, 1, 1]
    shape[axis - 1] = n
    mask = in_a.reshape(shape)
    s[...] = np.where(mask[..., None, None, None, None], phase_a.entries, phase_b.entries)
    return CoefficientField(s)


def make_smooth_laminate(phase_a, phase_b, axis, resolution, depth=1.0):
    """Single-harmonic blend along one axis: w(y) = (1 + depth*cos(2 pi y))/2.

    Band-limited profile, so Fourier-Galerkin solves converge spectrally;
    used as the analytically tractable counterpart of the step laminate.
    """
    if not 0.0 < depth <= 1.0:
        raise ValueError(f"depth must lie in (0,1], got {depth}")
    n = int(resolution)
    centers = (np.arange(n) + 0.5) / n
    w = 0.5 * (1.0 + depth * np.cos(2 * np.pi * centers))
    s = np.empty((n, n, n, 3, 3, 3, 3))
    shape = [1, 1, 1]
    shape[axis - 1] = n
    wv = w.reshape(shape)[..., None, None, None, None]
    s[...] = wv * phase_a.entries + (1.0 - wv) * phase_b.entries
    return CoefficientField(s)


def make_cube_inclusion(matrix_phase, inclusion_phase, half_width, resolution):
    """Cube inclusion of side 2*half_width centered in the cell."""
    if not 0.0 < half_width < 0.5:
        raise ValueError(f"half_width must lie in (0, 0.5), got {half_width}")
    n = int(resolution)
    centers = (np.arange(n) + 0.5) / n
    inside1 = np.abs(centers - 0.5) < half_width
    mask = inside1[:, None, None] & inside1[None, :, None] & inside1[None, None, :]
    s = np.where(mask[..., None, None, None, None],
                 inclusion_phase.entries, matrix_phase.entries)
    return CoefficientField(np.ascontiguousarray(s))


def check_coefficients(f):
    """Measure symmetry defect, ellipticity and sup-norm of a field.

    nu_estimate is the min over voxels of the smallest eigenvalue of the
    6x6 matrix in the orthonormal symmetric basis (the action on symmetric
    matrices); symmetry_defect is the max violation of the minor and major
    index symmetries.  Returns defects, never raises.
    """
    s = f.samples
    d1 = np.abs(s - s.transpose(0, 1, 2, 4, 3, 5, 6)).max()
    d2 = np.abs(s - s.transpose(0, 1, 2, 3, 4, 6, 5)).max()
    d3 = np.abs(s - s.transpose(0, 1, 2, 5, 6, 3, 4)).max()
    voigt = tensor_to_voigt(s.reshape(-1, 3, 3, 3, 3))
    voigt = 0.5 * (voigt + voigt.transpose(0, 2, 1))
    eig = np.linalg.eigvalsh(voigt)
    return Certificate(nu_estimate=float(eig[:, 0].min()),
                       linf=float(np.abs(s).max()),
                       symmetry_defect=float(max(d1, d2, d3)))


# ---------------------------------------------------------------------------
# serialization: "BHG1" binary container and JSON builder descriptions
# ---------------------------------------------------------------------------
# Container layout (little endian):
#   magic "BHG1" | section tag (8 bytes, ascii, space padded) | payload
# section "coeff": 3 x int64 dims, then per voxel the 21 unique entries
#   C[i,j,k,l] for Voigt pairs (a, b) with a <= b in the order of sym6.PAIRS,
#   as float64.
# section "field": int64 cutoff K, then (2K+1)^3 x 3 complex coefficients
#   interleaved (re, im) as float64, modes in FFT axis order.

_UPPER = [(a, b) for a in range(6) for b in range(a, 6)]


def write_field(f, path_or_buf):
    """Write a CoefficientField in the BHG1 container (section 'coeff')."""
    buf = _open(path_or_buf, 'wb')
    try:
        buf.write(MAGIC)
        buf.write(b"coeff   ")
        buf.write(struct.pack('<3q', *f.resolution))
        vox = f.samples.reshape(-1, 3, 3, 3, 3)
        cols = np.empty((vox.shape[0], len(_UPPER)))
        for c, (a, b) in enumerate(_UPPER):
            i, j = PAIRS[a]
            k, l = PAIRS[b]
            cols[:, c] = vox[:, i, j, k, l]
        buf.write(cols.astype('<f8').tobytes())
    finally:
        if not hasattr(path_or_buf, 'write'):
            buf.close()


def read_field(path_or_buf):
    """Read a CoefficientField from the BHG1 container."""
    buf = _open(path_or_buf, 'rb')
    try:
        magic = buf.read(4)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
        tag = buf.read(8)
        if tag != b"coeff   ":
            raise ValueError(f"unexpected section {tag!r}")
        dims = struct.unpack('<3q', buf.read(24))
        nvox = dims[0] * dims[1] * dims[2]
        cols = np.frombuffer(buf.read(nvox * len(_UPPER) * 8), dtype='<f8')
        cols = cols.reshape(nvox, len(_UPPER))
        vox = np.zeros((nvox, 3, 3, 3, 3))
        for c, (a, b) in enumerate(_UPPER):
            i, j = PAIRS[a]
            k, l = PAIRS[b]
            v = cols[:, c]
            for ii, jj in {(i, j), (j, i)}:
                for kk, ll in {(k, l), (l, k)}:
                    vox[:, ii, jj, kk, ll] = v
                    vox[:, kk, ll, ii, jj] = v
        return CoefficientField(vox.reshape(dims + (3, 3, 3, 3)))
    finally:
        if not hasattr(path_or_buf, 'read'):
            buf.close()


def _open(path_or_buf, mode):
    if hasattr(path_or_buf, 'write') or hasattr(path_or_buf, 'read'):
        return path_or_buf
    return open(path_or_buf, mode)


def field_from_json(obj):
    """Build a CoefficientField from a JSON description (dict or JSON text).

    Builders: isotropic {lambda, mu, resolution?}, laminate {phases,
    fraction, axis, resolution}, smooth_laminate {phases, axis, resolution,
    depth?}, cube {phases, half_width, resolution}.  Phase entries are
    isotropic {lambda, mu} dicts.
    """
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    kind = obj.get("builder")
    if kind is None:
        raise ValueError("missing field: builder")

    def phase(p):
        return make_isotropic(p["lambda"], p["mu"])

    if kind == "isotropic":
        t = make_isotropic(obj["lambda"], obj["mu"])
        return constant_field(t, obj.get("resolution", 1))
    if kind == "laminate":
        a, b = (phase(p) for p in obj["phases"])
        return make_laminate(a, b, obj["fraction"], obj["axis"], obj["resolution"])
    if kind == "smooth_laminate":
        a, b = (phase(p) for p in obj["phases"])
        return make_smooth_laminate(a, b, obj["axis"], obj["resolution"],
                                    obj.get("depth", 1.0))
    if kind == "cube":
        a, b = (phase(p) for p in obj["phases"])
        return make_cube_inclusion(a, b, obj["half_width"], obj["resolution"])
    raise ValueError(f"unknown builder: {kind}")
