"""Cell problems, the homogenized tensor, and its fiber matrix.

The classical cell problem for a constant symmetric strain xi seeks the
zero-mean periodic field u with

    quad A (xi + sym grad u) : conj(sym grad v) = 0   for all v,

and the homogenized tensor is assembled from the six basis solves.  The
quasimomentum variant replaces xi by i X_chi c for a constant vector c and
yields the 3x3 Hermitian fiber matrix.  All integrals use the same grid
quadrature as the fiber assembly, so the algebraic identities relating the
two (factorization through the 6x6 tensor, energy-form symmetry) hold to
machine precision.
"""
import json
import os
from dataclasses import dataclass

import numpy as np

from . import sym6
from .fiber import get_engine
from .lattice import TorusField, sym_grad

HOM_SYMMETRY_TOL = 1e-10
HERMITIAN_TOL = 1e-11
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class CellSolution:
    """Zero-mean solution of a cell problem with its defining data."""
    descriptor: tuple
    field: TorusField
    residual: float


@dataclass(frozen=True)
class HomogenizedTensor:
    """Effective tensor in the orthonormal symmetric basis (6x6), plus bounds."""
    voigt: np.ndarray
    nu_hom: float
    provenance: dict

    def tensor(self):
        return sym6.voigt_to_tensor(self.voigt)

    def fiber_matrix(self, chi):
        """(i X_chi)* Ahom (i X_chi) as a 3x3 matrix (the symbol at chi)."""
        chi = np.asarray(chi, dtype=float)
        cols = np.zeros((3, 6))
        for p in range(3):
            e = np.zeros(3)
            e[p] = 1.0
            cols[p] = sym6.sym_to_coords(sym6.sym(np.outer(e, chi)))
        return cols @ self.voigt @ cols.T

    def to_json(self):
        return json.dumps({
            "voigt": self.voigt.tolist(),
            "basis": "E11,E22,E33,(E12+E21)/sqrt2,(E13+E31)/sqrt2,(E23+E32)/sqrt2",
            "nu_hom": self.nu_hom,
            "provenance": self.provenance,
        }, indent=1, sort_keys=True)


def _solve_with_load(engine, load, descriptor):
    """Solve the chi=0 stiffness system for a weak load vector (M,3)."""
    b = load.reshape(-1)
    u = engine.solve_mean_zero(b)
    a0u = engine.apply(np.zeros(3), u.reshape(-1, 3))
    res = float(np.linalg.norm(a0u.reshape(-1)[3:] - b[3:]))
    scale = max(float(np.linalg.norm(b)), 1e-300)
    if res > 1e3 * RESIDUAL_TOL * scale:
        raise AssertionError(f"cell solve residual {res:.3e}")
    lat = engine.lattice
    return CellSolution(descriptor, TorusField(lat, u.reshape(lat.n_modes, 3)),
                        res / scale)


def solve_cell(field, xi, K, pad=2):
    """Classical cell problem for a constant symmetric 3x3 strain xi."""
    engine = get_engine(field, K, pad)
    xi = np.asarray(xi)
    if np.abs(xi - xi.T).max() > 1e-13 * max(1.0, np.abs(xi).max()):
        raise ValueError("xi must be symmetric")
    p = np.zeros((engine.lattice.n_modes, 3, 3), dtype=complex)
    p[engine.lattice.zero_index] = xi
    load = -engine.weak_load(p, np.zeros(3), 'symgrad')
    return _solve_with_load(engine, load, ("classical", xi.tobytes()))


def solve_chi_cell(field, chi, c, K, pad=2):
    """Quasimomentum cell problem for a constant vector c (strain i X_chi c)."""
    engine = get_engine(field, K, pad)
    chi = np.asarray(chi, dtype=float)
    c = np.asarray(c, dtype=complex)
    p = np.zeros((engine.lattice.n_modes, 3, 3), dtype=complex)
    p[engine.lattice.zero_index] = 1j * sym6.sym(np.outer(c, chi))
    load = -engine.weak_load(p, np.zeros(3), 'symgrad')
    return _solve_with_load(engine, load, ("fiber", chi.tobytes(), c.tobytes()))


_BASIS_CACHE = {}


def corrector_basis(field, K, pad=2):
    """The six classical cell solutions for the orthonormal strain basis.

    Returns an array (6, M, 3) of mode coefficients; entry i solves the
    cell problem for basis strain BASIS[i].  Memoized per (field, K, pad).
    """
    key = (field.digest(), K, pad)
    hit = _BASIS_CACHE.get(key)
    if hit is not None:
        return hit
    engine = get_engine(field, K, pad)
    out = np.zeros((6, engine.lattice.n_modes, 3), dtype=complex)
    for i in range(6):
        out[i] = solve_cell(field, sym6.BASIS[i], K, pad).field.coeffs
    out.flags.writeable = False
    if len(_BASIS_CACHE) > 8:
        _BASIS_CACHE.clear()
    _BASIS_CACHE[key] = out
    return out


def homogenized_tensor(field, K, pad=2, cache_dir=None):
    """Effective 6x6 tensor via the six cell solves, with two assembly routes.

    Route one reads off the mean stress of each solve; route two is the
    symmetric energy form on pairs of solves.  Both are computed, their
    disagreement and the symmetry defect must stay below HOM_SYMMETRY_TOL,
    and the returned matrix is the symmetrized route-one result.
    """
    cached = _cache_load(field, K, pad, cache_dir)
    if cached is not None:
        return cached
    engine = get_engine(field, K, pad)
    lat = engine.lattice
    sols = corrector_basis(field, K, pad)
    b1 = np.zeros((6, 6))
    b2 = np.zeros((6, 6))
    strains = np.zeros((6, lat.n_modes, 3, 3), dtype=complex)
    for j in range(6):
        u = TorusField(lat, sols[j])
        strains[j] = sym_grad(u)
        strains[j, lat.zero_index] += sym6.BASIS[j]
    for j in range(6):
        sig = engine.stress(strains[j])
        sig0 = np.mean(sig, axis=(0, 1, 2))
        b1[:, j] = np.real(sym6.sym_to_coords(sig0))
        for i in range(6):
            b2[i, j] = float(np.real(engine.pair(strains[j], strains[i])))
    route_defect = float(np.abs(b1 - b2).max())
    sym_defect = float(np.abs(b1 - b1.T).max())
    if max(route_defect, sym_defect) > HOM_SYMMETRY_TOL * max(1.0, np.abs(b1).max()):
        raise AssertionError(
            f"homogenized tensor defects: routes {route_defect:.3e}, symmetry {sym_defect:.3e}")
    voigt = 0.5 * (b1 + b1.T)
    eig = np.linalg.eigvalsh(voigt)
    nu_hom = float(min(eig[0], 1.0 / eig[-1]))
    hom = HomogenizedTensor(voigt, nu_hom, {
        "coefficients": field.digest(), "K": K, "pad": pad,
        "route_defect": route_defect, "symmetry_defect": sym_defect,
    })
    _cache_store(hom, cache_dir)
    return hom


def fiber_hom_matrix(field, chi, K, pad=2):
    """3x3 Hermitian fiber matrix <Ahom_chi c, d> from the chi cell solves.

    Assembled column by column by the defining pairing against i X_chi;
    Hermitian defect must stay below HERMITIAN_TOL relative.
    """
    engine = get_engine(field, K, pad)
    lat = engine.lattice
    chi = np.asarray(chi, dtype=float)
    m = np.zeros((3, 3), dtype=complex)
    eye = np.eye(3)
    xsym = np.stack([1j * sym6.sym(np.outer(eye[d], chi)) for d in range(3)])
    for c in range(3):
        sol = solve_chi_cell(field, chi, eye[c], K, pad)
        p = sym_grad(sol.field)
        p[lat.zero_index] += xsym[c]
        sig = engine.stress(p)
        sig0 = np.mean(sig, axis=(0, 1, 2))
        m[:, c] = np.einsum('dij,ij->d', xsym.conj(), sig0)
    scale = max(np.abs(m).max(), 1e-300)
    defect = float(np.abs(m - m.conj().T).max() / scale)
    if defect > 100 * HERMITIAN_TOL:
        raise AssertionError(f"fiber matrix hermitian defect {defect:.3e}")
    return 0.5 * (m + m.conj().T)


def fiber_hom_matrix_energy(field, chi, K, pad=2):
    """Same matrix through the symmetric energy form (independent route)."""
    engine = get_engine(field, K, pad)
    lat = engine.lattice
    chi = np.asarray(chi, dtype=float)
    eye = np.eye(3)
    strains = []
    for c in range(3):
        sol = solve_chi_cell(field, chi, eye[c], K, pad)
        p = sym_grad(sol.field)
        p[lat.zero_index] += 1j * sym6.sym(np.outer(eye[c], chi))
        strains.append(p)
    m = np.zeros((3, 3), dtype=complex)
    for c in range(3):
        for d in range(3):
            m[d, c] = engine.pair(strains[c], strains[d])
    return m


# ---------------------------------------------------------------------------
# disk cache for homogenized tensors
# ---------------------------------------------------------------------------
def cache_directory(cache_dir=None):
    if cache_dir is not None:
        return cache_dir
    return os.environ.get("BLOCHHOM_CACHE", "")


def _cache_path(field, K, pad, cache_dir):
    root = cache_directory(cache_dir)
    if not root:
        return None
    return os.path.join(root, f"hom_{field.digest()[:24]}_K{K}_p{pad}.json")


def _cache_load(field, K, pad, cache_dir):
    path = _cache_path(field, K, pad, cache_dir)
    if path is None or not os.path.exists(path):
        return None
    with open(path) as fh:
        obj = json.load(fh)
    return HomogenizedTensor(np.array(obj["voigt"]), obj["nu_hom"], obj["provenance"])


def _cache_store(hom, cache_dir):
    path = _cache_path_from_prov(hom, cache_dir)
    if path is None:
        return
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, 'w') as fh:
        fh.write(hom.to_json())


def _cache_path_from_prov(hom, cache_dir):
    root = cache_directory(cache_dir)
    if not root:
        return None
    p = hom.provenance
    return os.path.join(root, f"hom_{p['coefficients'][:24]}_K{p['K']}_p{p['pad']}.json")
