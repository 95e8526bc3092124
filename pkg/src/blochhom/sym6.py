"""Orthonormal basis of symmetric 3x3 matrices and Voigt-style 6x6 storage.

The basis is E_11, E_22, E_33 followed by (E_12+E_21)/sqrt(2),
(E_13+E_31)/sqrt(2), (E_23+E_32)/sqrt(2).  The sqrt(2) factors make the
basis Frobenius-orthonormal, so the 6x6 matrix of a fourth-order tensor in
this basis is literally the Gram matrix of its quadratic form and its
eigenvalues are the eigenvalues of the tensor acting on symmetric matrices.
"""
import numpy as np

#: index pairs (i, j) defining the basis order
PAIRS = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]


def _build_basis():
    e = np.zeros((6, 3, 3))
    for a, (i, j) in enumerate(PAIRS):
        if i == j:
            e[a, i, j] = 1.0
        else:
            e[a, i, j] = e[a, j, i] = 1.0 / np.sqrt(2.0)
    e.flags.writeable = False
    return e


#: (6, 3, 3) array of basis matrices
BASIS = _build_basis()


def sym_to_coords(m):
    """Coordinates of a (possibly complex) symmetric 3x3 matrix in BASIS.

    Works on batched input of shape (..., 3, 3); returns (..., 6).
    """
    return np.einsum('...ij,aij->...a', np.asarray(m), BASIS)


def coords_to_sym(v):
    """Inverse of sym_to_coords; batched (..., 6) -> (..., 3, 3)."""
    return np.einsum('...a,aij->...ij', np.asarray(v), BASIS)


def tensor_to_voigt(c):
    """6x6 Gram matrix B[a,b] = BASIS[a] : C BASIS[b] of a 4th-order tensor.

    Accepts batched input (..., 3, 3, 3, 3).
    """
    return np.einsum('aij,...ijkl,bkl->...ab', BASIS, np.asarray(c), BASIS)


def voigt_to_tensor(b):
    """Reconstruct the minor/major-symmetric 4th-order tensor from its 6x6 form."""
    return np.einsum('...ab,aij,bkl->...ijkl', np.asarray(b), BASIS, BASIS)


def sym(m):
    """Symmetric part, batched over leading axes."""
    m = np.asarray(m)
    return 0.5 * (m + np.swapaxes(m, -1, -2))
