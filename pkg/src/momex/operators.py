"""
Dense complex linear algebra used by every solver.

Matrices are plain ``numpy.ndarray`` objects with ``complex128`` entries.
:class:`TargetOperator` wraps a target-system matrix together with the
banded description consumed by :mod:`momex.kernels`.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import InvalidDimensionError, ShapeError, SymmetryError


def dag(a):
    return np.conj(np.swapaxes(a, -1, -2))


def build_ladder(dim):
    """Truncated annihilation and creation operators on ``dim`` Fock levels.

    Returns ``(a, a_dag)`` with ``<m|a|n> = sqrt(n) delta_{m, n-1}``.
    """
    if int(dim) != dim or dim < 1:
        raise InvalidDimensionError(f"ladder dimension must be a positive integer, got {dim!r}")
    dim = int(dim)
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    return a, dag(a).copy()


def destroy(dim):
    return build_ladder(dim)[0]


def number(dim):
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def pauli():
    """``(sigma_x, sigma_y, sigma_z)``."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return sx, sy, sz


def bloch_state(r):
    """Two-level density matrix ``(I + r . sigma) / 2``."""
    sx, sy, sz = pauli()
    return 0.5 * (np.eye(2) + r[0] * sx + r[1] * sy + r[2] * sz)


def _require_square(a, name="matrix"):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {a.shape}")
    return a


# Pade approximants of exp for the scaling-and-squaring method
# (Higham, SIAM J. Matrix Anal. Appl. 26 (2005) 1179).
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1,
          7: 9.504178996162932e-1, 9: 2.097847961257068e0,
          13: 5.371920351148152e0}


def _pade_low(a, m):
    b = _PADE[m]
    n = a.shape[0]
    ident = np.eye(n, dtype=a.dtype)
    a2 = a @ a
    powers = [ident, a2]
    for _ in range(2, m // 2 + 1):
        powers.append(powers[-1] @ a2)
    u = sum(b[2 * k + 1] * powers[k] for k in range(len(powers)))
    v = sum(b[2 * k] * powers[k] for k in range(len(powers)))
    return a @ u, v


def _pade13(a):
    b = _PADE[13]
    n = a.shape[0]
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    tmp = b[13] * a6 + b[11] * a4 + b[9] * a2
    tmp = a6 @ tmp
    tmp += b[7] * a6 + b[5] * a4 + b[3] * a2
    tmp[np.diag_indices(n)] += b[1]
    u = a @ tmp
    v = b[12] * a6 + b[10] * a4 + b[8] * a2
    v = a6 @ v
    v += b[6] * a6 + b[4] * a4 + b[2] * a2
    v[np.diag_indices(n)] += b[0]
    return u, v


def matrix_exp(a, t=1.0):
    """``exp(a * t)`` by scaling and squaring with a diagonal Pade approximant.

    The Pade degree (3, 5, 7, 9 or 13) and the number of squarings are chosen
    from the 1-norm of ``a * t``.
    """
    a = _require_square(a)
    q = np.asarray(a, dtype=complex) * t
    n = q.shape[0]
    if n == 0:
        return q.copy()
    norm1 = np.linalg.norm(q, 1)
    if not np.isfinite(norm1):
        raise ValueError("matrix_exp input contains non-finite entries")
    if norm1 == 0.0:
        return np.eye(n, dtype=complex)
    s = 0
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            u, v = _pade_low(q, m)
            break
    else:
        s = max(0, int(np.ceil(np.log2(norm1 / _THETA[13]))))
        if s:
            q = q / 2.0**s
        u, v = _pade13(q)
    del q
    p = v + u
    v -= u
    del u
    r = scipy.linalg.solve(v, p, overwrite_a=True, overwrite_b=True, check_finite=False)
    del v, p
    for _ in range(s):
        r = r @ r
    return r


@dataclass(frozen=True)
class HermitianEig:
    """Spectral decomposition ``V = sum_i g_i |v_i><v_i|``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def projector(self, i):
        v = self.eigenvectors[:, i]
        return np.outer(v, v.conj())


def hermitian_eig(v, tol=1e-12):
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.

    Each eigenvector is rotated so that its first non-negligible component is
    real and positive.
    """
    v = _require_square(v).astype(complex)
    scale = max(1.0, np.abs(v).max(initial=0.0))
    if np.abs(v - dag(v)).max(initial=0.0) > tol * scale:
        raise SymmetryError("hermitian_eig called on a non-Hermitian matrix")
    w, vecs = np.linalg.eigh(0.5 * (v + dag(v)))
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-10)[0]
        vecs[:, k] = col * (abs(col[idx]) / col[idx])
    return HermitianEig(w, vecs)


def frobenius_distance(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


class TargetOperator:
    """A target-system matrix prepared for block-stack multiplication.

    Matrices with few nonzero diagonals (ladder operators, number operators,
    Pauli matrices, quadratic couplings) take the banded kernels; anything
    denser uses BLAS.
    """

    def __init__(self, matrix):
        matrix = np.ascontiguousarray(_require_square(matrix), dtype=complex)
        d = matrix.shape[0]
        self.matrix = matrix
        self.dim = d
        offsets = [o for o in range(-(d - 1), d) if np.any(np.diagonal(matrix, o) != 0)]
        self.offsets = np.array(offsets, dtype=np.int64)
        diags = np.zeros((len(offsets), d), dtype=complex)
        for k, o in enumerate(offsets):
            dg = np.diagonal(matrix, o)
            if o >= 0:
                diags[k, : d - o] = dg
            else:
                diags[k, -o:] = dg
        self.diags = diags
        self.banded = len(offsets) <= max(3, d // 3)

    @property
    def is_zero(self):
        return self.offsets.size == 0

    def dag(self):
        return TargetOperator(dag(self.matrix))

    def left(self, x, out=None, alpha=1.0):
        """``out += alpha * A x`` blockwise; ``x`` has shape ``(..., d, d)``."""
        return self._apply(kernels.band_left, x, out, alpha)

    def right(self, x, out=None, alpha=1.0):
        """``out += alpha * x A`` blockwise."""
        return self._apply(kernels.band_right, x, out, alpha)

    def _apply(self, kernel, x, out, alpha):
        d = self.dim
        if x.shape[-2:] != (d, d):
            raise ShapeError(f"blocks of shape {x.shape[-2:]} do not match operator dimension {d}")
        if out is None:
            out = np.zeros(x.shape, dtype=complex)
        if self.is_zero or alpha == 0:
            return out
        xs = np.ascontiguousarray(x).reshape(-1, d, d)
        if out.flags.c_contiguous:
            kernel(self, xs, out.reshape(-1, d, d), alpha)
        else:
            tmp = np.zeros(xs.shape, dtype=complex)
            kernel(self, xs, tmp, alpha)
            out += tmp.reshape(out.shape)
        return out
