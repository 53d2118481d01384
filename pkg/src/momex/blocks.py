"""
Linear generators acting on grids of target-system operator blocks.

A state is an array ``x`` of shape ``(n_left, n_right, d, d)``; ``x[m, n]`` is
the target operator attached to oscillator indices ``(m, n)``.  Every
generator in this package has the form

    out[m, n] = sum_s c_s[m, n] x[m + dm_s, n + dn_s]
              + sum_t c_t A_t x[m, n] B_t
              + sum_l L_l (sum_s c_ls[m, n] x[m + dm_ls, n + dn_ls])
              + sum_r (sum_s c_rs[m, n] x[m + dm_rs, n + dn_rs]) R_r

with neighbours outside the grid treated as zero.  :class:`BlockGenerator`
stores the coefficient tables once and evaluates the map either with the
fused compiled kernel or with numpy, and can assemble the same map as a
sparse matrix for exponentiation.
"""
import numpy as np
import scipy.sparse as sp

from . import kernels
from ._accel import USE_NUMBA
from .errors import ShapeError
from .operators import TargetOperator


class BlockGenerator:
    def __init__(self, n_left, n_right, dim):
        self.n_left = int(n_left)
        self.n_right = int(n_right)
        self.dim = int(dim)
        self._ops = []
        self._terms = []
        self._left = {}
        self._right = {}
        self._scalar = {}
        self._packed = None
        m, n = np.meshgrid(np.arange(self.n_left), np.arange(self.n_right), indexing="ij")
        self.m = m.astype(float)
        self.n = n.astype(float)

    @property
    def shape(self):
        return (self.n_left, self.n_right, self.dim, self.dim)

    def _op(self, matrix):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (self.dim, self.dim):
            raise ShapeError(f"operator shape {matrix.shape} does not match target dimension {self.dim}")
        for k, op in enumerate(self._ops):
            if np.array_equal(op.matrix, matrix):
                return k
        self._ops.append(TargetOperator(matrix))
        self._packed = None
        return len(self._ops) - 1

    def _table(self, coef):
        c = np.broadcast_to(np.asarray(coef, dtype=complex), (self.n_left, self.n_right))
        return c.copy()

    def add_sandwich(self, a, b, coef=1.0):
        """Add ``coef * A x[m, n] B`` for every block."""
        if coef != 0:
            self._terms.append((self._op(a), self._op(b), complex(coef)))
            self._packed = None

    def add_scalar(self, dm, dn, coef):
        c = self._table(coef)
        key = (int(dm), int(dn))
        self._scalar[key] = self._scalar.get(key, 0) + c
        self._packed = None

    def _add_side(self, side, matrix, dm, dn, coef):
        k = self._op(matrix)
        shifts = side.setdefault(k, {})
        key = (int(dm), int(dn))
        shifts[key] = shifts.get(key, 0) + self._table(coef)
        self._packed = None

    def add_left(self, matrix, dm, dn, coef):
        """Add ``L * coef[m, n] x[m + dm, n + dn]``."""
        self._add_side(self._left, matrix, dm, dn, coef)

    def add_right(self, matrix, dm, dn, coef):
        """Add ``coef[m, n] x[m + dm, n + dn] * R``."""
        self._add_side(self._right, matrix, dm, dn, coef)

    def _pack_side(self, side):
        nl = len(side)
        smax = max([len(v) for v in side.values()], default=1)
        ops = np.zeros(nl, dtype=np.int64)
        sh = np.zeros((nl, smax, 2), dtype=np.int64)
        ns = np.zeros(nl, dtype=np.int64)
        coef = np.zeros((nl, smax, self.n_left, self.n_right), dtype=complex)
        for l, (k, shifts) in enumerate(side.items()):
            ops[l] = k
            ns[l] = len(shifts)
            for s, (key, c) in enumerate(shifts.items()):
                sh[l, s] = key
                coef[l, s] = c
        return ops, sh, ns, coef

    def _pack(self):
        if self._packed is not None:
            return self._packed
        d = self.dim
        nop = max(len(self._ops), 1)
        kmax = max([len(op.offsets) for op in self._ops], default=1) or 1
        offs = np.zeros((nop, kmax), dtype=np.int64)
        dg = np.zeros((nop, kmax, d), dtype=complex)
        nk = np.zeros(nop, dtype=np.int64)
        for k, op in enumerate(self._ops):
            nk[k] = len(op.offsets)
            offs[k, : nk[k]] = op.offsets
            dg[k, : nk[k]] = op.diags
        terms = np.array([(a, b) for a, b, _ in self._terms], dtype=np.int64).reshape(-1, 2)
        tcoef = np.array([c for _, _, c in self._terms], dtype=complex)
        ssh = np.array(list(self._scalar.keys()), dtype=np.int64).reshape(-1, 2)
        scoef = np.array(list(self._scalar.values()), dtype=complex).reshape(-1, self.n_left, self.n_right)
        self._packed = dict(
            offs=offs, dg=dg, nk=nk, terms=terms, tcoef=tcoef,
            left=self._pack_side(self._left), right=self._pack_side(self._right),
            ssh=ssh, scoef=scoef,
            banded=all(op.banded for op in self._ops),
        )
        return self._packed

    def apply(self, x, out=None, use_numba=None, hermitian=False):
        """Evaluate the generator on the block grid ``x``.

        With ``hermitian=True`` the caller promises that ``x`` is a Hermitian
        total operator (``x[n, m] = x[m, n]^dag``) and that the generator
        preserves Hermiticity; only blocks with ``n >= m`` are computed and
        the rest are filled by conjugation.
        """
        if x.shape != self.shape:
            raise ShapeError(f"state shape {x.shape} does not match generator shape {self.shape}")
        p = self._pack()
        if out is None:
            out = np.empty(self.shape, dtype=complex)
        if use_numba is None:
            use_numba = USE_NUMBA and p["banded"]
        x = np.ascontiguousarray(x, dtype=complex)
        if use_numba:
            kernels._hier_rhs_nb(x, out, p["offs"], p["dg"], p["nk"], p["terms"], p["tcoef"],
                                 *p["left"], *p["right"], p["ssh"], p["scoef"], bool(hermitian))
            if hermitian:
                iu, ju = np.triu_indices(self.n_left, 1)
                out[ju, iu] = np.conj(out[iu, ju]).transpose(0, 2, 1)
        else:
            mats = [op.matrix for op in self._ops]
            kernels._hier_rhs_np(x, out, mats, p["terms"], p["tcoef"],
                                 *p["left"], *p["right"], p["ssh"], p["scoef"])
        return out

    __call__ = apply

    def _shift_matrix(self, dm, dn, coef):
        nl, nr = self.n_left, self.n_right
        m, n = np.meshgrid(np.arange(nl), np.arange(nr), indexing="ij")
        mm, nq = m + dm, n + dn
        ok = (mm >= 0) & (mm < nl) & (nq >= 0) & (nq < nr) & (coef != 0)
        rows = (m * nr + n)[ok]
        cols = (mm * nr + nq)[ok]
        return sp.csr_matrix((coef[ok], (rows, cols)), shape=(nl * nr, nl * nr))

    def to_sparse(self):
        """The generator as a sparse matrix on the row-major flattening of ``x``."""
        d = self.dim
        nb = self.n_left * self.n_right
        eye_d = sp.identity(d, dtype=complex, format="csr")
        mats = [sp.csr_matrix(op.matrix) for op in self._ops]
        g = sp.csr_matrix((nb * d * d, nb * d * d), dtype=complex)
        for key, c in self._scalar.items():
            g = g + sp.kron(self._shift_matrix(*key, c), sp.identity(d * d, dtype=complex))
        if self._terms:
            blk = sum(c * sp.kron(mats[a], mats[b].T) for a, b, c in self._terms)
            g = g + sp.kron(sp.identity(nb, dtype=complex), blk)
        for k, shifts in self._left.items():
            for key, c in shifts.items():
                g = g + sp.kron(self._shift_matrix(*key, c), sp.kron(mats[k], eye_d))
        for k, shifts in self._right.items():
            for key, c in shifts.items():
                g = g + sp.kron(self._shift_matrix(*key, c), sp.kron(eye_d, mats[k].T))
        return g.tocsr()

    def to_dense(self):
        return self.to_sparse().toarray()

    @property
    def n_blocks(self):
        return self.n_left * self.n_right
