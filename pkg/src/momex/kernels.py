"""
Hot kernels shared by the block-hierarchy and position-grid solvers.

Every kernel has a compiled loop version (``_nb`` suffix) and a numpy
version (``_np`` suffix).  The public wrappers at the bottom of the module
dispatch on :data:`USE_NUMBA`, which follows :data:`momex._accel.USE_NUMBA`.

Block stacks are arrays of shape ``(B, d, d)``: ``B`` target-system operators
laid out contiguously.  Banded operators are described by an integer array of
diagonal offsets and a ``(len(offsets), d)`` array with ``diags[k, i] =
A[i, i + offsets[k]]`` (entries that fall outside the matrix are zero).
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# no-NaN/no-Inf assumptions are left out so divergence still propagates
_FAST = {"nsz", "arcp", "contract", "reassoc"}


@njit(cache=True)
def _band_left_nb(offsets, diags, x, out, alpha):
    nb, d, _ = x.shape
    for b in range(nb):
        for k in range(offsets.shape[0]):
            o = offsets[k]
            lo = max(0, -o)
            hi = min(d, d - o)
            for i in range(lo, hi):
                w = alpha * diags[k, i]
                for j in range(d):
                    out[b, i, j] += w * x[b, i + o, j]


@njit(cache=True)
def _band_right_nb(offsets, diags, x, out, alpha):
    nb, d, _ = x.shape
    for b in range(nb):
        for k in range(offsets.shape[0]):
            o = offsets[k]
            lo = max(0, o)
            hi = min(d, d + o)
            for j in range(lo, hi):
                w = alpha * diags[k, j - o]
                for i in range(d):
                    out[b, i, j] += x[b, i, j - o] * w


def _band_left_np(matrix, x, out, alpha):
    out += alpha * np.matmul(matrix, x)


def _band_right_np(matrix, x, out, alpha):
    d = matrix.shape[0]
    out += alpha * (x.reshape(-1, d) @ matrix).reshape(x.shape)


@njit(cache=True)
def _stencil_nb(field, c1, c2, inv_dx, inv_dx2, d1, d2):
    n, q = field.shape
    width = c1.shape[0]
    centre = -2.0 * c2.sum()
    for m in range(n):
        for s in range(q):
            acc1 = 0j
            acc2 = centre * field[m, s]
            for k in range(1, width + 1):
                fp = field[m + k, s] if m + k < n else 0j
                fm = field[m - k, s] if m - k >= 0 else 0j
                acc1 += c1[k - 1] * (fp - fm)
                acc2 += c2[k - 1] * (fp + fm)
            d1[m, s] = acc1 * inv_dx
            d2[m, s] = acc2 * inv_dx2


def _stencil_np(field, c1, c2, inv_dx, inv_dx2, d1, d2):
    n = field.shape[0]
    d1[...] = 0.0
    d2[...] = -2.0 * c2.sum() * field
    for k in range(1, c1.shape[0] + 1):
        if k >= n:
            break
        # f(x + k dx) contributes to points m < n - k, f(x - k dx) to m >= k
        d1[: n - k] += c1[k - 1] * field[k:]
        d1[k:] -= c1[k - 1] * field[: n - k]
        d2[: n - k] += c2[k - 1] * field[k:]
        d2[k:] += c2[k - 1] * field[: n - k]
    d1 *= inv_dx
    d2 *= inv_dx2


@njit(cache=True, fastmath=_FAST)
def _hier_rhs_nb(x, out, offs, dg, nk, terms, tcoef,
                 lops, lsh, lns, lcoef, rops, rsh, rns, rcoef, ssh, scoef, upper):
    nm, nn, d, _ = x.shape
    tmp = np.empty((d, d), dtype=x.dtype)
    for m in range(nm):
        for n in range(m if upper else 0, nn):
            o_blk = out[m, n]
            o_blk[:, :] = 0.0
            for s in range(ssh.shape[0]):
                c = scoef[s, m, n]
                if c == 0:
                    continue
                mm = m + ssh[s, 0]
                nq = n + ssh[s, 1]
                if mm < 0 or mm >= nm or nq < 0 or nq >= nn:
                    continue
                o_blk += c * x[mm, nq]
            # target superoperator: sum_t c_t A_t X B_t
            xb = x[m, n]
            for t in range(terms.shape[0]):
                ia = terms[t, 0]
                ib = terms[t, 1]
                c = tcoef[t]
                for ka in range(nk[ia]):
                    oa = offs[ia, ka]
                    for i in range(max(0, -oa), min(d, d - oa)):
                        wa = c * dg[ia, ka, i]
                        if wa == 0:
                            continue
                        for kb in range(nk[ib]):
                            ob = offs[ib, kb]
                            for j in range(max(0, ob), min(d, d + ob)):
                                o_blk[i, j] += wa * xb[i + oa, j - ob] * dg[ib, kb, j - ob]
            # left-acting coupling operators on combinations of neighbours
            for l in range(lops.shape[0]):
                used = False
                for s in range(lns[l]):
                    c = lcoef[l, s, m, n]
                    mm = m + lsh[l, s, 0]
                    nq = n + lsh[l, s, 1]
                    if c == 0 or mm < 0 or mm >= nm or nq < 0 or nq >= nn:
                        continue
                    if not used:
                        tmp[:, :] = c * x[mm, nq]
                        used = True
                    else:
                        tmp += c * x[mm, nq]
                if not used:
                    continue
                ia = lops[l]
                for ka in range(nk[ia]):
                    oa = offs[ia, ka]
                    for i in range(max(0, -oa), min(d, d - oa)):
                        wa = dg[ia, ka, i]
                        for j in range(d):
                            o_blk[i, j] += wa * tmp[i + oa, j]
            for r in range(rops.shape[0]):
                used = False
                for s in range(rns[r]):
                    c = rcoef[r, s, m, n]
                    mm = m + rsh[r, s, 0]
                    nq = n + rsh[r, s, 1]
                    if c == 0 or mm < 0 or mm >= nm or nq < 0 or nq >= nn:
                        continue
                    if not used:
                        tmp[:, :] = c * x[mm, nq]
                        used = True
                    else:
                        tmp += c * x[mm, nq]
                if not used:
                    continue
                ib = rops[r]
                for i in range(d):
                    for kb in range(nk[ib]):
                        ob = offs[ib, kb]
                        for j in range(max(0, ob), min(d, d + ob)):
                            o_blk[i, j] += tmp[i, j - ob] * dg[ib, kb, j - ob]


def _shifted(x, dm, dn):
    """``y[m, n] = x[m + dm, n + dn]`` with zeros outside the array."""
    nm, nn = x.shape[:2]
    y = np.zeros_like(x)
    m0, m1 = max(0, -dm), min(nm, nm - dm)
    n0, n1 = max(0, -dn), min(nn, nn - dn)
    if m0 < m1 and n0 < n1:
        y[m0:m1, n0:n1] = x[m0 + dm:m1 + dm, n0 + dn:n1 + dn]
    return y


def _hier_rhs_np(x, out, mats, terms, tcoef, lops, lsh, lns, lcoef,
                 rops, rsh, rns, rcoef, ssh, scoef):
    out[...] = 0.0
    for s in range(ssh.shape[0]):
        out += scoef[s][:, :, None, None] * _shifted(x, *ssh[s])
    for (ia, ib), c in zip(terms, tcoef):
        out += c * (mats[ia] @ x @ mats[ib])
    for l, ia in enumerate(lops):
        acc = sum(lcoef[l, s][:, :, None, None] * _shifted(x, *lsh[l, s]) for s in range(lns[l]))
        out += mats[ia] @ acc
    for r, ib in enumerate(rops):
        acc = sum(rcoef[r, s][:, :, None, None] * _shifted(x, *rsh[r, s]) for s in range(rns[r]))
        out += acc @ mats[ib]


def band_left(op, x, out, alpha=1.0):
    """``out += alpha * A @ x`` for every block of the stack ``x``."""
    if USE_NUMBA and op.banded:
        _band_left_nb(op.offsets, op.diags, x, out, complex(alpha))
    else:
        _band_left_np(op.matrix, x, out, alpha)


def band_right(op, x, out, alpha=1.0):
    """``out += alpha * x @ A`` for every block of the stack ``x``."""
    if USE_NUMBA and op.banded:
        _band_right_nb(op.offsets, op.diags, x, out, complex(alpha))
    else:
        _band_right_np(op.matrix, x, out, alpha)


def stencil_derivatives(field, c1, c2, dx):
    """First and second central derivatives of a sampled field.

    ``field`` has shape ``(n_x, q)``; values outside the grid are zero.
    ``c1`` and ``c2`` hold the one-sided stencil weights for offsets
    ``1..len(c1)``.
    """
    field = np.ascontiguousarray(field, dtype=complex)
    d1 = np.empty_like(field)
    d2 = np.empty_like(field)
    kernel = _stencil_nb if USE_NUMBA else _stencil_np
    kernel(field, np.asarray(c1, float), np.asarray(c2, float), 1.0 / dx, 1.0 / dx**2, d1, d2)
    return d1, d2


IMPLEMENTATIONS = {
    "band_left": (_band_left_nb, _band_left_np),
    "band_right": (_band_right_nb, _band_right_np),
    "stencil": (_stencil_nb, _stencil_np),
    "hierarchy": (_hier_rhs_nb, _hier_rhs_np),
}
