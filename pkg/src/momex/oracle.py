"""
Closed-form results for a static target (``L_S = 0``) coupled through a
Hermitian ``V`` with eigenvalues ``g_i``.

In the eigenbasis of ``V`` every pair ``(i, j)`` evolves independently.  With
``g_ij = g_i - g_j`` and ``z_ij = 4 g_ij (g_ij + 2iu) / kappa^2`` the reduced
state starting from an oscillator vacuum is

    rho_S(t) = sum_ij exp(z_ij (1 - kappa t/2 - exp(-kappa t/2))) P_i rho_S(0) P_j .

The rectangular generator restricted to one pair is
``M_ij = -(kappa/2) a^dag a + 2u a^dag - i g_ij (a + a^dag)``, with spectrum
``-(kappa/2)(m + z_ij)`` and right eigenvectors ``W_ij |m>`` where
``W_ij = D(2i g_ij/kappa) exp(4(u - i g_ij)/kappa a^dag)``.
"""
from dataclasses import dataclass
from math import lgamma

import numpy as np
import scipy.linalg

from .errors import DimensionTooLargeError, RangeError, ShapeError, UnsupportedGeneratorError
from .operators import build_ladder, dag, hermitian_eig, matrix_exp


@dataclass(frozen=True, eq=False)
class OracleSpec:
    kappa: float
    u: float
    eig: object
    dim: int

    @classmethod
    def from_model(cls, spec):
        if not spec.target_is_static:
            raise UnsupportedGeneratorError("closed forms need a static target (L_S = 0)")
        if not spec.main_text:
            raise UnsupportedGeneratorError("closed forms need zero detuning and Hermitian coupling")
        return cls(spec.kappa, spec.u, hermitian_eig(spec.coupling), spec.dim)

    @property
    def g(self):
        return self.eig.eigenvalues

    def g_diff(self):
        g = self.g
        return g[:, None] - g[None, :]

    def z(self):
        gij = self.g_diff()
        return 4 * gij * (gij + 2j * self.u) / self.kappa**2

    def nondegenerate(self, tol=1e-12):
        return bool(np.all(np.diff(self.g) > tol))


def _as_oracle(spec):
    return spec if isinstance(spec, OracleSpec) else OracleSpec.from_model(spec)


def exact_rho_s(spec, rho_s0, t):
    """Reduced target state at time(s) ``t`` for an oscillator starting in vacuum.

    A scalar ``t`` returns one ``d x d`` matrix; an array returns a stack.
    """
    o = _as_oracle(spec)
    rho_s0 = np.asarray(rho_s0, dtype=complex)
    if rho_s0.shape != (o.dim, o.dim):
        raise ShapeError("initial state does not match the target dimension")
    u_mat = o.eig.eigenvectors
    r = dag(u_mat) @ rho_s0 @ u_mat
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    k = o.kappa
    f = 1.0 - k * ts / 2 - np.exp(-k * ts / 2)
    out = np.exp(o.z()[None] * f[:, None, None]) * r[None]
    out = u_mat[None] @ out @ dag(u_mat)[None]
    return out[0] if np.ndim(t) == 0 else out


def mbar_eigenvalues(spec, n_max):
    """``lambda[i, j, m] = -(kappa/2)(m + z_ij)`` for ``m < n_max``."""
    o = _as_oracle(spec)
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    m = np.arange(n_max)
    return -0.5 * o.kappa * (m[None, None, :] + o.z()[:, :, None])


def mbar_pair_generator(kappa, u, g_ij, n_tr):
    """Truncated ``M_ij`` acting on oscillator column vectors."""
    a, ad = build_ladder(n_tr)
    return -0.5 * kappa * (ad @ a) + 2 * u * ad - 1j * g_ij * (a + ad)


@dataclass(frozen=True)
class MbarSpectrum:
    eigenvalues: np.ndarray
    kappa: float
    u: float
    g_diff: np.ndarray

    def _factors(self, i, j, n_tr, pad):
        n = n_tr + pad
        a, ad = build_ladder(n)
        gij = self.g_diff[i, j]
        beta = 2j * gij / self.kappa
        gam = 4 * (self.u - 1j * gij) / self.kappa
        disp = matrix_exp(beta * ad - np.conj(beta) * a)
        return n, a, ad, beta, gam, disp

    def right(self, i, j, m, n_tr, pad=40):
        """``W_ij |m>`` on ``n_tr`` levels (computed on a padded space)."""
        n, a, ad, beta, gam, disp = self._factors(i, j, n_tr, pad)
        _check_range(gam, n)
        e = np.zeros(n, complex)
        e[m] = 1.0
        v = disp @ (matrix_exp(gam * ad) @ e)
        return v[:n_tr]

    def left(self, i, j, m, n_tr, pad=40):
        """``(W_ij^-1)^dag |m> = D(beta) exp(-conj(gamma) a) |m>``."""
        n, a, ad, beta, gam, disp = self._factors(i, j, n_tr, pad)
        e = np.zeros(n, complex)
        e[m] = 1.0
        v = disp @ (matrix_exp(-np.conj(gam) * a) @ e)
        return v[:n_tr]


def _check_range(gam, n):
    # exp(gamma a^dag)|0> has coefficients gamma^k / sqrt(k!); they must fit in
    # double precision and have decayed by the edge of the padded space
    if gam == 0:
        return
    k = np.arange(n)
    logc = k * np.log(abs(gam)) - 0.5 * np.array([lgamma(x + 1) for x in k])
    peak = logc.max()
    if peak > 600 or logc[-1] - peak > np.log(1e-8):
        raise RangeError(f"exp({abs(gam):.3g} a^dag) does not fit in {n} Fock levels")


def mbar_spectrum(spec, n_max):
    o = _as_oracle(spec)
    return MbarSpectrum(mbar_eigenvalues(o, n_max), o.kappa, o.u, o.g_diff())


def liouvillian_eigenvalues(spec, n_max):
    """``lambda[i, j, m, n] = -(kappa/2)(m + n) - 2 g_ij^2/kappa - 4i g_ij u/kappa``."""
    o = _as_oracle(spec)
    gij = o.g_diff()
    k = o.kappa
    m = np.arange(n_max)
    base = -2 * gij**2 / k - 4j * gij * o.u / k
    return -0.5 * k * (m[:, None] + m[None, :])[None, None] + base[:, :, None, None]


@dataclass(frozen=True)
class LiouvillianSpectrum:
    eigenvalues: np.ndarray
    alphas: np.ndarray
    projectors: tuple

    def zero_mode_right(self, i, n_tr):
        """``P_i (x) |alpha_i><alpha_i|`` in block layout, ``alpha_i = 2(epsilon - i g_i)/kappa``."""
        psi = coherent(self.alphas[i], n_tr)
        osc = np.outer(psi, psi.conj())
        return osc[:, :, None, None] * self.projectors[i][None, None]

    def zero_mode_left(self, i, n_tr):
        osc = np.eye(n_tr, dtype=complex)
        return osc[:, :, None, None] * self.projectors[i][None, None]


def coherent(alpha, n_tr, pad=40):
    """Coherent state amplitudes ``D(alpha)|0>`` truncated to ``n_tr`` levels."""
    n = n_tr + pad
    a, ad = build_ladder(n)
    e = np.zeros(n, complex)
    e[0] = 1.0
    return (matrix_exp(alpha * ad - np.conj(alpha) * a) @ e)[:n_tr]


def liouvillian_spectrum(spec, n_max, epsilon=None):
    o = _as_oracle(spec)
    eps = complex(getattr(spec, "epsilon", o.u)) if epsilon is None else complex(epsilon)
    alphas = 2 * (eps - 1j * o.g) / o.kappa
    projs = tuple(o.eig.projector(i) for i in range(o.dim))
    return LiouvillianSpectrum(liouvillian_eigenvalues(o, n_max), alphas, projs)


def eig_condition_mbar(spec):
    """Eigenvalue condition number of the zero mode of ``M_ii``: ``exp((4u/kappa)^2 / 2)``."""
    kappa, u = (spec.kappa, spec.u)
    return float(np.exp((4 * u / kappa) ** 2 / 2))


def eig_condition_mbar_numeric(kappa, u, n_tr=200):
    """Same quantity from a dense eigensolve of the truncated ``M_ii``.

    Declines with :class:`RangeError` when ``(4u/kappa)^2 / 2 >= 30``: the
    right eigenvector then spans more than 26 orders of magnitude and cannot
    be represented meaningfully in double precision.
    """
    if (4 * u / kappa) ** 2 / 2 >= 30:
        raise RangeError("zero-mode eigenvector overflows double precision; use eig_condition_mbar")
    m = mbar_pair_generator(kappa, u, 0.0, n_tr)
    w, vl, vr = scipy.linalg.eig(m, left=True, right=True)
    k = int(np.argmin(np.abs(w)))
    l = vl[:, k] / np.linalg.norm(vl[:, k])
    r = vr[:, k] / np.linalg.norm(vr[:, k])
    return float(1.0 / abs(np.vdot(l, r)))


def eig_condition_liouvillian(n_tr):
    """Condition number of the Liouvillian zero mode on ``n_tr`` Fock levels: ``sqrt(n_tr)``."""
    if n_tr < 1:
        raise ValueError("n_tr must be at least 1")
    return float(np.sqrt(n_tr))


def eig_condition_liouvillian_numeric(kappa, epsilon, g, n_tr):
    """Dense eigensolve of one sector ``L_ii`` of the driven damped oscillator."""
    a, ad = build_ladder(n_tr)
    f = g + 1j * epsilon
    h = f * ad + np.conj(f) * a
    eye = np.eye(n_tr)
    # column-major vec: vec(A X B) = (B^T kron A) vec X
    lv = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    lv += kappa * (np.kron(a.conj(), a) - 0.5 * np.kron(eye, ad @ a) - 0.5 * np.kron((ad @ a).T, eye))
    w, vl, vr = scipy.linalg.eig(lv, left=True, right=True)
    k = int(np.argmin(np.abs(w)))
    l = vl[:, k] / np.linalg.norm(vl[:, k])
    r = vr[:, k] / np.linalg.norm(vr[:, k])
    return float(1.0 / abs(np.vdot(l, r)))


def _frechet_exp(q, e):
    n = q.shape[0]
    big = np.zeros((2 * n, 2 * n), dtype=complex)
    big[:n, :n] = q
    big[n:, n:] = q
    big[:n, n:] = e
    x = matrix_exp(big)
    return x[:n, :n], x[:n, n:]


def expm_condition_estimate(generator, t, maxiter=100, rtol=1e-8):
    """Relative condition number of ``exp`` at ``Q = generator * t`` (Frobenius norm).

    ``|Q|_F |L(Q)|_F / |exp(Q)|_F`` where ``|L(Q)|`` is the operator norm of the
    Frechet derivative, found by power iteration on ``L^* L`` with
    ``L^*(Q, .) = L(Q^dag, .)``.  At ``t = 0`` the value is 0 by convention.
    """
    g = np.asarray(generator, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ShapeError("generator must be square")
    n = g.shape[0]
    if n > 120:
        raise DimensionTooLargeError(f"dimension {n} exceeds the guard 120 for the 2n-block exponential")
    q = g * t
    qn = np.linalg.norm(q)
    if qn == 0.0:
        return 0.0
    # deterministic start with no special alignment to the structure of Q
    e = np.ones((n, n), dtype=complex) + 1j * np.arange(n * n).reshape(n, n) / (n * n)
    e /= np.linalg.norm(e)
    qh = dag(q)
    est = 0.0
    expq = None
    for _ in range(maxiter):
        # L is linear in E: feed unit directions so the 2n-block exponential
        # is not dominated by the size of E
        expq, y = _frechet_exp(q, e)
        yn = np.linalg.norm(y)
        if yn == 0.0:
            break
        _, z = _frechet_exp(qh, y / yn)
        zn = np.linalg.norm(z)
        new = np.sqrt(zn * yn)
        if zn == 0.0:
            break
        e = z / zn
        if abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return float(est * qn / np.linalg.norm(expq))
