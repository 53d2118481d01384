"""
Moment representations of the oscillator mode.

For a total state ``rho`` the chi hierarchy collects the target operators

    chi[m, n] = tr_osc(U+^m U-^n rho) / sqrt(m! n!),   U+-(X) = a X +- X a^dag

and the xi hierarchy ``xi[m, n] = tr_osc(a^m rho a^dag^n) / sqrt(m! n!)``.
Both are stored as arrays of shape ``(n_left, n_right, d, d)``.  Block
``(0, 0)`` is the reduced target state; the chi blocks with small indices
carry the quadrature moments of the oscillator.

With a resonant drive and Hermitian coupling the chi generator never couples
a column ``n`` to columns to its right, so the ``n = 0`` column (the
rectangular system) evolves on its own.
"""
from dataclasses import dataclass
from math import comb, lgamma

import numpy as np

from .blocks import BlockGenerator
from .errors import DepthError, ShapeError, TruncationHeadroomError, UnsupportedGeneratorError
from .lindblad import target_superop_terms
from .operators import dag, matrix_exp

CHI = "chi"
XI = "xi"


@dataclass
class MomentHierarchy:
    blocks: np.ndarray
    kind: str = CHI

    @property
    def n_left(self):
        return self.blocks.shape[0]

    @property
    def n_right(self):
        return self.blocks.shape[1]

    @property
    def dim(self):
        return self.blocks.shape[2]

    def __getitem__(self, mn):
        return self.blocks[mn]


def _blocks(chi):
    return chi.blocks if isinstance(chi, MomentHierarchy) else np.asarray(chi)


def vacuum_chi(rho_s, n_left, n_right=1, kind=CHI):
    """Hierarchy of ``rho_s (x) |0><0|``: only block (0, 0) is non-zero."""
    rho_s = np.asarray(rho_s, dtype=complex)
    d = rho_s.shape[0]
    x = np.zeros((n_left, n_right, d, d), dtype=complex)
    x[0, 0] = rho_s
    return MomentHierarchy(x, kind)


def _check_headroom(n_tr, n_left, n_right, allow_tail):
    if (n_left - 1) + (n_right - 1) >= n_tr and not allow_tail:
        raise TruncationHeadroomError(
            f"moments up to order {n_left + n_right - 2} need more than {n_tr} Fock levels; "
            "pass allow_tail=True to accept the truncated tail")


def _lower_left(x):
    """Blocks of ``a X``: ``(a X)[m, n] = sqrt(m + 1) X[m + 1, n]``."""
    out = np.zeros_like(x)
    k = np.sqrt(np.arange(1, x.shape[0]))
    out[:-1] = k[:, None, None, None] * x[1:]
    return out


def _raise_right(x):
    """Blocks of ``X a^dag``: ``(X a^dag)[m, n] = sqrt(n + 1) X[m, n + 1]``."""
    out = np.zeros_like(x)
    k = np.sqrt(np.arange(1, x.shape[1]))
    out[:, :-1] = k[None, :, None, None] * x[:, 1:]
    return out


def _osc_trace(x):
    return np.einsum("kkij->ij", x)


def rho_to_chi(rho, n_left, n_right, allow_tail=False):
    rho = np.asarray(rho, dtype=complex)
    n_tr, d = rho.shape[0], rho.shape[2]
    _check_headroom(n_tr, n_left, n_right, allow_tail)
    out = np.zeros((n_left, n_right, d, d), dtype=complex)
    y = rho.copy()
    for n in range(n_right):
        if n:
            y = (_lower_left(y) - _raise_right(y)) / np.sqrt(n)
        z = y
        for m in range(n_left):
            if m:
                z = (_lower_left(z) + _raise_right(z)) / np.sqrt(m)
            out[m, n] = _osc_trace(z)
    return MomentHierarchy(out, CHI)


def rho_to_xi(rho, n_left, n_right, allow_tail=False):
    rho = np.asarray(rho, dtype=complex)
    n_tr, d = rho.shape[0], rho.shape[2]
    _check_headroom(n_tr, n_left, n_right, allow_tail)
    out = np.zeros((n_left, n_right, d, d), dtype=complex)
    y = rho.copy()
    for m in range(n_left):
        if m:
            y = _lower_left(y) / np.sqrt(m)
        z = y
        for n in range(n_right):
            if n:
                z = _raise_right(z) / np.sqrt(n)
            out[m, n] = _osc_trace(z)
    return MomentHierarchy(out, XI)


def _lfact(k):
    return lgamma(k + 1)


def chi_to_rho(chi, n_tr, return_tail=False, tol=1e-15):
    """Reconstruct the Fock blocks ``rho[m, n]`` for ``m, n < n_tr``.

    The series over ``l`` stops when the hierarchy runs out of indices or
    after three consecutive terms with Frobenius norm below ``tol``.  With
    ``return_tail`` the largest norm among the last included terms is also
    returned as a size estimate for the neglected tail.
    """
    x = _blocks(chi)
    nl, nr, d = x.shape[0], x.shape[1], x.shape[2]
    if nl <= 2 * (n_tr - 1) or nr <= 2 * (n_tr - 1):
        raise DepthError(f"a {nl} x {nr} hierarchy cannot resolve {n_tr} Fock levels; "
                         f"need more than {2 * (n_tr - 1)} indices on both sides")
    rho = np.zeros((n_tr, n_tr, d, d), dtype=complex)
    tail = 0.0
    for m in range(n_tr):
        for n in range(n_tr):
            small = 0
            last = 0.0
            l = 0
            while True:
                total = 2 * l + m + n
                if total > (nl - 1) + (nr - 1):
                    break
                term = np.zeros((d, d), dtype=complex)
                pref = -_lfact(l) - total * np.log(2.0) - 0.5 * (_lfact(m) + _lfact(n))
                for p in range(m + l + 1):
                    for q in range(n + l + 1):
                        big_p, big_q = p + q, total - p - q
                        if big_p >= nl or big_q >= nr:
                            continue
                        w = np.exp(pref + 0.5 * (_lfact(big_p) + _lfact(big_q))) * comb(m + l, p) * comb(n + l, q)
                        term += (-1) ** (n - q) * w * x[big_p, big_q]
                rho[m, n] += term
                last = float(np.linalg.norm(term))
                small = small + 1 if last < tol else 0
                if small >= 3:
                    break
                l += 1
            tail = max(tail, last)
    return (rho, tail) if return_tail else rho


def _add_target(gen, spec):
    for a, b, c in target_superop_terms(spec):
        gen.add_sandwich(a, b, c)


def _check_dims(spec, n_left, n_right):
    if n_left < 1 or n_right < 1:
        raise ShapeError("hierarchy needs at least one block")


def chi_generator(spec, n_left, n_right, form=None):
    """Generator of the chi hierarchy.

    ``form`` is ``"main"`` (resonant drive, Hermitian coupling), ``"general"``
    (any detuning and coupling) or ``None`` to pick from the model.
    """
    _check_dims(spec, n_left, n_right)
    if form is None:
        form = "main" if spec.main_text else "general"
    gen = BlockGenerator(n_left, n_right, spec.dim)
    m, n = gen.m, gen.n
    kappa, eps = spec.kappa, spec.epsilon
    _add_target(gen, spec)
    gen.add_scalar(0, 0, -0.5 * kappa * (m + n))
    gen.add_scalar(-1, 0, 2 * eps.real * np.sqrt(m))
    gen.add_scalar(0, -1, (eps - np.conj(eps)) * np.sqrt(n))
    if form == "main":
        if not spec.main_text:
            raise UnsupportedGeneratorError("the reduced chi generator needs zero detuning and Hermitian coupling")
        v = spec.coupling
        # -i[V, S] - i{V, T} with S = sqrt(m+1) chi[m+1, n] + sqrt(m) chi[m-1, n], T = sqrt(n) chi[m, n-1]
        gen.add_left(v, 1, 0, -1j * np.sqrt(m + 1))
        gen.add_left(v, -1, 0, -1j * np.sqrt(m))
        gen.add_left(v, 0, -1, -1j * np.sqrt(n))
        gen.add_right(v, 1, 0, 1j * np.sqrt(m + 1))
        gen.add_right(v, -1, 0, 1j * np.sqrt(m))
        gen.add_right(v, 0, -1, -1j * np.sqrt(n))
        return gen
    if form != "general":
        raise ValueError(f"unknown generator form {form!r}")
    lop, lopd = spec.coupling, dag(spec.coupling)
    delta = spec.delta
    sm, sn = np.sqrt(m), np.sqrt(n)
    sm1, sn1 = np.sqrt(m + 1), np.sqrt(n + 1)
    # -i sqrt(m) (F chi[m-1, n] - chi[m-1, n] F^dag)
    gen.add_left(lop, -1, 0, -1j * sm)
    gen.add_right(lopd, -1, 0, 1j * sm)
    # -i sqrt(n) (F chi[m, n-1] + chi[m, n-1] F^dag)
    gen.add_left(lop, 0, -1, -1j * sn)
    gen.add_right(lopd, 0, -1, -1j * sn)
    # -(i/2) sqrt(m+1) [F + F^dag, chi[m+1, n]]
    for op in (lop, lopd):
        gen.add_left(op, 1, 0, -0.5j * sm1)
        gen.add_right(op, 1, 0, 0.5j * sm1)
    # (i/2) sqrt(n+1) [F - F^dag, chi[m, n+1]]
    for op, sign in ((lop, 1.0), (lopd, -1.0)):
        gen.add_left(op, 0, 1, sign * 0.5j * sn1)
        gen.add_right(op, 0, 1, -sign * 0.5j * sn1)
    if delta:
        gen.add_scalar(1, -1, -1j * delta * np.sqrt(n * (m + 1)))
        gen.add_scalar(-1, 1, -1j * delta * np.sqrt(m * (n + 1)))
    return gen


def chi_rec_generator(spec, n_left):
    """The ``n = 0`` column generator ``L_S - (kappa/2) a^dag a + 2u a^dag - i[V, (a + a^dag) .]``."""
    if not spec.main_text:
        raise UnsupportedGeneratorError("the rectangular generator needs zero detuning and Hermitian coupling")
    return chi_generator(spec, n_left, 1, form="main")


def xi_generator(spec, n_left, n_right):
    _check_dims(spec, n_left, n_right)
    gen = BlockGenerator(n_left, n_right, spec.dim)
    m, n = gen.m, gen.n
    kappa, eps, delta = spec.kappa, spec.epsilon, spec.delta
    lop, lopd = spec.coupling, dag(spec.coupling)
    _add_target(gen, spec)
    gen.add_scalar(0, 0, -1j * delta * (m - n) - 0.5 * kappa * (m + n))
    # -i sqrt(m) F xi[m-1, n] + i sqrt(n) xi[m, n-1] F^dag
    gen.add_left(lop, -1, 0, -1j * np.sqrt(m))
    gen.add_scalar(-1, 0, eps * np.sqrt(m))
    gen.add_right(lopd, 0, -1, 1j * np.sqrt(n))
    gen.add_scalar(0, -1, np.conj(eps) * np.sqrt(n))
    # -i sqrt(m+1) [F^dag, xi[m+1, n]] - i sqrt(n+1) [F, xi[m, n+1]]
    gen.add_left(lopd, 1, 0, -1j * np.sqrt(m + 1))
    gen.add_right(lopd, 1, 0, 1j * np.sqrt(m + 1))
    gen.add_left(lop, 0, 1, -1j * np.sqrt(n + 1))
    gen.add_right(lop, 0, 1, 1j * np.sqrt(n + 1))
    return gen


def _rhs(gen_fn, spec, chi):
    x = _blocks(chi)
    if x.ndim != 4 or x.shape[2:] != (spec.dim, spec.dim):
        raise ShapeError(f"hierarchy shape {x.shape} does not match a {spec.dim}-level target")
    return gen_fn(x).apply(x)


def chi_rhs(spec, chi, form=None):
    return _rhs(lambda x: chi_generator(spec, x.shape[0], x.shape[1], form), spec, chi)


def xi_rhs(spec, xi):
    return _rhs(lambda x: xi_generator(spec, x.shape[0], x.shape[1]), spec, xi)


def chi_rec_rhs(spec, chi_rec):
    x = _blocks(chi_rec)
    if x.ndim == 3:
        x = x[:, None]
    if x.shape[1] != 1:
        raise ShapeError("a rectangular hierarchy has a single column")
    return _rhs(lambda y: chi_rec_generator(spec, y.shape[0]), spec, x)


@dataclass(frozen=True)
class QuadratureMoments:
    x: float
    p: float
    x2: float
    p2: float
    xp_sym: float
    imag_residual: float


def extract_moments(chi):
    """Oscillator quadrature moments with ``X = (a + a^dag)/sqrt 2`` and ``P = i(a^dag - a)/sqrt 2``.

    ``xp_sym`` is ``<XP + PX>``.  ``imag_residual`` is the largest imaginary
    part discarded from these (real) expectation values.
    """
    x = _blocks(chi)
    if x.shape[0] < 3 or x.shape[1] < 3:
        raise DepthError("second-order moments need at least 3 x 3 blocks")
    tr = lambda m, n: complex(np.trace(x[m, n]))
    s2 = np.sqrt(2.0)
    vals = [tr(1, 0) / s2, tr(0, 1) / (s2 * 1j), (s2 * tr(2, 0) + 1) / 2,
            (1 - s2 * tr(0, 2)) / 2, tr(1, 1) / 1j]
    resid = max(abs(v.imag) for v in vals)
    return QuadratureMoments(*(v.real for v in vals), resid)


@dataclass(frozen=True)
class ReducedState:
    rho: np.ndarray
    correction: float


def reduced_density(chi):
    """Block (0, 0), Hermitized; ``correction`` is the norm of the removed part."""
    r = np.array(_blocks(chi)[0, 0])
    h = 0.5 * (r + dag(r))
    return ReducedState(h, float(np.linalg.norm(r - h)))


def dof_rho(n_osc, n_target):
    return n_osc * n_osc * n_target * n_target


def dof_chi(n_left, n_target, n_right=1):
    return n_left * n_right * n_target * n_target


def evolve_dense(generator, x0, times, mode="direct"):
    """``exp(G t) x0`` for each ``t`` in ``times`` with a dense exponential.

    ``mode="direct"`` exponentiates ``G t`` afresh for every time.
    ``mode="step"`` needs equally spaced times starting at 0 (or a single
    start time followed by equal steps) and reuses one propagator per step.
    """
    g = generator.to_dense()
    v0 = np.asarray(x0, dtype=complex).reshape(-1)
    times = np.asarray(times, dtype=float)
    out = []
    if mode == "direct":
        for t in times:
            out.append((matrix_exp(g, t) @ v0).reshape(x0.shape))
        return out
    if mode != "step":
        raise ValueError(f"unknown mode {mode!r}")
    steps = np.diff(times)
    if steps.size and not np.allclose(steps, steps[0], rtol=1e-12, atol=1e-14):
        raise ValueError("step mode needs equally spaced times")
    v = matrix_exp(g, times[0]) @ v0 if times[0] else v0.copy()
    out.append(v.reshape(x0.shape))
    if steps.size:
        prop = matrix_exp(g, steps[0])
        del g
        for _ in steps:
            v = prop @ v
            out.append(v.reshape(x0.shape))
    return out
