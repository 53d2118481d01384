"""
Rectangular solver with the oscillator written in the eigenbasis of the
position quadrature ``X = (a + a^dag)/sqrt(2)``.

The state is a field ``chi_x`` of target operators sampled on a uniform grid,
stored as an array of shape ``(n_x, d, d)``.  In this basis ``a`` and
``a^dag`` become ``(x +- d/dx)/sqrt(2)`` and the generator reads

    L_S(chi_x) + (kappa/4)(chi_x'' - x^2 chi_x + chi_x)
    + sqrt(2) u (x chi_x - chi_x') - i sqrt(2) x [V, chi_x]

with derivatives from 13-point central stencils.  Values outside the box are
taken as zero.
"""
import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import InvalidDimensionError, ShapeError, UnsupportedGeneratorError
from .lindblad import apply_target_superop, evolve_rk4, target_superop_terms
from .moments import evolve_dense

STENCIL_HALF_WIDTH = 6


@dataclass(frozen=True)
class PositionGrid:
    x_min: float
    dx: float
    n_x: int

    def __post_init__(self):
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        if self.n_x < 2 * STENCIL_HALF_WIDTH + 1:
            raise InvalidDimensionError(f"the 13-point stencil needs at least 13 grid points, got {self.n_x}")
        if abs(self.x_min + self.x[-1]) > self.dx * (1 + 1e-9):
            warnings.warn(f"grid [{self.x_min:g}, {self.x[-1]:g}] is not symmetric about 0", stacklevel=2)

    @classmethod
    def symmetric(cls, half_width, dx):
        """Closed grid ``-half_width <= x <= half_width``."""
        n = int(round(2 * half_width / dx)) + 1
        return cls(-half_width, dx, n)

    @classmethod
    def half_open(cls, x_min, x_max, dx):
        """Grid ``x_min <= x < x_max`` with ``(x_max - x_min)/dx`` points."""
        n = int(round((x_max - x_min) / dx))
        return cls(x_min, dx, n)

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.n_x)


@dataclass
class PositionField:
    grid: PositionGrid
    values: np.ndarray

    @property
    def dim(self):
        return self.values.shape[1]


def _solve_exact(a, b):
    """Gauss-Jordan elimination over the rationals."""
    n = len(b)
    m = [list(row) + [rhs] for row, rhs in zip(a, b)]
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [v / p for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [v - f * w for v, w in zip(m[r], m[col])]
    return [row[n] for row in m]


def stencil_coefficients(order, half_width=STENCIL_HALF_WIDTH, exact=False):
    """Weights ``c_k`` (k = 1..half_width) of the central difference formulas

        f'(x)  ~ sum_k c_k (f(x + k h) - f(x - k h)) / h
        f''(x) ~ sum_k c_k (f(x + k h) + f(x - k h) - 2 f(x)) / h^2

    chosen so that every polynomial of degree ``2 * half_width`` is
    differentiated exactly.
    """
    if order not in (1, 2):
        raise ValueError("only first and second derivatives are supported")
    # the combination f(x+kh) -+ f(x-kh) keeps the powers h^p with p of the
    # same parity as the order; match them against the Taylor series
    powers = [order + 2 * i for i in range(half_width)]
    a = [[Fraction(2 * k**p, factorial(p)) for k in range(1, half_width + 1)] for p in powers]
    b = [Fraction(int(p == order)) for p in powers]
    c = _solve_exact(a, b)
    return c if exact else np.array([float(v) for v in c])


def gaussian_initial_field(rho_s0, grid):
    """The vacuum oscillator ``exp(-x^2/2)/pi^(1/4)`` times ``rho_s0``."""
    rho_s0 = np.asarray(rho_s0, dtype=complex)
    w = np.exp(-grid.x**2 / 2) / np.pi**0.25
    return PositionField(grid, w[:, None, None] * rho_s0[None])


def reduced_density_position(field):
    """Riemann sum of ``dx exp(-x^2/2)/pi^(1/4) chi_x`` over the grid."""
    g = field.grid
    w = g.dx * np.exp(-g.x**2 / 2) / np.pi**0.25
    return np.tensordot(w, field.values, axes=(0, 0))


def edge_ratio(field):
    """Largest Frobenius norm among the two edge panels relative to the largest panel."""
    norms = np.linalg.norm(field.values.reshape(field.values.shape[0], -1), axis=1)
    peak = norms.max()
    return float(max(norms[0], norms[-1]) / peak) if peak else 0.0


def box_adequate(field, tol=1e-8):
    return edge_ratio(field) < tol


class PositionGenerator:
    def __init__(self, spec, grid):
        if not spec.main_text:
            raise UnsupportedGeneratorError("the position-basis generator needs zero detuning and Hermitian coupling")
        self.spec = spec
        self.grid = grid
        self.c1 = stencil_coefficients(1)
        self.c2 = stencil_coefficients(2)
        self.shape = (grid.n_x, spec.dim, spec.dim)
        x = grid.x
        k, u = spec.kappa, spec.u
        # multiplicative part: kappa/4 (1 - x^2) + sqrt(2) u x
        self._pot = 0.25 * k * (1 - x**2) + np.sqrt(2) * u * x
        self._vx = -1j * np.sqrt(2) * x

    def apply(self, y, out=None, hermitian=False):
        if y.shape != self.shape:
            raise ShapeError(f"field shape {y.shape} does not match {self.shape}")
        n, d, _ = self.shape
        spec = self.spec
        d1, d2 = kernels.stencil_derivatives(y.reshape(n, d * d), self.c1, self.c2, self.grid.dx)
        if out is None:
            out = np.empty(self.shape, dtype=complex)
        flat = out.reshape(n, d * d)
        np.multiply(self._pot[:, None], y.reshape(n, d * d), out=flat)
        flat += (0.25 * spec.kappa) * d2
        flat -= (np.sqrt(2) * spec.u) * d1
        v = spec.coupling
        out += self._vx[:, None, None] * (v @ y - y @ v)
        if not spec.target_is_static:
            out += apply_target_superop(spec, y)
        return out

    __call__ = apply

    def _derivative_matrix(self, c, first):
        n = self.grid.n_x
        diags, offs = [], []
        for k, ck in enumerate(c, start=1):
            diags += [np.full(n - k, ck), np.full(n - k, -ck if first else ck)]
            offs += [k, -k]
        if not first:
            diags.append(np.full(n, -2 * c.sum()))
            offs.append(0)
        return sp.diags(diags, offs, shape=(n, n), format="csr", dtype=complex)

    def to_sparse(self):
        """The generator on the row-major flattening of the field."""
        n, d, _ = self.shape
        spec = self.spec
        dx = self.grid.dx
        d1 = self._derivative_matrix(self.c1, True) / dx
        d2 = self._derivative_matrix(self.c2, False) / dx**2
        osc = 0.25 * spec.kappa * d2 - np.sqrt(2) * spec.u * d1 + sp.diags(self._pot)
        eye_d = np.eye(d)
        v = spec.coupling
        comm = np.kron(v, eye_d) - np.kron(eye_d, v.T)
        g = sp.kron(osc, sp.identity(d * d)) + sp.kron(sp.diags(self._vx), sp.csr_matrix(comm))
        terms = target_superop_terms(spec)
        if terms:
            s = sum(c * np.kron(a, b.T) for a, b, c in terms)
            g = g + sp.kron(sp.identity(n), sp.csr_matrix(s))
        return g.tocsr()

    def to_dense(self):
        return self.to_sparse().toarray()


def position_generator(spec, grid):
    return PositionGenerator(spec, grid)


def position_rhs(spec, field):
    return PositionField(field.grid, PositionGenerator(spec, field.grid).apply(field.values))


def stable_step(grid, kappa, t_total=None):
    """Largest step ``<= 0.4 dx^2/kappa``, shrunk to divide ``t_total`` evenly."""
    dt = 0.4 * grid.dx**2 / max(kappa, 1e-300)
    if t_total is None:
        return dt
    steps = int(np.ceil(t_total / dt - 1e-9))
    return t_total / steps


def evolve_position(spec, field, times, method="expm", mode="step", dt=None, bound=None):
    """Fields at the requested ``times`` (starting from ``times[0] = 0``).

    ``method="expm"`` uses a dense exponential of the generator (``mode`` as in
    :func:`momex.moments.evolve_dense`).  ``method="rk4"`` integrates with a
    fixed step no larger than ``0.4 dx^2/kappa`` between sample times, which
    must be equally spaced.
    """
    gen = PositionGenerator(spec, field.grid)
    times = np.asarray(times, dtype=float)
    if method == "expm":
        vals = evolve_dense(gen, field.values, times, mode=mode)
        return [PositionField(field.grid, v) for v in vals]
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")
    if times[0] != 0:
        raise ValueError("rk4 sampling starts at t = 0")
    gaps = np.diff(times)
    if gaps.size and not np.allclose(gaps, gaps[0], rtol=1e-12):
        raise ValueError("rk4 sampling needs equally spaced times")
    if not gaps.size:
        return [PositionField(field.grid, field.values.copy())]
    h = stable_step(field.grid, spec.kappa, gaps[0]) if dt is None else dt
    per = int(round(gaps[0] / h))
    traj = evolve_rk4(gen, field.values, h, per * gaps.size, sample_every=per, bound=bound)
    return [PositionField(field.grid, v) for v in traj.samples]
