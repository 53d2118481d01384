"""
Fock-basis master equation for a target system coupled to a damped, driven
oscillator mode.

The total density matrix is stored blockwise: ``rho[m, n]`` is the target
operator ``<m| rho |n>`` for oscillator Fock indices ``m, n < n_tr``, so a
state has shape ``(n_tr, n_tr, d, d)``.  The generator is

    L(rho) = L_S(rho) - i[H_S + delta a^dag a + F a^dag + F^dag a, rho] + kappa D[a] rho

with ``F = L + i epsilon`` for the coupling operator ``L`` (``V`` when it is
Hermitian) and ``L_S(X) = -i[H_S, X] + sum_k gamma_k D[J_k] X``.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockGenerator
from .errors import DimensionTooLargeError, DivergenceError, ShapeError
from .operators import build_ladder, dag, matrix_exp

EXPM_GUARD = 4096


@dataclass(frozen=True, eq=False)
class ModelSpec:
    kappa: float
    coupling: np.ndarray
    epsilon: complex = 0.0
    delta: float = 0.0
    target_hamiltonian: np.ndarray = None
    target_dissipators: tuple = ()

    def __post_init__(self):
        c = np.array(self.coupling, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeError(f"coupling must be a square matrix, got shape {c.shape}")
        d = c.shape[0]
        h = np.zeros((d, d), complex) if self.target_hamiltonian is None else np.array(self.target_hamiltonian, dtype=complex)
        if h.shape != (d, d):
            raise ShapeError("target Hamiltonian and coupling dimensions differ")
        if np.abs(h - dag(h)).max(initial=0.0) > 1e-12 * max(1.0, np.abs(h).max(initial=0.0)):
            raise ValueError("target Hamiltonian must be Hermitian")
        diss = []
        for rate, op in self.target_dissipators:
            op = np.array(op, dtype=complex)
            if op.shape != (d, d):
                raise ShapeError("dissipator and coupling dimensions differ")
            if rate < 0:
                raise ValueError(f"dissipator rate must be non-negative, got {rate}")
            diss.append((float(rate), op))
        if self.kappa < 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")
        for c_arr in (c, h):
            c_arr.setflags(write=False)
        object.__setattr__(self, "coupling", c)
        object.__setattr__(self, "target_hamiltonian", h)
        object.__setattr__(self, "target_dissipators", tuple(diss))
        object.__setattr__(self, "epsilon", complex(self.epsilon))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def dim(self):
        return self.coupling.shape[0]

    @property
    def u(self):
        return self.epsilon.real

    @property
    def hermitian_coupling(self):
        c = self.coupling
        return np.abs(c - dag(c)).max(initial=0.0) <= 1e-12 * max(1.0, np.abs(c).max(initial=0.0))

    @property
    def main_text(self):
        """Resonant drive and Hermitian coupling: the reduced moment generator applies."""
        return self.delta == 0.0 and self.hermitian_coupling

    @property
    def target_is_static(self):
        """True when the target-only superoperator vanishes."""
        return not np.any(self.target_hamiltonian) and all(r == 0 or not np.any(j) for r, j in self.target_dissipators)

    def with_(self, **kw):
        args = dict(kappa=self.kappa, coupling=self.coupling, epsilon=self.epsilon, delta=self.delta,
                     target_hamiltonian=self.target_hamiltonian, target_dissipators=self.target_dissipators)
        args.update(kw)
        return ModelSpec(**args)


def target_superop_terms(spec):
    """``L_S`` as a list of sandwich terms ``(A, B, c)`` meaning ``c * A X B``."""
    d = spec.dim
    eye = np.eye(d, dtype=complex)
    k = -1j * spec.target_hamiltonian
    for rate, j in spec.target_dissipators:
        k = k - 0.5 * rate * (dag(j) @ j)
    terms = []
    if np.any(k):
        terms += [(k, eye, 1.0), (eye, dag(k), 1.0)]
    for rate, j in spec.target_dissipators:
        if rate and np.any(j):
            terms.append((j, dag(j), rate))
    return terms


def apply_target_superop(spec, x):
    """``L_S`` applied to one operator or to a stack of operators."""
    out = np.zeros(np.shape(x), dtype=complex)
    for a, b, c in target_superop_terms(spec):
        out += c * (a @ x @ b)
    return out


def _add_target(gen, spec):
    for a, b, c in target_superop_terms(spec):
        gen.add_sandwich(a, b, c)


def rho_generator(spec, n_tr):
    """Block recursion for ``d rho[m, n] / dt`` on an ``n_tr``-level Fock space."""
    gen = BlockGenerator(n_tr, n_tr, spec.dim)
    m, n = gen.m, gen.n
    kappa, eps, delta = spec.kappa, spec.epsilon, spec.delta
    lop = spec.coupling
    _add_target(gen, spec)
    gen.add_scalar(0, 0, -1j * delta * (m - n) - 0.5 * kappa * (m + n))
    gen.add_scalar(1, 1, kappa * np.sqrt((m + 1) * (n + 1)))
    # drive part of F = L + i epsilon
    gen.add_scalar(-1, 0, eps * np.sqrt(m))
    gen.add_scalar(1, 0, -np.conj(eps) * np.sqrt(m + 1))
    gen.add_scalar(0, -1, np.conj(eps) * np.sqrt(n))
    gen.add_scalar(0, 1, -eps * np.sqrt(n + 1))
    gen.add_left(lop, -1, 0, -1j * np.sqrt(m))
    gen.add_left(dag(lop), 1, 0, -1j * np.sqrt(m + 1))
    gen.add_right(lop, 0, 1, 1j * np.sqrt(n + 1))
    gen.add_right(dag(lop), 0, -1, 1j * np.sqrt(n))
    return gen


def rho_rhs(spec, rho):
    rho = np.asarray(rho)
    if rho.ndim != 4 or rho.shape[0] != rho.shape[1] or rho.shape[2:] != (spec.dim, spec.dim):
        raise ShapeError(f"state shape {rho.shape} does not match a {spec.dim}-level target")
    return rho_generator(spec, rho.shape[0]).apply(rho)


def to_matrix(rho):
    """Blocks ``(N, N, d, d)`` to the ``(N d, N d)`` matrix with index ``m * d + i``."""
    nm, nn, d, _ = rho.shape
    return np.ascontiguousarray(np.asarray(rho).transpose(0, 2, 1, 3)).reshape(nm * d, nn * d)


def from_matrix(mat, d):
    nd = mat.shape[0] // d
    md = mat.shape[1] // d
    return np.ascontiguousarray(mat.reshape(nd, d, md, d).transpose(0, 2, 1, 3))


def product_state(rho_s, osc):
    """``osc (x) rho_s`` in block layout; ``osc`` is an oscillator density matrix."""
    osc = np.asarray(osc, dtype=complex)
    return osc[:, :, None, None] * np.asarray(rho_s, dtype=complex)[None, None]


def vacuum_product(rho_s, n_tr):
    osc = np.zeros((n_tr, n_tr), complex)
    osc[0, 0] = 1.0
    return product_state(rho_s, osc)


def trace(rho):
    return complex(np.einsum("mmii->", rho))


def reduced_target(rho):
    """Partial trace over the oscillator."""
    return np.einsum("mmij->ij", rho)


def min_eigenvalue(rho):
    mat = to_matrix(rho)
    return float(np.linalg.eigvalsh(0.5 * (mat + dag(mat)))[0])


def liouvillian_matrix(spec, n_tr):
    """Dense Liouvillian acting on column-major ``vec(rho)`` of the full matrix.

    The full Hilbert space is ordered oscillator (x) target, matching
    :func:`to_matrix`.
    """
    d = spec.dim
    a, ad = build_ladder(n_tr)
    i_s = np.eye(d)
    i_o = np.eye(n_tr)
    big = n_tr * d
    eye = np.eye(big)
    f = spec.coupling + 1j * spec.epsilon * i_s
    ham = (np.kron(i_o, spec.target_hamiltonian) + spec.delta * np.kron(ad @ a, i_s)
           + np.kron(ad, f) + np.kron(a, dag(f)))
    lv = -1j * (np.kron(eye, ham) - np.kron(ham.T, eye))

    def dissipator(j, rate):
        jdj = dag(j) @ j
        return rate * (np.kron(j.conj(), j) - 0.5 * np.kron(eye, jdj) - 0.5 * np.kron(jdj.T, eye))

    lv += dissipator(np.kron(a, i_s), spec.kappa)
    for rate, j in spec.target_dissipators:
        lv += dissipator(np.kron(i_o, j), rate)
    return lv


def evolve_expm(spec, rho0, t):
    """``exp(L t) rho0`` by exponentiating the dense Liouvillian.

    ``t`` may be a scalar or a sequence; a sequence returns a list of states.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    n_tr, d = rho0.shape[0], rho0.shape[2]
    if (n_tr * d) ** 2 > EXPM_GUARD:
        raise DimensionTooLargeError(f"dense Liouvillian of size {(n_tr * d) ** 2} exceeds the guard {EXPM_GUARD}")
    lv = liouvillian_matrix(spec, n_tr)
    v0 = to_matrix(rho0).reshape(-1, order="F")
    times = np.atleast_1d(np.asarray(t, dtype=float))
    out = []
    for tk in times:
        v = matrix_exp(lv, tk) @ v0
        out.append(from_matrix(v.reshape(n_tr * d, n_tr * d, order="F"), d))
    return out[0] if np.ndim(t) == 0 else out


@dataclass
class Trajectory:
    times: np.ndarray
    samples: list
    final: np.ndarray
    trace_drift: float = 0.0
    monitor: list = field(default_factory=list)


def evolve_rk4(rhs, state, dt, steps, sample_every=None, observe=None, monitor=None,
               monitor_every=50, trace_fn=None, bound=None, t0=0.0, hermitian=False):
    """Classic fourth-order Runge-Kutta with a fixed step.

    ``rhs`` is either a callable ``f(y)`` or an object with ``apply(y, out)``.
    ``observe(y)`` selects what is stored at each sample (a copy of the state
    by default); samples are taken every ``sample_every`` steps and always at
    step 0.  ``monitor(step, t, y)`` runs every ``monitor_every`` steps and its
    return values are collected.  A non-finite state, or one whose largest
    entry exceeds ``bound``, raises :class:`DivergenceError`.  ``hermitian``
    is forwarded to ``rhs.apply`` for Hermitian block states.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = int(steps)
    y = np.array(state, dtype=complex)
    if hasattr(rhs, "apply"):
        bufs = [np.empty_like(y) for _ in range(2)]

        def f(z, k):
            return rhs.apply(z, out=bufs[k], hermitian=hermitian)
    else:
        def f(z, k):
            return np.asarray(rhs(z), dtype=complex)

    observe = observe or (lambda z: z.copy())
    sample_every = sample_every or steps or 1
    check_every = 1 if y.size < 200_000 else 5
    tr0 = trace_fn(y) if trace_fn is not None else None
    drift = 0.0
    times = [t0]
    samples = [observe(y)]
    records = []
    tmp = np.empty_like(y)
    acc = np.empty_like(y)
    h = dt
    for step in range(1, steps + 1):
        k = f(y, 0)
        np.multiply(k, h / 6.0, out=acc)
        np.multiply(k, h / 2.0, out=tmp)
        tmp += y
        k = f(tmp, 1)
        acc += (h / 3.0) * k
        np.multiply(k, h / 2.0, out=tmp)
        tmp += y
        k = f(tmp, 0)
        acc += (h / 3.0) * k
        np.multiply(k, h, out=tmp)
        tmp += y
        k = f(tmp, 1)
        acc += (h / 6.0) * k
        y += acc
        t = t0 + step * h
        if step % check_every == 0 or step == steps:
            mx = np.abs(y).max(initial=0.0)
            if not np.isfinite(mx):
                raise DivergenceError(step, t)
            if bound is not None and mx > bound:
                raise DivergenceError(step, t, f"state norm exceeded {bound:g} at step {step} (t = {t:g})")
        if trace_fn is not None:
            drift = max(drift, abs(trace_fn(y) - tr0))
        if monitor is not None and step % monitor_every == 0:
            records.append(monitor(step, t, y))
        if step % sample_every == 0:
            times.append(t)
            samples.append(observe(y))
    return Trajectory(np.array(times), samples, y, drift, records)


def positivity_monitor(tol=1e-8):
    """Monitor for :func:`evolve_rk4` that records ``(step, t, lambda_min)``.

    A violation below ``-tol`` is reported with a warning, never raised.
    """
    warned = []

    def check(step, t, y):
        lam = min_eigenvalue(y)
        if lam < -tol and not warned:
            warnings.warn(f"positivity violated at t = {t:g}: smallest eigenvalue {lam:.3e}")
            warned.append(step)
        return step, t, lam
    return check


def evolve_rho(spec, rho0, dt, steps, sample_every=None, observe=None, positivity_every=50):
    gen = rho_generator(spec, rho0.shape[0])
    mon = positivity_monitor() if positivity_every else None
    return evolve_rk4(gen, rho0, dt, steps, sample_every=sample_every, observe=observe,
                      monitor=mon, monitor_every=positivity_every or 50, trace_fn=trace)


@dataclass
class SteadyState:
    state: np.ndarray
    residual: float
    t_ss: float


def relax(generator, x0, t_ss=50.0, dt=0.02, hermitian=False):
    """Evolve ``x0`` under ``generator`` for ``t_ss`` and measure ``|G x|_F``."""
    if t_ss <= 0:
        raise ValueError("t_ss must be positive")
    steps = int(round(t_ss / dt))
    traj = evolve_rk4(generator, x0, dt, steps, hermitian=hermitian)
    res = float(np.linalg.norm(generator.apply(traj.final)))
    return SteadyState(traj.final, res, steps * dt)


def steady_state(spec, rho0, t_ss=50.0, dt=0.02):
    rho0 = np.asarray(rho0, dtype=complex)
    herm = np.allclose(to_matrix(rho0), dag(to_matrix(rho0)), atol=1e-14, rtol=0)
    return relax(rho_generator(spec, rho0.shape[0]), rho0, t_ss, dt, hermitian=herm)
