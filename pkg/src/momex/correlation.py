"""
Stationary two-time correlation functions by quantum regression, power
spectra, and the truncation search used to size the optomechanical runs.

Two representations are supported throughout: ``"rho"`` evolves the full
Fock-basis density matrix, ``"chi"`` evolves only the moment blocks that the
requested quantity needs (the ``n = 0`` column for target observables, the
columns ``n <= 2`` for the oscillator momentum).
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errors import NoConvergenceError
from .lindblad import evolve_rk4, relax, rho_generator, vacuum_product
from .moments import chi_generator, chi_rec_generator, vacuum_chi
from .operators import dag
from .optomech import build_model, thermal_state, x_mec

RHO = "rho"
CHI = "chi"
METHODS = (RHO, CHI)
OBSERVABLES = ("X_mec", "P_osc")

T_SS = 50.0
DT = 0.02
SQ2 = np.sqrt(2.0)


@dataclass
class CorrelationSeries:
    dt: float
    values: np.ndarray
    state_shape: tuple = ()

    @property
    def times(self):
        return self.dt * np.arange(len(self.values))


@dataclass
class Spectrum:
    omegas: np.ndarray
    values: np.ndarray


def _check_method(method):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


@dataclass
class SteadyStateCache:
    """Steady states keyed by model, representation and truncation."""
    store: dict = field(default_factory=dict)

    def get(self, key, compute):
        if key not in self.store:
            self.store[key] = compute()
        return self.store[key]


def steady_state_rho(spec, rho_s0, n_osc, t_ss=T_SS, dt=DT):
    return relax(rho_generator(spec, n_osc), vacuum_product(rho_s0, n_osc), t_ss, dt, hermitian=True)


def steady_state_chi(spec, rho_s0, n_osc, n_right=1, t_ss=T_SS, dt=DT):
    gen = chi_rec_generator(spec, n_osc) if n_right == 1 else chi_generator(spec, n_osc, n_right)
    return relax(gen, vacuum_chi(rho_s0, n_osc, n_right).blocks, t_ss, dt)


def _steps(t_max, dt):
    steps = int(round(t_max / dt))
    if steps < 0 or abs(steps * dt - t_max) > 1e-9 * max(1.0, t_max):
        raise ValueError("t_max must be a non-negative multiple of dt")
    return steps


def _run(gen, x0, dt, steps, observe):
    traj = evolve_rk4(gen, x0, dt, steps, sample_every=1, observe=observe)
    return np.array(traj.samples, dtype=complex)


def _osc_trace(x):
    return np.einsum("mmij->ij", x)


def _warn_hermitian(o):
    if not np.allclose(o, dag(o), atol=1e-12, rtol=0):
        warnings.warn("correlation of a non-Hermitian observable", stacklevel=3)


def correlate_target(spec, o, t_max, dt=DT, method=CHI, n_osc=None, rho_s0=None, steady=None, t_ss=T_SS):
    """``C(t) = tr(O e^{Lt}(O rho_ss)) - tr(O rho_ss)^2`` for a target operator ``O``.

    ``steady`` may carry a precomputed steady state (a ``SteadyState`` or a
    bare array) in the representation chosen by ``method``; otherwise it is
    obtained by evolving ``rho_s0`` with a vacuum oscillator for ``t_ss``.
    """
    _check_method(method)
    o = np.asarray(o, dtype=complex)
    _warn_hermitian(o)
    steps = _steps(t_max, dt)
    if steady is None:
        if rho_s0 is None or n_osc is None:
            raise ValueError("need either a steady state or rho_s0 and n_osc")
        steady = (steady_state_rho(spec, rho_s0, n_osc, t_ss, dt) if method == RHO
                  else steady_state_chi(spec, rho_s0, n_osc, 1, t_ss, dt))
    ss = getattr(steady, "state", steady)
    n_osc = ss.shape[0]
    if method == RHO:
        gen = rho_generator(spec, n_osc)
        mean = np.trace(o @ _osc_trace(ss))
        x0 = o[None, None] @ ss
        vals = _run(gen, x0, dt, steps, lambda z: np.trace(o @ _osc_trace(z)))
    else:
        ss = ss[:, :1]
        gen = chi_rec_generator(spec, n_osc)
        mean = np.trace(o @ ss[0, 0])
        x0 = o[None, None] @ ss
        vals = _run(gen, x0, dt, steps, lambda z: np.trace(o @ z[0, 0]))
    return CorrelationSeries(dt, vals - mean**2, x0.shape)


def _p_left_rho(x):
    """``P x`` with ``P = i(a^dag - a)/sqrt(2)`` acting on the left oscillator index."""
    out = np.zeros_like(x)
    k = np.sqrt(np.arange(1, x.shape[0]))[:, None, None, None]
    out[1:] += (1j / SQ2) * k * x[:-1]
    out[:-1] -= (1j / SQ2) * k * x[1:]
    return out


def _p_expect_rho(x):
    t = np.einsum("mnii->mn", x)
    k = np.sqrt(np.arange(1, x.shape[0]))
    # tr(P T) = sum_{m,n} P[n, m] T[m, n]
    return (1j / SQ2) * np.sum(k * np.diagonal(t, 1)) - (1j / SQ2) * np.sum(k * np.diagonal(t, -1))


def _p_source_chi(chi):
    """``chi P - (i/sqrt(2)) a^dag chi`` on moment blocks.

    With ``(chi a^dag)[m, n] = sqrt(n+1) chi[m, n+1]``,
    ``(chi a)[m, n] = sqrt(n) chi[m, n-1]`` and
    ``(a^dag chi)[m, n] = sqrt(m) chi[m-1, n]``.
    """
    nl, nr = chi.shape[:2]
    out = np.zeros_like(chi)
    kn = np.sqrt(np.arange(1, nr))[None, :, None, None]
    km = np.sqrt(np.arange(1, nl))[:, None, None, None]
    out[:, :-1] += (1j / SQ2) * kn * chi[:, 1:]
    out[:, 1:] -= (1j / SQ2) * kn * chi[:, :-1]
    out[1:] -= (1j / SQ2) * km * chi[:-1]
    return out


def correlate_p_osc(spec, t_max, dt=DT, method=CHI, n_osc=None, rho_s0=None, steady=None, t_ss=T_SS):
    """Correlation of the oscillator momentum ``P = i(a^dag - a)/sqrt(2)``.

    The moment route needs the blocks with right index ``n <= 2`` only.
    """
    _check_method(method)
    steps = _steps(t_max, dt)
    if steady is None:
        if rho_s0 is None or n_osc is None:
            raise ValueError("need either a steady state or rho_s0 and n_osc")
        steady = (steady_state_rho(spec, rho_s0, n_osc, t_ss, dt) if method == RHO
                  else steady_state_chi(spec, rho_s0, n_osc, 3, t_ss, dt))
    ss = getattr(steady, "state", steady)
    n_osc = ss.shape[0]
    if method == RHO:
        gen = rho_generator(spec, n_osc)
        mean = _p_expect_rho(ss)
        x0 = _p_left_rho(ss)
        vals = _run(gen, x0, dt, steps, _p_expect_rho) - mean**2
    else:
        if ss.shape[1] < 3:
            raise ValueError("the momentum correlation needs moment columns n = 0, 1, 2")
        ss = ss[:, :3]
        gen = chi_generator(spec, n_osc, 3)
        x0 = _p_source_chi(ss)
        c01 = np.trace(ss[0, 1])
        vals = (1j / SQ2) * _run(gen, x0, dt, steps, lambda z: np.trace(z[0, 1])) + 0.5 * c01**2
    return CorrelationSeries(dt, vals, x0.shape)


def default_omegas():
    return np.round(np.arange(0.0, 3.0 + 5e-3, 0.01), 10)


def power_spectrum(series, omegas=None):
    """``S(w) = Re int_0^T exp(i w t) C(t) dt`` by the trapezoid rule on the series grid."""
    c = np.asarray(series.values, dtype=complex)
    if c.size < 2:
        raise ValueError("power spectrum needs at least two samples")
    omegas = default_omegas() if omegas is None else np.asarray(omegas, dtype=float)
    t = series.times
    vals = trapezoid(np.exp(1j * np.outer(omegas, t)) * c[None], dx=series.dt, axis=1).real
    return Spectrum(omegas, vals)


def spectrum_relative_error(reference, other, floor=1e-6):
    """Pointwise ``|S_ref - S|/|S_ref|`` on the points where ``|S_ref| > floor * max|S_ref|``.

    Returns the errors and the boolean mask of the compared points.
    """
    ref = np.asarray(reference.values)
    mask = np.abs(ref) > floor * np.abs(ref).max()
    err = np.full(ref.shape, np.nan)
    err[mask] = np.abs(ref[mask] - np.asarray(other.values)[mask]) / np.abs(ref[mask])
    return err, mask


def local_maxima(spectrum, lo=-np.inf, hi=np.inf):
    """Indices of strict interior local maxima with ``lo <= omega <= hi``."""
    s = spectrum.values
    w = spectrum.omegas
    idx = np.nonzero((s[1:-1] > s[:-2]) & (s[1:-1] > s[2:]))[0] + 1
    return idx[(w[idx] >= lo) & (w[idx] <= hi)]


# truncation search for the optomechanical models


def _initial_state(p):
    return thermal_state(p.omega_m, p.n_th, p.n_mec)


def cached_steady_state(params, method, n_osc, n_mec, observables=OBSERVABLES, cache=None, t_ss=T_SS, dt=DT):
    """Model at ``n_mec`` and its steady state, memoized in ``cache``.

    The moment representation keeps three right columns when ``P_osc`` is
    among the observables and one otherwise.
    """
    _check_method(method)
    cache = cache if cache is not None else SteadyStateCache()
    p = params.with_(n_mec=n_mec)
    spec = build_model(p)
    n_right = 3 if "P_osc" in observables else 1
    key = (_param_key(params), method, n_osc, n_mec, n_right if method == CHI else 0, t_ss, dt)

    def compute():
        if method == RHO:
            return steady_state_rho(spec, _initial_state(p), n_osc, t_ss, dt)
        return steady_state_chi(spec, _initial_state(p), n_osc, n_right, t_ss, dt)

    return spec, cache.get(key, compute)


def c0_values(params, method, n_osc, n_mec, observables=OBSERVABLES, cache=None, t_ss=T_SS, dt=DT):
    """Equal-time correlations ``C_O(0)`` at the given truncation."""
    spec, ss = cached_steady_state(params, method, n_osc, n_mec, observables, cache, t_ss, dt)
    out = {}
    for name in observables:
        if name == "X_mec":
            out[name] = correlate_target(spec, x_mec(n_mec), 0.0, dt, method, steady=ss).values[0]
        elif name == "P_osc":
            out[name] = correlate_p_osc(spec, 0.0, dt, method, steady=ss).values[0]
        else:
            raise ValueError(f"unknown observable {name!r}; expected one of {OBSERVABLES}")
    return out


def _param_key(p):
    return (p.kappa, p.gamma, p.omega_m, p.n_th, p.g_lin, p.g_quad)


@dataclass
class TruncationResult:
    n_osc: int
    n_mec: int
    history: list

    def __iter__(self):
        return iter((self.n_osc, self.n_mec))


def auto_truncation(params, method, observables=OBSERVABLES, tol=1e-4, start=3, step=3, cap=60,
                    cache=None, t_ss=T_SS, dt=DT):
    """Smallest ``(N_osc, N_mec)`` on the search path at which ``C_O(0)`` is converged.

    ``d_osc`` and ``d_mec`` are the largest relative changes of ``C_O(0)`` over
    the observables under ``N_osc -> N_osc + step`` and ``N_mec -> N_mec + step``.
    Starting from ``(start, start)``, ``N_mec`` is raised until ``d_mec < tol``,
    then ``N_osc`` until ``d_osc < tol``; the two sweeps repeat until a point
    passes both tests.  History rows hold ``nan`` for a change not evaluated
    at that point.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    cache = cache if cache is not None else SteadyStateCache()
    rows = {}

    def change(n_osc, n_mec, axis):
        base = c0_values(params, method, n_osc, n_mec, observables, cache, t_ss, dt)
        up = (c0_values(params, method, n_osc + step, n_mec, observables, cache, t_ss, dt) if axis == 0
              else c0_values(params, method, n_osc, n_mec + step, observables, cache, t_ss, dt))
        d = max(abs(base[o] - up[o]) / abs(base[o]) for o in observables)
        rows.setdefault((n_osc, n_mec), [np.nan, np.nan])[axis] = float(d)
        return d

    def result(n_osc, n_mec):
        history = [(no, nm, d[0], d[1]) for (no, nm), d in rows.items()]
        return TruncationResult(n_osc, n_mec, history)

    n_osc = n_mec = start
    while True:
        while change(n_osc, n_mec, 1) >= tol:
            n_mec += step
            if n_mec > cap:
                raise NoConvergenceError(f"N_mec exceeded the cap {cap} at N_osc = {n_osc}")
        while change(n_osc, n_mec, 0) >= tol:
            n_osc += step
            if n_osc > cap:
                raise NoConvergenceError(f"N_osc exceeded the cap {cap} at N_mec = {n_mec}")
        if change(n_osc, n_mec, 1) < tol:
            return result(n_osc, n_mec)
