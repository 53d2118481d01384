"""
Experiment drivers shared by the command line and the acceptance tests:
accuracy sweeps against the closed-form two-level solution, exponential
condition numbers, and step timings of the optomechanical solvers.
"""
import time
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .lindblad import ModelSpec, evolve_rk4, rho_generator, vacuum_product
from .moments import chi_generator, chi_rec_generator, dof_chi, dof_rho, evolve_dense, vacuum_chi
from .operators import bloch_state, frobenius_distance, pauli
from .optomech import build_model, thermal_state
from .oracle import exact_rho_s, expm_condition_estimate, mbar_pair_generator
from .position import PositionGenerator, edge_ratio, gaussian_initial_field, reduced_density_position, stable_step

INITIAL_STATES = {
    "A": (0.0, 0.0, -1.0),
    "B": tuple(np.full(3, 1 / np.sqrt(3))),
}


def two_level_model(u, g, kappa=1.0):
    """Static two-level target with ``V = g sigma_x`` and drive ``epsilon = u``."""
    sx = pauli()[0]
    return ModelSpec(kappa=kappa, coupling=g * sx, epsilon=u)


def initial_state(label):
    """``"A"``, ``"B"`` or an explicit Bloch vector."""
    if isinstance(label, str):
        try:
            return bloch_state(INITIAL_STATES[label])
        except KeyError:
            raise ValueError(f"unknown initial state {label!r}") from None
    return bloch_state(label)


@dataclass
class AccuracyRun:
    times: np.ndarray
    errors: np.ndarray
    trace_dev: np.ndarray
    min_eig: np.ndarray
    diverged_at: float = None
    edge: float = None
    dof: int = 0

    @property
    def diverged(self):
        return self.diverged_at is not None

    def floor(self, t_from=5.0):
        """Median error over ``t >= t_from``; the long-time level."""
        late = self.times >= t_from - 1e-12
        if not late.any():
            return float("nan")
        return float(np.median(self.errors[late]))

    def positivity_violated(self, tol=1e-8):
        return bool(np.nanmin(self.min_eig) < -tol)


def _diagnose(spec, rho0, times, rhos, bound, **extra):
    exact = exact_rho_s(spec, rho0, times)
    errs, trd, mins = [], [], []
    diverged = None
    for t, r, e in zip(times, rhos, exact):
        if not np.all(np.isfinite(r)):
            diverged = t if diverged is None else diverged
            errs.append(np.inf)
            trd.append(np.nan)
            mins.append(np.nan)
            continue
        errs.append(frobenius_distance(r, e))
        trd.append(abs(np.trace(r) - 1))
        mins.append(np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min())
        if diverged is None and np.linalg.norm(r) > bound:
            diverged = t
    return AccuracyRun(np.asarray(times), np.array(errs), np.array(trd), np.array(mins), diverged, **extra)


def accuracy_fock(u, g, n_tr, rho0, times, integrator="expm", mode="step", kappa=1.0, dt=None, bound=10.0):
    """Rectangular moment solver in the Fock basis against the closed form.

    A valid density matrix has Frobenius norm at most 1; a reduced state whose
    norm exceeds ``bound`` counts as diverged.
    """
    spec = two_level_model(u, g, kappa)
    gen = chi_rec_generator(spec, n_tr)
    x0 = vacuum_chi(rho0, n_tr).blocks
    times = np.asarray(times, dtype=float)
    if integrator == "expm":
        rhos = [x[0, 0] for x in evolve_dense(gen, x0, times, mode=mode)]
    elif integrator == "rk4":
        rhos = _rk4_samples(gen, x0, times, dt, lambda z: z[0, 0].copy())
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    return _diagnose(spec, rho0, times, rhos, bound, dof=x0.size)


def _rk4_samples(gen, x0, times, dt, observe):
    gaps = np.diff(times)
    if times[0] != 0 or (gaps.size and not np.allclose(gaps, gaps[0], rtol=1e-12)):
        raise ValueError("rk4 sampling needs equally spaced times starting at 0")
    if dt is None:
        raise ValueError("rk4 needs a step dt")
    samples = [observe(x0)]
    if not gaps.size:
        return samples
    per = max(1, int(round(gaps[0] / dt)))
    h = gaps[0] / per
    y = np.array(x0, dtype=complex)
    # advance one sampling interval at a time so a blow-up keeps the earlier samples
    for k in range(gaps.size):
        try:
            y = evolve_rk4(gen, y, h, per, t0=times[k]).final
        except DivergenceError:
            nan = np.full_like(samples[0], np.nan)
            return samples + [nan] * (len(times) - len(samples))
        samples.append(observe(y))
    return samples


def accuracy_position(u, g, grid, rho0, times, integrator="expm", mode="step", kappa=1.0, dt=None, bound=10.0):
    """Position-basis rectangular solver against the closed form."""
    spec = two_level_model(u, g, kappa)
    gen = PositionGenerator(spec, grid)
    f0 = gaussian_initial_field(rho0, grid)
    times = np.asarray(times, dtype=float)
    last = {}

    def observe(z):
        last["field"] = z
        return reduced_density_position(type(f0)(grid, z))

    if integrator == "expm":
        fields = evolve_dense(gen, f0.values, times, mode=mode)
        rhos = [observe(v) for v in fields]
    elif integrator == "rk4":
        h = dt if dt is not None else stable_step(grid, kappa)
        rhos = _rk4_samples(gen, f0.values, times, h, lambda z: observe(z.copy()))
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    edge = edge_ratio(type(f0)(grid, last["field"])) if "field" in last else None
    return _diagnose(spec, rho0, times, rhos, bound, edge=edge, dof=f0.values.size)


def condition_curve(u, times, n_tr=40, kappa=1.0):
    """Exponential condition number of the diagonal-sector generator ``M_aa^u t``."""
    m = mbar_pair_generator(kappa, u, 0.0, n_tr)
    return np.array([expm_condition_estimate(m, t) for t in times])


@dataclass
class BenchRow:
    method: str
    n_osc: int
    n_mec: int
    dof: int
    seconds: float


def _time_steps(gen, x0, steps, dt, repeats):
    evolve_rk4(gen, x0, dt, 1)  # compile and warm caches
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        evolve_rk4(gen, x0, dt, steps)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench_optomech(params, n_rho, n_chi, steps=100, dt=0.02, repeats=5):
    """Wall time of ``steps`` RK4 steps for the four solver variants.

    Rows: the density matrix at ``n_rho``, the rectangular moments at ``n_chi``,
    and the moment columns ``n <= 2`` at ``n_chi`` and at ``n_rho``.
    """
    rows = []

    def model(n_mec):
        p = params.with_(n_mec=n_mec)
        return build_model(p), thermal_state(p.omega_m, p.n_th, n_mec)

    spec, r0 = model(n_rho[1])
    rows.append(BenchRow("rho", *n_rho, dof_rho(n_rho[0], n_rho[1]),
                         _time_steps(rho_generator(spec, n_rho[0]), vacuum_product(r0, n_rho[0]), steps, dt, repeats)))
    spec, r0 = model(n_chi[1])
    rows.append(BenchRow("chi_rec", *n_chi, dof_chi(n_chi[0], n_chi[1]),
                         _time_steps(chi_rec_generator(spec, n_chi[0]), vacuum_chi(r0, n_chi[0]).blocks,
                                     steps, dt, repeats)))
    for label, (no, nm) in (("chi_n2", n_chi), ("chi_n2_at_rho", n_rho)):
        spec, r0 = model(nm)
        rows.append(BenchRow(label, no, nm, dof_chi(no, nm, 3),
                             _time_steps(chi_generator(spec, no, 3), vacuum_chi(r0, no, 3).blocks,
                                         steps, dt, repeats)))
    return rows
