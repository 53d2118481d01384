"""
Linearized optomechanical models.

The cavity field is the damped oscillator mode; the mechanical resonator is
the target system, truncated at ``n_mec`` levels, with thermal damping
``gamma (1 + n_th) D[b] + gamma n_th D[b^dag]`` and frequency ``omega_m``.
"""
from dataclasses import dataclass

import numpy as np

from .lindblad import ModelSpec
from .operators import build_ladder


@dataclass(frozen=True)
class OptomechParams:
    kappa: float = 1.0
    gamma: float = 0.1
    omega_m: float = 1.0
    n_th: float = 1.0
    g_lin: float = 0.25
    g_quad: float = 0.0
    n_mec: int = 30

    def __post_init__(self):
        for name in ("kappa", "gamma", "omega_m", "n_th"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.n_mec < 2:
            raise ValueError("n_mec must be at least 2")

    def with_(self, **kw):
        args = dict(self.__dict__)
        args.update(kw)
        return OptomechParams(**args)


def _mechanics(p):
    b, bd = build_ladder(p.n_mec)
    ham = p.omega_m * (bd @ b)
    diss = ((p.gamma * (1 + p.n_th), b), (p.gamma * p.n_th, bd))
    return b, bd, ham, diss


def build_linear_model(p):
    b, bd, ham, diss = _mechanics(p)
    return ModelSpec(kappa=p.kappa, coupling=p.g_lin * (b + bd), epsilon=0.0,
                     target_hamiltonian=ham, target_dissipators=diss)


def build_quadratic_model(p):
    b, bd, ham, diss = _mechanics(p)
    v = p.g_lin * (b + bd) + p.g_quad * (2 * bd @ b + b @ b + bd @ bd)
    return ModelSpec(kappa=p.kappa, coupling=v, epsilon=0.0,
                     target_hamiltonian=ham, target_dissipators=diss)


def build_model(p):
    return build_quadratic_model(p) if p.g_quad else build_linear_model(p)


def thermal_state(omega_m, n_th, n_mec):
    """Gibbs state of the truncated resonator with ``exp(beta omega_m) = 1 + 1/n_th``."""
    rho = np.zeros((n_mec, n_mec), dtype=complex)
    if n_th <= 0:
        rho[0, 0] = 1.0
        return rho
    # populations proportional to exp(-beta omega_m k) = (n_th / (1 + n_th))^k
    ratio = n_th / (1.0 + n_th)
    pops = ratio ** np.arange(n_mec)
    rho[np.diag_indices(n_mec)] = pops / pops.sum()
    return rho


def x_mec(n_mec):
    b, bd = build_ladder(n_mec)
    return (b + bd) / np.sqrt(2)
