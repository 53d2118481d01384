import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momex.errors import DimensionTooLargeError, DivergenceError, ShapeError
from momex.lindblad import (ModelSpec, evolve_expm, evolve_rho, evolve_rk4, from_matrix, liouvillian_matrix,
                            product_state, reduced_target, rho_generator, rho_rhs, steady_state, to_matrix,
                            trace, vacuum_product)
from momex.operators import build_ladder, dag, pauli
from momex.optomech import OptomechParams, build_linear_model, thermal_state

from .conftest import random_hermitian, random_state


def generic_spec(rng, d, delta=0.0, hermitian=True):
    v = random_hermitian(rng, d)
    if not hermitian:
        v = v + 0.3j * random_hermitian(rng, d) + 0.2 * rng.normal(size=(d, d))
    j = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return ModelSpec(kappa=0.8, coupling=0.4 * v, epsilon=0.7 - 0.3j, delta=delta,
                     target_hamiltonian=random_hermitian(rng, d), target_dissipators=((0.2, j),))


def lindblad_full(spec, rho):
    """The master equation written directly on the full matrix."""
    n = rho.shape[0]
    d = spec.dim
    a, ad = build_ladder(n)
    i_s, i_o = np.eye(d), np.eye(n)
    f = spec.coupling + 1j * spec.epsilon * i_s
    h = (np.kron(i_o, spec.target_hamiltonian) + spec.delta * np.kron(ad @ a, i_s)
         + np.kron(ad, f) + np.kron(a, dag(f)))
    r = to_matrix(rho)
    out = -1j * (h @ r - r @ h)

    def d_(j, rate):
        jd = dag(j)
        return rate * (j @ r @ jd - 0.5 * (jd @ j @ r + r @ jd @ j))
    out += d_(np.kron(a, i_s), spec.kappa)
    for rate, j in spec.target_dissipators:
        out += d_(np.kron(i_o, j), rate)
    return from_matrix(out, d)


def random_block_state(rng, n, d):
    return from_matrix(random_state(rng, n * d), d)


def test_vacuum_stationary_under_pure_loss(backend):
    spec = ModelSpec(kappa=1.3, coupling=np.zeros((2, 2)))
    rho = vacuum_product(random_state(np.random.default_rng(1), 2), 5)
    assert np.abs(rho_rhs(spec, rho)).max() == 0


def test_single_photon_decay_rate(backend):
    spec = ModelSpec(kappa=0.7, coupling=np.zeros((2, 2)))
    rs = random_state(np.random.default_rng(2), 2)
    osc = np.diag([0, 1, 0, 0]).astype(complex)
    dr = rho_rhs(spec, product_state(rs, osc))
    assert np.allclose(dr[0, 0], 0.7 * rs)
    assert np.allclose(dr[1, 1], -0.7 * rs)


@pytest.mark.parametrize("d,n,delta,herm", [(2, 4, 0.0, True), (3, 6, 0.0, True), (2, 5, 0.37, False),
                                            (3, 3, -1.1, False)])
def test_block_recursion_matches_full_matrix(rng, backend, d, n, delta, herm):
    spec = generic_spec(rng, d, delta, herm)
    rho = random_block_state(rng, n, d)
    got = rho_rhs(spec, rho)
    assert np.abs(got - lindblad_full(spec, rho)).max() < 1e-12
    vec = liouvillian_matrix(spec, n) @ to_matrix(rho).reshape(-1, order="F")
    assert np.abs(from_matrix(vec.reshape(n * d, n * d, order="F"), d) - got).max() < 1e-12
    assert np.abs(rho_generator(spec, n).to_dense() @ rho.reshape(-1) - got.reshape(-1)).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6), d=st.integers(1, 3))
def test_trace_and_hermiticity_preserved(seed, n, d):
    rng = np.random.default_rng(seed)
    spec = generic_spec(rng, d, delta=rng.normal(), hermitian=bool(seed % 2))
    rho = random_block_state(rng, n, d)
    dr = rho_rhs(spec, rho)
    assert abs(trace(dr)) < 1e-12
    m = to_matrix(dr)
    assert np.abs(m - dag(m)).max() < 1e-12
    assert np.abs(rho_generator(spec, n).apply(rho, hermitian=True) - dr).max() < 1e-12


def test_shape_errors():
    spec = ModelSpec(kappa=1, coupling=np.eye(2))
    with pytest.raises(ShapeError):
        rho_rhs(spec, np.zeros((3, 3, 3, 3)))
    with pytest.raises(ShapeError):
        rho_generator(spec, 3).apply(np.zeros((3, 2, 2, 2)))
    with pytest.raises(ShapeError):
        ModelSpec(kappa=1, coupling=np.eye(2), target_hamiltonian=np.eye(3))
    with pytest.raises(ValueError):
        ModelSpec(kappa=-1, coupling=np.eye(2))


def test_main_text_flag():
    sx = pauli()[0]
    assert ModelSpec(kappa=1, coupling=sx).main_text
    assert not ModelSpec(kappa=1, coupling=sx, delta=0.1).main_text
    assert not ModelSpec(kappa=1, coupling=np.array([[0, 1], [0, 0]])).main_text


def test_rk4_zero_rhs_and_scalar_decay():
    y0 = np.array([1.0 + 2j, -3.0])
    assert np.array_equal(evolve_rk4(lambda y: 0 * y, y0, 0.1, 10).final, y0)
    tr = evolve_rk4(lambda y: -y, np.array([1.0]), 0.02, 100)
    assert abs(tr.final[0] - np.exp(-2)) < 1e-9


def test_rk4_order_four():
    spec = ModelSpec(kappa=1.0, coupling=np.zeros((1, 1)))
    rho0 = product_state(np.eye(1), np.diag([0, 1.0, 0]))
    errs = []
    for dt in (0.2, 0.1, 0.05):
        fin = evolve_rk4(rho_generator(spec, 3), rho0, dt, int(round(2 / dt))).final
        errs.append(abs(fin[1, 1, 0, 0] - np.exp(-2)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 14) & (ratios < 18))


def test_rk4_pure_loss_population():
    spec = ModelSpec(kappa=0.5, coupling=np.zeros((1, 1)))
    rho0 = product_state(np.eye(1), np.diag([0, 1.0, 0, 0]))
    tr = evolve_rho(spec, rho0, 0.01, 400, sample_every=100, observe=lambda y: y[1, 1, 0, 0].real)
    assert np.allclose(tr.samples, np.exp(-0.5 * tr.times), atol=1e-9)
    assert tr.trace_drift < 1e-12


def test_rk4_divergence_carries_step():
    with pytest.raises(DivergenceError) as info, np.errstate(all="ignore"):
        evolve_rk4(lambda y: 50 * y * y, np.array([1.0]), 0.1, 100)
    assert info.value.step >= 1
    with pytest.raises(DivergenceError):
        evolve_rk4(lambda y: y, np.array([1.0]), 0.1, 100, bound=10)


def test_rk4_rejects_bad_step():
    with pytest.raises(ValueError):
        evolve_rk4(lambda y: y, np.zeros(1), 0.0, 1)


def test_expm_examples(rng):
    spec = generic_spec(rng, 2)
    rho0 = random_block_state(rng, 4, 2)
    assert np.allclose(evolve_expm(spec, rho0, 0.0), rho0, atol=1e-15)
    ref = evolve_rk4(rho_generator(spec, 4), rho0, 1e-3, 1000).final
    assert np.abs(evolve_expm(spec, rho0, 1.0) - ref).max() < 1e-8
    loss = ModelSpec(kappa=2.0, coupling=np.zeros((1, 1)))
    r1 = evolve_expm(loss, product_state(np.eye(1), np.diag([0, 1.0, 0])), 0.5)
    assert r1[1, 1, 0, 0].real == pytest.approx(np.exp(-1), abs=1e-14)


def test_expm_guard():
    spec = ModelSpec(kappa=1, coupling=np.eye(2))
    with pytest.raises(DimensionTooLargeError):
        evolve_expm(spec, vacuum_product(np.eye(2) / 2, 40), 1.0)


def test_steady_state_pure_loss():
    spec = ModelSpec(kappa=1.0, coupling=np.zeros((2, 2)))
    rs = random_state(np.random.default_rng(5), 2)
    rho0 = product_state(rs, np.diag([0.2, 0.5, 0.3]).astype(complex))
    ss = steady_state(spec, rho0)
    assert np.abs(ss.state - vacuum_product(rs, 3)).max() < 1e-10
    assert ss.residual < 1e-10


def test_steady_state_thermal_mechanics():
    p = OptomechParams(g_lin=0.0, n_mec=30)
    spec = build_linear_model(p)
    rho0 = vacuum_product(np.diag([1.0] + [0.0] * 29), 1)
    ss = steady_state(spec, rho0, t_ss=300.0, dt=0.05)
    b, bd = build_ladder(30)
    assert abs(np.trace(bd @ b @ reduced_target(ss.state)) - np.trace(bd @ b @ thermal_state(1, 1, 30))) < 1e-8
    assert np.trace(bd @ b @ reduced_target(ss.state)).real == pytest.approx(1.0, abs=1e-7)


@pytest.mark.slow
def test_steady_state_residual_linear_optomech():
    # measured ~1e-4 at t_ss = 50: the slowest mode relaxes at the mechanical rate gamma = 0.1
    p = OptomechParams(n_mec=16)
    spec = build_linear_model(p)
    ss = steady_state(spec, vacuum_product(thermal_state(1, 1, 16), 8))
    assert ss.residual < 1e-6
