import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from scipy.sparse.linalg import expm_multiply

from momex.errors import DimensionTooLargeError, RangeError, UnsupportedGeneratorError
from momex.experiments import initial_state, two_level_model
from momex.lindblad import ModelSpec, liouvillian_matrix, reduced_target, rho_generator, to_matrix, vacuum_product
from momex.operators import bloch_state, dag, pauli
from momex.oracle import (OracleSpec, eig_condition_liouvillian, eig_condition_liouvillian_numeric,
                          eig_condition_mbar, eig_condition_mbar_numeric, exact_rho_s, expm_condition_estimate,
                          liouvillian_eigenvalues, liouvillian_spectrum, mbar_eigenvalues, mbar_pair_generator,
                          mbar_spectrum)

from .conftest import random_hermitian, random_state


def test_initial_value(rng):
    spec = two_level_model(2.0, 1.0)
    r0 = random_state(rng, 2)
    assert np.abs(exact_rho_s(spec, r0, 0.0) - r0).max() < 1e-15


def test_long_time_limit():
    r = np.array([0.3, -0.5, 0.6])
    out = exact_rho_s(two_level_model(1.0, 1.0), bloch_state(r), 100.0)
    assert np.abs(out - bloch_state([r[0], 0, 0])).max() < 1e-14


def test_against_conventional_solver():
    """(u, g) = (2, 1): sparse exponential of the block Liouvillian on 70 Fock levels."""
    spec = two_level_model(2.0, 1.0)
    r0 = initial_state("B")
    ts = np.linspace(0, 10, 11)
    gen = rho_generator(spec, 70)
    vecs = expm_multiply(gen.to_sparse(), vacuum_product(r0, 70).reshape(-1), start=0, stop=10, num=11,
                         endpoint=True)
    exact = exact_rho_s(spec, r0, ts)
    for v, e in zip(vecs, exact):
        assert np.abs(reduced_target(v.reshape(gen.shape)) - e).max() < 1e-12


def test_rejects_dynamic_target():
    spec = ModelSpec(kappa=1, coupling=pauli()[0], target_hamiltonian=pauli()[2])
    with pytest.raises(UnsupportedGeneratorError):
        exact_rho_s(spec, np.eye(2) / 2, 1.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 4), t=st.floats(0, 20))
def test_trace_hermiticity_and_diagonal_modes(seed, d, t):
    rng = np.random.default_rng(seed)
    spec = ModelSpec(kappa=0.5 + rng.random(), coupling=random_hermitian(rng, d), epsilon=rng.normal())
    r0 = random_state(rng, d)
    r = exact_rho_s(spec, r0, t)
    assert abs(np.trace(r) - 1) < 1e-12
    assert np.abs(r - dag(r)).max() < 1e-12
    u = OracleSpec.from_model(spec).eig.eigenvectors
    assert np.allclose(np.diag(dag(u) @ r @ u), np.diag(dag(u) @ r0 @ u), atol=1e-12)


def test_off_diagonal_decay_monotone():
    spec = two_level_model(1.5, 0.7)
    ts = np.linspace(2.0, 30.0, 300)
    u = OracleSpec.from_model(spec).eig.eigenvectors
    r = exact_rho_s(spec, initial_state("B"), ts)
    off = np.abs((dag(u)[None] @ r @ u[None])[:, 0, 1])
    assert np.all(np.diff(off) <= 1e-15)


def test_mbar_eigenvalues():
    spec = ModelSpec(kappa=1.0, coupling=np.diag([-1.0, 0.5, 2.0]), epsilon=1.2)
    lam = mbar_eigenvalues(spec, 8)
    assert np.all(lam.real <= 0)
    zero = np.argwhere(np.abs(lam) < 1e-14)
    assert sorted(map(tuple, zero)) == [(0, 0, 0), (1, 1, 0), (2, 2, 0)]


def test_mbar_eigenvectors_biorthonormal():
    spec = two_level_model(0.5, 0.4)
    sp_ = mbar_spectrum(spec, 6)
    for i, j in ((0, 0), (0, 1), (1, 0)):
        rights = [sp_.right(i, j, m, 60) for m in range(4)]
        lefts = [sp_.left(i, j, m, 60) for m in range(4)]
        gram = np.array([[np.vdot(l, r) for r in rights] for l in lefts])
        assert np.abs(gram - np.eye(4)).max() < 1e-8
        mat = mbar_pair_generator(1.0, 0.5, OracleSpec.from_model(spec).g_diff()[i, j], 60)
        for m, r in enumerate(rights):
            assert np.abs(mat @ r - sp_.eigenvalues[i, j, m] * r).max() < 1e-8


def test_mbar_eigenvector_declines_out_of_range():
    sp_ = mbar_spectrum(two_level_model(4.0, 5.0), 2)
    with pytest.raises(RangeError):
        sp_.right(0, 1, 0, 40)


def test_liouvillian_eigenvalues_match_dense():
    spec = two_level_model(0.3, 0.4)
    lam = liouvillian_eigenvalues(spec, 3)
    dense = np.linalg.eigvals(liouvillian_matrix(spec, 24))
    for i in range(2):
        for j in range(2):
            for m in range(3):
                for n in range(3 - m):
                    assert np.min(np.abs(dense - lam[i, j, m, n])) < 1e-8
    flat = lam.reshape(-1)
    assert np.count_nonzero(np.abs(flat) < 1e-14) == 2
    assert lam[0, 0, 0, 0] == 0 and lam[1, 1, 0, 0] == 0


def test_liouvillian_zero_modes():
    spec = two_level_model(0.4, 0.3)
    n = 24
    ls = liouvillian_spectrum(spec, 2)
    lv = liouvillian_matrix(spec, n)
    for i in range(2):
        right = to_matrix(ls.zero_mode_right(i, n)).reshape(-1, order="F")
        left = to_matrix(ls.zero_mode_left(i, n)).reshape(-1, order="F")
        assert np.abs(lv @ right).max() < 1e-8
        assert np.abs(left.conj() @ lv).max() < 1e-8


def test_spectral_long_time_limit_matches_closed_form(rng):
    spec = two_level_model(0.4, 0.3)
    n = 24
    ls = liouvillian_spectrum(spec, 2)
    r0 = random_state(rng, 2)
    rho0 = vacuum_product(r0, n)
    limit = sum(np.einsum("mnij,mnij->", ls.zero_mode_left(i, n).conj(), rho0) * ls.zero_mode_right(i, n)
                for i in range(2))
    assert np.abs(reduced_target(limit) - exact_rho_s(spec, r0, 300.0)).max() < 1e-10


def test_eig_condition_mbar():
    assert eig_condition_mbar(OracleSpec(1.0, 0.0, None, 2)) == 1.0
    assert eig_condition_mbar(OracleSpec(1.0, 2.0, None, 2)) == pytest.approx(np.exp(32.0), rel=1e-15)
    assert eig_condition_mbar(two_level_model(2.0, 1.0)) == pytest.approx(7.896296018268069e13, rel=1e-14)


@pytest.mark.parametrize("u", [0.25, 0.75, 1.0, 1.5])
def test_eig_condition_mbar_numeric(u):
    assert eig_condition_mbar_numeric(1.0, u, 200) == pytest.approx(np.exp(8 * u**2), rel=1e-2)


def test_eig_condition_mbar_numeric_declines():
    with pytest.raises(RangeError):
        eig_condition_mbar_numeric(1.0, 2.0)


def test_eig_condition_liouvillian():
    assert eig_condition_liouvillian(1) == 1.0
    assert eig_condition_liouvillian(100) == 10.0
    with pytest.raises(ValueError):
        eig_condition_liouvillian(0)
    for n in (10, 25, 40):
        assert eig_condition_liouvillian_numeric(1.0, 0.3, 0.2, n) == pytest.approx(np.sqrt(n), rel=1e-2)


def _check_estimate(q):
    # power iteration approaches the largest Frechet gain from below
    ref = scipy.linalg.expm_cond(q)
    est = expm_condition_estimate(q, 1.0)
    assert ref * (1 - 1e-4) <= est <= ref * (1 + 1e-10)


def test_expm_condition_matches_scipy(rng):
    for _ in range(5):
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        for t in (0.1, 1.0):
            _check_estimate(a * t)
    m = mbar_pair_generator(1.0, 1.0, 0.0, 20)
    for t in (1.0, 5.0, 20.0):
        _check_estimate(m * t)


def test_expm_condition_normal_matrix_flat():
    q = np.diag(-np.arange(10.0))
    c = np.array([expm_condition_estimate(q, t) for t in (1.0, 10.0, 30.0)])
    # for a normal matrix the condition number is at most about ||Q t||
    assert np.all(c <= np.array([1.0, 10.0, 30.0]) * np.linalg.norm(q) * 1.01)


def test_expm_condition_edge_cases():
    assert expm_condition_estimate(np.eye(3), 0.0) == 0.0
    with pytest.raises(DimensionTooLargeError):
        expm_condition_estimate(np.eye(121), 1.0)
