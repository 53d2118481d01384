import os
import subprocess
import sys

import numpy as np
import pytest

from momex import _accel, kernels
from momex.operators import TargetOperator
from momex.optomech import OptomechParams, build_quadratic_model
from momex.moments import chi_generator
from momex.lindblad import rho_generator

needs_numba = pytest.mark.skipif(not _accel.USE_NUMBA, reason="numba kernels disabled")


@needs_numba
@pytest.mark.parametrize("side", ["band_left", "band_right"])
def test_band_kernels_agree(rng, side):
    nb_fn, np_fn = kernels.IMPLEMENTATIONS[side]
    for d in (1, 4, 9):
        m = np.diag(rng.normal(size=d - 1), 1) + np.diag(rng.normal(size=d) + 1j) + np.diag(rng.normal(size=d - 1), -1)
        op = TargetOperator(m)
        x = rng.normal(size=(6, d, d)) + 1j * rng.normal(size=(6, d, d))
        a, b = np.zeros_like(x), np.zeros_like(x)
        nb_fn(op.offsets, op.diags, x, a, 0.7 - 0.2j)
        np_fn(op.matrix, x, b, 0.7 - 0.2j)
        assert np.abs(a - b).max() < 1e-13


@needs_numba
def test_stencil_kernels_agree(rng):
    nb_fn, np_fn = kernels.IMPLEMENTATIONS["stencil"]
    f = rng.normal(size=(50, 4)) + 1j * rng.normal(size=(50, 4))
    c1, c2 = rng.normal(size=6), rng.normal(size=6)
    outs = []
    for fn in (nb_fn, np_fn):
        d1, d2 = np.empty_like(f), np.empty_like(f)
        fn(f, c1, c2, 10.0, 100.0, d1, d2)
        outs.append((d1, d2))
    for u, v in zip(*outs):
        assert np.abs(u - v).max() < 1e-11 * np.abs(v).max()


@needs_numba
@pytest.mark.parametrize("hermitian", [False, True])
def test_hierarchy_kernel_agrees_with_numpy(rng, hermitian):
    spec = build_quadratic_model(OptomechParams(n_mec=6, g_quad=0.025)).with_(epsilon=0.3)
    for gen in (chi_generator(spec, 5, 3), rho_generator(spec, 4)):
        x = rng.normal(size=gen.shape) + 1j * rng.normal(size=gen.shape)
        if hermitian and gen.shape[0] == gen.shape[1]:
            x = x + np.conj(x.transpose(1, 0, 3, 2))
        elif hermitian:
            continue
        fast = gen.apply(x, use_numba=True, hermitian=hermitian)
        slow = gen.apply(x, use_numba=False)
        assert np.abs(fast - slow).max() < 1e-12


def test_env_flag_disables_numba():
    code = "from momex import _accel, kernels, blocks; print(_accel.USE_NUMBA, kernels.USE_NUMBA, blocks.USE_NUMBA)"
    for value, want in (("1", "False False False"), ("0", f"{_accel.HAVE_NUMBA} " * 2 + f"{_accel.HAVE_NUMBA}")):
        env = dict(os.environ, MOMEX_DISABLE_NUMBA=value)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.split() == want.split()
