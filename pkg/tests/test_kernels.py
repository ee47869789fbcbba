import os
import subprocess
import sys

import numpy as np
import pytest

from dlab import kernels

needs_both = pytest.mark.skipif(len(kernels.available_backends()) < 2, reason="compiled extension not built")


def case(seed, n=300, K=3, d=4):
    gen = np.random.default_rng(seed)
    w = gen.dirichlet(np.ones(K))
    return gen.normal(0, 3, (n, d)), gen.normal(0, 2, (K, d)), gen.uniform(0.1, 3, (K, d)), w


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.BACKEND in kernels.available_backends()


@needs_both
@pytest.mark.parametrize("seed", range(5))
def test_mixture_eval_backends_agree(seed):
    x, m, v, w = case(seed)
    a = kernels.mixture_eval(x, m, v, w, backend="cython")
    b = kernels.mixture_eval(x, m, v, w, backend="python")
    for u, z in zip(a, b):
        np.testing.assert_allclose(u, z, rtol=1e-12, atol=1e-12)


def test_responsibilities_normalized():
    x, m, v, w = case(9)
    _, resp, _ = kernels.mixture_eval(x, m, v, w)
    np.testing.assert_allclose(resp.sum(axis=1), 1.0, rtol=1e-13)


def test_non_contiguous_inputs():
    x, m, v, w = case(1)
    xf = np.asfortranarray(x)
    np.testing.assert_array_equal(kernels.mixture_eval(xf, m, v, w)[2], kernels.mixture_eval(x, m, v, w)[2])


def test_env_var_forces_python():
    code = "from dlab import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, DLAB_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
