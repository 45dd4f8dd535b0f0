import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toppmpc import _backend, _pykernel
from toppmpc.model import NOMINAL_STATE, ModelParams

P = ModelParams().as_array()

try:
    from toppmpc import _kernel
except ImportError:  # pragma: no cover
    _kernel = None

needs_ext = pytest.mark.skipif(_kernel is None, reason="compiled kernel not built")


@needs_ext
def test_auto_selects_compiled():
    assert _backend.BACKEND == "compiled"


@needs_ext
@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 3.0), st.integers(1, 400), st.floats(1e-4, 2e-3),
       st.floats(50.0, 600.0), st.floats(0.0, 2e7))
def test_scalar_kernels_bitwise_equal(u, n, h, G, V):
    x0 = np.array([G, 10.0, 300.0, 0.5, V])
    xa, xb = x0.copy(), x0.copy()
    ra = _kernel.advance(xa, u, n, h, P, 1440.0)
    rb = _pykernel.advance(xb, u, n, h, P, 1440.0)
    assert ra == rb
    assert xa.tobytes() == xb.tobytes()


@needs_ext
@pytest.mark.parametrize("m", [1, 7, 8, 13, 31])
def test_batch_kernels_bitwise_equal(m):
    us = np.linspace(0.0, 3.0, m)
    x0 = NOMINAL_STATE.as_array()
    a = _kernel.advance_batch(x0, us, 2000, 5e-4, P, 1440.0)
    b = _pykernel.advance_batch(x0, us, 2000, 5e-4, P, 1440.0)
    for u, v in zip(a, b):
        assert u.tobytes() == v.tobytes()


@needs_ext
def test_batch_lane_equals_scalar():
    us = np.array([0.0, 0.4, 1.1, 3.0])
    x0 = NOMINAL_STATE.as_array()
    status, g2, xs = _kernel.advance_batch(x0, us, 4000, 5e-4, P, 1440.0)
    for i, u in enumerate(us):
        x = x0.copy()
        st_, acc, _, _ = _kernel.advance(x, u, 4000, 5e-4, P, 1440.0)
        assert (st_, acc) == (status[i], g2[i])
        assert x.tobytes() == xs[i].tobytes()


@pytest.mark.parametrize("mod", [_pykernel] + ([_kernel] if _kernel else []))
def test_blowup_is_reported(mod):
    x = NOMINAL_STATE.as_array()
    status, _, _, fail = mod.advance(x, 0.0, 50, 0.01, P, 1440.0)
    assert status in (1, 2) and 0 <= fail < 50


def test_python_backend_forced_by_env():
    env = dict(os.environ, TOPPMPC_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import toppmpc; print(toppmpc.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
